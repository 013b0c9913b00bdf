#pragma once

// Stationary Gaussons of the 2D rotating problem. With A = Diag(a1, a2) and
// B = offdiag(beta) in the principal frame of the trap, stationarity reduces to
//
//   r1 = (a1 + a2) beta - (a1 - a2) Omega
//   r2 = beta^2 - a1^2 + w1^2 + 2 b a1 + 2 beta Omega
//   r3 = beta^2 - a2^2 + w2^2 + 2 b a2 - 2 beta Omega
//
// The root finder eliminates beta = Omega (a1 - a2) / (a1 + a2) and works on
// the remaining two equations in (a1, a2).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gausson/core.hpp"
#include "gausson/csv.hpp"

namespace gausson {

enum class Stability { Stable, Unstable, Marginal };

inline std::string to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "Stable";
    case Stability::Unstable: return "Unstable";
    case Stability::Marginal: return "Marginal";
  }
  return "?";
}

inline std::optional<Stability> parse_stability(const std::string& s) {
  if (s == "Stable") return Stability::Stable;
  if (s == "Unstable") return Stability::Unstable;
  if (s == "Marginal") return Stability::Marginal;
  return std::nullopt;
}

struct StationaryPoint {
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double beta = 0.0;
  /// Signed rotation rate at which the point solves the system.
  double Omega = 0.0;
  double residual = 0.0;
  std::optional<Stability> stability;
  int branch_id = -1;

  GaussonState2 state() const { return stationary_state(alpha1, alpha2, beta); }
};

struct ContinuationSettings {
  double omega_min = 0.0;
  double omega_max = 2.0;
  int n_omega = 801;
  /// Lattice cells per axis for the multi-start search.
  int n_grid = 400;
  double newton_tol = 1e-12;
  int newton_max_iter = 60;
  double dedupe_radius = 1e-6;
  /// Maximum pseudo-arclength step in (a1, a2, Omega).
  double arc_step = 1e-3;
  /// Upper edge of the search box; <= 0 selects 4 max(w2, |b|) + 4.
  double alpha_max = 0.0;

  double resolved_alpha_max(const TrapConfig& c) const {
    return alpha_max > 0.0 ? alpha_max : 4.0 * std::max(c.omega2(), std::abs(c.b())) + 4.0;
  }

  std::vector<double> omega_grid() const {
    std::vector<double> g(static_cast<std::size_t>(n_omega));
    for (int k = 0; k < n_omega; ++k)
      g[k] = n_omega == 1 ? omega_min
                          : omega_min + (omega_max - omega_min) * k / (n_omega - 1.0);
    return g;
  }

  void validate() const {
    if (!(omega_min < omega_max)) throw ConfigError("omega_min must be below omega_max");
    if (n_omega < 2) throw ConfigError("n_omega must be >= 2");
    if (n_grid < 4) throw ConfigError("n_grid must be >= 4");
    if (!(newton_tol > 0.0)) throw ConfigError("newton_tol must be positive");
    if (newton_max_iter < 1) throw ConfigError("newton_max_iter must be positive");
    if (!(dedupe_radius > 0.0)) throw ConfigError("dedupe_radius must be positive");
    if (!(arc_step > 0.0)) throw ConfigError("arc_step must be positive");
  }
};

/// (r1, r2, r3) at signed rotation config.signed_rotation().
inline std::array<double, 3> residual(double alpha1, double alpha2, double beta,
                                      const TrapConfig& config) {
  const double om = config.signed_rotation();
  const double w1sq = config.omega1() * config.omega1();
  const double w2sq = config.omega2() * config.omega2();
  const double b = config.b();
  return {(alpha1 + alpha2) * beta - (alpha1 - alpha2) * om,
          beta * beta - alpha1 * alpha1 + w1sq + 2.0 * b * alpha1 + 2.0 * beta * om,
          beta * beta - alpha2 * alpha2 + w2sq + 2.0 * b * alpha2 - 2.0 * beta * om};
}

inline double max_residual(double alpha1, double alpha2, double beta, const TrapConfig& config) {
  const auto r = residual(alpha1, alpha2, beta, config);
  return std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])});
}

/// The stationarity problem for one 2D trap.
class StationaritySystem {
 public:
  explicit StationaritySystem(TrapConfig config) : config_(std::move(config)) {
    if (config_.dim() != 2) throw ConfigError("stationary analysis is 2D only");
    if (config_.omega1() == config_.omega2()) throw ConfigError("isotropic trap not supported");
  }
  const TrapConfig& config() const { return config_; }
  std::array<double, 3> residual(double a1, double a2, double beta) const {
    return gausson::residual(a1, a2, beta, config_);
  }

 private:
  TrapConfig config_;
};

namespace detail {

/// Two-equation system after eliminating beta, with derivatives in (a1, a2, Omega).
struct Reduced {
  double w1sq;
  double w2sq;
  double b;

  explicit Reduced(const TrapConfig& c)
      : w1sq(c.omega1() * c.omega1()), w2sq(c.omega2() * c.omega2()), b(c.b()) {}

  static double beta(double a1, double a2, double om) { return om * (a1 - a2) / (a1 + a2); }

  Eigen::Vector2d value(double a1, double a2, double om) const {
    const double be = beta(a1, a2, om);
    return {be * be - a1 * a1 + w1sq + 2.0 * b * a1 + 2.0 * be * om,
            be * be - a2 * a2 + w2sq + 2.0 * b * a2 - 2.0 * be * om};
  }

  Eigen::Matrix<double, 2, 3> jacobian(double a1, double a2, double om) const {
    const double s = a1 + a2;
    const double be = beta(a1, a2, om);
    const double db1 = 2.0 * om * a2 / (s * s);
    const double db2 = -2.0 * om * a1 / (s * s);
    const double dbo = (a1 - a2) / s;
    Eigen::Matrix<double, 2, 3> j;
    j(0, 0) = 2.0 * (be + om) * db1 - 2.0 * a1 + 2.0 * b;
    j(0, 1) = 2.0 * (be + om) * db2;
    j(0, 2) = 2.0 * (be + om) * dbo + 2.0 * be;
    j(1, 0) = 2.0 * (be - om) * db1;
    j(1, 1) = 2.0 * (be - om) * db2 - 2.0 * a2 + 2.0 * b;
    j(1, 2) = 2.0 * (be - om) * dbo - 2.0 * be;
    return j;
  }

  double fold_function(double a1, double a2, double om) const {
    return jacobian(a1, a2, om).leftCols<2>().determinant();
  }
};

inline double inf_norm(const Eigen::Vector2d& v) { return v.cwiseAbs().maxCoeff(); }

/// Damped Newton at fixed Omega. Returns the converged (a1, a2) or nothing.
inline std::optional<Eigen::Vector2d> newton_fixed_omega(const Reduced& sys, Eigen::Vector2d x,
                                                         double om, double tol, int max_iter) {
  Eigen::Vector2d f = sys.value(x(0), x(1), om);
  double fn = inf_norm(f);
  for (int it = 0; it < max_iter; ++it) {
    if (!std::isfinite(fn)) return std::nullopt;
    if (fn < tol) return x;
    const Eigen::Matrix2d j = sys.jacobian(x(0), x(1), om).leftCols<2>();
    const Eigen::Vector2d dx = -j.fullPivLu().solve(f);
    if (!dx.allFinite()) return std::nullopt;
    double lambda = 1.0;
    bool accepted = false;
    while (lambda > 1e-6) {
      const Eigen::Vector2d y = x + lambda * dx;
      if (y(0) + y(1) > 0.0) {
        const Eigen::Vector2d fy = sys.value(y(0), y(1), om);
        const double fyn = inf_norm(fy);
        if (fyn < (1.0 - 1e-4 * lambda) * fn || (lambda == 1.0 && fyn < 10.0 * tol)) {
          x = y;
          f = fy;
          fn = fyn;
          accepted = true;
          break;
        }
      }
      lambda *= 0.5;
    }
    if (!accepted) return fn < tol ? std::optional<Eigen::Vector2d>(x) : std::nullopt;
  }
  return fn < tol ? std::optional<Eigen::Vector2d>(x) : std::nullopt;
}

inline std::vector<double> search_nodes(double alpha_max, int n_grid) {
  const double h = alpha_max / n_grid;
  std::vector<double> nodes;
  // Geometric refinement toward a -> 0 where branches leave the physical domain.
  constexpr int kGeometric = 30;
  const double lo = 1e-9;
  for (int i = 0; i < kGeometric; ++i) nodes.push_back(lo * std::pow(h / lo, double(i) / kGeometric));
  for (int i = 1; i <= n_grid; ++i) nodes.push_back(h * i);
  return nodes;
}

inline StationaryPoint make_point(double a1, double a2, double om, const TrapConfig& config) {
  StationaryPoint p;
  p.alpha1 = a1;
  p.alpha2 = a2;
  p.beta = Reduced::beta(a1, a2, om);
  p.Omega = om;
  p.residual = max_residual(a1, a2, p.beta, config.with_rotation(om));
  return p;
}

inline double distance(const StationaryPoint& p, const StationaryPoint& q) {
  return std::max({std::abs(p.alpha1 - q.alpha1), std::abs(p.alpha2 - q.alpha2),
                   std::abs(p.beta - q.beta)});
}

inline void sort_points(std::vector<StationaryPoint>& pts) {
  std::sort(pts.begin(), pts.end(), [](const StationaryPoint& p, const StationaryPoint& q) {
    return p.alpha1 != q.alpha1 ? p.alpha1 < q.alpha1 : p.alpha2 < q.alpha2;
  });
}

}  // namespace detail

/// Closed-form root at Omega = 0: a_i = w_i sqrt(1 + b^2 / w_i^2) + b, beta = 0.
inline StationaryPoint solve_zero_rotation(const TrapConfig& config) {
  if (config.rotation() != 0.0) throw ConfigError("solve_zero_rotation requires Omega = 0");
  const auto alpha = [&](double w) { return w * std::sqrt(1.0 + config.b() * config.b() / (w * w)) + config.b(); };
  StationaryPoint p;
  p.alpha1 = alpha(config.omega1());
  p.alpha2 = alpha(config.omega2());
  p.beta = 0.0;
  p.Omega = 0.0;
  p.residual = max_residual(p.alpha1, p.alpha2, p.beta, config);
  return p;
}

enum class LinearRegion { Below, Above };

/// Closed-form root for b = 0 in the region Omega < w1 (Below) or Omega > w2 (Above).
inline StationaryPoint solve_linear_rotating(const TrapConfig& config, LinearRegion region) {
  if (config.b() != 0.0) throw ConfigError("solve_linear_rotating requires b = 0");
  const double om = config.rotation();
  const double w1 = config.omega1();
  const double w2 = config.omega2();
  if (om >= w1 && om <= w2)
    throw OutsideStabilityRegion("Omega=" + std::to_string(om) +
                                 " lies between omega1 and omega2; no real solution");
  if (region == LinearRegion::Below && om >= w1)
    throw ConfigError("region Below requires Omega < omega1");
  if (region == LinearRegion::Above && om <= w2)
    throw ConfigError("region Above requires Omega > omega2");

  const double o2 = om * om;
  const double d1 = w1 * w1 - o2;
  const double d2 = w2 * w2 - o2;
  const double sign = region == LinearRegion::Below ? 1.0 : -1.0;
  const double num = std::sqrt(w1 * w1 + w2 * w2 + 2.0 * o2 + sign * 2.0 * std::sqrt(d1 * d2));
  const double r21 = std::sqrt(d2 / d1);
  StationaryPoint p;
  p.alpha1 = num / (1.0 + r21);
  p.alpha2 = num / (1.0 + 1.0 / r21);
  p.beta = config.orientation() * om * (1.0 - r21) / (1.0 + r21);
  p.Omega = config.signed_rotation();
  p.residual = max_residual(p.alpha1, p.alpha2, p.beta, config);
  return p;
}

/// Every stationary point with a1, a2 > 0 at the configured Omega.
///
/// Newton is started from each cell of a lattice over (0, alpha_max]^2 in
/// which both reduced equations change sign; converged roots are deduplicated.
inline std::vector<StationaryPoint> find_all_roots(const TrapConfig& config,
                                                   const ContinuationSettings& settings) {
  StationaritySystem system(config);
  const detail::Reduced sys(config);
  const double om = config.rotation();
  const std::vector<double> nodes =
      detail::search_nodes(settings.resolved_alpha_max(config), settings.n_grid);
  const std::size_t m = nodes.size();

  std::vector<double> f1(m * m), f2(m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const Eigen::Vector2d f = sys.value(nodes[i], nodes[j], om);
      f1[i * m + j] = f(0);
      f2[i * m + j] = f(1);
    }

  const auto changes_sign = [m](const std::vector<double>& f, std::size_t i, std::size_t j) {
    const double c[4] = {f[i * m + j], f[(i + 1) * m + j], f[i * m + j + 1], f[(i + 1) * m + j + 1]};
    const auto [lo, hi] = std::minmax_element(c, c + 4);
    return *lo <= 0.0 && *hi >= 0.0;
  };

  std::vector<StationaryPoint> roots;
  const auto consider = [&](const Eigen::Vector2d& x) {
    if (!(x(0) > 0.0 && x(1) > 0.0)) return;
    StationaryPoint p = detail::make_point(x(0), x(1), om, config.with_rotation(om));
    if (!(p.residual < settings.newton_tol)) return;
    for (auto& q : roots)
      if (detail::distance(p, q) < settings.dedupe_radius) {
        if (p.residual < q.residual) q = p;
        return;
      }
    roots.push_back(p);
  };

  for (std::size_t i = 0; i + 1 < m; ++i)
    for (std::size_t j = 0; j + 1 < m; ++j) {
      if (!changes_sign(f1, i, j) || !changes_sign(f2, i, j)) continue;
      const Eigen::Vector2d center(0.5 * (nodes[i] + nodes[i + 1]), 0.5 * (nodes[j] + nodes[j + 1]));
      if (auto x = detail::newton_fixed_omega(sys, center, om, settings.newton_tol,
                                              settings.newton_max_iter))
        consider(*x);
    }

  // Report at the signed rotation: (Omega, beta) -> (-Omega, -beta).
  for (auto& p : roots) {
    p.beta *= config.orientation();
    p.Omega = config.signed_rotation();
  }
  detail::sort_points(roots);
  return roots;
}

// ---------------------------------------------------------------------------
// Branch tracing

enum class TransitionKind { Fold, BoundaryExit, Unresolved };

inline std::string to_string(TransitionKind k) {
  switch (k) {
    case TransitionKind::Fold: return "fold";
    case TransitionKind::BoundaryExit: return "boundary";
    case TransitionKind::Unresolved: return "unresolved";
  }
  return "?";
}

/// A change in the number of coexisting solutions between two grid points.
struct Transition {
  double omega = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  TransitionKind kind = TransitionKind::Unresolved;
  int multiplicity_below = 0;
  int multiplicity_above = 0;
};

struct MultiplicityInterval {
  double lo = 0.0;
  double hi = 0.0;
  /// -1 when no grid point falls inside the interval.
  int multiplicity = -1;
};

struct BranchScan {
  /// The trap with Omega set to zero.
  TrapConfig config;
  std::vector<double> omega_grid;
  /// Ordered by grid index, then branch_id.
  std::vector<StationaryPoint> points;
  /// points[offsets[k] .. offsets[k+1]) lie at omega_grid[k].
  std::vector<std::size_t> offsets;
  std::vector<int> multiplicity;
  std::vector<Transition> transitions;
  int n_branches = 0;

  std::vector<StationaryPoint> at(std::size_t k) const {
    return {points.begin() + static_cast<std::ptrdiff_t>(offsets[k]),
            points.begin() + static_cast<std::ptrdiff_t>(offsets[k + 1])};
  }
};

namespace detail {

enum class ArcEvent { Reached, Fold, Boundary, Failed };

struct ArcResult {
  ArcEvent event = ArcEvent::Failed;
  /// Reached: the point at the target Omega. Fold: the partner at the start Omega.
  Eigen::Vector2d alpha = Eigen::Vector2d::Zero();
  double omega_event = 0.0;
  bool refined = false;
};

inline Eigen::Vector3d arc_tangent(const Reduced& sys, const Eigen::Vector3d& x) {
  const auto j = sys.jacobian(x(0), x(1), x(2));
  Eigen::Vector3d t = j.row(0).transpose().cross(j.row(1).transpose());
  return t / t.norm();
}

/// Newton on [F(y); t.(y - x) - h] = 0. Returns the corrected point and iteration count.
inline std::optional<std::pair<Eigen::Vector3d, int>> arc_correct(const Reduced& sys,
                                                                  const Eigen::Vector3d& x,
                                                                  const Eigen::Vector3d& t, double h,
                                                                  double tol) {
  Eigen::Vector3d y = x + h * t;
  for (int it = 1; it <= 12; ++it) {
    if (y(0) + y(1) <= 0.0) return std::nullopt;
    const Eigen::Vector2d f = sys.value(y(0), y(1), y(2));
    Eigen::Matrix3d j;
    j.topRows<2>() = sys.jacobian(y(0), y(1), y(2));
    j.row(2) = t.transpose();
    Eigen::Vector3d g;
    g << f, t.dot(y - x) - h;
    const Eigen::Vector3d dy = -j.fullPivLu().solve(g);
    if (!dy.allFinite()) return std::nullopt;
    y += dy;
    if (dy.cwiseAbs().maxCoeff() < 1e-13 * (1.0 + y.cwiseAbs().maxCoeff())) {
      const Eigen::Vector2d fy = sys.value(y(0), y(1), y(2));
      if (inf_norm(fy) < tol) return std::make_pair(y, it);
    }
  }
  const Eigen::Vector2d fy = sys.value(y(0), y(1), y(2));
  if (inf_norm(fy) < tol) return std::make_pair(y, 12);
  return std::nullopt;
}

/// Newton on a 3x3 augmented system G(z) = 0 with forward-difference Jacobian rows supplied by `jac`.
template <class G, class J>
std::optional<Eigen::Vector3d> augmented_newton(G&& g, J&& jac, Eigen::Vector3d z) {
  for (int it = 0; it < 40; ++it) {
    const Eigen::Vector3d v = g(z);
    if (!v.allFinite()) return std::nullopt;
    const Eigen::Matrix3d m = jac(z);
    const Eigen::Vector3d dz = -m.fullPivLu().solve(v);
    if (!dz.allFinite()) return std::nullopt;
    z += dz;
    if (dz.cwiseAbs().maxCoeff() < 1e-13 * (1.0 + z.cwiseAbs().maxCoeff()) &&
        g(z).cwiseAbs().maxCoeff() < 1e-9)
      return z;
  }
  return std::nullopt;
}

/// Omega where det(dF/da) = 0 on the branch, seeded between x and y.
inline std::optional<double> locate_fold(const Reduced& sys, const Eigen::Vector3d& x,
                                         const Eigen::Vector3d& y) {
  const auto g = [&](const Eigen::Vector3d& z) {
    const Eigen::Vector2d f = sys.value(z(0), z(1), z(2));
    return Eigen::Vector3d(f(0), f(1), sys.fold_function(z(0), z(1), z(2)));
  };
  const auto jac = [&](const Eigen::Vector3d& z) {
    Eigen::Matrix3d m;
    m.topRows<2>() = sys.jacobian(z(0), z(1), z(2));
    for (int c = 0; c < 3; ++c) {
      const double h = 1e-6 * (1.0 + std::abs(z(c)));
      Eigen::Vector3d zp = z, zm = z;
      zp(c) += h;
      zm(c) -= h;
      m(2, c) = (sys.fold_function(zp(0), zp(1), zp(2)) - sys.fold_function(zm(0), zm(1), zm(2))) /
                (2.0 * h);
    }
    return m;
  };
  const auto z = augmented_newton(g, jac, 0.5 * (x + y));
  if (!z) return std::nullopt;
  const double span = (y - x).norm();
  const double lo = std::min(x(2), y(2)) - span;
  const double hi = std::max(x(2), y(2)) + span;
  if ((*z)(2) < lo - 1e-9 || (*z)(2) > hi + 1e-9) return std::nullopt;
  return (*z)(2);
}

/// Omega where the branch crosses a_idx = 0, seeded from the segment x -> y.
inline std::optional<double> locate_boundary(const Reduced& sys, const Eigen::Vector3d& x,
                                             const Eigen::Vector3d& y, int idx) {
  const double frac = x(idx) / (x(idx) - y(idx));
  const auto g = [&](const Eigen::Vector3d& z) {
    const Eigen::Vector2d f = sys.value(z(0), z(1), z(2));
    return Eigen::Vector3d(f(0), f(1), z(idx));
  };
  const auto jac = [&](const Eigen::Vector3d& z) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    m.topRows<2>() = sys.jacobian(z(0), z(1), z(2));
    m(2, idx) = 1.0;
    return m;
  };
  const auto z = augmented_newton(g, jac, x + frac * (y - x));
  if (!z) return std::nullopt;
  return (*z)(2);
}

/// Pseudo-arclength continuation from (alpha, om_start) toward om_target.
///
/// Stops when the target Omega is reached, when the branch leaves a_i > 0,
/// or, after a fold, when it returns to om_start (the partner root).
inline ArcResult march(const Reduced& sys, const Eigen::Vector2d& alpha, double om_start,
                       double om_target, const ContinuationSettings& settings, double alpha_cap) {
  ArcResult out;
  const double dir = om_target > om_start ? 1.0 : -1.0;
  Eigen::Vector3d x(alpha(0), alpha(1), om_start);
  Eigen::Vector3d t = arc_tangent(sys, x);
  if (t(2) * dir < 0.0) t = -t;
  double h = std::min(settings.arc_step, 0.25 * std::abs(om_target - om_start) + 1e-12);
  bool folded = false;
  constexpr double kMinStep = 1e-13;

  for (int steps = 0; steps < 200000; ++steps) {
    auto corrected = arc_correct(sys, x, t, h, settings.newton_tol * 10.0);
    Eigen::Vector3d tn;
    if (corrected) {
      tn = arc_tangent(sys, corrected->first);
      if (tn.dot(t) < 0.0) tn = -tn;
      // Reject steps that turn sharply; they can jump across tight folds.
      if (tn.dot(t) < 0.97) corrected.reset();
    }
    if (!corrected) {
      h *= 0.5;
      if (h < kMinStep) return out;
      continue;
    }
    const Eigen::Vector3d y = corrected->first;

    for (int idx = 0; idx < 2; ++idx)
      if (y(idx) <= 0.0) {
        out.event = ArcEvent::Boundary;
        const auto om = locate_boundary(sys, x, y, idx);
        out.refined = om.has_value();
        out.omega_event = om.value_or(0.5 * (x(2) + y(2)));
        return out;
      }
    if (y(0) > alpha_cap || y(1) > alpha_cap) return out;

    const double cur_dir = folded ? -dir : dir;
    if (t(2) * cur_dir > 0.0 && tn(2) * cur_dir <= 0.0) {
      if (folded) return out;  // second fold within one grid cell
      folded = true;
      const auto om = locate_fold(sys, x, y);
      out.refined = om.has_value();
      out.omega_event = om.value_or(dir > 0 ? std::max(x(2), y(2)) : std::min(x(2), y(2)));
    }

    const double target = folded ? om_start : om_target;
    const double tdir = folded ? -dir : dir;
    if ((y(2) - target) * tdir >= 0.0) {
      const double frac = (target - x(2)) / (y(2) - x(2));
      const Eigen::Vector3d seed = x + frac * (y - x);
      const auto a = newton_fixed_omega(sys, seed.head<2>(), target, settings.newton_tol,
                                        settings.newton_max_iter);
      if (!a || (*a)(0) <= 0.0 || (*a)(1) <= 0.0) return out;
      out.alpha = *a;
      out.event = folded ? ArcEvent::Fold : ArcEvent::Reached;
      return out;
    }

    x = y;
    t = tn;
    if (corrected->second <= 3) h = std::min(1.5 * h, settings.arc_step);
  }
  return out;
}

struct UnionFind {
  std::vector<int> parent;
  int make() {
    parent.push_back(static_cast<int>(parent.size()));
    return parent.back();
  }
  int find(int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace detail

/// Traces every solution branch over the Omega grid of `settings`.
///
/// Roots from find_all_roots at neighbouring grid points are linked by
/// pseudo-arclength continuation. Folds and exits through a_i = 0 are located
/// by Newton on the augmented system and recorded as transitions. Roots the
/// lattice search missed but continuation reaches are added to the scan.
inline BranchScan trace_branches(const TrapConfig& config, const ContinuationSettings& settings) {
  settings.validate();
  StationaritySystem system(config);
  const detail::Reduced sys(config);
  const std::vector<double> grid = settings.omega_grid();
  const std::size_t n = grid.size();
  const double alpha_cap = 4.0 * settings.resolved_alpha_max(config);
  constexpr double kLinkTol = 1e-5;

  struct Node {
    StationaryPoint point;
    int id = -1;
  };
  std::vector<std::vector<Node>> nodes(n);
  for (std::size_t k = 0; k < n; ++k)
    for (const auto& p : find_all_roots(config.with_rotation(grid[k]), settings))
      nodes[k].push_back({p, -1});

  detail::UnionFind uf;
  std::vector<Transition> events;
  const auto add_event = [&](double om, bool refined, TransitionKind kind, std::size_t k) {
    for (auto& e : events)
      if (std::abs(e.omega - om) < 1e-6) {
        if (refined && e.kind == TransitionKind::Unresolved) {
          e.omega = om;
          e.kind = kind;
          e.bracket_lo = std::max(grid[k], om - 5e-7);
          e.bracket_hi = std::min(grid[k + 1], om + 5e-7);
        }
        return;
      }
    Transition tr;
    tr.omega = om;
    tr.kind = refined ? kind : TransitionKind::Unresolved;
    tr.bracket_lo = refined ? std::max(grid[k], om - 5e-7) : grid[k];
    tr.bracket_hi = refined ? std::min(grid[k + 1], om + 5e-7) : grid[k + 1];
    events.push_back(tr);
  };
  const auto find_match = [&](std::size_t k, const Eigen::Vector2d& a) -> int {
    int found = -1;
    for (std::size_t i = 0; i < nodes[k].size(); ++i) {
      const auto& p = nodes[k][i].point;
      if (std::max(std::abs(p.alpha1 - a(0)), std::abs(p.alpha2 - a(1))) < kLinkTol) {
        if (found >= 0) throw BranchAmbiguity(grid[k], "two roots within link tolerance");
        found = static_cast<int>(i);
      }
    }
    return found;
  };
  const auto insert = [&](std::size_t k, const Eigen::Vector2d& a, int id) {
    nodes[k].push_back({detail::make_point(a(0), a(1), grid[k], config.with_rotation(grid[k])), id});
    return static_cast<int>(nodes[k].size() - 1);
  };
  const auto alpha_of = [](const StationaryPoint& p) { return Eigen::Vector2d(p.alpha1, p.alpha2); };

  for (std::size_t k = 0; k + 1 < n; ++k) {
    for (auto& node : nodes[k])
      if (node.id < 0) node.id = uf.make();
    std::vector<int> claimed(nodes[k + 1].size(), -1);

    for (std::size_t i = 0; i < nodes[k].size(); ++i) {
      const auto res = detail::march(sys, alpha_of(nodes[k][i].point), grid[k], grid[k + 1],
                                     settings, alpha_cap);
      const int id = nodes[k][i].id;
      switch (res.event) {
        case detail::ArcEvent::Reached: {
          int j = find_match(k + 1, res.alpha);
          if (j < 0) {
            j = insert(k + 1, res.alpha, id);
            claimed.push_back(-1);
          }
          if (claimed[j] >= 0 && claimed[j] != static_cast<int>(i))
            throw BranchAmbiguity(grid[k + 1], "two branches continue into the same root");
          claimed[j] = static_cast<int>(i);
          nodes[k + 1][j].id = id;
          break;
        }
        case detail::ArcEvent::Fold: {
          add_event(res.omega_event, res.refined, TransitionKind::Fold, k);
          int j = find_match(k, res.alpha);
          if (j < 0) j = insert(k, res.alpha, uf.make());
          if (nodes[k][j].id < 0) nodes[k][j].id = uf.make();
          uf.unite(id, nodes[k][j].id);
          break;
        }
        case detail::ArcEvent::Boundary:
          add_event(res.omega_event, res.refined, TransitionKind::BoundaryExit, k);
          break;
        case detail::ArcEvent::Failed:
          add_event(0.5 * (grid[k] + grid[k + 1]), false, TransitionKind::Unresolved, k);
          break;
      }
    }

    // Roots at k+1 with no predecessor: follow them backwards.
    for (std::size_t j = 0; j < nodes[k + 1].size(); ++j) {
      if (nodes[k + 1][j].id >= 0) continue;
      const int id = uf.make();
      nodes[k + 1][j].id = id;
      Eigen::Vector2d a = alpha_of(nodes[k + 1][j].point);
      for (std::size_t kk = k + 1; kk > 0; --kk) {
        const auto res = detail::march(sys, a, grid[kk], grid[kk - 1], settings, alpha_cap);
        if (res.event == detail::ArcEvent::Fold) {
          add_event(res.omega_event, res.refined, TransitionKind::Fold, kk - 1);
          int p = find_match(kk, res.alpha);
          if (p < 0) p = insert(kk, res.alpha, id);
          if (nodes[kk][p].id < 0) nodes[kk][p].id = id;
          uf.unite(id, nodes[kk][p].id);
          break;
        }
        if (res.event == detail::ArcEvent::Boundary) {
          add_event(res.omega_event, res.refined, TransitionKind::BoundaryExit, kk - 1);
          break;
        }
        if (res.event == detail::ArcEvent::Failed) {
          add_event(0.5 * (grid[kk - 1] + grid[kk]), false, TransitionKind::Unresolved, kk - 1);
          break;
        }
        const int p = find_match(kk - 1, res.alpha);
        if (p >= 0) {
          uf.unite(id, nodes[kk - 1][p].id);
          break;
        }
        insert(kk - 1, res.alpha, id);
        a = res.alpha;
      }
    }
  }
  for (auto& node : nodes[n - 1])
    if (node.id < 0) node.id = uf.make();

  // Compact branch labels in order of first appearance.
  BranchScan scan{config.with_rotation(0.0), grid, {}, {0}, {}, {}, 0};
  std::vector<int> label(uf.parent.size(), -1);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<StationaryPoint> pts;
    for (const auto& node : nodes[k]) pts.push_back(node.point);
    std::vector<int> ids;
    for (const auto& node : nodes[k]) ids.push_back(uf.find(node.id));
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return pts[a].alpha1 != pts[b].alpha1 ? pts[a].alpha1 < pts[b].alpha1
                                            : pts[a].alpha2 < pts[b].alpha2;
    });
    for (std::size_t o : order) {
      int& l = label[ids[o]];
      if (l < 0) l = scan.n_branches++;
      pts[o].branch_id = l;
    }
    std::sort(pts.begin(), pts.end(), [](const StationaryPoint& a, const StationaryPoint& b) {
      return a.branch_id != b.branch_id ? a.branch_id < b.branch_id : a.alpha1 < b.alpha1;
    });
    for (const auto& p : pts) scan.points.push_back(p);
    scan.offsets.push_back(scan.points.size());
    scan.multiplicity.push_back(static_cast<int>(pts.size()));
  }

  std::sort(events.begin(), events.end(),
            [](const Transition& a, const Transition& b) { return a.omega < b.omega; });
  const auto grid_index = [&](double om) {
    const auto it = std::upper_bound(grid.begin(), grid.end(), om);
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - grid.begin() - 1, 0, n - 2));
  };
  for (auto& e : events) {
    const std::size_t k = grid_index(e.omega);
    e.multiplicity_below = scan.multiplicity[k];
    e.multiplicity_above = scan.multiplicity[k + 1];
  }
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (scan.multiplicity[k] == scan.multiplicity[k + 1]) continue;
    const bool explained = std::any_of(events.begin(), events.end(), [&](const Transition& e) {
      return e.omega >= grid[k] && e.omega <= grid[k + 1];
    });
    if (!explained)
      events.push_back({0.5 * (grid[k] + grid[k + 1]), grid[k], grid[k + 1],
                        TransitionKind::Unresolved, scan.multiplicity[k], scan.multiplicity[k + 1]});
  }
  std::sort(events.begin(), events.end(),
            [](const Transition& a, const Transition& b) { return a.omega < b.omega; });
  scan.transitions = std::move(events);
  return scan;
}

/// Maximal Omega intervals separated by transitions, with their multiplicity.
inline std::vector<MultiplicityInterval> multiplicity_intervals(const BranchScan& scan) {
  std::vector<double> cuts{scan.omega_grid.front()};
  for (const auto& t : scan.transitions)
    if (t.multiplicity_below != t.multiplicity_above) cuts.push_back(t.omega);
  cuts.push_back(scan.omega_grid.back());
  std::vector<MultiplicityInterval> out;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    if (!(cuts[c + 1] > cuts[c])) continue;
    MultiplicityInterval iv{cuts[c], cuts[c + 1], -1};
    for (std::size_t k = 0; k < scan.omega_grid.size(); ++k) {
      const double om = scan.omega_grid[k];
      const bool inside = om > iv.lo && om < iv.hi;
      const bool edge = (c == 0 && om == iv.lo) || (c + 2 == cuts.size() && om == iv.hi);
      if (inside || edge) {
        iv.multiplicity = scan.multiplicity[k];
        break;
      }
    }
    if (!out.empty() && out.back().multiplicity == iv.multiplicity)
      out.back().hi = iv.hi;
    else
      out.push_back(iv);
  }
  return out;
}

/// BranchScan CSV: Omega, branch_id, alpha1, alpha2, beta, residual, stability, multiplicity.
inline void write_scan_csv(std::ostream& os, const BranchScan& scan) {
  csv::write_header(os, {"Omega", "branch_id", "alpha1", "alpha2", "beta", "residual",
                         "stability", "multiplicity"});
  for (std::size_t k = 0; k < scan.omega_grid.size(); ++k)
    for (std::size_t i = scan.offsets[k]; i < scan.offsets[k + 1]; ++i) {
      const auto& p = scan.points[i];
      os << csv::format(p.Omega) << ',' << p.branch_id << ',' << csv::format(p.alpha1) << ','
         << csv::format(p.alpha2) << ',' << csv::format(p.beta) << ',' << csv::format(p.residual)
         << ',' << (p.stability ? to_string(*p.stability) : "") << ',' << scan.multiplicity[k]
         << '\n';
    }
}

/// Reads the point rows of a BranchScan CSV.
inline std::vector<StationaryPoint> read_scan_csv(std::istream& is) {
  const auto table = csv::read(is);
  const std::size_t c_om = table.column("Omega"), c_id = table.column("branch_id"),
                    c_a1 = table.column("alpha1"), c_a2 = table.column("alpha2"),
                    c_be = table.column("beta"), c_res = table.column("residual"),
                    c_st = table.column("stability");
  std::vector<StationaryPoint> out;
  for (const auto& row : table.rows) {
    StationaryPoint p;
    try {
      p.Omega = std::stod(row[c_om]);
      p.branch_id = std::stoi(row[c_id]);
      p.alpha1 = std::stod(row[c_a1]);
      p.alpha2 = std::stod(row[c_a2]);
      p.beta = std::stod(row[c_be]);
      p.residual = std::stod(row[c_res]);
    } catch (const std::exception&) {
      throw ConfigError("malformed scan CSV row");
    }
    p.stability = parse_stability(row[c_st]);
    out.push_back(p);
  }
  return out;
}

}  // namespace gausson
