#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gausson/core.hpp"
#include "gausson/csv.hpp"
#include "gausson/gausson_ode.hpp"
#include "gausson/stationary.hpp"

namespace gausson {

enum class Subsystem { Shape, CenterOfMass };

inline std::string to_string(Subsystem s) { return s == Subsystem::Shape ? "Shape" : "CenterOfMass"; }

struct SpectrumReport {
  std::vector<std::complex<double>> eigenvalues;
  double max_real_part = 0.0;
  Stability classification = Stability::Marginal;
  Subsystem subsystem = Subsystem::Shape;
  /// Largest distance between an eigenvalue and the nearest member of the
  /// spectrum mirrored by lambda -> -lambda.
  double symmetry_defect = 0.0;
};

inline constexpr double kDefaultStabTol = 1e-7;

using ShapeJacobian = Eigen::Matrix<double, 6, 6>;

namespace detail {

inline Eigen::Matrix<double, 6, 1> shape_coords(const GaussonState2& s) {
  Eigen::Matrix<double, 6, 1> x;
  for (int k = 0; k < 3; ++k) {
    x(k) = s.A.packed()[k];
    x(k + 3) = s.B.packed()[k];
  }
  return x;
}

inline GaussonState2 with_shape(GaussonState2 s, const Eigen::Matrix<double, 6, 1>& x) {
  for (int k = 0; k < 3; ++k) {
    s.A.packed()[k] = x(k);
    s.B.packed()[k] = x(k + 3);
  }
  return s;
}

inline ShapeJacobian central_difference(const GaussonState2& base, const TrapConfig& config,
                                        double h) {
  ShapeJacobian j;
  const auto x0 = shape_coords(base);
  for (int c = 0; c < 6; ++c) {
    auto xp = x0, xm = x0;
    xp(c) += h;
    xm(c) -= h;
    const auto fp = shape_coords(rhs(with_shape(base, xp), config));
    const auto fm = shape_coords(rhs(with_shape(base, xm), config));
    j.col(c) = (fp - fm) / (2.0 * h);
  }
  return j;
}

inline void sort_spectrum(std::vector<std::complex<double>>& ev) {
  std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
    return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
  });
}

template <class M>
SpectrumReport spectrum(const M& m, Subsystem sub, double stab_tol) {
  Eigen::EigenSolver<M> es(m, false);
  if (es.info() != Eigen::Success) throw EigenSolverFailure("eigenvalue iteration did not converge");
  SpectrumReport r;
  r.subsystem = sub;
  for (int i = 0; i < m.rows(); ++i) r.eigenvalues.push_back(es.eigenvalues()(i));
  for (const auto& l : r.eigenvalues)
    if (!std::isfinite(l.real()) || !std::isfinite(l.imag()))
      throw EigenSolverFailure("non-finite eigenvalue");
  sort_spectrum(r.eigenvalues);
  r.max_real_part = r.eigenvalues.front().real();
  if (r.max_real_part > stab_tol)
    r.classification = Stability::Unstable;
  else if (std::any_of(r.eigenvalues.begin(), r.eigenvalues.end(),
                       [&](const auto& l) { return std::abs(l.real()) <= stab_tol; }))
    r.classification = Stability::Marginal;
  else
    r.classification = Stability::Stable;
  for (const auto& l : r.eigenvalues) {
    double best = INFINITY;
    for (const auto& mu : r.eigenvalues) best = std::min(best, std::abs(l + mu));
    r.symmetry_defect = std::max(r.symmetry_defect, best);
  }
  return r;
}

}  // namespace detail

/// Jacobian of the (A11, A22, A12, B11, B22, B12) flow at the stationary point,
/// by central differences with step h, Richardson-extrapolated against h/2.
inline ShapeJacobian shape_jacobian(const StationaryPoint& point, const TrapConfig& config,
                                    double h = 1e-5) {
  const TrapConfig at = config.with_rotation(point.Omega);
  const GaussonState2 base = point.state();
  const ShapeJacobian coarse = detail::central_difference(base, at, h);
  const ShapeJacobian fine = detail::central_difference(base, at, 0.5 * h);
  return (4.0 * fine - coarse) / 3.0;
}

/// Hand-linearized shape flow; independent cross-check of shape_jacobian.
inline ShapeJacobian shape_jacobian_analytic(const StationaryPoint& point,
                                             const TrapConfig& config) {
  const TrapConfig at = config.with_rotation(point.Omega);
  const Mat<2> a = point.state().A.full();
  const Mat<2> b = point.state().B.full();
  const Mat<2> w = at.rotation_generator<2>();
  ShapeJacobian j;
  for (int c = 0; c < 6; ++c) {
    Mat<2> e = Mat<2>::Zero();
    const auto [r, s] = detail::SymLayout<2>::entries[c % 3];
    e(r, s) = 1.0;
    e(s, r) = 1.0;
    const Mat<2> da = c < 3 ? e : Mat<2>::Zero();
    const Mat<2> db = c < 3 ? Mat<2>::Zero() : e;
    const Mat<2> ra = db * a + a * db + b * da + da * b - (w * da - da * w);
    const Mat<2> rb = db * b + b * db - da * a - a * da + 2.0 * at.b() * da - (w * db - db * w);
    for (int k = 0; k < 3; ++k) {
      const auto [p, q] = detail::SymLayout<2>::entries[k];
      j(k, c) = ra(p, q);
      j(k + 3, c) = rb(p, q);
    }
  }
  return j;
}

/// Exact 4x4 generator of the center-of-mass flow in (xi1, xi2, pi1, pi2).
inline Eigen::Matrix4d com_matrix(const TrapConfig& config) {
  if (config.dim() != 2) throw ConfigError("com_spectrum is 2D only");
  const Mat<2> v = config.potential<2>();
  const Mat<2> w = config.rotation_generator<2>();
  Eigen::Matrix4d m;
  m << -w, Mat<2>::Identity(), -v, -w;
  return m;
}

inline SpectrumReport com_spectrum(const TrapConfig& config, double stab_tol = kDefaultStabTol) {
  return detail::spectrum(com_matrix(config), Subsystem::CenterOfMass, stab_tol);
}

/// Shape-subsystem spectrum of `point`; also sets point.stability.
inline SpectrumReport classify(StationaryPoint& point, const TrapConfig& config,
                               double stab_tol = kDefaultStabTol) {
  auto report = detail::spectrum(shape_jacobian(point, config), Subsystem::Shape, stab_tol);
  point.stability = report.classification;
  return report;
}

/// Bisects for the Omega in (lo, hi) where the center-of-mass classification flips.
inline double com_threshold(const TrapConfig& config, double lo, double hi, double tol = 1e-10,
                            double stab_tol = kDefaultStabTol) {
  const auto cls = [&](double om) {
    return com_spectrum(config.with_rotation(om), stab_tol).classification;
  };
  const Stability left = cls(lo);
  if (cls(hi) == left) throw ConfigError("classification does not change on the bracket");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (cls(mid) == left ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Spectrum CSV: Omega, branch_id, subsystem, re_lambda_k, im_lambda_k..., classification.
/// Rows for one file must share the subsystem (4 or 6 eigenvalues).
struct SpectrumRow {
  double omega = 0.0;
  int branch_id = -1;
  SpectrumReport report;
};

inline void write_spectrum_csv(std::ostream& os, const std::vector<SpectrumRow>& rows,
                               int n_eigen) {
  std::vector<std::string> header{"Omega", "branch_id", "subsystem"};
  for (int k = 1; k <= n_eigen; ++k) {
    header.push_back("re_lambda_" + std::to_string(k));
    header.push_back("im_lambda_" + std::to_string(k));
  }
  header.emplace_back("classification");
  csv::write_header(os, header);
  for (const auto& row : rows) {
    os << csv::format(row.omega) << ',' << row.branch_id << ',' << to_string(row.report.subsystem);
    for (const auto& l : row.report.eigenvalues)
      os << ',' << csv::format(l.real()) << ',' << csv::format(l.imag());
    os << ',' << to_string(row.report.classification) << '\n';
  }
}

}  // namespace gausson
