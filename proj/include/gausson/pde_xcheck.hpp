#pragma once

// Split-step Fourier solver for the 2D logarithmic Schroedinger equation
//
//   i dpsi/dt = (-1/2 Lap + 1/2 r.V(t).r - b log|psi|^2) psi
//
// on a periodic square grid. In the lab frame the anisotropic trap rotates,
// V(t) = R(Omega t) Diag(w1^2, w2^2) R(Omega t)^T. In the co-rotating frame
// the potential is static and -Omega L_z is split into two shears, each exact
// in a mixed position/momentum representation.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <vector>

#include <fftw3.h>
#include <Eigen/Dense>

#include "gausson/core.hpp"
#include "gausson/csv.hpp"
#include "gausson/gausson_ode.hpp"

namespace gausson {

using cplx = std::complex<double>;

class Grid2D {
 public:
  Grid2D(int n, double half_width) : n_(n), half_width_(half_width) {
    if (n < 8 || !std::has_single_bit(static_cast<unsigned>(n)))
      throw ConfigError("grid size n must be a power of two >= 8");
    if (!(half_width > 0.0)) throw ConfigError("box half-width L must be positive");
  }
  int n() const { return n_; }
  double half_width() const { return half_width_; }
  double dx() const { return 2.0 * half_width_ / n_; }
  double x(int i) const { return -half_width_ + i * dx(); }
  double k(int i) const {
    return std::numbers::pi / half_width_ * (i < n_ / 2 ? i : i - n_);
  }
  std::size_t size() const { return static_cast<std::size_t>(n_) * n_; }
  friend bool operator==(const Grid2D&, const Grid2D&) = default;

 private:
  int n_;
  double half_width_;
};

/// Complex amplitudes, row-major with x the slow index: values[ix * n + iy].
struct Field2D {
  Grid2D grid;
  std::vector<cplx> values;
  double t = 0.0;

  explicit Field2D(Grid2D g, double time = 0.0) : grid(g), values(g.size()), t(time) {}

  double norm() const {
    double s = 0.0;
    for (const auto& v : values) s += std::norm(v);
    return s * grid.dx() * grid.dx();
  }
};

enum class Frame { Lab, Rotating };

struct PdeSettings {
  double dt = 1e-3;
  double t_end = 10.0;
  double log_epsilon = 1e-30;
  Frame frame = Frame::Lab;
  /// Diagnostics every sample_every steps.
  int sample_every = 100;
  bool keep_fields = false;

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
    if (!(log_epsilon >= 0.0)) throw ConfigError("log_epsilon must be >= 0");
    if (sample_every < 1) throw ConfigError("sample_every must be >= 1");
  }
};

/// Equation parameters as seen by the PDE solver; unlike TrapConfig it admits V = 0.
struct PdeModel {
  double w1sq = 0.0;
  double w2sq = 0.0;
  double rotation = 0.0;  // signed
  double b = 0.0;

  static PdeModel from(const TrapConfig& c) {
    return {c.omega1() * c.omega1(), c.omega2() * c.omega2(), c.signed_rotation(), c.b()};
  }
  static PdeModel free(double b) { return {0.0, 0.0, 0.0, b}; }

  Mat<2> potential(double t, Frame frame) const {
    Mat<2> v = Mat<2>::Zero();
    v(0, 0) = w1sq;
    v(1, 1) = w2sq;
    if (frame == Frame::Rotating) return v;
    const Mat<2> r = rotation_matrix<2>(rotation * t);
    return r * v * r.transpose();
  }
};

namespace detail {

/// Owns an aligned n x n buffer plus 2D and row/column 1D FFT plans over it.
class FftWorkspace {
 public:
  explicit FftWorkspace(const Grid2D& g) : n_(g.n()) {
    buf_ = fftw_alloc_complex(g.size());
    if (!buf_) throw std::bad_alloc();
    const int n = n_;
    fwd2_ = fftw_plan_dft_2d(n, n, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd2_ = fftw_plan_dft_2d(n, n, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    // Along y (contiguous), one transform per x row.
    fwd_y_ = fftw_plan_many_dft(1, &n, n, buf_, nullptr, 1, n, buf_, nullptr, 1, n, FFTW_FORWARD,
                                FFTW_ESTIMATE);
    bwd_y_ = fftw_plan_many_dft(1, &n, n, buf_, nullptr, 1, n, buf_, nullptr, 1, n, FFTW_BACKWARD,
                                FFTW_ESTIMATE);
    // Along x (stride n), one transform per y column.
    fwd_x_ = fftw_plan_many_dft(1, &n, n, buf_, nullptr, n, 1, buf_, nullptr, n, 1, FFTW_FORWARD,
                                FFTW_ESTIMATE);
    bwd_x_ = fftw_plan_many_dft(1, &n, n, buf_, nullptr, n, 1, buf_, nullptr, n, 1, FFTW_BACKWARD,
                                FFTW_ESTIMATE);
  }
  FftWorkspace(const FftWorkspace&) = delete;
  FftWorkspace& operator=(const FftWorkspace&) = delete;
  ~FftWorkspace() {
    for (auto p : {fwd2_, bwd2_, fwd_y_, bwd_y_, fwd_x_, bwd_x_}) fftw_destroy_plan(p);
    fftw_free(buf_);
  }

  cplx* data() { return reinterpret_cast<cplx*>(buf_); }
  const cplx* data() const { return reinterpret_cast<const cplx*>(buf_); }
  void forward() { fftw_execute(fwd2_); }
  void backward() { fftw_execute(bwd2_); }
  void forward_y() { fftw_execute(fwd_y_); }
  void backward_y() { fftw_execute(bwd_y_); }
  void forward_x() { fftw_execute(fwd_x_); }
  void backward_x() { fftw_execute(bwd_x_); }

  void load(const std::vector<cplx>& v) { std::memcpy(buf_, v.data(), v.size() * sizeof(cplx)); }
  void store(std::vector<cplx>& v) const { std::memcpy(v.data(), buf_, v.size() * sizeof(cplx)); }

 private:
  int n_;
  fftw_complex* buf_ = nullptr;
  fftw_plan fwd2_, bwd2_, fwd_y_, bwd_y_, fwd_x_, bwd_x_;
};

}  // namespace detail

/// Strang-split propagator holding FFT plans and precomputed kinetic factors.
class SplitStepSolver {
 public:
  SplitStepSolver(const Grid2D& grid, const PdeModel& model, const PdeSettings& settings)
      : grid_(grid), model_(model), settings_(settings), ws_(grid) {
    settings_.validate();
    const int n = grid_.n();
    const double scale = 1.0 / (double(n) * n);
    half_kinetic_.resize(grid_.size());
    full_kinetic_.resize(grid_.size());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double k2 = grid_.k(i) * grid_.k(i) + grid_.k(j) * grid_.k(j);
        half_kinetic_[i * n + j] = scale * std::polar(1.0, -0.25 * k2 * settings_.dt);
        full_kinetic_[i * n + j] = scale * std::polar(1.0, -0.5 * k2 * settings_.dt);
      }
    if (settings_.frame == Frame::Rotating) {
      // exp(+i Omega tau x k_y) and exp(-i Omega tau y k_x) with tau = dt/2.
      const double tau = 0.5 * settings_.dt;
      shear_y_.resize(grid_.size());
      shear_x_.resize(grid_.size());
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          shear_y_[i * n + j] = std::polar(1.0 / n, model_.rotation * tau * grid_.x(i) * grid_.k(j));
          shear_x_[i * n + j] = std::polar(1.0 / n, -model_.rotation * tau * grid_.x(j) * grid_.k(i));
        }
    }
  }

  void load(const Field2D& f) {
    if (!(f.grid == grid_)) throw ConfigError("field grid does not match solver grid");
    ws_.load(f.values);
    t_ = f.t;
  }

  Field2D field() const {
    Field2D f(grid_, t_);
    ws_.store(f.values);
    return f;
  }

  double time() const { return t_; }

  /// Advances `steps` full steps. Adjacent half kinetic substeps are fused in the lab frame.
  void advance(long steps) {
    if (steps <= 0) return;
    const double dt = settings_.dt;
    if (settings_.frame == Frame::Rotating) {
      for (long s = 0; s < steps; ++s) {
        shear_y();
        shear_x();
        kinetic(half_kinetic_);
        phase(t_ + 0.5 * dt);
        kinetic(half_kinetic_);
        shear_x();
        shear_y();
        t_ += dt;
      }
      return;
    }
    const double t0 = t_;
    kinetic(half_kinetic_);
    for (long s = 0; s < steps; ++s) {
      phase(t0 + (s + 0.5) * dt);
      kinetic(s + 1 < steps ? full_kinetic_ : half_kinetic_);
    }
    t_ = t0 + steps * dt;
  }

 private:
  void check(double v) const {
    if (!std::isfinite(v)) throw NonFinite(t_);
  }

  void kinetic(const std::vector<cplx>& factor) {
    ws_.forward();
    cplx* d = ws_.data();
    for (std::size_t i = 0; i < factor.size(); ++i) d[i] *= factor[i];
    ws_.backward();
    check(std::norm(d[0]) + std::norm(d[factor.size() / 2]));
  }

  void phase(double t_mid) {
    const int n = grid_.n();
    const Mat<2> v = model_.potential(t_mid, settings_.frame);
    const double eps = settings_.log_epsilon;
    const double dt = settings_.dt;
    cplx* d = ws_.data();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = grid_.x(i);
      for (int j = 0; j < n; ++j) {
        const double y = grid_.x(j);
        const double trap = 0.5 * (v(0, 0) * x * x + 2.0 * v(0, 1) * x * y + v(1, 1) * y * y);
        cplx& psi = d[i * n + j];
        const double rho = std::norm(psi);
        acc += rho;
        const double nl = model_.b == 0.0 ? 0.0 : model_.b * std::log(std::max(rho, eps));
        psi *= std::polar(1.0, -dt * (trap - nl));
      }
    }
    check(acc);
  }

  void shear_y() {
    ws_.forward_y();
    cplx* d = ws_.data();
    for (std::size_t i = 0; i < shear_y_.size(); ++i) d[i] *= shear_y_[i];
    ws_.backward_y();
  }

  void shear_x() {
    ws_.forward_x();
    cplx* d = ws_.data();
    for (std::size_t i = 0; i < shear_x_.size(); ++i) d[i] *= shear_x_[i];
    ws_.backward_x();
  }

  Grid2D grid_;
  PdeModel model_;
  PdeSettings settings_;
  detail::FftWorkspace ws_;
  std::vector<cplx> half_kinetic_, full_kinetic_, shear_y_, shear_x_;
  double t_ = 0.0;
};

/// One Strang step.
inline Field2D step(const Field2D& field, const PdeModel& model, const PdeSettings& settings) {
  SplitStepSolver solver(field.grid, model, settings);
  solver.load(field);
  solver.advance(1);
  return solver.field();
}

inline Field2D step(const Field2D& field, const TrapConfig& config, const PdeSettings& settings) {
  return step(field, PdeModel::from(config), settings);
}

/// Samples a Gausson on the grid.
inline Field2D sample_gausson(const GaussonState2& s, const Grid2D& grid, double t = 0.0) {
  validate(s);
  Field2D f(grid, t);
  const int n = grid.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      f.values[i * n + j] = evaluate_wavefunction(s, Vec<2>(grid.x(i), grid.x(j)));
  return f;
}

/// |<a|b>|^2 / (<a|a><b|b>).
inline double fidelity(const Field2D& a, const Field2D& b) {
  cplx overlap = 0.0;
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    overlap += std::conj(a.values[i]) * b.values[i];
    na += std::norm(a.values[i]);
    nb += std::norm(b.values[i]);
  }
  return std::norm(overlap) / (na * nb);
}

inline double fidelity(const Field2D& field, const GaussonState2& reference) {
  return fidelity(sample_gausson(reference, field.grid, field.t), field);
}

/// Spectral gradient (d/dx, d/dy) of the field.
inline std::pair<std::vector<cplx>, std::vector<cplx>> spectral_gradient(const Field2D& f) {
  const int n = f.grid.n();
  detail::FftWorkspace ws(f.grid);
  ws.load(f.values);
  ws.forward();
  const std::vector<cplx> hat(ws.data(), ws.data() + f.grid.size());
  const double scale = 1.0 / (double(n) * n);
  std::pair<std::vector<cplx>, std::vector<cplx>> out{std::vector<cplx>(f.grid.size()),
                                                      std::vector<cplx>(f.grid.size())};
  for (int axis = 0; axis < 2; ++axis) {
    cplx* d = ws.data();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double k = axis == 0 ? f.grid.k(i) : f.grid.k(j);
        // Drop the unpaired Nyquist mode so the derivative of a real field stays real.
        const bool nyq = (axis == 0 ? i : j) == n / 2;
        d[i * n + j] = nyq ? 0.0 : cplx(0.0, k * scale) * hat[i * n + j];
      }
    ws.backward();
    ws.store(axis == 0 ? out.first : out.second);
  }
  return out;
}

/// Conserved functional <1/2 p^2 + 1/2 r.V(t).r - b log|psi|^2 - Omega L_z>,
/// integrated over the grid (the lab-frame value with V(t) equals the
/// co-rotating one).
inline double pde_energy(const Field2D& f, const PdeModel& model, Frame frame,
                         double log_epsilon = 1e-30) {
  const int n = f.grid.n();
  const double dx2 = f.grid.dx() * f.grid.dx();
  const auto [gx, gy] = spectral_gradient(f);
  const Mat<2> v = model.potential(f.t, frame);
  double kinetic = 0.0, trap = 0.0, nonlinear = 0.0, lz = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = f.grid.x(i);
    for (int j = 0; j < n; ++j) {
      const double y = f.grid.x(j);
      const std::size_t idx = static_cast<std::size_t>(i) * n + j;
      const cplx psi = f.values[idx];
      const double rho = std::norm(psi);
      kinetic += 0.5 * (std::norm(gx[idx]) + std::norm(gy[idx]));
      trap += 0.5 * (v(0, 0) * x * x + 2.0 * v(0, 1) * x * y + v(1, 1) * y * y) * rho;
      if (rho > 0.0) nonlinear -= model.b * rho * std::log(std::max(rho, log_epsilon));
      lz += std::imag(std::conj(psi) * (x * gy[idx] - y * gx[idx]));
    }
  }
  return (kinetic + trap + nonlinear - model.rotation * lz) * dx2;
}

struct GaussianFit {
  Vec<2> center = Vec<2>::Zero();
  Mat<2> covariance = Mat<2>::Zero();
  Vec<2> momentum = Vec<2>::Zero();
  Mat<2> B = Mat<2>::Zero();
  double norm = 0.0;
  double fidelity = 0.0;

  /// Gausson with the fitted moments: A = covariance^-1 / 2.
  GaussonState2 state() const {
    GaussonState2 s;
    const Mat<2> a = 0.5 * covariance.inverse();
    s.A = SymMatrix<2>::from_upper(a);
    s.B = SymMatrix<2>::from_upper(B);
    s.xi = center;
    s.pi = momentum;
    s.N = std::sqrt(norm * std::sqrt(a.determinant()) / std::numbers::pi);
    return s;
  }
};

/// Moments of |psi|^2 and of the current; fidelity against the Gaussian they define.
inline GaussianFit fit_gaussian(const Field2D& f) {
  const int n = f.grid.n();
  const double dx2 = f.grid.dx() * f.grid.dx();
  GaussianFit fit;
  fit.norm = f.norm();
  if (!(fit.norm > 0.0)) throw DegenerateMoments("field has zero norm");

  Vec<2> m1 = Vec<2>::Zero();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double rho = std::norm(f.values[i * n + j]);
      m1 += rho * Vec<2>(f.grid.x(i), f.grid.x(j));
    }
  fit.center = m1 * dx2 / fit.norm;

  const auto [gx, gy] = spectral_gradient(f);
  Mat<2> cov = Mat<2>::Zero(), cur = Mat<2>::Zero();
  Vec<2> p = Vec<2>::Zero();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * n + j;
      const cplx psi = f.values[idx];
      const double rho = std::norm(psi);
      const Vec<2> d = Vec<2>(f.grid.x(i), f.grid.x(j)) - fit.center;
      const Vec<2> current(std::imag(std::conj(psi) * gx[idx]), std::imag(std::conj(psi) * gy[idx]));
      cov += rho * d * d.transpose();
      cur += d * current.transpose();
      p += current;
    }
  fit.covariance = cov * dx2 / fit.norm;
  fit.momentum = p * dx2 / fit.norm;
  const double det = fit.covariance.determinant();
  if (!std::isfinite(det) || det <= 1e-14 * std::pow(fit.covariance.trace(), 2))
    throw DegenerateMoments("covariance matrix is singular");
  const Mat<2> b = -fit.covariance.inverse() * (cur * dx2 / fit.norm);
  fit.B = 0.5 * (b + b.transpose());
  fit.fidelity = fidelity(f, fit.state());
  return fit;
}

struct PdeDiagnostics {
  double t = 0.0;
  double norm = 0.0;
  double energy = 0.0;
  double cov_xx = 0.0;
  double cov_yy = 0.0;
  double cov_xy = 0.0;
  double fidelity_vs_gausson = std::numeric_limits<double>::quiet_NaN();
};

struct EvolveResult {
  std::vector<Field2D> samples;
  std::vector<PdeDiagnostics> diagnostics;
};

/// The reference Gausson is given in the co-rotating frame; in the lab frame it
/// is rotated by Omega t before comparison.
inline PdeDiagnostics diagnose(const Field2D& f, const PdeModel& model, const PdeSettings& settings,
                               const std::optional<GaussonState2>& reference) {
  PdeDiagnostics d;
  d.t = f.t;
  d.norm = f.norm();
  d.energy = pde_energy(f, model, settings.frame, settings.log_epsilon);
  const GaussianFit fit = fit_gaussian(f);
  d.cov_xx = fit.covariance(0, 0);
  d.cov_yy = fit.covariance(1, 1);
  d.cov_xy = fit.covariance(0, 1);
  if (reference) {
    const double angle = settings.frame == Frame::Lab ? model.rotation * f.t : 0.0;
    d.fidelity_vs_gausson = fidelity(f, rotate_frame(*reference, angle));
  }
  return d;
}

inline EvolveResult evolve(const Field2D& initial, const PdeModel& model, const PdeSettings& settings,
                           const std::optional<GaussonState2>& reference = std::nullopt) {
  settings.validate();
  SplitStepSolver solver(initial.grid, model, settings);
  solver.load(initial);
  EvolveResult out;
  const auto total = static_cast<long>(std::llround(settings.t_end / settings.dt));
  auto record = [&](const Field2D& f) {
    out.diagnostics.push_back(diagnose(f, model, settings, reference));
    if (settings.keep_fields) out.samples.push_back(f);
  };
  record(initial);
  long done = 0;
  while (done < total) {
    const long chunk = std::min<long>(settings.sample_every, total - done);
    solver.advance(chunk);
    done += chunk;
    record(solver.field());
  }
  return out;
}

inline EvolveResult evolve(const Field2D& initial, const TrapConfig& config, const PdeSettings& settings,
                           const std::optional<GaussonState2>& reference = std::nullopt) {
  return evolve(initial, PdeModel::from(config), settings, reference);
}

/// Terminal field after t_end without diagnostics.
inline Field2D propagate(const Field2D& initial, const PdeModel& model, const PdeSettings& settings) {
  SplitStepSolver solver(initial.grid, model, settings);
  solver.load(initial);
  solver.advance(static_cast<long>(std::llround(settings.t_end / settings.dt)));
  return solver.field();
}

/// L2 distance sqrt(sum |a - b|^2 dx^2).
inline double l2_distance(const Field2D& a, const Field2D& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += std::norm(a.values[i] - b.values[i]);
  return std::sqrt(s) * a.grid.dx();
}

struct OrderStudy {
  std::vector<double> dts;
  std::vector<double> errors;
  /// log2(err(dt) / err(dt/2)) for consecutive halvings.
  std::vector<double> pairwise_orders;
  /// Least-squares slope of log(err) against log(dt).
  double fitted_order = 0.0;
};

/// Terminal-state error of each dt against a reference run at min(dts) / 4.
inline OrderStudy strang_order_study(const Field2D& initial, const PdeModel& model,
                                     PdeSettings settings, std::vector<double> dts) {
  std::sort(dts.begin(), dts.end(), std::greater<>());
  OrderStudy study;
  study.dts = dts;
  settings.dt = dts.back() / 4.0;
  const Field2D reference = propagate(initial, model, settings);
  for (double dt : dts) {
    settings.dt = dt;
    study.errors.push_back(l2_distance(propagate(initial, model, settings), reference));
  }
  for (std::size_t i = 0; i + 1 < dts.size(); ++i)
    study.pairwise_orders.push_back(std::log(study.errors[i] / study.errors[i + 1]) /
                                    std::log(dts[i] / dts[i + 1]));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(dts.size());
  for (std::size_t i = 0; i < dts.size(); ++i) {
    const double x = std::log(dts[i]), y = std::log(study.errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  study.fitted_order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return study;
}

// ---------------------------------------------------------------------------
// File formats

/// Snapshot: uint32 n, float64 L, float64 t, then n*n (float32 re, float32 im)
/// pairs, row-major with x the slow index. All little-endian.
inline void write_snapshot(std::ostream& os, const Field2D& f) {
  const auto put = [&](const auto& v) {
    char bytes[sizeof v];
    std::memcpy(bytes, &v, sizeof v);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof v);
    os.write(bytes, sizeof v);
  };
  put(static_cast<std::uint32_t>(f.grid.n()));
  put(f.grid.half_width());
  put(f.t);
  for (const auto& v : f.values) {
    put(static_cast<float>(v.real()));
    put(static_cast<float>(v.imag()));
  }
}

inline Field2D read_snapshot(std::istream& is) {
  const auto get = [&](auto& v) {
    char bytes[sizeof v];
    if (!is.read(bytes, sizeof v)) throw ConfigError("truncated snapshot");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof v);
    std::memcpy(&v, bytes, sizeof v);
  };
  std::uint32_t n = 0;
  double half_width = 0.0, t = 0.0;
  get(n);
  get(half_width);
  get(t);
  Field2D f(Grid2D(static_cast<int>(n), half_width), t);
  for (auto& v : f.values) {
    float re = 0.0f, im = 0.0f;
    get(re);
    get(im);
    v = cplx(re, im);
  }
  return f;
}

inline void write_pde_diagnostics_csv(std::ostream& os, const std::vector<PdeDiagnostics>& rows) {
  csv::write_header(os, {"t", "norm", "energy", "cov_xx", "cov_yy", "cov_xy", "fidelity_vs_gausson"});
  for (const auto& d : rows)
    csv::write_row(os, {d.t, d.norm, d.energy, d.cov_xx, d.cov_yy, d.cov_xy, d.fidelity_vs_gausson});
}

}  // namespace gausson
