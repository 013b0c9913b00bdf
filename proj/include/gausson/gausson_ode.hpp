#pragma once

// Closed ODE flow of the Gaussian ansatz in the co-rotating frame:
//
//   dA/dt  = BA + AB - [W, A]
//   dB/dt  = B^2 - A^2 + V + 2bA - [W, B]
//   dxi/dt = pi - Omega x xi
//   dpi/dt = -V xi - Omega x pi
//   dN/dt  = 1/2 Tr(B) N
//   df/dt  = -1/2 (Tr A + pi.pi - xi.V.xi)
//
// where W is the cross-product matrix of Omega (W v = Omega x v).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "gausson/core.hpp"
#include "gausson/csv.hpp"

namespace gausson {

enum class OdeMethod { RK4Fixed, RK45Adaptive };

struct OdeSettings {
  OdeMethod method = OdeMethod::RK45Adaptive;
  double dt = 1e-3;
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double t_end = 10.0;
  /// Samples are written every sample_every * dt time units.
  int sample_every = 100;
  double dt_min = 1e-12;
  double pd_floor = 1e-12;

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ConfigError("tolerances must be positive");
    if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
    if (sample_every < 1) throw ConfigError("sample_every must be >= 1");
    if (!(dt_min > 0.0)) throw ConfigError("dt_min must be positive");
  }
};

struct OdeDiagnostics {
  double norm = 0.0;
  double energy = 0.0;
  double min_eig_A = 0.0;
};

template <int D>
struct Trajectory {
  std::vector<GaussonState<D>> samples;
  std::vector<OdeDiagnostics> diagnostics;
};

/// Time derivative of every ansatz parameter; the `t` field of the result is 1.
template <int D>
GaussonState<D> rhs(const GaussonState<D>& s, const TrapConfig& config) {
  const Mat<D> a = s.A.full();
  const Mat<D> b = s.B.full();
  const Mat<D> v = config.potential<D>();
  const Mat<D> w = config.rotation_generator<D>();
  const double nl = config.b();

  GaussonState<D> d;
  d.A = SymMatrix<D>::from_upper(b * a + a * b - (w * a - a * w));
  d.B = SymMatrix<D>::from_upper(b * b - a * a + v + 2.0 * nl * a - (w * b - b * w));
  d.xi = s.pi - w * s.xi;
  d.pi = -v * s.xi - w * s.pi;
  d.N = 0.5 * b.trace() * s.N;
  d.f = -0.5 * (a.trace() + s.pi.dot(s.pi) - s.xi.dot(v * s.xi));
  d.t = 1.0;
  return d;
}

/// Rotating-frame energy <1/2 p^2 + 1/2 r.V.r - b log|psi|^2 - Omega.M>,
/// integrated over the packet (so it scales with the norm).
template <int D>
double energy(const GaussonState<D>& s, const TrapConfig& config) {
  const Mat<D> a = s.A.full();
  const Mat<D> b = s.B.full();
  const Mat<D> v = config.potential<D>();
  const Mat<D> sigma = 0.5 * a.inverse();
  const double norm = s.N * s.N * std::pow(std::numbers::pi, 0.5 * D) / std::sqrt(a.determinant());

  const double kinetic = 0.5 * (0.5 * a.trace() + s.pi.dot(s.pi) + (b * sigma * b).trace());
  const double trap = 0.5 * (s.xi.dot(v * s.xi) + (v * sigma).trace());
  const double nonlinear = -config.b() * (2.0 * std::log(s.N) - 0.5 * D);
  const Mat<D> bs = b * sigma;
  const double lz = (s.xi(0) * s.pi(1) - s.xi(1) * s.pi(0)) - (bs(1, 0) - bs(0, 1));
  const double rotation = -config.signed_rotation() * lz;
  return norm * (kinetic + trap + nonlinear + rotation);
}

template <int D>
OdeDiagnostics diagnose(const GaussonState<D>& s, const TrapConfig& config) {
  return {gausson_norm(s), energy(s, config), min_eigenvalue(s.A)};
}

namespace detail {

template <int D>
struct FlowSystem {
  const TrapConfig& config;
  using State = typename GaussonState<D>::Packed;
  void operator()(const State& x, State& dxdt, double t) const {
    dxdt = rhs(GaussonState<D>::unpack(x, t), config).pack();
  }
};

}  // namespace detail

/// Integrates the flow from `initial` to settings.t_end.
///
/// Throws PositiveDefinitenessLost when min-eig(A) falls below settings.pd_floor,
/// StepUnderflow when the adaptive step drops below settings.dt_min.
///
/// This overload appends to `traj` as it goes, so the samples recorded before a
/// failure remain available to the caller.
template <int D>
void integrate(const GaussonState<D>& initial, const TrapConfig& config,
               const OdeSettings& settings, Trajectory<D>& traj) {
  namespace odeint = boost::numeric::odeint;
  using State = typename GaussonState<D>::Packed;
  validate(initial);
  settings.validate();

  detail::FlowSystem<D> system{config};
  State x = initial.pack();
  double t = initial.t;
  const double t_final = initial.t + settings.t_end;

  auto record = [&](double time) {
    auto s = GaussonState<D>::unpack(x, time);
    const double me = min_eigenvalue(s.A);
    if (!(me >= settings.pd_floor)) throw PositiveDefinitenessLost(time, me);
    traj.diagnostics.push_back(diagnose(s, config));
    traj.samples.push_back(std::move(s));
  };
  record(t);

  const double interval = settings.dt * settings.sample_every;
  const auto n_intervals = static_cast<long>(std::ceil(settings.t_end / interval - 1e-9));

  if (settings.method == OdeMethod::RK4Fixed) {
    odeint::runge_kutta4<State> stepper;
    const auto total_steps = static_cast<long>(std::llround(settings.t_end / settings.dt));
    long step = 0;
    while (step < total_steps) {
      const long chunk = std::min<long>(settings.sample_every, total_steps - step);
      for (long k = 0; k < chunk; ++k) {
        stepper.do_step(system, x, t, settings.dt);
        ++step;
        t = initial.t + step * settings.dt;
        const double me = min_eigenvalue(GaussonState<D>::unpack(x, t).A);
        if (!(me >= settings.pd_floor)) throw PositiveDefinitenessLost(t, me);
      }
      record(t);
    }
    return;
  }

  auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<State>>(settings.abs_tol,
                                                                            settings.rel_tol);
  double dt = settings.dt;
  for (long k = 1; k <= n_intervals; ++k) {
    const double target = std::min(initial.t + k * interval, t_final);
    while (t < target) {
      const bool last = t + dt >= target;
      double trial = last ? target - t : dt;
      const double before = trial;
      if (stepper.try_step(system, x, t, trial) == odeint::success) {
        if (last) t = target;
        // Keep the controller's proposal unless the step was clipped to hit a sample time.
        if (!last || trial > before) dt = trial;
        const double me = min_eigenvalue(GaussonState<D>::unpack(x, t).A);
        if (!(me >= settings.pd_floor)) throw PositiveDefinitenessLost(t, me);
      } else {
        dt = trial;
        if (dt < settings.dt_min) throw StepUnderflow(t, dt);
      }
    }
    record(t);
  }
}

template <int D>
Trajectory<D> integrate(const GaussonState<D>& initial, const TrapConfig& config,
                        const OdeSettings& settings) {
  Trajectory<D> traj;
  integrate(initial, config, settings, traj);
  return traj;
}

/// Trajectory CSV: t, A.., B.., xi.., pi.., N, f, norm, energy, min_eig_A.
template <int D>
void write_trajectory_csv(std::ostream& os, const Trajectory<D>& traj) {
  static const char* const kSym2[] = {"11", "22", "12"};
  static const char* const kSym3[] = {"11", "22", "12", "33", "13", "23"};
  std::vector<std::string> header{"t"};
  for (const char* m : {"A", "B"})
    for (int k = 0; k < SymMatrix<D>::kSize; ++k)
      header.push_back(std::string(m) + (D == 2 ? kSym2[k] : kSym3[k]));
  for (const char* v : {"xi", "pi"})
    for (int i = 1; i <= D; ++i) header.push_back(std::string(v) + std::to_string(i));
  for (const char* c : {"N", "f", "norm", "energy", "min_eig_A"}) header.emplace_back(c);
  csv::write_header(os, header);

  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    const auto& s = traj.samples[i];
    const auto& d = traj.diagnostics[i];
    std::vector<double> row{s.t};
    for (double v : s.A.packed()) row.push_back(v);
    for (double v : s.B.packed()) row.push_back(v);
    for (int k = 0; k < D; ++k) row.push_back(s.xi(k));
    for (int k = 0; k < D; ++k) row.push_back(s.pi(k));
    row.insert(row.end(), {s.N, s.f, d.norm, d.energy, d.min_eig_A});
    csv::write_row(os, row);
  }
}

}  // namespace gausson
