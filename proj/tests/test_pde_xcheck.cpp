#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "gausson/gausson.hpp"
#include "oracles.hpp"

using namespace gausson;

namespace {

const double kW1 = std::sqrt(2.0 / 3.0);
const double kW2 = std::sqrt(4.0 / 3.0);

TrapConfig trap(double om, double b) { return TrapConfig(kW1, kW2, om, b); }

GaussonState2 generic_state() {
  GaussonState2 s = stationary_state(1.5, 2.0, 0.2);
  s.A.packed()[2] = 0.1;
  s.N = 1.0;
  s.N = 1.0 / std::sqrt(gausson_norm(s));
  s.xi = Vec<2>(0.4, -0.2);
  s.pi = Vec<2>(0.1, 0.3);
  return s;
}

Field2D double_peak(const Grid2D& g, double sep) {
  auto s = stationary_state(1.0, 1.0, 0.0);
  s.xi = Vec<2>(-0.5 * sep, 0.0);
  auto f = sample_gausson(s, g);
  s.xi = Vec<2>(0.5 * sep, 0.0);
  const auto h = sample_gausson(s, g);
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] += h.values[i];
  return f;
}

}  // namespace

TEST(Grid2D, Validation) {
  EXPECT_THROW(Grid2D(100, 8.0), ConfigError);
  EXPECT_THROW(Grid2D(4, 8.0), ConfigError);
  EXPECT_THROW(Grid2D(64, 0.0), ConfigError);
  const Grid2D g(64, 8.0);
  EXPECT_DOUBLE_EQ(g.dx(), 0.25);
  EXPECT_DOUBLE_EQ(g.x(0), -8.0);
  EXPECT_DOUBLE_EQ(g.k(1), std::numbers::pi / 8.0);
  EXPECT_DOUBLE_EQ(g.k(63), -std::numbers::pi / 8.0);
}

TEST(PdeSettings, Validation) {
  PdeSettings ps;
  ps.dt = 0.0;
  EXPECT_THROW(ps.validate(), ConfigError);
  ps = {};
  ps.sample_every = 0;
  EXPECT_THROW(ps.validate(), ConfigError);
  ps = {};
  ps.log_epsilon = -1.0;
  EXPECT_THROW(ps.validate(), ConfigError);
}

TEST(FitGaussian, ExactGaussonSelfConsistency) {
  const Grid2D g(128, 10.0);
  const auto s = generic_state();
  const auto fit = fit_gaussian(sample_gausson(s, g));
  EXPECT_GT(fit.fidelity, 1.0 - 1e-10);
  const Mat<2> sigma = 0.5 * s.A.full().inverse();
  EXPECT_LT((fit.covariance - sigma).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((fit.center - s.xi).norm(), 1e-8);
  EXPECT_LT((fit.momentum - s.pi).norm(), 1e-8);
  EXPECT_LT((fit.B - s.B.full()).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(fit.norm, 1.0, 1e-10);
}

TEST(FitGaussian, GlobalPhaseInvariance) {
  const Grid2D g(64, 8.0);
  auto f = sample_gausson(generic_state(), g);
  const auto a = fit_gaussian(f);
  for (auto& v : f.values) v *= std::polar(1.0, 1.234);
  const auto b = fit_gaussian(f);
  EXPECT_LT((a.covariance - b.covariance).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((a.center - b.center).norm(), 1e-13);
  EXPECT_LT((a.momentum - b.momentum).norm(), 1e-12);
  EXPECT_NEAR(a.fidelity, b.fidelity, 1e-13);
}

TEST(FitGaussian, DoublePeakIsNotGaussian) {
  const Grid2D g(128, 10.0);
  // sigma = 1/sqrt(2) for A = 1; separation 4 sigma and more.
  for (double sep : {4.0 / std::sqrt(2.0), 4.0, 6.0})
    EXPECT_LT(fit_gaussian(double_peak(g, sep)).fidelity, 0.95) << "separation " << sep;
}

TEST(FitGaussian, DegenerateInput) {
  Field2D f(Grid2D(16, 4.0));
  EXPECT_THROW(fit_gaussian(f), DegenerateMoments);
}

TEST(SplitStep, LinearGroundStateIsStationary) {
  const Grid2D g(64, 8.0);
  const TrapConfig c = trap(0.0, 0.0);
  const auto s = stationary_state(kW1, kW2, 0.0);
  // Strang splitting makes the continuum eigenstate breathe with amplitude
  // O(dt^2), about 1e-7 at dt = 1e-3.
  PdeSettings ps;
  ps.dt = 1e-4;
  ps.t_end = 2.0;
  ps.sample_every = 2000;
  ps.keep_fields = true;
  const auto r = evolve(sample_gausson(s, g), c, ps);
  const auto& d0 = r.diagnostics.front();
  for (const auto& d : r.diagnostics) {
    EXPECT_NEAR(d.cov_xx, d0.cov_xx, 1e-8);
    EXPECT_NEAR(d.cov_yy, d0.cov_yy, 1e-8);
    EXPECT_NEAR(d.cov_xy, d0.cov_xy, 1e-8);
  }
  // |psi| unchanged and the phase advances at (w1 + w2) / 2.
  const auto& f0 = r.samples.front();
  const auto& f1 = r.samples.back();
  double dev = 0.0;
  cplx overlap = 0.0;
  for (std::size_t i = 0; i < f0.values.size(); ++i) {
    dev = std::max(dev, std::abs(std::abs(f1.values[i]) - std::abs(f0.values[i])));
    overlap += std::conj(f0.values[i]) * f1.values[i];
  }
  EXPECT_LT(dev, 1e-7);
  EXPECT_NEAR(std::arg(overlap), std::remainder(-0.5 * (kW1 + kW2) * 2.0, 2 * std::numbers::pi),
              1e-6);
}

TEST(SplitStep, NormConservedOverTenThousandSteps) {
  const Grid2D g(64, 8.0);
  for (Frame fr : {Frame::Lab, Frame::Rotating}) {
    PdeSettings ps;
    ps.frame = fr;
    ps.t_end = 10.0;
    ps.sample_every = 10000;
    const auto f0 = sample_gausson(generic_state(), g);
    const auto f1 = propagate(f0, PdeModel::from(trap(0.9, 1.0)), ps);
    EXPECT_LT(std::abs(f1.norm() - f0.norm()), 1e-10);
  }
}

TEST(SplitStep, SingleStepAgreesWithEvolve) {
  const Grid2D g(32, 6.0);
  PdeSettings ps;
  ps.dt = 0.01;
  ps.t_end = 0.01;
  ps.sample_every = 1;
  ps.keep_fields = true;
  const auto f0 = sample_gausson(generic_state(), g);
  const auto a = step(f0, trap(0.5, 1.0), ps);
  const auto b = evolve(f0, trap(0.5, 1.0), ps).samples.back();
  EXPECT_EQ(a.values, b.values);
  EXPECT_DOUBLE_EQ(a.t, 0.01);
}

TEST(SplitStep, NonlinearGaussonAtRestDoesNotSpread) {
  const Grid2D g(128, 8.0);
  const TrapConfig c = trap(0.0, 1.0);
  const auto p = solve_zero_rotation(c);
  PdeSettings ps;
  ps.t_end = 2.0;
  ps.sample_every = 250;
  const auto r = evolve(sample_gausson(p.state(), g), c, ps, p.state());
  for (const auto& d : r.diagnostics) {
    const double a1 = 0.5 / d.cov_xx, a2 = 0.5 / d.cov_yy;
    EXPECT_LT(std::abs(a1 / p.alpha1 - 1.0), 0.01);
    EXPECT_LT(std::abs(a2 / p.alpha2 - 1.0), 0.01);
    EXPECT_GT(d.fidelity_vs_gausson, 0.999);
  }
}

TEST(SplitStep, FreeGaussianWidthLaw) {
  // |psi|^2 ~ exp(-a x^2): variance 1/(2a) + a t^2 / 2 in each direction.
  const Grid2D g(256, 24.0);
  const double a = 1.0;
  PdeSettings ps;
  ps.t_end = 3.0;
  ps.dt = 1e-3;
  ps.sample_every = 500;
  const auto r = evolve(sample_gausson(stationary_state(a, a, 0.0), g), PdeModel::free(0.0), ps);
  for (const auto& d : r.diagnostics) {
    const double want = 0.5 / a + 0.5 * a * d.t * d.t;
    EXPECT_NEAR(d.cov_xx, want, 1e-8) << "t " << d.t;
    EXPECT_NEAR(d.cov_yy, want, 1e-8) << "t " << d.t;
    EXPECT_NEAR(d.cov_xy, 0.0, 1e-10);
  }
}

TEST(SplitStep, FollowsGaussonOdeInBothFrames) {
  // The ansatz is exact for this equation: the PDE must track the ODE flow.
  const Grid2D g(128, 8.0);
  const TrapConfig c = trap(0.9, 1.0);
  const auto s = generic_state();
  OdeSettings os;
  os.t_end = 1.0;
  os.sample_every = 250;
  os.rel_tol = 1e-12;
  os.abs_tol = 1e-14;
  const auto ode = integrate(s, c, os);
  for (Frame fr : {Frame::Lab, Frame::Rotating}) {
    PdeSettings ps;
    ps.frame = fr;
    ps.t_end = 1.0;
    ps.sample_every = 250;
    SplitStepSolver solver(g, PdeModel::from(c), ps);
    solver.load(sample_gausson(s, g));
    for (std::size_t k = 1; k < ode.samples.size(); ++k) {
      solver.advance(250);
      const auto d = diagnose(solver.field(), PdeModel::from(c), ps, ode.samples[k]);
      EXPECT_GT(d.fidelity_vs_gausson, 1.0 - 1e-6) << "frame " << int(fr) << " t " << d.t;
    }
  }
}

TEST(SplitStep, EnergyConserved) {
  const Grid2D g(64, 8.0);
  const TrapConfig c = trap(0.9, 1.0);
  // The most compact root; the elongated ones need a wider, finer grid.
  const auto roots = find_all_roots(c, ContinuationSettings{});
  const auto p = *std::max_element(roots.begin(), roots.end(), [](const auto& x, const auto& y) {
    return x.alpha1 * x.alpha2 < y.alpha1 * y.alpha2;
  });
  for (Frame fr : {Frame::Lab, Frame::Rotating}) {
    PdeSettings ps;
    ps.frame = fr;
    ps.t_end = 10.0;
    ps.sample_every = 1000;
    const auto r = evolve(sample_gausson(p.state(), g), c, ps);
    const double e0 = r.diagnostics.front().energy;
    for (const auto& d : r.diagnostics)
      EXPECT_LT(std::abs(d.energy - e0) / std::abs(e0), 1e-6) << "frame " << int(fr);
  }
}

TEST(PdeEnergy, MatchesClosedFormGaussianEnergy) {
  const Grid2D g(128, 10.0);
  const auto s = generic_state();
  for (double b : {0.0, 1.0})
    for (double om : {0.0, 0.7}) {
      const TrapConfig c = trap(om, b);
      const double spectral = pde_energy(sample_gausson(s, g), PdeModel::from(c), Frame::Rotating);
      EXPECT_NEAR(spectral, energy(s, c), 1e-9);
    }
}

TEST(StrangOrder, SecondOrderInDt) {
  const Grid2D g(64, 8.0);
  PdeSettings ps;
  ps.t_end = 0.5;
  const auto st = strang_order_study(sample_gausson(generic_state(), g),
                                     PdeModel::from(trap(0.9, 1.0)), ps, {2e-3, 1e-3, 5e-4, 2.5e-4});
  EXPECT_NEAR(st.fitted_order, 2.0, 0.2);
  for (double o : st.pairwise_orders) EXPECT_NEAR(o, 2.0, 0.3);
}

TEST(Snapshot, RoundTrip) {
  const Grid2D g(16, 4.0);
  auto f = sample_gausson(generic_state(), g, 0.75);
  std::stringstream ss;
  write_snapshot(ss, f);
  EXPECT_EQ(ss.str().size(), 4u + 8u + 8u + 16u * 16u * 8u);
  const auto r = read_snapshot(ss);
  EXPECT_EQ(r.grid, g);
  EXPECT_EQ(r.t, 0.75);
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    EXPECT_EQ(r.values[i].real(), static_cast<float>(f.values[i].real()));
    EXPECT_EQ(r.values[i].imag(), static_cast<float>(f.values[i].imag()));
  }
  std::stringstream cut(ss.str().substr(0, 30));
  EXPECT_THROW(read_snapshot(cut), ConfigError);
}

TEST(PdeDiagnosticsCsv, Columns) {
  std::stringstream ss;
  write_pde_diagnostics_csv(ss, {PdeDiagnostics{}});
  const auto t = csv::read(ss);
  EXPECT_EQ(t.header, (std::vector<std::string>{"t", "norm", "energy", "cov_xx", "cov_yy", "cov_xy",
                                                 "fidelity_vs_gausson"}));
}

TEST(SplitStep, NonFiniteFieldIsReported) {
  const Grid2D g(16, 4.0);
  auto f = sample_gausson(generic_state(), g);
  f.values[5] = cplx(NAN, 0.0);
  PdeSettings ps;
  ps.t_end = 0.01;
  ps.dt = 0.01;
  EXPECT_THROW(step(f, trap(0.0, 1.0), ps), NonFinite);
}
