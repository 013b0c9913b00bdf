#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gausson/gausson_ode.hpp"
#include "oracles.hpp"

using namespace gausson;

namespace {

const double kW1 = std::sqrt(2.0 / 3.0);
const double kW2 = std::sqrt(4.0 / 3.0);

TrapConfig trap(double om, double b) { return TrapConfig(kW1, kW2, om, b); }

GaussonState2 generic_state() {
  GaussonState2 s;
  s.A = SymMatrix<2>::from_upper((Mat<2>() << 1.5, 0.1, 0.1, 2.0).finished());
  s.B = SymMatrix<2>::from_upper((Mat<2>() << -0.1, 0.2, 0.2, 0.05).finished());
  s.N = 1.0;
  s.N = 1.0 / std::sqrt(gausson_norm(s));
  return s;
}

double max_shape_dev(const GaussonState2& a, const GaussonState2& b) {
  double m = 0.0;
  for (int k = 0; k < 3; ++k) {
    m = std::max(m, std::abs(a.A.packed()[k] - b.A.packed()[k]));
    m = std::max(m, std::abs(a.B.packed()[k] - b.B.packed()[k]));
  }
  return m;
}

}  // namespace

TEST(Rhs, LinearGroundStateIsStationary) {
  const TrapConfig c = trap(0.0, 0.0);
  const auto s = stationary_state(kW1, kW2, 0.0);
  const auto d = rhs(s, c);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(d.A.packed()[k], 0.0, 1e-15);
    EXPECT_NEAR(d.B.packed()[k], 0.0, 1e-15);
  }
  EXPECT_EQ(d.xi.norm(), 0.0);
  EXPECT_EQ(d.pi.norm(), 0.0);
  EXPECT_EQ(d.N, 0.0);
  EXPECT_NEAR(d.f, -0.5 * (kW1 + kW2), 1e-15);
  EXPECT_EQ(d.t, 1.0);
}

TEST(Rhs, NonlinearClosedFormAtRestIsStationary) {
  const auto s = stationary_state(std::sqrt(5.0 / 3.0) + 1.0, std::sqrt(7.0 / 3.0) + 1.0, 0.0);
  const auto d = rhs(s, trap(0.0, 1.0));
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(d.A.packed()[k], 0.0, 1e-12);
    EXPECT_NEAR(d.B.packed()[k], 0.0, 1e-12);
  }
}

TEST(Rhs, RotationCommutatorOnDiagonalWidth) {
  // W = [[0, -Om], [Om, 0]]; -(W A - A W) for A = Diag(a1, a2) has zero
  // diagonal and off-diagonal -Om (a1 - a2).
  const double a1 = 0.6, a2 = 1.9, om = 0.45;
  const auto s = stationary_state(a1, a2, 0.0);
  const auto d = rhs(s, trap(om, 0.0));
  EXPECT_NEAR(d.A(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(d.A(1, 1), 0.0, 1e-15);
  EXPECT_NEAR(d.A(0, 1), -om * (a1 - a2), 1e-15);
}

TEST(Rhs, ThreeDimensionalThirdAxisDecouples) {
  const TrapConfig c(kW1, kW2, 0.7, 0.5, 1.3);
  GaussonState3 s;
  s.A = SymMatrix<3>::diagonal(Vec<3>(1.0, 1.5, 2.0));
  const auto d = rhs(s, c);
  // A33 obeys the uncoupled 1D law 2 B33 A33 = 0, B33 gets -A33^2 + w3^2 + 2 b A33.
  EXPECT_NEAR(d.A(2, 2), 0.0, 1e-15);
  EXPECT_NEAR(d.B(2, 2), -4.0 + 1.69 + 2.0, 1e-14);
  EXPECT_NEAR(d.A(0, 2), 0.0, 1e-15);
}

TEST(Integrate, StationaryRootIsAFixedPoint) {
  const TrapConfig c = trap(0.9, 1.0);
  const auto roots = oracle::polynomial_roots(kW1 * kW1, kW2 * kW2, 0.9, 1.0);
  ASSERT_FALSE(roots.empty());
  for (const auto& r : roots) {
    const auto s = stationary_state(r.a1, r.a2, r.beta);
    OdeSettings os;
    const auto traj = integrate(s, c, os);
    ASSERT_EQ(traj.samples.size(), 101u);
    for (const auto& x : traj.samples) {
      EXPECT_LT(max_shape_dev(x, s), 1e-8);
      EXPECT_LT((x.xi - s.xi).norm() + (x.pi - s.pi).norm(), 1e-8);
    }
  }
}

TEST(Integrate, CenterOfMassOscillatesHarmonically) {
  auto s = stationary_state(kW1, kW2, 0.0);
  s.xi = Vec<2>(0.1, 0.0);
  OdeSettings os;
  os.sample_every = 10;
  const auto traj = integrate(s, trap(0.0, 0.0), os);
  for (const auto& x : traj.samples) {
    EXPECT_NEAR(x.xi(0), 0.1 * std::cos(kW1 * x.t), 1e-9);
    EXPECT_NEAR(x.xi(1), 0.0, 1e-15);
    EXPECT_LT(max_shape_dev(x, s), 1e-12);
  }
}

TEST(Integrate, SampleTimesAreExact) {
  OdeSettings os;
  os.t_end = 1.0;
  os.dt = 0.01;
  os.sample_every = 10;
  for (auto m : {OdeMethod::RK4Fixed, OdeMethod::RK45Adaptive}) {
    os.method = m;
    const auto traj = integrate(generic_state(), trap(0.3, 1.0), os);
    ASSERT_EQ(traj.samples.size(), 11u);
    for (std::size_t i = 0; i < traj.samples.size(); ++i)
      EXPECT_NEAR(traj.samples[i].t, 0.1 * i, 1e-12);
  }
}

TEST(Integrate, NormAndEnergyConserved) {
  for (double om : {0.0, 0.5, 1.5}) {
    auto s = generic_state();
    s.xi = Vec<2>(0.3, -0.1);
    s.pi = Vec<2>(0.0, 0.2);
    const TrapConfig c = trap(om, 1.0);
    const auto traj = integrate(s, c, OdeSettings{});
    const auto& d0 = traj.diagnostics.front();
    for (const auto& d : traj.diagnostics) {
      EXPECT_LT(std::abs(d.norm - d0.norm) / d0.norm, 1e-8) << "Omega " << om;
      EXPECT_LT(std::abs(d.energy - d0.energy) / std::abs(d0.energy), 1e-6) << "Omega " << om;
    }
  }
}

TEST(Integrate, ThreeDimensionalConservation) {
  const TrapConfig c(kW1, kW2, 0.4, 1.0, 1.2);
  GaussonState3 s;
  s.A = SymMatrix<3>::from_upper((Mat<3>() << 1.5, 0.1, 0.05, 0, 2.0, -0.1, 0, 0, 1.1).finished());
  s.B = SymMatrix<3>::off_diagonal(0.1);
  s.xi = Vec<3>(0.2, 0.0, -0.3);
  s.pi = Vec<3>(0.0, 0.1, 0.2);
  const auto traj = integrate(s, c, OdeSettings{});
  const auto& d0 = traj.diagnostics.front();
  for (const auto& d : traj.diagnostics) {
    EXPECT_LT(std::abs(d.norm - d0.norm) / d0.norm, 1e-8);
    EXPECT_LT(std::abs(d.energy - d0.energy) / std::abs(d0.energy), 1e-6);
  }
  // Motion along the rotation axis is a 1D oscillator at w3.
  for (const auto& x : traj.samples)
    EXPECT_NEAR(x.xi(2), -0.3 * std::cos(1.2 * x.t) + 0.2 / 1.2 * std::sin(1.2 * x.t), 1e-8);
}

TEST(Energy, HarmonicGroundState) {
  const auto s = stationary_state(kW1, kW2, 0.0);
  EXPECT_NEAR(energy(s, trap(0.0, 0.0)), 0.5 * (kW1 + kW2), 1e-14);
}

TEST(Energy, AgreesWithQuadrature) {
  auto s = generic_state();
  s.xi = Vec<2>(0.4, -0.3);
  s.pi = Vec<2>(0.25, 0.5);
  s.N = 0.9;
  oracle::Gauss2 g;
  g.A = s.A.full();
  g.B = s.B.full();
  g.xi = s.xi;
  g.pi = s.pi;
  g.N = s.N;
  for (double om : {0.0, 0.7, -1.1})
    for (double b : {0.0, 1.0, -1.0}) {
      const double q = oracle::quad_energy(g, kW1 * kW1, kW2 * kW2, om, b);
      EXPECT_NEAR(energy(s, trap(om, b)), q, 1e-8 * (1.0 + std::abs(q)))
          << "Omega " << om << " b " << b;
    }
}

TEST(Decoupling, ShapeTrajectoryBitwiseIndependentOfDisplacement) {
  OdeSettings os;
  os.method = OdeMethod::RK4Fixed;
  os.sample_every = 1;
  const TrapConfig c = trap(0.9, 1.0);
  const auto s0 = generic_state();
  auto s1 = s0;
  s1.xi = Vec<2>(0.7, -0.4);
  s1.pi = Vec<2>(0.3, 0.9);
  const auto a = integrate(s0, c, os);
  const auto b = integrate(s1, c, os);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    ASSERT_EQ(a.samples[i].A, b.samples[i].A) << "sample " << i;
    ASSERT_EQ(a.samples[i].B, b.samples[i].B) << "sample " << i;
  }
}

TEST(Decoupling, CenterOfMassFollowsClassicalTrajectory) {
  for (double om : {0.3, 0.9, 1.4}) {
    auto s = generic_state();
    s.xi = Vec<2>(0.7, -0.4);
    s.pi = Vec<2>(0.3, 0.9);
    const auto traj = integrate(s, trap(om, 1.0), OdeSettings{});
    const Eigen::Vector4d z0(0.7, -0.4, 0.3, 0.9);
    for (const auto& x : traj.samples) {
      const auto z = oracle::com_exact(z0, kW1 * kW1, kW2 * kW2, om, x.t);
      const double scale = 1.0 + z.norm();
      EXPECT_NEAR(x.xi(0), z(0), 1e-8 * scale);
      EXPECT_NEAR(x.xi(1), z(1), 1e-8 * scale);
      EXPECT_NEAR(x.pi(0), z(2), 1e-8 * scale);
      EXPECT_NEAR(x.pi(1), z(3), 1e-8 * scale);
    }
  }
}

TEST(Integrate, PositiveDefinitenessFloorAborts) {
  // A mismatched harmonic packet breathes: A drops from 4 towards w^2 / 4.
  auto s = stationary_state(4.0, 4.0, 0.0);
  OdeSettings os;
  os.pd_floor = 1.0;
  for (auto m : {OdeMethod::RK4Fixed, OdeMethod::RK45Adaptive}) {
    os.method = m;
    Trajectory<2> traj;
    try {
      integrate(s, trap(0.0, 0.0), os, traj);
      FAIL() << "expected PositiveDefinitenessLost";
    } catch (const PositiveDefinitenessLost& e) {
      EXPECT_GT(e.time(), 0.0);
      EXPECT_LT(e.time(), 10.0);
      EXPECT_LT(e.min_eig(), 1.0);
      EXPECT_FALSE(traj.samples.empty());
    }
  }
}

TEST(Integrate, StepUnderflowReported) {
  OdeSettings os;
  os.rel_tol = 1e-30;
  os.abs_tol = 1e-30;
  os.dt_min = 1e-3;
  EXPECT_THROW(integrate(generic_state(), trap(0.5, 1.0), os), StepUnderflow);
}

TEST(Integrate, RejectsInvalidInput) {
  auto s = generic_state();
  s.A = SymMatrix<2>::diagonal(Vec<2>(1.0, 0.0));
  EXPECT_THROW(integrate(s, trap(0.0, 0.0), OdeSettings{}), InvalidState);
  OdeSettings os;
  os.dt = -1.0;
  EXPECT_THROW(integrate(generic_state(), trap(0.0, 0.0), os), ConfigError);
  os = OdeSettings{};
  os.sample_every = 0;
  EXPECT_THROW(integrate(generic_state(), trap(0.0, 0.0), os), ConfigError);
}

TEST(TrajectoryCsv, HeaderAndRoundTrip) {
  OdeSettings os;
  os.t_end = 0.2;
  os.dt = 0.1;
  os.sample_every = 1;
  const auto traj = integrate(generic_state(), trap(0.4, 1.0), os);
  std::stringstream ss;
  write_trajectory_csv(ss, traj);
  const auto table = csv::read(ss);
  const std::vector<std::string> expected{"t",   "A11", "A22", "A12", "B11", "B22",  "B12",
                                          "xi1", "xi2", "pi1", "pi2", "N",   "f",    "norm",
                                          "energy", "min_eig_A"};
  EXPECT_EQ(table.header, expected);
  ASSERT_EQ(table.rows.size(), 3u);
  EXPECT_EQ(std::stod(table.rows[2][table.column("A12")]), traj.samples[2].A(0, 1));
  EXPECT_EQ(std::stod(table.rows[1][table.column("energy")]), traj.diagnostics[1].energy);
}
