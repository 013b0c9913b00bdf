#pragma once

// Domain types for Gaussian solutions (Gaussons) of the logarithmic
// Schroedinger equation in a harmonic trap rotating about its third
// principal axis. Units: hbar = m = 1.
//
//   psi(r) = N exp(i f) exp(-1/2 (r - xi).(A + iB).(r - xi) + i pi.r)

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gausson/errors.hpp"

namespace gausson {

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;
template <int D>
using Mat = Eigen::Matrix<double, D, D>;

namespace detail {

// Packed order: diagonal and off-diagonal of the rotation-plane block first,
// then the third-axis entries, so the 2D layout is a prefix of the 3D one.
template <int D>
struct SymLayout;

template <>
struct SymLayout<2> {
  static constexpr std::array<std::pair<int, int>, 3> entries{{{0, 0}, {1, 1}, {0, 1}}};
};

template <>
struct SymLayout<3> {
  static constexpr std::array<std::pair<int, int>, 6> entries{
      {{0, 0}, {1, 1}, {0, 1}, {2, 2}, {0, 2}, {1, 2}}};
};

}  // namespace detail

/// Real symmetric D x D matrix stored as its packed upper triangle.
template <int D>
class SymMatrix {
  static_assert(D == 2 || D == 3, "only 2D and 3D are supported");

 public:
  static constexpr int kSize = D * (D + 1) / 2;
  using Packed = std::array<double, kSize>;

  SymMatrix() { packed_.fill(0.0); }
  explicit SymMatrix(const Packed& packed) : packed_(packed) {}

  /// Takes the upper triangle of m; the lower triangle is ignored.
  static SymMatrix from_upper(const Mat<D>& m) {
    Packed p;
    for (int k = 0; k < kSize; ++k) {
      const auto [i, j] = detail::SymLayout<D>::entries[k];
      p[k] = m(i, j);
    }
    return SymMatrix(p);
  }

  static SymMatrix diagonal(const Vec<D>& d) {
    SymMatrix s;
    for (int i = 0; i < D; ++i) s.packed_[i == 2 ? 3 : i] = d(i);
    return s;
  }

  /// Zero diagonal, value at (0,1) and (1,0).
  static SymMatrix off_diagonal(double value) {
    SymMatrix s;
    s.packed_[2] = value;
    return s;
  }

  Mat<D> full() const {
    Mat<D> m;
    for (int k = 0; k < kSize; ++k) {
      const auto [i, j] = detail::SymLayout<D>::entries[k];
      m(i, j) = packed_[k];
      m(j, i) = packed_[k];
    }
    return m;
  }

  double operator()(int i, int j) const {
    if (i > j) std::swap(i, j);
    for (int k = 0; k < kSize; ++k) {
      const auto [a, b] = detail::SymLayout<D>::entries[k];
      if (a == i && b == j) return packed_[k];
    }
    return 0.0;
  }

  const Packed& packed() const { return packed_; }
  Packed& packed() { return packed_; }

  friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

 private:
  Packed packed_;
};

/// Physical parameters of the rotating trap.
///
/// Rotation is about the third principal axis. A negative rotation rate is
/// stored as its magnitude plus orientation -1; the stationarity problem is
/// invariant under (Omega, beta) -> (-Omega, -beta).
class TrapConfig {
 public:
  TrapConfig(double omega1, double omega2, double rotation, double b,
             std::optional<double> omega3 = std::nullopt)
      : omega1_(omega1),
        omega2_(omega2),
        omega3_(omega3),
        rotation_(std::abs(rotation)),
        orientation_(rotation < 0.0 ? -1 : 1),
        b_(b) {
    if (!std::isfinite(omega1) || omega1 <= 0.0)
      throw ConfigError("omega1 must be positive and finite");
    if (!std::isfinite(omega2) || omega2 <= 0.0)
      throw ConfigError("omega2 must be positive and finite");
    if (!(omega1 < omega2)) throw ConfigError("omega1 must be smaller than omega2");
    if (omega3 && (!std::isfinite(*omega3) || *omega3 <= 0.0))
      throw ConfigError("omega3 must be positive and finite");
    if (!std::isfinite(rotation)) throw ConfigError("Omega must be finite");
    if (!std::isfinite(b)) throw ConfigError("b must be finite");
  }

  double omega1() const { return omega1_; }
  double omega2() const { return omega2_; }
  std::optional<double> omega3() const { return omega3_; }
  /// |Omega|, always >= 0.
  double rotation() const { return rotation_; }
  /// +1 or -1.
  int orientation() const { return orientation_; }
  double signed_rotation() const { return orientation_ * rotation_; }
  double b() const { return b_; }
  int dim() const { return omega3_ ? 3 : 2; }

  TrapConfig with_rotation(double rotation) const {
    return TrapConfig(omega1_, omega2_, rotation, b_, omega3_);
  }
  TrapConfig with_b(double b) const {
    return TrapConfig(omega1_, omega2_, signed_rotation(), b, omega3_);
  }

  /// Diag(omega_i^2).
  template <int D>
  Mat<D> potential() const {
    Mat<D> v = Mat<D>::Zero();
    v(0, 0) = omega1_ * omega1_;
    v(1, 1) = omega2_ * omega2_;
    if constexpr (D == 3) {
      if (!omega3_) throw ConfigError("3D state requires omega3");
      v(2, 2) = *omega3_ * *omega3_;
    }
    return v;
  }

  /// Antisymmetric generator W with W v = Omega x v, Omega along the third axis.
  template <int D>
  Mat<D> rotation_generator() const {
    Mat<D> w = Mat<D>::Zero();
    w(0, 1) = -signed_rotation();
    w(1, 0) = signed_rotation();
    return w;
  }

 private:
  double omega1_;
  double omega2_;
  std::optional<double> omega3_;
  double rotation_;
  int orientation_;
  double b_;
};

template <int D>
struct GaussonState {
  static constexpr int kPackedSize = 2 * SymMatrix<D>::kSize + 2 * D + 2;
  using Packed = std::array<double, kPackedSize>;

  SymMatrix<D> A;
  SymMatrix<D> B;
  Vec<D> xi = Vec<D>::Zero();
  Vec<D> pi = Vec<D>::Zero();
  double N = 1.0;
  double f = 0.0;
  double t = 0.0;

  /// Layout: A, B (packed), xi, pi, N, f.
  Packed pack() const {
    Packed p{};
    int k = 0;
    for (double v : A.packed()) p[k++] = v;
    for (double v : B.packed()) p[k++] = v;
    for (int i = 0; i < D; ++i) p[k++] = xi(i);
    for (int i = 0; i < D; ++i) p[k++] = pi(i);
    p[k++] = N;
    p[k] = f;
    return p;
  }

  static GaussonState unpack(const Packed& p, double t) {
    GaussonState s;
    int k = 0;
    for (double& v : s.A.packed()) v = p[k++];
    for (double& v : s.B.packed()) v = p[k++];
    for (int i = 0; i < D; ++i) s.xi(i) = p[k++];
    for (int i = 0; i < D; ++i) s.pi(i) = p[k++];
    s.N = p[k++];
    s.f = p[k];
    s.t = t;
    return s;
  }
};

using GaussonState2 = GaussonState<2>;
using GaussonState3 = GaussonState<3>;

template <int D>
double min_eigenvalue(const SymMatrix<D>& m) {
  Eigen::SelfAdjointEigenSolver<Mat<D>> es(m.full(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

template <int D>
void validate(const GaussonState<D>& s) {
  if (!(s.N > 0.0) || !std::isfinite(s.N)) throw InvalidState("N must be positive");
  if (!(min_eigenvalue(s.A) > 0.0)) throw InvalidState("A must be positive definite");
}

template <int D>
std::complex<double> evaluate_wavefunction(const GaussonState<D>& s, const Vec<D>& r) {
  const Mat<D> a = s.A.full();
  const Mat<D> b = s.B.full();
  const Vec<D> d = r - s.xi;
  const double re = -0.5 * d.dot(a * d);
  const double im = -0.5 * d.dot(b * d) + s.pi.dot(r) + s.f;
  return s.N * std::exp(std::complex<double>(re, im));
}

template <int D>
std::vector<std::complex<double>> evaluate_wavefunction(const GaussonState<D>& s,
                                                        std::span<const Vec<D>> points) {
  validate(s);
  std::vector<std::complex<double>> out;
  out.reserve(points.size());
  for (const auto& r : points) out.push_back(evaluate_wavefunction(s, r));
  return out;
}

/// Integral of |psi|^2: N^2 pi^{d/2} det(A)^{-1/2}.
template <int D>
double gausson_norm(const GaussonState<D>& s) {
  const double det = s.A.full().determinant();
  if (!(det > 0.0)) throw InvalidState("det(A) must be positive");
  return s.N * s.N * std::pow(std::numbers::pi, 0.5 * D) / std::sqrt(det);
}

/// Counter-clockwise rotation by `angle` in the (1,2) plane.
template <int D>
Mat<D> rotation_matrix(double angle) {
  Mat<D> r = Mat<D>::Identity();
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  r(0, 0) = c;
  r(0, 1) = -s;
  r(1, 0) = s;
  r(1, 1) = c;
  return r;
}

/// Rotates the packet by `angle` about the third axis: psi'(r) = psi(R^T r).
/// Maps a co-rotating-frame state at time t to the lab frame with angle = Omega t.
template <int D>
GaussonState<D> rotate_frame(const GaussonState<D>& s, double angle) {
  const Mat<D> r = rotation_matrix<D>(angle);
  GaussonState<D> out = s;
  out.A = SymMatrix<D>::from_upper(r * s.A.full() * r.transpose());
  out.B = SymMatrix<D>::from_upper(r * s.B.full() * r.transpose());
  out.xi = r * s.xi;
  out.pi = r * s.pi;
  return out;
}

/// A = Diag(alpha1, alpha2), B = offdiag(beta), at rest, unit norm.
inline GaussonState2 stationary_state(double alpha1, double alpha2, double beta) {
  GaussonState2 s;
  s.A = SymMatrix<2>::diagonal(Vec<2>(alpha1, alpha2));
  s.B = SymMatrix<2>::off_diagonal(beta);
  s.N = std::pow(alpha1 * alpha2, 0.25) / std::sqrt(std::numbers::pi);
  return s;
}

}  // namespace gausson
