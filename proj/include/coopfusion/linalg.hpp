#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

namespace coopfusion {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

/// Active counter-clockwise rotation: maps a body-frame vector into the
/// frame rotated by `angle`.
inline Mat2 rotation(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

template <typename Derived>
auto symmetrized(const Eigen::MatrixBase<Derived>& m) {
  using Plain = typename Derived::PlainObject;
  return Plain(0.5 * (m + m.transpose()));
}

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& m, double tol = 1e-9) {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

/// Smallest eigenvalue of the symmetric part of `m`.
template <typename Derived>
double min_eigenvalue(const Eigen::MatrixBase<Derived>& m) {
  using Plain = typename Derived::PlainObject;
  Eigen::SelfAdjointEigenSolver<Plain> es(symmetrized(m));
  return es.eigenvalues().minCoeff();
}

template <typename Derived>
bool is_psd(const Eigen::MatrixBase<Derived>& m, double tol = 1e-12) {
  return is_symmetric(m) && min_eigenvalue(m) >= -tol;
}

/// Nearest (Frobenius) positive semi-definite matrix: clips negative
/// eigenvalues of the symmetric part to zero.
template <typename Derived>
auto nearest_psd(const Eigen::MatrixBase<Derived>& m) {
  using Plain = typename Derived::PlainObject;
  Eigen::SelfAdjointEigenSolver<Plain> es(symmetrized(m));
  auto values = es.eigenvalues().cwiseMax(0.0).eval();
  Plain out = es.eigenvectors() * values.asDiagonal() * es.eigenvectors().transpose();
  return symmetrized(out);
}

}  // namespace coopfusion
