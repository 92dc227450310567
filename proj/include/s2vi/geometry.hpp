#pragma once

// Primitives on R^3, SO(3) and the two-sphere.

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "s2vi/errors.hpp"

namespace s2vi {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Tolerance used when validating unit vectors and tangency at type boundaries.
inline constexpr double kUnitTol = 1e-9;
/// Tolerance on |f . q| accepted by cayley_rotate.
inline constexpr double kGaugeTol = 1e-9;

inline Vec3 e1() { return Vec3::UnitX(); }
inline Vec3 e2() { return Vec3::UnitY(); }
inline Vec3 e3() { return Vec3::UnitZ(); }

inline bool is_finite(const Vec3& v) { return v.allFinite(); }

/// A point on S^2. Construction validates the norm; it never normalizes.
class UnitVector {
 public:
  explicit UnitVector(const Vec3& v) : v_(v) {
    if (!v.allFinite()) throw Error(ErrorKind::NotUnit, "non-finite components");
    const double err = std::abs(v.dot(v) - 1.0);
    if (err > kUnitTol) {
      throw Error(ErrorKind::NotUnit, "|v.v - 1| = " + std::to_string(err));
    }
  }
  UnitVector(double x, double y, double z) : UnitVector(Vec3(x, y, z)) {}

  /// Explicit normalization, intended for preparing inputs (rounded input data).
  static UnitVector renormalize(const Vec3& v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw Error(ErrorKind::NotUnit, "cannot normalize a zero or non-finite vector");
    }
    return UnitVector(Vec3(v / n));
  }

  const Vec3& vec() const noexcept { return v_; }
  operator const Vec3&() const noexcept { return v_; }
  double operator[](int i) const { return v_[i]; }

 private:
  Vec3 v_;
};

/// hat(a) b = a x b.
inline Mat3 hat(const Vec3& a) {
  Mat3 m;
  m << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
       -a.y(), a.x(), 0.0;
  return m;
}

/// An element of SO(3), validated at construction.
class Rotation {
 public:
  explicit Rotation(const Mat3& m) : m_(m) {
    if (!m.allFinite()) throw Error(ErrorKind::NotRotation, "non-finite entries");
    const double orth = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (orth > 1e-9) {
      throw Error(ErrorKind::NotRotation, "orthogonality residual " + std::to_string(orth));
    }
    if (!(m.determinant() > 0.0)) throw Error(ErrorKind::NotRotation, "det <= 0");
  }

  static Rotation identity() { return Rotation(Mat3::Identity()); }

  const Mat3& matrix() const noexcept { return m_; }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

 private:
  Mat3 m_;
};

/// Cayley map F = ((1 - f.f) I + 2 f f^T + 2 hat(f)) / (1 + f.f).
/// Rotates about f/|f| by 2 atan|f|.
inline Rotation cayley(const Vec3& f) {
  const double ff = f.dot(f);
  const Mat3 m = ((1.0 - ff) * Mat3::Identity() + 2.0 * f * f.transpose() + 2.0 * hat(f)) / (1.0 + ff);
  return Rotation(m);
}

/// F(f) q for f orthogonal to q, without forming F. No renormalization.
inline Vec3 cayley_rotate_unchecked(const Vec3& f, const Vec3& q) {
  const double ff = f.dot(f);
  return ((1.0 - ff) * q + 2.0 * f.cross(q)) / (1.0 + ff);
}

/// (F(f) - I) q for f orthogonal to q, free of the cancellation in F q - q.
inline Vec3 cayley_displacement(const Vec3& f, const Vec3& q) {
  const double ff = f.dot(f);
  return 2.0 * (f.cross(q) - ff * q) / (1.0 + ff);
}

inline UnitVector cayley_rotate(const Vec3& f, const UnitVector& q) {
  const double gauge = std::abs(f.dot(q.vec()));
  if (gauge > kGaugeTol) {
    throw Error(ErrorKind::GaugeViolation, "|f.q| = " + std::to_string(gauge));
  }
  return UnitVector(cayley_rotate_unchecked(f, q.vec()));
}

/// Component of v orthogonal to q: v - (q.v) q.
inline Vec3 project_tangent(const Vec3& q, const Vec3& v) { return v - q.dot(v) * q; }

}  // namespace s2vi
