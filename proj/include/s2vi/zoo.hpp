#pragma once

// Example mechanical systems on (S^2)^n. e3 = (0, 0, 1) points along gravity,
// so a gravitational potential reads V = -m g l e3 . q.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "s2vi/errors.hpp"
#include "s2vi/geometry.hpp"
#include "s2vi/model.hpp"

namespace s2vi {

/// Threshold below which pairwise distances (or 1 - c^2) count as a collision.
inline constexpr double kSingularTol = 1e-10;

namespace detail {

inline void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, std::string(what) + " must be positive");
}

inline void zero(std::span<Vec3> g) {
  for (auto& x : g) x.setZero();
}

}  // namespace detail

/// Bodies with no potential; each q_i follows a great circle at constant w_i.
class FreeSpheres final : public Model {
 public:
  explicit FreeSpheres(std::vector<double> inertia) : inertia_(diagonal_inertia(inertia)) {}

  std::string name() const override { return "free_spheres"; }
  const InertiaSpec& inertia() const override { return inertia_; }
  double potential(std::span<const Vec3>) const override { return 0.0; }
  void potential_gradient(std::span<const Vec3>, std::span<Vec3> grad) const override { detail::zero(grad); }
  std::optional<Vec3> symmetry_axis() const override { return e3(); }

  std::optional<SystemState> exact_solution(const SystemState& s0, double t) const override {
    SystemState s = s0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double rate = s0.w[i].norm();
      if (rate == 0.0) continue;
      const double angle = rate * (t - s0.t);
      s.q[i] = std::cos(angle) * s0.q[i] + std::sin(angle) * (s0.w[i] / rate).cross(s0.q[i]);
    }
    s.t = t;
    return s;
  }

 private:
  InertiaSpec inertia_;
};

/// Single spherical pendulum, M = m l^2, V = -m g l e3 . q.
class SphericalPendulum final : public Model {
 public:
  SphericalPendulum(double m, double l, double g) : weight_(m * g * l) {
    detail::require_positive(m, "mass");
    detail::require_positive(l, "length");
    const double ml2 = m * l * l;
    inertia_ = diagonal_inertia(std::span(&ml2, 1));
  }

  std::string name() const override { return "spherical_pendulum"; }
  const InertiaSpec& inertia() const override { return inertia_; }
  double potential(std::span<const Vec3> q) const override { return -weight_ * q[0].z(); }
  void potential_gradient(std::span<const Vec3>, std::span<Vec3> grad) const override {
    grad[0] = -weight_ * e3();
  }
  std::optional<Vec3> symmetry_axis() const override { return e3(); }

 private:
  double weight_;
  InertiaSpec inertia_;
};

/// Two point masses on massless links, both pivoting spherically.
class DoubleSphericalPendulum final : public Model {
 public:
  DoubleSphericalPendulum(double m1, double m2, double l1, double l2, double g)
      : w1_((m1 + m2) * g * l1), w2_(m2 * g * l2) {
    detail::require_positive(m1, "m1");
    detail::require_positive(m2, "m2");
    detail::require_positive(l1, "l1");
    detail::require_positive(l2, "l2");
    Eigen::Matrix2d m;
    m << (m1 + m2) * l1 * l1, m2 * l1 * l2,
         m2 * l1 * l2, m2 * l2 * l2;
    inertia_ = validate_inertia(m);
  }

  std::string name() const override { return "double_spherical_pendulum"; }
  const InertiaSpec& inertia() const override { return inertia_; }
  double potential(std::span<const Vec3> q) const override { return -w1_ * q[0].z() - w2_ * q[1].z(); }
  void potential_gradient(std::span<const Vec3>, std::span<Vec3> grad) const override {
    grad[0] = -w1_ * e3();
    grad[1] = -w2_ * e3();
  }
  std::optional<Vec3> symmetry_axis() const override { return e3(); }

 private:
  double w1_, w2_;
  InertiaSpec inertia_;
};

/// Point masses on the unit sphere under the cotangent analogue of gravity,
///   V = -gamma/2 sum_{i != j} c_ij / sqrt(1 - c_ij^2),  c_ij = q_i . q_j.
class NBodySphere final : public Model {
 public:
  NBodySphere(std::vector<double> masses, double gamma) : gamma_(gamma) {
    for (double m : masses) detail::require_positive(m, "mass");
    inertia_ = diagonal_inertia(masses);
  }

  std::string name() const override { return "nbody_sphere"; }
  const InertiaSpec& inertia() const override { return inertia_; }
  std::optional<Vec3> symmetry_axis() const override { return e3(); }

  double potential(std::span<const Vec3> q) const override {
    double v = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
      for (std::size_t j = i + 1; j < q.size(); ++j) {
        const double c = q[i].dot(q[j]);
        v -= gamma_ * c / std::sqrt(gap(c, i, j));
      }
    return v;
  }

  void potential_gradient(std::span<const Vec3> q, std::span<Vec3> grad) const override {
    detail::zero(grad);
    for (std::size_t i = 0; i < q.size(); ++i)
      for (std::size_t j = i + 1; j < q.size(); ++j) {
        const double c = q[i].dot(q[j]);
        const double s = gap(c, i, j);
        const double k = -gamma_ / (s * std::sqrt(s));
        grad[i] += k * q[j];
        grad[j] += k * q[i];
      }
  }

 private:
  static double gap(double c, std::size_t i, std::size_t j) {
    const double s = 1.0 - c * c;
    if (!(s >= kSingularTol)) {
      throw Error(ErrorKind::PotentialSingular,
                  "bodies " + std::to_string(i) + " and " + std::to_string(j) + " are collinear (1 - c^2 = " +
                      std::to_string(s) + ")");
    }
    return s;
  }

  double gamma_;
  InertiaSpec inertia_;
};

/// A linear spring joining the link midpoints of pendula i and j, whose pivots
/// are separated by `offset` (pivot i to pivot j).
struct Spring {
  std::size_t i = 0;
  std::size_t j = 0;
  double stiffness = 0.0;
  Vec3 offset = Vec3::Zero();
};

/// Spherical pendula hanging from a horizontal plane, coupled by springs:
///   V = -sum m_i g l_i e3.q_i + sum 1/2 k_ij (|r_ij + l_j q_j/2 - l_i q_i/2| - |r_ij|)^2.
class SpringPendula final : public Model {
 public:
  SpringPendula(std::vector<double> masses, std::vector<double> lengths, std::vector<Spring> springs, double g)
      : lengths_(std::move(lengths)), springs_(std::move(springs)) {
    if (masses.size() != lengths_.size() || masses.empty()) {
      throw Error(ErrorKind::InvalidArgument, "masses and lengths must be non-empty and of equal size");
    }
    std::vector<double> diag(masses.size());
    weights_.resize(masses.size());
    for (std::size_t i = 0; i < masses.size(); ++i) {
      detail::require_positive(masses[i], "mass");
      detail::require_positive(lengths_[i], "length");
      diag[i] = masses[i] * lengths_[i] * lengths_[i];
      weights_[i] = masses[i] * g * lengths_[i];
    }
    for (const auto& s : springs_) {
      if (s.i == s.j || s.i >= masses.size() || s.j >= masses.size()) {
        throw Error(ErrorKind::InvalidArgument, "spring endpoints must be distinct valid indices");
      }
      if (s.stiffness < 0.0) throw Error(ErrorKind::InvalidArgument, "spring stiffness must be non-negative");
    }
    inertia_ = diagonal_inertia(diag);
  }

  std::string name() const override { return "spring_pendula"; }
  const InertiaSpec& inertia() const override { return inertia_; }
  const std::vector<Spring>& springs() const noexcept { return springs_; }

  double potential(std::span<const Vec3> q) const override {
    double v = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) v -= weights_[i] * q[i].z();
    for (const auto& s : springs_) {
      const double stretch = span_vector(s, q).norm() - s.offset.norm();
      v += 0.5 * s.stiffness * stretch * stretch;
    }
    return v;
  }

  void potential_gradient(std::span<const Vec3> q, std::span<Vec3> grad) const override {
    for (std::size_t i = 0; i < q.size(); ++i) grad[i] = -weights_[i] * e3();
    for (const auto& s : springs_) {
      const Vec3 d = span_vector(s, q);
      const double len = d.norm();
      if (len < 1e-12) {
        throw Error(ErrorKind::PotentialSingular,
                    "spring " + std::to_string(s.i) + "-" + std::to_string(s.j) + " has zero length");
      }
      const Vec3 pull = s.stiffness * (len - s.offset.norm()) / len * d;
      grad[s.j] += 0.5 * lengths_[s.j] * pull;
      grad[s.i] -= 0.5 * lengths_[s.i] * pull;
    }
  }

 private:
  Vec3 span_vector(const Spring& s, std::span<const Vec3> q) const {
    return s.offset + 0.5 * lengths_[s.j] * q[s.j] - 0.5 * lengths_[s.i] * q[s.i];
  }

  std::vector<double> lengths_;
  std::vector<double> weights_;
  std::vector<Spring> springs_;
  InertiaSpec inertia_;
};

/// Chain of n equal rigid elements (plus a clamped zeroth element along q0)
/// joined by rotational springs; models non-planar bending of a thin rod.
///
/// Inertia: M_ii = m_i l_i^2 (1/3 + n - i), M_ij = 1/2 sum_{k >= max(i,j)} m_k l_k^2
/// (1-based indices). Potential: link-midpoint gravity plus
/// sum_i 1/2 kappa_i (1 - q_{i-1} . q_i)^2.
class ElasticRod final : public Model {
 public:
  ElasticRod(std::size_t n, double total_mass, double total_length, std::vector<double> kappa, double g,
             const UnitVector& q0)
      : n_(n), kappa_(std::move(kappa)), g_(g), q0_(q0.vec()) {
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "rod needs at least one free element");
    detail::require_positive(total_mass, "total mass");
    detail::require_positive(total_length, "total length");
    if (kappa_.size() == 1) kappa_.assign(n, kappa_.front());
    if (kappa_.size() != n) throw Error(ErrorKind::InvalidArgument, "need one spring constant per element");
    mass_.assign(n, total_mass / static_cast<double>(n + 1));
    length_.assign(n, total_length / static_cast<double>(n + 1));

    const auto ni = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd m(ni, ni);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double v = 0.0;
        if (i == j) {
          v = mass_[i] * length_[i] * length_[i] * (1.0 / 3.0 + static_cast<double>(n - 1 - i));
        } else {
          for (std::size_t k = std::max(i, j); k < n; ++k) v += 0.5 * mass_[k] * length_[k] * length_[k];
        }
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      }
    }
    inertia_ = validate_inertia(m);

    // weight carried by element i: its own midpoint plus every element beyond it
    lever_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double beyond = 0.0;
      for (std::size_t k = i + 1; k < n; ++k) beyond += mass_[k];
      lever_[i] = g_ * length_[i] * (0.5 * mass_[i] + beyond);
    }
  }

  std::string name() const override { return "elastic_rod"; }
  const InertiaSpec& inertia() const override { return inertia_; }
  const Vec3& clamp_direction() const noexcept { return q0_; }

  double potential(std::span<const Vec3> q) const override {
    double v = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      v -= lever_[i] * q[i].z();
      const Vec3& prev = i == 0 ? q0_ : q[i - 1];
      const double b = 1.0 - prev.dot(q[i]);
      v += 0.5 * kappa_[i] * b * b;
    }
    return v;
  }

  void potential_gradient(std::span<const Vec3> q, std::span<Vec3> grad) const override {
    for (std::size_t i = 0; i < n_; ++i) grad[i] = -lever_[i] * e3();
    for (std::size_t i = 0; i < n_; ++i) {
      const Vec3& prev = i == 0 ? q0_ : q[i - 1];
      const double b = 1.0 - prev.dot(q[i]);
      grad[i] -= kappa_[i] * b * prev;
      if (i > 0) grad[i - 1] -= kappa_[i] * b * q[i];
    }
  }

 private:
  std::size_t n_;
  std::vector<double> kappa_;
  double g_;
  Vec3 q0_;
  std::vector<double> mass_;
  std::vector<double> length_;
  std::vector<double> lever_;
  InertiaSpec inertia_;
};

/// Permeability of free space, N / A^2.
inline constexpr double kMu0 = 4.0 * std::numbers::pi * 1e-7;

/// Thin bar magnets on fixed spherical pivots, M_ii = m_i l_i^2 / 12, interacting
/// through the dipole-dipole potential
///   V = sum_{i<j} mu nu_i nu_j / (4 pi r^3) [q_i.q_j - 3 (q_i.r)(q_j.r) / r^2].
class MagneticDipoleArray final : public Model {
 public:
  MagneticDipoleArray(std::vector<double> masses, std::vector<double> lengths, std::vector<double> moments,
                      std::vector<Vec3> pivots)
      : moments_(std::move(moments)), pivots_(std::move(pivots)) {
    const std::size_t n = masses.size();
    if (n == 0 || lengths.size() != n || moments_.size() != n || pivots_.size() != n) {
      throw Error(ErrorKind::InvalidArgument, "dipole arrays must be non-empty and of equal size");
    }
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) {
      detail::require_positive(masses[i], "mass");
      detail::require_positive(lengths[i], "length");
      diag[i] = masses[i] * lengths[i] * lengths[i] / 12.0;
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if ((pivots_[j] - pivots_[i]).norm() < kSingularTol) {
          throw Error(ErrorKind::PotentialSingular,
                      "pivots " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
        }
    inertia_ = diagonal_inertia(diag);
  }

  std::string name() const override { return "magnetic_dipole_array"; }
  const InertiaSpec& inertia() const override { return inertia_; }
  const std::vector<Vec3>& pivots() const noexcept { return pivots_; }

  double potential(std::span<const Vec3> q) const override {
    double v = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
      for (std::size_t j = i + 1; j < q.size(); ++j) {
        const Vec3 r = pivots_[j] - pivots_[i];
        const double r2 = r.squaredNorm();
        v += coupling(i, j, r2) * (q[i].dot(q[j]) - 3.0 / r2 * q[i].dot(r) * q[j].dot(r));
      }
    return v;
  }

  void potential_gradient(std::span<const Vec3> q, std::span<Vec3> grad) const override {
    detail::zero(grad);
    for (std::size_t i = 0; i < q.size(); ++i)
      for (std::size_t j = i + 1; j < q.size(); ++j) {
        const Vec3 r = pivots_[j] - pivots_[i];
        const double r2 = r.squaredNorm();
        const double c = coupling(i, j, r2);
        grad[i] += c * (q[j] - 3.0 / r2 * q[j].dot(r) * r);
        grad[j] += c * (q[i] - 3.0 / r2 * q[i].dot(r) * r);
      }
  }

 private:
  double coupling(std::size_t i, std::size_t j, double r2) const {
    return kMu0 * moments_[i] * moments_[j] / (4.0 * std::numbers::pi * r2 * std::sqrt(r2));
  }

  std::vector<double> moments_;
  std::vector<Vec3> pivots_;
  InertiaSpec inertia_;
};

/// Molecules on the unit sphere with pairwise Lennard-Jones interaction in
/// chord distance: V = sum_{i<j} 4 eps [(sigma/r)^12 - (sigma/r)^6].
class LennardJonesSphere final : public Model {
 public:
  LennardJonesSphere(std::vector<double> masses, double epsilon, double sigma) : epsilon_(epsilon), sigma_(sigma) {
    detail::require_positive(epsilon, "epsilon");
    detail::require_positive(sigma, "sigma");
    for (double m : masses) detail::require_positive(m, "mass");
    inertia_ = diagonal_inertia(masses);
  }

  std::string name() const override { return "lennard_jones_sphere"; }
  const InertiaSpec& inertia() const override { return inertia_; }
  std::optional<Vec3> symmetry_axis() const override { return e3(); }
  double sigma() const noexcept { return sigma_; }
  double epsilon() const noexcept { return epsilon_; }

  double potential(std::span<const Vec3> q) const override {
    double v = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
      for (std::size_t j = i + 1; j < q.size(); ++j) {
        const double s6 = sixth(q, i, j);
        v += 4.0 * epsilon_ * (s6 * s6 - s6);
      }
    return v;
  }

  void potential_gradient(std::span<const Vec3> q, std::span<Vec3> grad) const override {
    detail::zero(grad);
    for (std::size_t i = 0; i < q.size(); ++i)
      for (std::size_t j = i + 1; j < q.size(); ++j) {
        const Vec3 d = q[i] - q[j];
        const double r2 = d.squaredNorm();
        const double s6 = sixth(q, i, j);
        // dV/dr / r for the pair
        const double k = -4.0 * epsilon_ * (12.0 * s6 * s6 - 6.0 * s6) / r2;
        grad[i] += k * d;
        grad[j] -= k * d;
      }
  }

 private:
  double sixth(std::span<const Vec3> q, std::size_t i, std::size_t j) const {
    const double r2 = (q[i] - q[j]).squaredNorm();
    if (!(r2 >= kSingularTol * kSingularTol)) {
      throw Error(ErrorKind::PotentialSingular,
                  "molecules " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
    }
    const double s2 = sigma_ * sigma_ / r2;
    return s2 * s2 * s2;
  }

  double epsilon_;
  double sigma_;
  InertiaSpec inertia_;
};

}  // namespace s2vi
