#pragma once

// Mechanical systems on (S^2)^n with Lagrangian
//   L = 1/2 sum_ij M_ij qdot_i . qdot_j - V(q_1, ..., q_n).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "s2vi/errors.hpp"
#include "s2vi/geometry.hpp"

namespace s2vi {

using Configuration = std::vector<Vec3>;

/// Symmetric positive-definite n x n inertia matrix, stored as its lower triangle.
class InertiaSpec {
 public:
  std::size_t size() const noexcept { return n_; }

  double operator()(std::size_t i, std::size_t j) const {
    if (i < j) std::swap(i, j);
    return lower_[i * (i + 1) / 2 + j];
  }

  /// True when the bodies are coupled only through the potential.
  bool is_diagonal() const noexcept { return diagonal_; }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd m(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) m(i, j) = (*this)(i, j);
    return m;
  }

  friend InertiaSpec validate_inertia(const Eigen::MatrixXd& m);

 private:
  std::size_t n_ = 0;
  bool diagonal_ = true;
  std::vector<double> lower_;
};

inline InertiaSpec validate_inertia(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorKind::InvalidArgument, "inertia matrix must be square and non-empty");
  }
  if (!m.allFinite()) throw Error(ErrorKind::InvalidArgument, "inertia matrix has non-finite entries");
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12) {
    throw Error(ErrorKind::NotSymmetric, "max |M_ij - M_ji| = " + std::to_string(asym));
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite, "Cholesky factorization failed");
  }
  InertiaSpec spec;
  const auto n = static_cast<std::size_t>(m.rows());
  spec.n_ = n;
  spec.lower_.reserve(n * (n + 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      spec.lower_.push_back(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  for (std::size_t i = 0; i < n && spec.diagonal_; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (spec(i, j) != 0.0) {
        spec.diagonal_ = false;
        break;
      }
  return spec;
}

inline InertiaSpec diagonal_inertia(std::span<const double> diag) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(diag.size()),
                                            static_cast<Eigen::Index>(diag.size()));
  for (std::size_t i = 0; i < diag.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = diag[i];
  return validate_inertia(m);
}

/// Positions q_i, angular velocities w_i (qdot_i = w_i x q_i) and time.
///
/// q is stored as plain vectors so that the non-geometric baselines can carry
/// positions that have drifted off the sphere; `validated` enforces the
/// manifold invariants and the variational steppers call it on entry.
struct SystemState {
  std::vector<Vec3> q;
  std::vector<Vec3> w;
  double t = 0.0;

  std::size_t size() const noexcept { return q.size(); }

  static SystemState validated(std::vector<Vec3> q, std::vector<Vec3> w, double t = 0.0) {
    SystemState s{std::move(q), std::move(w), t};
    s.check();
    return s;
  }

  void check() const {
    if (q.size() != w.size() || q.empty()) {
      throw Error(ErrorKind::InvalidState, "q and w must be non-empty and of equal length");
    }
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (!q[i].allFinite() || !w[i].allFinite()) {
        throw Error(ErrorKind::InvalidState, "non-finite component in body " + std::to_string(i));
      }
      const double unit = std::abs(q[i].dot(q[i]) - 1.0);
      if (unit > kUnitTol) {
        throw Error(ErrorKind::InvalidState,
                    "q_" + std::to_string(i) + " off the sphere by " + std::to_string(unit));
      }
      const double tang = std::abs(q[i].dot(w[i]));
      if (tang > kUnitTol) {
        throw Error(ErrorKind::InvalidState,
                    "w_" + std::to_string(i) + " not tangent: |q.w| = " + std::to_string(tang));
      }
    }
  }
};

inline double unit_error(const SystemState& s) {
  double e = 0.0;
  for (const auto& q : s.q) e = std::max(e, std::abs(q.dot(q) - 1.0));
  return e;
}

inline double tangency_error(const SystemState& s) {
  double e = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) e = std::max(e, std::abs(s.q[i].dot(s.w[i])));
  return e;
}

/// Max-norm distance between two states of equal size.
inline double state_distance(const SystemState& a, const SystemState& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max({worst, (a.q[i] - b.q[i]).cwiseAbs().maxCoeff(), (a.w[i] - b.w[i]).cwiseAbs().maxCoeff()});
  }
  return worst;
}

/// A conservative mechanical system on (S^2)^n.
///
/// Gradients are ambient partials dV/dq_i with each q_i treated as a free
/// vector in R^3; the equations of motion take care of the sphere constraint.
/// Implementations are immutable after construction.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  virtual const InertiaSpec& inertia() const = 0;
  virtual double potential(std::span<const Vec3> q) const = 0;
  virtual void potential_gradient(std::span<const Vec3> q, std::span<Vec3> grad) const = 0;

  /// Axis e such that V is invariant under simultaneous rotation of every q_i about e.
  virtual std::optional<Vec3> symmetry_axis() const { return std::nullopt; }

  /// Closed-form flow, for models that have one.
  virtual std::optional<SystemState> exact_solution(const SystemState& /*initial*/, double /*t*/) const {
    return std::nullopt;
  }

  std::size_t size() const { return inertia().size(); }

  std::vector<Vec3> gradient(std::span<const Vec3> q) const {
    std::vector<Vec3> g(q.size(), Vec3::Zero());
    potential_gradient(q, g);
    return g;
  }
};

/// Max over bodies and components of |FD - analytic| / (1 + |analytic|),
/// using central differences on the ambient coordinates.
inline double check_gradient(const Model& model, std::span<const Vec3> q, double eps) {
  if (!(eps > 0.0 && eps <= 1e-3)) throw Error(ErrorKind::InvalidArgument, "eps must lie in (0, 1e-3]");
  const auto analytic = model.gradient(q);
  Configuration work(q.begin(), q.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < work.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double saved = work[i][c];
      work[i][c] = saved + eps;
      const double vp = model.potential(work);
      work[i][c] = saved - eps;
      const double vm = model.potential(work);
      work[i][c] = saved;
      const double fd = (vp - vm) / (2.0 * eps);
      worst = std::max(worst, std::abs(fd - analytic[i][c]) / (1.0 + std::abs(analytic[i][c])));
    }
  }
  return worst;
}

/// 1/2 sum_ij M_ij qdot_i . qdot_j with qdot_i = w_i x q_i.
inline double kinetic_energy(const InertiaSpec& m, const SystemState& s) {
  const std::size_t n = s.size();
  std::vector<Vec3> qdot(n);
  for (std::size_t i = 0; i < n; ++i) qdot[i] = s.w[i].cross(s.q[i]);
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    t += 0.5 * m(i, i) * qdot[i].squaredNorm();
    if (m.is_diagonal()) continue;
    for (std::size_t j = 0; j < i; ++j) t += m(i, j) * qdot[i].dot(qdot[j]);
  }
  return t;
}

}  // namespace s2vi
