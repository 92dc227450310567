#pragma once

// Global continuous Euler-Lagrange equations on (S^2)^n and explicit
// Runge-Kutta baselines run on the flat (q, w) representation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "s2vi/errors.hpp"
#include "s2vi/geometry.hpp"
#include "s2vi/model.hpp"

namespace s2vi {

/// Dense 3n x 3n matrix addressed as an n x n grid of 3x3 blocks.
class BlockMatrix3n {
 public:
  explicit BlockMatrix3n(std::size_t n) : n_(n), m_(Eigen::MatrixXd::Zero(3 * idx(n), 3 * idx(n))) {}

  std::size_t blocks() const noexcept { return n_; }

  auto block(std::size_t i, std::size_t j) { return m_.block<3, 3>(3 * idx(i), 3 * idx(j)); }
  auto block(std::size_t i, std::size_t j) const { return m_.block<3, 3>(3 * idx(i), 3 * idx(j)); }

  const Eigen::MatrixXd& dense() const noexcept { return m_; }

 private:
  static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

  std::size_t n_;
  Eigen::MatrixXd m_;
};

/// Blocks M_ii I on the diagonal and -M_ij hat(q_i) hat(q_j) off it.
/// This is the operator acting on angular accelerations, and on angular
/// velocities in the discrete Legendre transforms.
inline BlockMatrix3n assemble_velocity_form(const InertiaSpec& m, std::span<const Vec3> q) {
  const std::size_t n = q.size();
  BlockMatrix3n a(n);
  std::vector<Mat3> hats(n);
  for (std::size_t i = 0; i < n; ++i) hats[i] = hat(q[i]);
  for (std::size_t i = 0; i < n; ++i) {
    a.block(i, i) = m(i, i) * Mat3::Identity();
    if (m.is_diagonal()) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) a.block(i, j) = -m(i, j) * hats[i] * hats[j];
    }
  }
  return a;
}

/// Blocks M_ii I on the diagonal and -M_ij hat(q_i)^2 off it (operator on qddot).
inline BlockMatrix3n assemble_acceleration_form(const InertiaSpec& m, std::span<const Vec3> q) {
  const std::size_t n = q.size();
  BlockMatrix3n a(n);
  for (std::size_t i = 0; i < n; ++i) {
    a.block(i, i) = m(i, i) * Mat3::Identity();
    if (m.is_diagonal()) continue;
    const Mat3 hh = hat(q[i]) * hat(q[i]);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) a.block(i, j) = -m(i, j) * hh;
    }
  }
  return a;
}

/// Solves A x = rhs for a stacked 3n vector. Diagonal inertia takes the blockwise path.
inline std::vector<Vec3> solve_block_system(const InertiaSpec& m, const BlockMatrix3n& a,
                                            std::span<const Vec3> rhs) {
  const std::size_t n = rhs.size();
  std::vector<Vec3> x(n);
  if (m.is_diagonal()) {
    for (std::size_t i = 0; i < n; ++i) x[i] = rhs[i] / m(i, i);
    return x;
  }
  Eigen::VectorXd b(3 * static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) b.segment<3>(3 * static_cast<Eigen::Index>(i)) = rhs[i];
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a.dense());
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) {
    throw Error(ErrorKind::SingularMass, "assembled 3n x 3n matrix is singular (rcond " + std::to_string(rcond) + ")");
  }
  const Eigen::VectorXd sol = lu.solve(b);
  if (!sol.allFinite()) throw Error(ErrorKind::SingularMass, "non-finite solution of the assembled system");
  for (std::size_t i = 0; i < n; ++i) x[i] = sol.segment<3>(3 * static_cast<Eigen::Index>(i));
  return x;
}

/// Right-hand side of the angular-velocity form:
///   sum_{j != i} M_ij (w_j . w_j) q_i x q_j - q_i x dV/dq_i.
inline std::vector<Vec3> angular_rhs(const InertiaSpec& m, std::span<const Vec3> q, std::span<const Vec3> w,
                                     std::span<const Vec3> grad) {
  const std::size_t n = q.size();
  std::vector<Vec3> rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 r = -q[i].cross(grad[i]);
    if (!m.is_diagonal()) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i && m(i, j) != 0.0) r += m(i, j) * w[j].squaredNorm() * q[i].cross(q[j]);
      }
    }
    rhs[i] = r;
  }
  return rhs;
}

/// wdot from the angular-velocity form of the Euler-Lagrange equations.
inline std::vector<Vec3> angular_acceleration(const Model& model, std::span<const Vec3> q, std::span<const Vec3> w) {
  const auto& m = model.inertia();
  const auto grad = model.gradient(q);
  const auto rhs = angular_rhs(m, q, w, grad);
  if (m.is_diagonal()) return solve_block_system(m, BlockMatrix3n(0), rhs);
  return solve_block_system(m, assemble_velocity_form(m, q), rhs);
}

inline std::vector<Vec3> angular_acceleration(const Model& model, const SystemState& s) {
  return angular_acceleration(model, s.q, s.w);
}

/// qddot from the second-order form; requires q_i . qdot_i = 0.
inline std::vector<Vec3> acceleration(const Model& model, std::span<const Vec3> q, std::span<const Vec3> qdot) {
  const auto& m = model.inertia();
  const std::size_t n = q.size();
  if (qdot.size() != n) throw Error(ErrorKind::InvalidArgument, "q and qdot differ in length");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(q[i].dot(qdot[i])) > kUnitTol) {
      throw Error(ErrorKind::InvalidState, "qdot_" + std::to_string(i) + " is not tangent to q_" + std::to_string(i));
    }
  }
  const auto grad = model.gradient(q);
  std::vector<Vec3> rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    rhs[i] = -qdot[i].squaredNorm() * m(i, i) * q[i] + q[i].cross(q[i].cross(grad[i]));
  }
  if (m.is_diagonal()) return solve_block_system(m, BlockMatrix3n(0), rhs);
  return solve_block_system(m, assemble_acceleration_form(m, q), rhs);
}

// ---------------------------------------------------------------------------
// Runge-Kutta baselines. None of these project back onto the sphere.

namespace detail {

struct Derivative {
  std::vector<Vec3> dq;
  std::vector<Vec3> dw;
};

inline Derivative vector_field(const Model& model, std::span<const Vec3> q, std::span<const Vec3> w) {
  Derivative d;
  d.dq.resize(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) d.dq[i] = w[i].cross(q[i]);
  d.dw = angular_acceleration(model, q, w);
  return d;
}

// base + sum_k c_k * h * k_k
inline void combine(const SystemState& base, double h, std::span<const Derivative> ks, std::span<const double> coeffs,
                    std::vector<Vec3>& q, std::vector<Vec3>& w) {
  q = base.q;
  w = base.w;
  for (std::size_t s = 0; s < coeffs.size(); ++s) {
    if (coeffs[s] == 0.0) continue;
    const double c = h * coeffs[s];
    for (std::size_t i = 0; i < q.size(); ++i) {
      q[i] += c * ks[s].dq[i];
      w[i] += c * ks[s].dw[i];
    }
  }
}

}  // namespace detail

/// Explicit trapezoid (Heun) step.
inline SystemState rk2_step(const Model& model, const SystemState& s, double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "h must be positive");
  std::array<detail::Derivative, 2> k;
  k[0] = detail::vector_field(model, s.q, s.w);
  std::vector<Vec3> q, w;
  const std::array<double, 1> a1{1.0};
  detail::combine(s, h, std::span(k.data(), 1), a1, q, w);
  k[1] = detail::vector_field(model, q, w);
  const std::array<double, 2> b{0.5, 0.5};
  SystemState out;
  detail::combine(s, h, k, b, out.q, out.w);
  out.t = s.t + h;
  return out;
}

/// Classical fourth-order step.
inline SystemState rk4_step(const Model& model, const SystemState& s, double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "h must be positive");
  std::array<detail::Derivative, 4> k;
  std::vector<Vec3> q, w;
  k[0] = detail::vector_field(model, s.q, s.w);
  const std::array<double, 1> a1{0.5};
  detail::combine(s, h, std::span(k.data(), 1), a1, q, w);
  k[1] = detail::vector_field(model, q, w);
  const std::array<double, 2> a2{0.0, 0.5};
  detail::combine(s, h, std::span(k.data(), 2), a2, q, w);
  k[2] = detail::vector_field(model, q, w);
  const std::array<double, 3> a3{0.0, 0.0, 1.0};
  detail::combine(s, h, std::span(k.data(), 3), a3, q, w);
  k[3] = detail::vector_field(model, q, w);
  const std::array<double, 4> b{1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0};
  SystemState out;
  detail::combine(s, h, k, b, out.q, out.w);
  out.t = s.t + h;
  return out;
}

/// Heun step followed by q_i <- q_i/|q_i| and w_i <- tangent part of w_i.
inline SystemState rk2_reprojection_step(const Model& model, const SystemState& s, double h) {
  SystemState out = rk2_step(model, s, h);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.q[i] /= out.q[i].norm();
    out.w[i] = project_tangent(out.q[i], out.w[i]);
  }
  return out;
}

struct Rk45Options {
  double atol = 1e-8;
  double rtol = 1e-8;
  double safety = 0.9;
  double min_factor = 0.2;
  double max_factor = 5.0;
  double h_min = 1e-14;
  int max_rejections = 60;
};

struct Rk45Result {
  SystemState state;
  double h_taken = 0.0;
  double h_next = 0.0;
  int rejections = 0;
};

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double dp_c[7] = {0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0};
inline constexpr double dp_a[7][6] = {
    {},
    {1.0 / 5.0},
    {3.0 / 40.0, 9.0 / 40.0},
    {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0},
    {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0},
    {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0},
    {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0},
};
inline constexpr double dp_b5[7] = {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0};
inline constexpr double dp_b4[7] = {5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0,
                                    -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0};

}  // namespace detail

/// One accepted Dormand-Prince 5(4) step. Rejected attempts shrink h and retry;
/// the error norm is max_k |err_k| / (atol + rtol max(|y_k|, |ynew_k|)).
inline Rk45Result rk45_step(const Model& model, const SystemState& s, double h, const Rk45Options& opt = {}) {
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "h must be positive");
  const std::size_t n = s.size();
  int rejections = 0;
  while (true) {
    std::array<detail::Derivative, 7> k;
    std::vector<Vec3> q, w;
    k[0] = detail::vector_field(model, s.q, s.w);
    for (int st = 1; st < 7; ++st) {
      detail::combine(s, h, std::span(k.data(), static_cast<std::size_t>(st)),
                      std::span(detail::dp_a[st], static_cast<std::size_t>(st)), q, w);
      k[static_cast<std::size_t>(st)] = detail::vector_field(model, q, w);
    }
    // stage 7 was evaluated at the 5th-order solution, which is (q, w) now
    Rk45Result r;
    r.state.q = q;
    r.state.w = w;
    r.state.t = s.t + h;

    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Vec3 eq = Vec3::Zero(), ew = Vec3::Zero();
      for (std::size_t st = 0; st < 7; ++st) {
        const double db = detail::dp_b5[st] - detail::dp_b4[st];
        eq += db * k[st].dq[i];
        ew += db * k[st].dw[i];
      }
      eq *= h;
      ew *= h;
      for (int c = 0; c < 3; ++c) {
        const double sq = opt.atol + opt.rtol * std::max(std::abs(s.q[i][c]), std::abs(q[i][c]));
        const double sw = opt.atol + opt.rtol * std::max(std::abs(s.w[i][c]), std::abs(w[i][c]));
        err = std::max({err, std::abs(eq[c]) / sq, std::abs(ew[c]) / sw});
      }
    }
    if (!std::isfinite(err)) err = 1e10;

    const double factor = err == 0.0 ? opt.max_factor
                                     : std::clamp(opt.safety * std::pow(err, -0.2), opt.min_factor, opt.max_factor);
    if (err <= 1.0) {
      r.h_taken = h;
      r.h_next = h * factor;
      r.rejections = rejections;
      return r;
    }
    ++rejections;
    h *= std::min(factor, 0.9);
    if (rejections > opt.max_rejections || h < opt.h_min) {
      throw Error(ErrorKind::StepRejected, "RK45 could not meet tolerance (h = " + std::to_string(h) + ")");
    }
  }
}

/// Integrates to t0 + duration with adaptive steps, calling `observe` after each accepted step.
inline SystemState rk45_integrate(const Model& model, SystemState s, double duration, double h0,
                                  const Rk45Options& opt, const std::function<void(const SystemState&)>& observe) {
  const double t_end = s.t + duration;
  const double t_slack = 1e-14 * std::max(1.0, std::abs(t_end));
  double h = h0;
  while (t_end - s.t > t_slack) {
    const double remaining = t_end - s.t;
    auto r = rk45_step(model, s, std::min(h, remaining), opt);
    const bool reached = r.h_taken == remaining;
    s = std::move(r.state);
    if (reached) s.t = t_end;
    if (observe) observe(s);
    h = r.h_next;
  }
  return s;
}

}  // namespace s2vi
