#pragma once

// Variational integrators on (S^2)^n.
//
// The discrete Lagrangian is
//   L_d = 1/(2h) sum_ij M_ij (q_i' - q_i).(q_j' - q_j) - h/2 V(q) - h/2 V(q'),
// and each step advances q_i' = F_i q_i with F_i in SO(3), so unit length is
// kept by the group action rather than by projection. F_i is written through
// the Cayley map of a vector f_i orthogonal to q_i.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "s2vi/continuous.hpp"
#include "s2vi/errors.hpp"
#include "s2vi/geometry.hpp"
#include "s2vi/model.hpp"

namespace s2vi {

enum class InitStrategy { Zero, PreviousStep };

struct SolverConfig {
  double fp_tol = 1e-14;
  int max_iters = 100;
  InitStrategy init_strategy = InitStrategy::PreviousStep;

  void check() const {
    if (!(fp_tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "fp_tol must be positive");
    if (max_iters < 1) throw Error(ErrorKind::InvalidArgument, "max_iters must be at least 1");
  }
};

struct DiscreteStepReport {
  int iterations_used = 0;
  double residual = 0.0;
  double h = 0.0;
};

struct CayleySolution {
  std::vector<Vec3> f;
  int iterations = 0;
  double residual = 0.0;
};

namespace detail {

inline double max_norm(std::span<const Vec3> v) {
  double m = 0.0;
  for (const auto& x : v) m = std::max(m, x.cwiseAbs().maxCoeff());
  return m;
}

inline void check_tangent_inputs(std::span<const Vec3> q, std::span<const Vec3> d) {
  if (q.size() != d.size()) throw Error(ErrorKind::InvalidArgument, "q and d differ in length");
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double g = std::abs(d[i].dot(q[i]));
    if (g > kGaugeTol) {
      throw Error(ErrorKind::GaugeViolation, "d_" + std::to_string(i) + " not tangent: |d.q| = " + std::to_string(g));
    }
  }
}

// sum_j M_ij x_j for every i
inline std::vector<Vec3> inertia_apply(const InertiaSpec& m, std::span<const Vec3> x) {
  const std::size_t n = x.size();
  std::vector<Vec3> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (m.is_diagonal()) {
      out[i] = m(i, i) * x[i];
      continue;
    }
    Vec3 acc = Vec3::Zero();
    for (std::size_t j = 0; j < n; ++j) acc += m(i, j) * x[j];
    out[i] = acc;
  }
  return out;
}

}  // namespace detail

/// Max-norm defect of
///   M_ii q_i x F_i q_i + q_i x sum_{j != i} M_ij (F_j - I) q_j - d_i
/// with F_i the Cayley rotation of f_i.
inline double cayley_residual(const InertiaSpec& m, std::span<const Vec3> q, std::span<const Vec3> d,
                              std::span<const Vec3> f) {
  const std::size_t n = q.size();
  std::vector<Vec3> moved(n);  // (F_j - I) q_j
  for (std::size_t j = 0; j < n; ++j) moved[j] = cayley_displacement(f[j], q[j]);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 coupling = Vec3::Zero();
    if (!m.is_diagonal()) {
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) coupling += m(i, j) * moved[j];
    }
    const Vec3 lhs = q[i].cross(m(i, i) * moved[i] + coupling);
    worst = std::max(worst, (lhs - d[i]).cwiseAbs().maxCoeff());
  }
  return worst;
}

/// Finds f_i (f_i . q_i = 0) solving the implicit step equation in Cayley
/// coordinates. Each sweep freezes the f-dependent coefficients
/// 2 M_ij / (1 + f_j.f_j) and hat(q_j) + q_j f_j^T and solves the resulting
/// linear 3n x 3n system (blockwise when the inertia is diagonal), then
/// projects each f_i onto the tangent plane of q_i. Converged when the
/// defect meets the tolerance and the iterate change either meets it too or
/// has stopped decreasing.
inline CayleySolution solve_cayley_system(const InertiaSpec& m, std::span<const Vec3> q, std::span<const Vec3> d,
                                          const SolverConfig& cfg = {}, std::span<const Vec3> initial = {}) {
  cfg.check();
  detail::check_tangent_inputs(q, d);
  const std::size_t n = q.size();
  const auto ni = static_cast<Eigen::Index>(n);

  CayleySolution sol;
  sol.f.assign(n, Vec3::Zero());
  if (initial.size() == n) {
    for (std::size_t i = 0; i < n; ++i) sol.f[i] = project_tangent(q[i], initial[i]);
  }

  // the defect cannot resolve below round-off in M_ij (F_j - I) q_j
  double row_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) r += std::abs(m(i, j));
    row_sum = std::max(row_sum, r);
  }
  const double residual_tol = std::max(10.0 * cfg.fp_tol * std::max(1.0, detail::max_norm(d)),
                                       16.0 * std::numeric_limits<double>::epsilon() * row_sum);
  std::vector<Mat3> hats;
  Eigen::VectorXd rhs;
  if (!m.is_diagonal()) {
    hats.resize(n);
    for (std::size_t i = 0; i < n; ++i) hats[i] = hat(q[i]);
    rhs.resize(3 * ni);
    for (std::size_t i = 0; i < n; ++i) rhs.segment<3>(3 * static_cast<Eigen::Index>(i)) = d[i];
  }

  std::vector<Vec3> next(n);
  double residual = 0.0;
  double last_delta = INFINITY;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    if (m.is_diagonal()) {
      for (std::size_t i = 0; i < n; ++i) next[i] = (1.0 + sol.f[i].squaredNorm()) / (2.0 * m(i, i)) * d[i];
    } else {
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3 * ni, 3 * ni);
      for (std::size_t j = 0; j < n; ++j) {
        const double scale = 2.0 / (1.0 + sol.f[j].squaredNorm());
        const Mat3 col = hats[j] + q[j] * sol.f[j].transpose();
        const auto cj = 3 * static_cast<Eigen::Index>(j);
        for (std::size_t i = 0; i < n; ++i) {
          const auto ri = 3 * static_cast<Eigen::Index>(i);
          if (i == j) {
            a.block<3, 3>(ri, cj) = scale * m(i, i) * Mat3::Identity();
          } else if (m(i, j) != 0.0) {
            a.block<3, 3>(ri, cj) = -scale * m(i, j) * hats[i] * col;
          }
        }
      }
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
      if (!(lu.rcond() > 1e-14)) throw Error(ErrorKind::SingularMass, "Cayley system matrix is singular");
      const Eigen::VectorXd x = lu.solve(rhs);
      for (std::size_t i = 0; i < n; ++i) next[i] = x.segment<3>(3 * static_cast<Eigen::Index>(i));
    }

    double delta = 0.0;
    double f_scale = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = project_tangent(q[i], next[i]);
      if (!next[i].allFinite()) throw NoConvergenceError(static_cast<std::size_t>(it), INFINITY);
      delta = std::max(delta, (next[i] - sol.f[i]).cwiseAbs().maxCoeff());
      f_scale = std::max(f_scale, next[i].cwiseAbs().maxCoeff());
    }
    sol.f.swap(next);

    // a change that stops shrinking has hit round-off
    const bool settled = delta <= cfg.fp_tol * f_scale || (it > 1 && delta >= last_delta);
    last_delta = delta;
    if (settled) {
      residual = cayley_residual(m, q, d, sol.f);
      if (residual <= residual_tol) {
        sol.iterations = it;
        sol.residual = residual;
        return sol;
      }
    }
  }
  throw NoConvergenceError(static_cast<std::size_t>(cfg.max_iters), cayley_residual(m, q, d, sol.f));
}

/// Closed-form Cayley vector for uncoupled inertia:
///   f_i = tan(asin(|d_i| / M_ii) / 2) d_i / |d_i|.
inline Vec3 uncoupled_cayley_vector(double m_ii, const Vec3& d) {
  const double nd = d.norm();
  if (nd == 0.0) return Vec3::Zero();
  return std::tan(0.5 * std::asin(nd / m_ii)) * d / nd;
}

// ---------------------------------------------------------------------------
// Discrete Legendre transforms. Both solve a system with the velocity-form
// operator assembled at q_k.

namespace detail {

inline std::vector<Vec3> legendre_solve(const Model& model, std::span<const Vec3> q_k, std::span<const Vec3> q_other,
                                        double h, std::span<const Vec3> grad_k, bool minus) {
  const auto& m = model.inertia();
  const std::size_t n = q_k.size();
  std::vector<Vec3> diff(n);
  for (std::size_t j = 0; j < n; ++j) diff[j] = minus ? Vec3(q_other[j] - q_k[j]) : Vec3(q_k[j] - q_other[j]);
  const auto md = inertia_apply(m, diff);
  const double sign = minus ? 1.0 : -1.0;
  std::vector<Vec3> rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    rhs[i] = q_k[i].cross(md[i]) / h + sign * 0.5 * h * q_k[i].cross(grad_k[i]);
  }
  if (m.is_diagonal()) return solve_block_system(m, BlockMatrix3n(0), rhs);
  return solve_block_system(m, assemble_velocity_form(m, q_k), rhs);
}

}  // namespace detail

/// w_k from (q_k, q_{k+1}).
inline std::vector<Vec3> legendre_minus(const Model& model, std::span<const Vec3> q_k, std::span<const Vec3> q_k1,
                                        double h) {
  return detail::legendre_solve(model, q_k, q_k1, h, model.gradient(q_k), true);
}

/// w_k from (q_{k-1}, q_k).
inline std::vector<Vec3> legendre_plus(const Model& model, std::span<const Vec3> q_km1, std::span<const Vec3> q_k,
                                       double h) {
  return detail::legendre_solve(model, q_k, q_km1, h, model.gradient(q_k), false);
}

// ---------------------------------------------------------------------------
// Steppers

struct StepResult {
  SystemState state;
  DiscreteStepReport report;
  std::vector<Vec3> f;
  std::vector<Vec3> gradient;  // dV/dq at the new configuration
};

namespace detail {

inline void check_step_args(const Model& model, const SystemState& s, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::InvalidArgument, "h must be positive and finite");
  if (s.size() != model.size()) throw Error(ErrorKind::InvalidState, "state size does not match the model");
  s.check();
}

inline std::vector<Vec3> gradient_or(const Model& model, std::span<const Vec3> q, const std::vector<Vec3>* cached) {
  if (cached != nullptr && cached->size() == q.size()) return *cached;
  return model.gradient(q);
}

}  // namespace detail

/// Right-hand side of the implicit step in the (q, w) form:
///   d_i = M_ii h w_i - q_i x sum_{j != i} M_ij (q_j x h w_j) - h^2/2 q_i x dV/dq_i.
inline std::vector<Vec3> implicit_step_rhs(const InertiaSpec& m, const SystemState& s, double h,
                                           std::span<const Vec3> grad) {
  const std::size_t n = s.size();
  std::vector<Vec3> d(n);
  std::vector<Vec3> qxw;
  if (!m.is_diagonal()) {
    qxw.resize(n);
    for (std::size_t j = 0; j < n; ++j) qxw[j] = s.q[j].cross(h * s.w[j]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 di = m(i, i) * h * s.w[i] - 0.5 * h * h * s.q[i].cross(grad[i]);
    if (!m.is_diagonal()) {
      Vec3 acc = Vec3::Zero();
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) acc += m(i, j) * qxw[j];
      di -= s.q[i].cross(acc);
    }
    // d_i is tangent analytically; strip round-off so the solver's gauge check sees it exactly
    d[i] = project_tangent(s.q[i], di);
  }
  return d;
}

/// One step of the implicit variational integrator in (q, w) form.
/// `f_guess` warm-starts the Cayley solve; `grad_k` may pass dV/dq at s.q.
inline StepResult implicit_step(const Model& model, const SystemState& s, double h, const SolverConfig& cfg = {},
                                std::span<const Vec3> f_guess = {}, const std::vector<Vec3>* grad_k = nullptr) {
  detail::check_step_args(model, s, h);
  const auto& m = model.inertia();
  const std::size_t n = s.size();
  const auto grad = detail::gradient_or(model, s.q, grad_k);
  const auto d = implicit_step_rhs(m, s, h, grad);
  auto sol = solve_cayley_system(m, s.q, d, cfg, f_guess);

  StepResult r;
  r.state.q.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.state.q[i] = cayley_rotate_unchecked(sol.f[i], s.q[i]);
  r.gradient = model.gradient(r.state.q);
  r.state.w = detail::legendre_solve(model, r.state.q, s.q, h, r.gradient, false);
  r.state.t = s.t + h;
  r.report = {sol.iterations, sol.residual, h};
  r.f = std::move(sol.f);
  return r;
}

/// Explicit variational step, valid when the inertia is diagonal:
///   a_i = h w_i - h^2/(2 M_ii) q_i x dV/dq_i,
///   q_i' = a_i x q_i + sqrt(1 - |a_i|^2) q_i,
///   w_i' = w_i - h/(2 M_ii) (q_i x dV/dq_i + q_i' x dV'/dq_i').
inline StepResult explicit_step(const Model& model, const SystemState& s, double h,
                                const std::vector<Vec3>* grad_k = nullptr) {
  detail::check_step_args(model, s, h);
  const auto& m = model.inertia();
  if (!m.is_diagonal()) throw Error(ErrorKind::InvalidArgument, "explicit step requires diagonal inertia");
  const std::size_t n = s.size();
  const auto grad = detail::gradient_or(model, s.q, grad_k);

  StepResult r;
  r.state.q.resize(n);
  r.state.w.resize(n);
  std::vector<Vec3> torque(n);
  for (std::size_t i = 0; i < n; ++i) {
    torque[i] = s.q[i].cross(grad[i]);
    const Vec3 a = h * s.w[i] - (h * h / (2.0 * m(i, i))) * torque[i];
    const double aa = a.squaredNorm();
    if (aa > 1.0) {
      throw Error(ErrorKind::StepTooLarge,
                  "body " + std::to_string(i) + ": |h w - h^2/(2M) q x dV/dq| = " + std::to_string(std::sqrt(aa)) +
                      " exceeds 1; reduce h");
    }
    r.state.q[i] = a.cross(s.q[i]) + std::sqrt(1.0 - aa) * s.q[i];
  }
  r.gradient = model.gradient(r.state.q);
  for (std::size_t i = 0; i < n; ++i) {
    r.state.w[i] = s.w[i] - (h / (2.0 * m(i, i))) * (torque[i] + r.state.q[i].cross(r.gradient[i]));
  }
  r.state.t = s.t + h;
  r.report = {0, 0.0, h};
  return r;
}

/// Two-step form: q_{k+1} from (q_{k-1}, q_k), with
///   d_i = q_i x sum_j M_ij (q_j - q_{j,k-1}) - h^2 q_i x dV/dq_i.
inline std::vector<Vec3> position_form_step(const Model& model, std::span<const Vec3> q_prev,
                                            std::span<const Vec3> q_curr, double h, const SolverConfig& cfg = {}) {
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "h must be positive");
  const std::size_t n = q_curr.size();
  if (q_prev.size() != n || n != model.size()) throw Error(ErrorKind::InvalidArgument, "configuration size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    (void)UnitVector(q_prev[i]);
    (void)UnitVector(q_curr[i]);
  }
  const auto& m = model.inertia();
  const auto grad = model.gradient(q_curr);
  std::vector<Vec3> diff(n);
  for (std::size_t j = 0; j < n; ++j) diff[j] = q_curr[j] - q_prev[j];
  const auto md = detail::inertia_apply(m, diff);
  std::vector<Vec3> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = project_tangent(q_curr[i], Vec3(q_curr[i].cross(md[i]) - h * h * q_curr[i].cross(grad[i])));
  }
  const auto sol = solve_cayley_system(m, q_curr, d, cfg);
  std::vector<Vec3> next(n);
  for (std::size_t i = 0; i < n; ++i) next[i] = cayley_rotate_unchecked(sol.f[i], q_curr[i]);
  return next;
}

/// Defect of the two-step discrete Euler-Lagrange equations at step k:
///   max_i | q_i x sum_j M_ij (q_{j,k+1} - 2 q_{j,k} + q_{j,k-1}) + h^2 q_i x dV/dq_i |.
inline double discrete_el_residual(const Model& model, std::span<const Vec3> q_prev, std::span<const Vec3> q_curr,
                                   std::span<const Vec3> q_next, double h) {
  const std::size_t n = q_curr.size();
  const auto grad = model.gradient(q_curr);
  std::vector<Vec3> second(n);
  for (std::size_t j = 0; j < n; ++j) second[j] = q_next[j] - 2.0 * q_curr[j] + q_prev[j];
  const auto ms = detail::inertia_apply(model.inertia(), second);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 r = q_curr[i].cross(ms[i]) + h * h * q_curr[i].cross(grad[i]);
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

enum class VariationalForm { Implicit, Explicit };

/// Single-owner stepping session: carries the warm-start Cayley vectors and
/// the potential gradient of the last produced state between steps.
class VariationalStepper {
 public:
  VariationalStepper(const Model& model, double h, VariationalForm form = VariationalForm::Implicit,
                     SolverConfig cfg = {})
      : model_(model), h_(h), form_(form), cfg_(cfg) {
    cfg_.check();
    if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "h must be positive");
    if (form == VariationalForm::Explicit && !model.inertia().is_diagonal()) {
      throw Error(ErrorKind::InvalidArgument, "explicit form requires diagonal inertia");
    }
  }

  SystemState step(const SystemState& s) {
    const std::vector<Vec3>* cached = (!grad_.empty() && last_q_ == s.q) ? &grad_ : nullptr;
    StepResult r;
    if (form_ == VariationalForm::Explicit) {
      r = explicit_step(model_, s, h_, cached);
    } else {
      const bool warm = cfg_.init_strategy == InitStrategy::PreviousStep && f_.size() == s.size();
      r = implicit_step(model_, s, h_, cfg_, warm ? std::span<const Vec3>(f_) : std::span<const Vec3>{}, cached);
      f_ = std::move(r.f);
    }
    grad_ = std::move(r.gradient);
    last_q_ = r.state.q;
    report_ = r.report;
    return std::move(r.state);
  }

  const DiscreteStepReport& last_report() const noexcept { return report_; }
  double h() const noexcept { return h_; }

 private:
  const Model& model_;
  double h_;
  VariationalForm form_;
  SolverConfig cfg_;
  std::vector<Vec3> f_;
  std::vector<Vec3> grad_;
  std::vector<Vec3> last_q_;
  DiscreteStepReport report_;
};

}  // namespace s2vi
