#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "s2vi/errors.hpp"
#include "s2vi/geometry.hpp"
#include "s2vi/model.hpp"

namespace s2vi {

inline double total_energy(const Model& model, const SystemState& s) {
  return kinetic_energy(model.inertia(), s) + model.potential(s.q);
}

/// p_i = M_ii qdot_i - q_i x (q_i x sum_{j != i} M_ij qdot_j), with qdot = w x q.
inline std::vector<Vec3> conjugate_momenta(const Model& model, const SystemState& s) {
  const auto& m = model.inertia();
  const std::size_t n = s.size();
  std::vector<Vec3> qdot(n);
  for (std::size_t i = 0; i < n; ++i) qdot[i] = s.w[i].cross(s.q[i]);
  std::vector<Vec3> p(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 others = Vec3::Zero();
    if (!m.is_diagonal()) {
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) others += m(i, j) * qdot[j];
    }
    p[i] = m(i, i) * qdot[i] - s.q[i].cross(s.q[i].cross(others));
  }
  return p;
}

/// sum_i e . (q_i x p_i)
inline double momentum_about_axis(const Model& model, const SystemState& s, const Vec3& e) {
  const auto p = conjugate_momenta(model, s);
  double j = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) j += e.dot(s.q[i].cross(p[i]));
  return j;
}

struct DiagnosticSample {
  double t = 0.0;
  double total_energy = 0.0;
  double unit_error = 0.0;
  double tangency_error = 0.0;
  std::optional<double> momentum_e3;
};

inline DiagnosticSample sample_diagnostics(const Model& model, const SystemState& s) {
  DiagnosticSample d;
  d.t = s.t;
  d.total_energy = total_energy(model, s);
  d.unit_error = unit_error(s);
  d.tangency_error = tangency_error(s);
  if (model.symmetry_axis()) d.momentum_e3 = momentum_about_axis(model, s, e3());
  return d;
}

struct DriftStatistics {
  double mean_abs_energy_dev = 0.0;  // mean_k |E_k - E_0|
  double linear_slope = 0.0;         // least-squares dE/dt
  double mean_unit_error = 0.0;
};

/// Streaming form of drift_statistics; the least-squares slope uses
/// Welford-style running moments.
class DriftAccumulator {
 public:
  void add(const DiagnosticSample& s) {
    if (count_ == 0) e0_ = s.total_energy;
    ++count_;
    const double n = static_cast<double>(count_);
    const double de = s.total_energy - e0_;
    abs_dev_sum_ += std::abs(de);
    unit_sum_ += s.unit_error;
    const double dt = s.t - t_mean_;
    t_mean_ += dt / n;
    e_mean_ += (de - e_mean_) / n;
    sxx_ += dt * (s.t - t_mean_);
    sxy_ += dt * (de - e_mean_);
  }

  std::size_t count() const noexcept { return count_; }

  DriftStatistics result() const {
    if (count_ < 2) throw Error(ErrorKind::InvalidArgument, "drift statistics need at least two samples");
    const double n = static_cast<double>(count_);
    return {abs_dev_sum_ / n, sxx_ > 0.0 ? sxy_ / sxx_ : 0.0, unit_sum_ / n};
  }

 private:
  std::size_t count_ = 0;
  double e0_ = 0.0;
  double abs_dev_sum_ = 0.0;
  double unit_sum_ = 0.0;
  double t_mean_ = 0.0;
  double e_mean_ = 0.0;
  double sxx_ = 0.0;
  double sxy_ = 0.0;
};

inline DriftStatistics drift_statistics(std::span<const DiagnosticSample> samples) {
  DriftAccumulator acc;
  for (const auto& s : samples) acc.add(s);
  return acc.result();
}

}  // namespace s2vi
