#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <span>
#include <string>
#include <utility>

#include "s2vi/model.hpp"

namespace s2vi::testing {

class Sampler {
 public:
  explicit Sampler(unsigned seed = 12345) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  Vec3 vec(double scale = 1.0) {
    std::normal_distribution<double> n(0.0, 1.0);
    return scale * Vec3(n(rng_), n(rng_), n(rng_));
  }

  Vec3 unit() {
    Vec3 v = vec();
    while (v.norm() < 1e-3) v = vec();
    return v / v.norm();
  }

  Vec3 tangent(const Vec3& q, double scale = 1.0) {
    const Vec3 v = vec(scale);
    return v - q.dot(v) * q;
  }

  SystemState state(std::size_t n, double w_scale = 1.0) {
    SystemState s;
    for (std::size_t i = 0; i < n; ++i) {
      s.q.push_back(unit());
      s.w.push_back(tangent(s.q.back(), w_scale));
    }
    return s;
  }

  // Random configuration keeping every pair at least `min_angle` apart and
  // away from antipodes, for potentials singular at coincident points.
  std::vector<Vec3> separated(std::size_t n, double min_angle) {
    std::vector<Vec3> q;
    while (q.size() < n) {
      const Vec3 c = unit();
      bool ok = true;
      for (const auto& p : q) {
        const double a = std::acos(std::clamp(p.dot(c), -1.0, 1.0));
        if (a < min_angle || a > std::numbers::pi - min_angle) ok = false;
      }
      if (ok) q.push_back(c);
    }
    return q;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// Dense-inertia system with a smooth potential
//   V = sum_i a_i . q_i + b sum_{i<j} (q_i . q_j)^2,
// used where the zoo has no model with the needed coupling.
class CoupledModel final : public Model {
 public:
  CoupledModel(const Eigen::MatrixXd& m, std::vector<Vec3> a, double b)
      : inertia_(validate_inertia(m)), a_(std::move(a)), b_(b) {}

  std::string name() const override { return "coupled_test"; }
  const InertiaSpec& inertia() const override { return inertia_; }
  double potential(std::span<const Vec3> q) const override {
    double v = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      v += a_[i].dot(q[i]);
      for (std::size_t j = i + 1; j < q.size(); ++j) v += b_ * std::pow(q[i].dot(q[j]), 2);
    }
    return v;
  }
  void potential_gradient(std::span<const Vec3> q, std::span<Vec3> g) const override {
    for (std::size_t i = 0; i < q.size(); ++i) {
      g[i] = a_[i];
      for (std::size_t j = 0; j < q.size(); ++j)
        if (j != i) g[i] += 2.0 * b_ * q[i].dot(q[j]) * q[j];
    }
  }

 private:
  InertiaSpec inertia_;
  std::vector<Vec3> a_;
  double b_;
};

// Random SPD matrix with O(1) entries and a comfortable smallest eigenvalue.
inline Eigen::MatrixXd random_spd(Sampler& rs, std::size_t n) {
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd a(ni, ni);
  for (Eigen::Index i = 0; i < ni; ++i)
    for (Eigen::Index j = 0; j < ni; ++j) a(i, j) = rs.uniform(-0.5, 0.5);
  Eigen::MatrixXd m = a * a.transpose() + Eigen::MatrixXd::Identity(ni, ni);
  return 0.5 * (m + m.transpose());
}

inline CoupledModel random_coupled_model(Sampler& rs, std::size_t n) {
  std::vector<Vec3> a;
  for (std::size_t i = 0; i < n; ++i) a.push_back(rs.vec(2.0));
  return CoupledModel(random_spd(rs, n), std::move(a), 0.7);
}

inline double max_abs(const Vec3& v) { return v.cwiseAbs().maxCoeff(); }

inline double max_diff(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, max_abs(a[i] - b[i]));
  return worst;
}

}  // namespace s2vi::testing
