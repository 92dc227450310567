#pragma once

// Named preset scenarios and JSON model specifications.
//
// A model spec is a JSON object with a "type" field naming one of the zoo
// systems plus that system's parameters; indices (e.g. spring endpoints) are
// zero-based. Presets are built through the same path, so the spec stored in
// a preset is exactly what reproduces its model.

#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"

#include "s2vi/errors.hpp"
#include "s2vi/geometry.hpp"
#include "s2vi/model.hpp"
#include "s2vi/zoo.hpp"

namespace s2vi {

using json = nlohmann::json;

struct PresetScenario {
  std::string name;
  json model_spec;
  std::shared_ptr<const Model> model;
  SystemState initial;
  double h = 0.0;
  double T = 0.0;
  std::string integrator;  // default integrator for the CLI
  std::string notes;
};

namespace detail {

inline double get_number(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw Error(ErrorKind::ConfigError, std::string("model spec needs numeric field '") + key + "'");
  }
  return j.at(key).get<double>();
}

inline double get_number_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? get_number(j, key) : fallback;
}

inline Vec3 to_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::ConfigError, "expected a 3-vector");
  for (const auto& x : j)
    if (!x.is_number()) throw Error(ErrorKind::ConfigError, "3-vector entries must be numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json from_vec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

// Either an explicit array, or a scalar broadcast to `count` entries.
inline std::vector<double> get_list(const json& j, const char* key, std::size_t count) {
  if (!j.contains(key)) throw Error(ErrorKind::ConfigError, std::string("model spec needs field '") + key + "'");
  const json& v = j.at(key);
  if (v.is_number()) {
    if (count == 0) throw Error(ErrorKind::ConfigError, std::string("scalar '") + key + "' needs a body count 'n'");
    return std::vector<double>(count, v.get<double>());
  }
  if (!v.is_array()) throw Error(ErrorKind::ConfigError, std::string("'") + key + "' must be a number or array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw Error(ErrorKind::ConfigError, std::string("'") + key + "' entries must be numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline std::size_t get_count(const json& j) {
  if (!j.contains("n")) return 0;
  const json& n = j.at("n");
  if (!n.is_number_integer() || n.get<long long>() < 1) {
    throw Error(ErrorKind::ConfigError, "'n' must be a positive integer");
  }
  return n.get<std::size_t>();
}

}  // namespace detail

/// Builds a zoo model from its JSON spec.
inline std::shared_ptr<const Model> make_model(const json& spec) {
  using namespace detail;
  if (!spec.is_object() || !spec.contains("type") || !spec.at("type").is_string()) {
    throw Error(ErrorKind::ConfigError, "model spec must be an object with a string 'type'");
  }
  const std::string type = spec.at("type").get<std::string>();
  const std::size_t n = get_count(spec);
  try {
    if (type == "double_spherical_pendulum") {
      return std::make_shared<DoubleSphericalPendulum>(get_number(spec, "m1"), get_number(spec, "m2"),
                                                       get_number(spec, "l1"), get_number(spec, "l2"),
                                                       get_number(spec, "g"));
    }
    if (type == "spherical_pendulum") {
      return std::make_shared<SphericalPendulum>(get_number(spec, "m"), get_number(spec, "l"), get_number(spec, "g"));
    }
    if (type == "free_spheres") return std::make_shared<FreeSpheres>(get_list(spec, "inertia", n));
    if (type == "nbody_sphere") {
      return std::make_shared<NBodySphere>(get_list(spec, "masses", n), get_number(spec, "gamma"));
    }
    if (type == "spring_pendula") {
      auto masses = get_list(spec, "masses", n);
      auto lengths = get_list(spec, "lengths", masses.size());
      std::vector<Spring> springs;
      for (const auto& s : spec.value("springs", json::array())) {
        springs.push_back({s.at("i").get<std::size_t>(), s.at("j").get<std::size_t>(), get_number(s, "stiffness"),
                           to_vec3(s.at("offset"))});
      }
      return std::make_shared<SpringPendula>(std::move(masses), std::move(lengths), std::move(springs),
                                             get_number(spec, "g"));
    }
    if (type == "elastic_rod") {
      if (n == 0) throw Error(ErrorKind::ConfigError, "elastic_rod needs 'n'");
      return std::make_shared<ElasticRod>(n, get_number(spec, "total_mass"), get_number(spec, "total_length"),
                                          get_list(spec, "kappa", n), get_number(spec, "g"),
                                          UnitVector::renormalize(to_vec3(spec.at("q0"))));
    }
    if (type == "magnetic_dipole_array") {
      std::vector<Vec3> pivots;
      for (const auto& p : spec.at("pivots")) pivots.push_back(to_vec3(p));
      const std::size_t count = pivots.size();
      return std::make_shared<MagneticDipoleArray>(get_list(spec, "masses", count), get_list(spec, "lengths", count),
                                                   get_list(spec, "moments", count), std::move(pivots));
    }
    if (type == "lennard_jones_sphere") {
      return std::make_shared<LennardJonesSphere>(get_list(spec, "masses", n), get_number(spec, "epsilon"),
                                                  get_number(spec, "sigma"));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("malformed model spec: ") + e.what());
  }
  throw Error(ErrorKind::ConfigError, "unknown model type '" + type + "'");
}

/// Reads {"q": [[x,y,z], ...], "w": [[x,y,z], ...], "t": t0, "renormalize": bool}.
inline SystemState make_initial_state(const json& spec) {
  using namespace detail;
  if (!spec.is_object() || !spec.contains("q") || !spec.contains("w")) {
    throw Error(ErrorKind::ConfigError, "initial state needs 'q' and 'w'");
  }
  const bool renormalize = spec.value("renormalize", false);
  std::vector<Vec3> q, w;
  for (const auto& x : spec.at("q")) q.push_back(to_vec3(x));
  for (const auto& x : spec.at("w")) w.push_back(to_vec3(x));
  if (renormalize) {
    for (std::size_t i = 0; i < q.size(); ++i) {
      q[i] = UnitVector::renormalize(q[i]).vec();
      if (i < w.size()) w[i] = project_tangent(q[i], w[i]);
    }
  }
  try {
    return SystemState::validated(std::move(q), std::move(w), spec.value("t", 0.0));
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, std::string("invalid initial state: ") + e.what());
  }
}

/// Equal-area spiral placement of n points on the unit sphere.
inline std::vector<Vec3> fibonacci_sphere(std::size_t n) {
  std::vector<Vec3> pts(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t k = 0; k < n; ++k) {
    const double z = 1.0 - (2.0 * static_cast<double>(k) + 1.0) / static_cast<double>(n);
    const double r = std::sqrt(1.0 - z * z);
    const double phi = golden * static_cast<double>(k);
    pts[k] = Vec3(r * std::cos(phi), r * std::sin(phi), z);
    pts[k] /= pts[k].norm();
  }
  return pts;
}

inline double mean_nearest_neighbor_distance(const std::vector<Vec3>& pts) {
  double sum = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = INFINITY;
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (j != i) best = std::min(best, (pts[i] - pts[j]).norm());
    sum += best;
  }
  return sum / static_cast<double>(pts.size());
}

/// Parameters of the molecular-dynamics preset's synthetic initial condition.
struct VortexField {
  double half_separation_deg = 15.0;  // vortex centres at +-15 deg from e3 in the e1-e3 plane
  double strength = 1.0;              // rad/s at the centre; the second vortex spins the other way
  double width = 0.3;                 // Gaussian width in radians of arc
};

inline std::vector<Vec3> vortex_velocities(const std::vector<Vec3>& q, const VortexField& v) {
  const double a = v.half_separation_deg * std::numbers::pi / 180.0;
  const Vec3 centres[2] = {Vec3(std::sin(a), 0.0, std::cos(a)), Vec3(-std::sin(a), 0.0, std::cos(a))};
  const double strengths[2] = {v.strength, -v.strength};
  std::vector<Vec3> w(q.size(), Vec3::Zero());
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (int c = 0; c < 2; ++c) {
      const double theta = std::acos(std::clamp(q[i].dot(centres[c]), -1.0, 1.0));
      w[i] += strengths[c] * std::exp(-theta * theta / (v.width * v.width)) * centres[c];
    }
    w[i] = project_tangent(q[i], w[i]);
  }
  return w;
}

inline std::vector<std::string> preset_names() {
  return {"dsp-100s", "nbody3-10s", "springs4", "rod10-3s", "dipole16", "lj642-5s", "geodesic"};
}

namespace detail {

inline PresetScenario finish_preset(std::string name, json model_spec, const json& initial, double h, double T,
                                    std::string integrator, std::string notes = {}) {
  PresetScenario p;
  p.name = std::move(name);
  p.model = make_model(model_spec);
  p.model_spec = std::move(model_spec);
  p.initial = make_initial_state(initial);
  p.h = h;
  p.T = T;
  p.integrator = std::move(integrator);
  p.notes = std::move(notes);
  if (p.initial.size() != p.model->size()) {
    throw Error(ErrorKind::ConfigError, "preset " + p.name + ": initial state size does not match the model");
  }
  return p;
}

}  // namespace detail

inline PresetScenario load_preset(const std::string& name) {
  using detail::finish_preset;
  if (name == "dsp-100s") {
    return finish_preset(name,
                         {{"type", "double_spherical_pendulum"}, {"m1", 1.0}, {"m2", 1.0}, {"l1", 9.81}, {"l2", 9.81},
                          {"g", 9.81}},
                         {{"q", {{0.8660, 0.0, 0.5}, {0.0, 0.0, 1.0}}},
                          {"w", {{-0.4330, 0.0, 0.75}, {0.0, 1.0, 0.0}}},
                          {"renormalize", true}},
                         0.01, 100.0, "vi-implicit", "q1 given to 4 digits; renormalized at load");
  }
  if (name == "nbody3-10s") {
    return finish_preset(name, {{"type", "nbody_sphere"}, {"masses", {1.0, 1.0, 1.0}}, {"gamma", 1.0}},
                         {{"q", {{0.0, -1.0, 0.0}, {0.0, 0.0, 1.0}, {-1.0, 0.0, 0.0}}},
                          {"w", {{0.0, 0.0, -1.1}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}}},
                         1e-3, 10.0, "vi-explicit");
  }
  if (name == "springs4") {
    const double l = 0.1;
    json springs = json::array({
        {{"i", 0}, {"j", 1}, {"stiffness", 10.0}, {"offset", {l, 0.0, 0.0}}},
        {{"i", 1}, {"j", 2}, {"stiffness", 20.0}, {"offset", {0.0, -l, 0.0}}},
        {{"i", 2}, {"j", 3}, {"stiffness", 30.0}, {"offset", {-l, 0.0, 0.0}}},
        {{"i", 3}, {"j", 0}, {"stiffness", 40.0}, {"offset", {0.0, l, 0.0}}},
    });
    return finish_preset(name,
                         {{"type", "spring_pendula"}, {"n", 4}, {"masses", 0.1}, {"lengths", l}, {"g", 9.81},
                          {"springs", springs}},
                         {{"q", {{0.0, 0.0, 1.0}, {0.0, 0.0, 1.0}, {0.4698, 0.1710, 0.8660}, {0.0, 0.0, 1.0}}},
                          {"w", {{-10.0, 4.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}}},
                          {"renormalize", true}},
                         0.005, 20.0, "vi-explicit",
                         "spring constants assigned to (1,2),(2,3),(3,4),(4,1) in order; q3 renormalized at load");
  }
  if (name == "rod10-3s") {
    json q = json::array(), w = json::array();
    for (int i = 0; i < 10; ++i) {
      q.push_back({1.0, 0.0, 0.0});
      w.push_back(i == 4 ? json{0.0, 0.0, 10.0} : json{0.0, 0.0, 0.0});
    }
    return finish_preset(name,
                         {{"type", "elastic_rod"}, {"n", 10}, {"total_mass", 0.055}, {"total_length", 1.1},
                          {"kappa", 1000.0}, {"g", 9.81}, {"q0", {1.0, 0.0, 0.0}}},
                         {{"q", q}, {"w", w}}, 1e-4, 3.0, "vi-implicit");
  }
  if (name == "dipole16") {
    const double l = 0.02;
    json pivots = json::array(), q = json::array(), w = json::array();
    for (int row = 0; row < 4; ++row)
      for (int col = 0; col < 4; ++col) {
        pivots.push_back({1.2 * l * col, 1.2 * l * row, 0.0});
        q.push_back({1.0, 0.0, 0.0});
        w.push_back({0.0, 0.0, 0.0});
      }
    q[15] = {0.3536, 0.3536, -0.8660};
    w[0] = {0.0, 0.5, 0.0};
    return finish_preset(name,
                         {{"type", "magnetic_dipole_array"}, {"masses", 0.05}, {"lengths", l}, {"moments", 0.1},
                          {"pivots", pivots}},
                         {{"q", q}, {"w", w}, {"renormalize", true}}, 2.5e-4, 10.0, "vi-explicit",
                         "4x4 grid, row-major from the origin along e1 then e2; q16 renormalized at load");
  }
  if (name == "lj642-5s") {
    constexpr std::size_t n = 642;
    const auto q = fibonacci_sphere(n);
    const double sigma = mean_nearest_neighbor_distance(q) / std::pow(2.0, 1.0 / 6.0);
    const auto w = vortex_velocities(q, VortexField{});
    json jq = json::array(), jw = json::array();
    for (std::size_t i = 0; i < n; ++i) {
      jq.push_back(detail::from_vec3(q[i]));
      jw.push_back(detail::from_vec3(w[i]));
    }
    return finish_preset(name,
                         {{"type", "lennard_jones_sphere"}, {"n", n}, {"masses", 1.0}, {"epsilon", 0.01},
                          {"sigma", sigma}},
                         {{"q", jq}, {"w", jw}}, 0.005, 5.0, "vi-explicit",
                         "Fibonacci-sphere placement; sigma = mean nearest-neighbour chord / 2^(1/6); "
                         "counter-rotating Gaussian vortices at +-15 deg from e3 (strength 1 rad/s, width 0.3 rad)");
  }
  if (name == "geodesic") {
    return finish_preset(name, {{"type", "free_spheres"}, {"inertia", {1.0}}},
                         {{"q", {{0.0, 0.0, 1.0}}}, {"w", {{1.0, 0.0, 0.0}}}}, 0.01, 10.0, "vi-implicit");
  }
  throw Error(ErrorKind::UnknownPreset, "no preset named '" + name + "'");
}

}  // namespace s2vi
