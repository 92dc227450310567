#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "s2vi/continuous.hpp"
#include "s2vi/integrator.hpp"
#include "s2vi/scenario.hpp"
#include "s2vi/zoo.hpp"
#include "support.hpp"

using namespace s2vi;
using namespace s2vi::testing;

namespace {

constexpr double g = 9.81;

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no exception";
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST(DoublePendulum, InertiaAndPotential) {
  const DoubleSphericalPendulum m(1, 1, g, g, g);
  EXPECT_DOUBLE_EQ(m.inertia()(0, 0), 2 * g * g);
  EXPECT_DOUBLE_EQ(m.inertia()(0, 1), g * g);
  EXPECT_DOUBLE_EQ(m.inertia()(1, 1), g * g);
  EXPECT_DOUBLE_EQ(m.potential(std::vector<Vec3>{e3(), e3()}), -3 * g * g);
  const auto grad = m.gradient(std::vector<Vec3>{e1(), e2()});
  EXPECT_EQ(grad[0], Vec3(0, 0, -2 * g * g));
  EXPECT_EQ(grad[1], Vec3(0, 0, -g * g));
  EXPECT_LE(check_gradient(m, std::vector<Vec3>{e1(), e2()}, 1e-6), 1e-10);
}

TEST(DoublePendulum, RejectsNonPositiveParameters) {
  EXPECT_THROW(DoubleSphericalPendulum(0, 1, 1, 1, g), Error);
  EXPECT_THROW(DoubleSphericalPendulum(1, 1, -1, 1, g), Error);
}

TEST(NBody, OrthogonalPairHasZeroPotential) {
  const NBodySphere m({1, 1}, 1.0);
  EXPECT_EQ(m.potential(std::vector<Vec3>{e1(), e2()}), 0.0);
}

TEST(NBody, GradientMatchesClosedForm) {
  Sampler rs(20);
  const NBodySphere m({1, 2, 3}, 1.3);
  for (int k = 0; k < 20; ++k) {
    const auto q = rs.separated(3, 0.3);
    const auto grad = m.gradient(q);
    for (std::size_t i = 0; i < 3; ++i) {
      Vec3 expected = Vec3::Zero();
      for (std::size_t j = 0; j < 3; ++j)
        if (j != i) expected -= 1.3 * q[j] / std::pow(1.0 - std::pow(q[i].dot(q[j]), 2), 1.5);
      EXPECT_LE(max_abs(grad[i] - expected), 1e-12);
    }
  }
}

TEST(NBody, CollinearBodiesAreSingular) {
  const NBodySphere m({1, 1}, 1.0);
  EXPECT_EQ(kind_of([&] { m.potential(std::vector<Vec3>{e3(), e3()}); }), ErrorKind::PotentialSingular);
  EXPECT_EQ(kind_of([&] { m.gradient(std::vector<Vec3>{e3(), -e3()}); }), ErrorKind::PotentialSingular);
}

TEST(SpringPendula, NaturalLengthStoresNoSpringEnergy) {
  const double l = 0.1;
  const SpringPendula m({0.1, 0.1}, {l, l}, {Spring{0, 1, 25.0, Vec3(l, 0, 0)}}, 0.0);
  const std::vector<Vec3> q{e3(), e3()};
  EXPECT_EQ(m.potential(q), 0.0);
  EXPECT_LE(max_diff(m.gradient(q), {Vec3::Zero(), Vec3::Zero()}), 1e-15);
}

TEST(SpringPendula, StretchedSpringEnergy) {
  const double l = 0.1;
  const SpringPendula m({0.1, 0.1}, {l, l}, {Spring{0, 1, 25.0, Vec3(l, 0, 0)}}, 0.0);
  // second link tilted along e1: the spring spans (1.5 l, 0, -0.5 l)
  const double len = l * std::sqrt(2.5);
  EXPECT_NEAR(m.potential(std::vector<Vec3>{e3(), e1()}), 0.5 * 25.0 * (len - l) * (len - l), 1e-15);
}

TEST(SpringPendula, RejectsBadSprings) {
  EXPECT_THROW(SpringPendula({1, 1}, {1, 1}, {Spring{0, 0, 1.0, e1()}}, g), Error);
  EXPECT_THROW(SpringPendula({1, 1}, {1, 1}, {Spring{0, 2, 1.0, e1()}}, g), Error);
  EXPECT_THROW(SpringPendula({1, 1}, {1, 1}, {Spring{0, 1, -1.0, e1()}}, g), Error);
  EXPECT_THROW(SpringPendula({1, 1}, {1}, {}, g), Error);
}

TEST(SpringPendula, ZeroLengthSpringIsSingular) {
  const SpringPendula m({1, 1}, {1, 1}, {Spring{0, 1, 1.0, Vec3::Zero()}}, g);
  EXPECT_EQ(kind_of([&] { m.gradient(std::vector<Vec3>{e3(), e3()}); }), ErrorKind::PotentialSingular);
}

TEST(ElasticRod, InertiaMatchesDisplayedCoefficients) {
  const std::size_t n = 10;
  const double m = 0.055, l = 1.1;
  const ElasticRod rod(n, m, l, {1000.0}, g, UnitVector(e1()));
  const double unit = m * l * l / std::pow(n + 1.0, 3);
  EXPECT_NEAR(rod.inertia()(0, 0), (n - 2.0 / 3.0) * unit, 1e-15);
  EXPECT_NEAR(rod.inertia()(n - 1, n - 1), unit / 3.0, 1e-15);
  EXPECT_NEAR(rod.inertia()(0, 1), (n - 1.0) / 2.0 * unit, 1e-15);
  EXPECT_NEAR(rod.inertia()(0, n - 1), 0.5 * unit, 1e-15);
  EXPECT_NEAR(rod.inertia()(3, 7), (n - 7.0) / 2.0 * unit, 1e-15);
  EXPECT_FALSE(rod.inertia().is_diagonal());
}

TEST(ElasticRod, StraightRodWithoutGravityIsAtEquilibrium) {
  const ElasticRod rod(5, 0.05, 1.0, {100.0}, 0.0, UnitVector(e2()));
  const std::vector<Vec3> q(5, e2());
  const auto wdot = angular_acceleration(rod, q, std::vector<Vec3>(5, Vec3::Zero()));
  for (const auto& a : wdot) EXPECT_LE(max_abs(a), 1e-14);
  EXPECT_EQ(rod.potential(q), 0.0);
}

TEST(ElasticRod, BendingCouplesNeighbours) {
  const ElasticRod rod(3, 0.04, 1.0, {10.0, 20.0, 30.0}, 0.0, UnitVector(e1()));
  const std::vector<Vec3> q{e1(), e2(), e2()};
  // only joint 2 is bent by 90 degrees: 1/2 kappa_2 (1 - 0)^2
  EXPECT_DOUBLE_EQ(rod.potential(q), 10.0);
  EXPECT_LE(check_gradient(rod, q, 1e-6), 1e-7);
}

TEST(ElasticRod, KappaSizeIsChecked) {
  EXPECT_THROW(ElasticRod(3, 1, 1, {1.0, 2.0}, g, UnitVector(e1())), Error);
  EXPECT_THROW(ElasticRod(0, 1, 1, {1.0}, g, UnitVector(e1())), Error);
}

TEST(Dipoles, HeadToTailPairEnergy) {
  const double r = 0.05, nu = 0.1;
  const MagneticDipoleArray m({0.05, 0.05}, {0.02, 0.02}, {nu, nu}, {Vec3::Zero(), Vec3(r, 0, 0)});
  const double c = kMu0 * nu * nu / (4.0 * std::numbers::pi * r * r * r);
  EXPECT_NEAR(m.potential(std::vector<Vec3>{e1(), e1()}), -2.0 * c, 1e-18);
  EXPECT_NEAR(m.potential(std::vector<Vec3>{e2(), e2()}), c, 1e-18);
  EXPECT_NEAR(m.inertia()(0, 0), 0.05 * 0.02 * 0.02 / 12.0, 1e-20);
}

TEST(Dipoles, CoincidentPivotsRejected) {
  EXPECT_EQ(kind_of([] { MagneticDipoleArray({1, 1}, {1, 1}, {1, 1}, {Vec3::Zero(), Vec3::Zero()}); }),
            ErrorKind::PotentialSingular);
}

TEST(LennardJones, PotentialZeroAtSigmaAndForceZeroAtMinimum) {
  const double sigma = 0.3;
  const LennardJonesSphere m({1, 1}, 0.5, sigma);
  auto pair = [](double chord) {
    const double a = 2.0 * std::asin(chord / 2.0);
    return std::vector<Vec3>{e3(), Vec3(std::sin(a), 0.0, std::cos(a))};
  };
  EXPECT_NEAR(m.potential(pair(sigma)), 0.0, 1e-14);
  const auto q = pair(std::pow(2.0, 1.0 / 6.0) * sigma);
  EXPECT_NEAR(m.potential(q), -0.5, 1e-14);
  for (const auto& gr : m.gradient(q)) EXPECT_LE(max_abs(gr), 1e-12);
}

TEST(LennardJones, CoincidentMoleculesAreSingular) {
  const LennardJonesSphere m({1, 1}, 1.0, 0.1);
  EXPECT_EQ(kind_of([&] { m.potential(std::vector<Vec3>{e1(), e1()}); }), ErrorKind::PotentialSingular);
}

TEST(ZooGradients, FiniteDifferencesOnRandomConfigurations) {
  Sampler rs(21);
  const NBodySphere nbody({1, 1, 1, 1}, 1.0);
  const SpringPendula springs({0.1, 0.2, 0.3}, {0.1, 0.2, 0.15},
                              {Spring{0, 1, 10, Vec3(0.1, 0, 0)}, Spring{1, 2, 20, Vec3(0, 0.1, 0)}}, g);
  const ElasticRod rod(6, 0.03, 0.7, {500.0}, g, UnitVector(e1()));
  const MagneticDipoleArray dip({0.05, 0.05, 0.05}, {0.02, 0.02, 0.02}, {0.1, 0.1, 0.1},
                                {Vec3::Zero(), Vec3(0.024, 0, 0), Vec3(0, 0.024, 0)});
  const LennardJonesSphere lj({1, 1, 1, 1, 1}, 0.01, 0.4);
  const DoubleSphericalPendulum dsp(1, 1, g, g, g);

  for (int k = 0; k < 100; ++k) {
    EXPECT_LE(check_gradient(dsp, rs.state(2).q, 1e-6), 1e-10);
    EXPECT_LE(check_gradient(nbody, rs.separated(4, 0.3), 1e-6), 1e-5);
    EXPECT_LE(check_gradient(springs, rs.state(3).q, 1e-6), 1e-6);
    EXPECT_LE(check_gradient(rod, rs.state(6).q, 1e-6), 1e-5);
    EXPECT_LE(check_gradient(dip, rs.state(3).q, 1e-6), 1e-6);
    // separations above 0.9 sigma
    EXPECT_LE(check_gradient(lj, rs.separated(5, 2.0 * std::asin(0.45 * 0.4)), 1e-6), 1e-5);
  }
}

TEST(ZooGradients, PresetConfigurations) {
  for (const auto& name : preset_names()) {
    const auto p = load_preset(name);
    EXPECT_LE(check_gradient(*p.model, p.initial.q, 1e-6), 1e-5) << name;
  }
}

TEST(Presets, PublishedParameters) {
  EXPECT_EQ(load_preset("dsp-100s").h, 0.01);
  EXPECT_EQ(load_preset("dsp-100s").T, 100.0);
  EXPECT_EQ(load_preset("rod10-3s").T, 3.0);
  EXPECT_EQ(load_preset("rod10-3s").h, 1e-4);
  EXPECT_EQ(load_preset("nbody3-10s").h, 1e-3);
  EXPECT_EQ(load_preset("nbody3-10s").T, 10.0);
  EXPECT_EQ(load_preset("lj642-5s").model->size(), 642u);
  EXPECT_EQ(load_preset("dipole16").model->size(), 16u);
  EXPECT_EQ(load_preset("rod10-3s").model->size(), 10u);
  EXPECT_EQ(load_preset("springs4").model->size(), 4u);
}

TEST(Presets, PublishedInitialDataCheck) {
  // 0.8660 * -0.4330 + 0.5 * 0.75 vanishes to the printed digits
  EXPECT_NEAR(0.8660 * -0.4330 + 0.5 * 0.75, 0.0, 1e-4);
  const auto p = load_preset("dsp-100s");
  EXPECT_NEAR(p.initial.q[0].x(), 0.8660, 1e-4);
  EXPECT_NEAR(p.initial.w[0].z(), 0.75, 1e-4);
}

TEST(Presets, InitialStatesSatisfyInvariants) {
  for (const auto& name : preset_names()) {
    const auto p = load_preset(name);
    EXPECT_NO_THROW(p.initial.check()) << name;
    EXPECT_LE(unit_error(p.initial), 1e-15) << name;
    EXPECT_LE(tangency_error(p.initial), 1e-15) << name;
    EXPECT_EQ(p.initial.size(), p.model->size()) << name;
    EXPECT_GT(p.h, 0.0);
    EXPECT_NEAR(std::round(p.T / p.h) * p.h, p.T, 1e-9 * p.T) << name;
  }
}

TEST(Presets, UnknownNameIsAnError) {
  EXPECT_EQ(kind_of([] { load_preset("nope"); }), ErrorKind::UnknownPreset);
}

TEST(Presets, SpringConstantsInListedOrder) {
  const auto p = load_preset("springs4");
  const auto& springs = dynamic_cast<const SpringPendula&>(*p.model).springs();
  ASSERT_EQ(springs.size(), 4u);
  const std::size_t pairs[4][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}};
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(springs[k].i, pairs[k][0]);
    EXPECT_EQ(springs[k].j, pairs[k][1]);
    EXPECT_EQ(springs[k].stiffness, 10.0 * static_cast<double>(k + 1));
  }
}

TEST(Presets, MolecularLayoutIsNearEquilibrium) {
  const auto p = load_preset("lj642-5s");
  const auto& lj = dynamic_cast<const LennardJonesSphere&>(*p.model);
  EXPECT_NEAR(lj.sigma() * std::pow(2.0, 1.0 / 6.0), mean_nearest_neighbor_distance(fibonacci_sphere(642)), 1e-15);
  EXPECT_NEAR(lj.sigma(), 0.1196, 1e-3);
  double max_speed = 0.0;
  for (const auto& w : p.initial.w) max_speed = std::max(max_speed, w.norm());
  // one vortex alone gives |w| = c sin(theta) exp(-theta^2 / s^2)
  const VortexField v;
  double peak = 0.0;
  for (int k = 0; k <= 10000; ++k) {
    const double th = 1e-4 * k;
    peak = std::max(peak, v.strength * std::sin(th) * std::exp(-th * th / (v.width * v.width)));
  }
  EXPECT_GT(max_speed, 0.8 * peak);
  EXPECT_LE(max_speed, 2.0 * peak);
}

TEST(Presets, DiagonalModelsAgreeAcrossForms) {
  for (const char* name : {"nbody3-10s", "springs4", "dipole16", "geodesic"}) {
    const auto p = load_preset(name);
    ASSERT_TRUE(p.model->inertia().is_diagonal()) << name;
    SystemState x = p.initial;
    for (int k = 0; k < 50; ++k) {
      const auto a = explicit_step(*p.model, x, p.h).state;
      const auto b = implicit_step(*p.model, x, p.h).state;
      EXPECT_LE(state_distance(a, b), 1e-12) << name;
      x = a;
    }
  }
}

TEST(Scenario, ModelSpecErrors) {
  EXPECT_EQ(kind_of([] { make_model(json{{"type", "warp_drive"}}); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { make_model(json{{"type", "spherical_pendulum"}, {"m", 1}}); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { make_model(json{{"type", "nbody_sphere"}, {"masses", 1.0}, {"gamma", 1}}); }),
            ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { make_model(json{{"type", "nbody_sphere"}, {"n", -2}, {"masses", 1.0}, {"gamma", 1}}); }),
            ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { make_model(json::array()); }), ErrorKind::ConfigError);
}

TEST(Scenario, ScalarBroadcast) {
  const auto m = make_model(json{{"type", "free_spheres"}, {"n", 3}, {"inertia", 2.0}});
  EXPECT_EQ(m->size(), 3u);
  EXPECT_EQ(m->inertia()(2, 2), 2.0);
}

TEST(Scenario, InitialStateValidation) {
  EXPECT_EQ(kind_of([] { make_initial_state(json{{"q", {{0, 0, 2}}}, {"w", {{0, 0, 0}}}}); }), ErrorKind::ConfigError);
  const auto s = make_initial_state(json{{"q", {{0, 0, 2}}}, {"w", {{1, 0, 1}}}, {"renormalize", true}});
  EXPECT_EQ(s.q[0], e3());
  EXPECT_EQ(s.w[0], e1());
}

TEST(Scenario, FibonacciSphereIsUnitAndDistinct) {
  const auto pts = fibonacci_sphere(100);
  for (const auto& p : pts) EXPECT_NEAR(p.norm(), 1.0, 1e-15);
  EXPECT_GT(mean_nearest_neighbor_distance(pts), 0.2);
}
