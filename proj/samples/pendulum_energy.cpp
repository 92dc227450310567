// Integrates the double spherical pendulum with the implicit variational
// integrator and an RK4 baseline, printing energy and unit-length error.

#include <cstdio>

#include "s2vi/s2vi.hpp"

int main() {
  using namespace s2vi;
  const auto preset = load_preset("dsp-100s");
  const Model& model = *preset.model;

  VariationalStepper vi(model, preset.h);
  SystemState a = preset.initial, b = preset.initial;
  const double e0 = total_energy(model, a);

  std::printf("%8s %14s %14s %14s %14s\n", "t", "dE vi", "dE rk4", "unit vi", "unit rk4");
  for (int k = 1; k <= 2000; ++k) {
    a = vi.step(a);
    b = rk4_step(model, b, preset.h);
    if (k % 250 == 0) {
      std::printf("%8.2f %14.3e %14.3e %14.3e %14.3e\n", a.t, total_energy(model, a) - e0,
                  total_energy(model, b) - e0, unit_error(a), unit_error(b));
    }
  }
}
