#pragma once

// Fixed-seed generators of smooth admissible states shared by the tests.

#include <cmath>
#include <random>

#include "phydro/generators.hpp"

namespace phydro::fixtures {

inline constexpr double kPi = 3.14159265358979323846;

/// A few random Fourier modes (periodic over the mesh) around a mean.
struct RandomProfile {
  double mean = 1.0;
  double a[3]{}, b[3]{};

  RandomProfile(std::mt19937_64& rng, double mean_, double amp) : mean(mean_) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int k = 0; k < 3; ++k) {
      a[k] = amp * U(rng) / (k + 1);
      b[k] = amp * U(rng) / (k + 1);
    }
  }
  double operator()(const Mesh& mesh, double x) const {
    const double s = 2.0 * kPi * (x - mesh.a()) / mesh.length();
    double v = mean;
    for (int k = 0; k < 3; ++k) v += a[k] * std::cos((k + 1) * s) + b[k] * std::sin((k + 1) * s);
    return v;
  }
};

/// Admissible state with density and energy in roughly [0.5, 1.5] and
/// velocity of order `amp`.
inline State random_smooth_state(const Mesh& mesh, std::mt19937_64& rng, double amp = 0.3) {
  const RandomProfile r(rng, 1.0, amp), m(rng, 0.0, amp), u(rng, 1.0, amp);
  State z(mesh.n_free());
  z.rho() = interpolate(mesh, [&](double x) { return r(mesh, x); });
  z.M() = interpolate(mesh, [&](double x) { return m(mesh, x); });
  z.u() = interpolate(mesh, [&](double x) { return u(mesh, x); });
  return z;
}

inline State uniform_state(const Mesh& mesh, double rho, double M, double u) {
  State z(mesh.n_free());
  z.rho().setConstant(rho);
  z.M().setConstant(M);
  z.u().setConstant(u);
  return z;
}

inline Material conducting(double kappa) {
  Material m;
  m.kappa = kappa;
  return m;
}

}  // namespace phydro::fixtures
