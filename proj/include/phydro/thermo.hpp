#pragma once

// Calorically perfect ideal-gas closure and the pointwise derivatives of
// the energy, entropy and exergy-like generators.
//
// Entropy density (per unit volume):
//   s(rho, u) = rho * (c_v ln(u / (c_v rho)) - R_g ln rho + s_ref)
// with temperature theta = u / (rho c_v), pressure p = rho R_g theta and
// chemical potential mu = theta (c_v + R_g - s / rho).  These satisfy the
// local-equilibrium relation p + u = theta s + rho mu identically.

#include <array>
#include <cmath>
#include <sstream>

#include "phydro/errors.hpp"

namespace phydro {

/// Smallest admissible nodal density and internal-energy density.
inline constexpr double kAdmissibleFloor = 1e-10;

struct Material {
  double c_v = 1.0;
  double R_g = 1.0;
  double s_ref = 0.0;
  double kappa = 0.0;
  double eta = 0.0;
  double zeta = 0.0;
  double tau0 = 1.0;

  /// First Lame-type coefficient zeta - 2 eta / 3 (may be negative).
  double lambda() const { return zeta - 2.0 / 3.0 * eta; }
  /// Longitudinal viscosity 2 eta + lambda = zeta + 4 eta / 3 >= 0.
  double longitudinal_viscosity() const { return 2.0 * eta + lambda(); }
  double gamma() const { return (c_v + R_g) / c_v; }
  bool inviscid() const { return eta == 0.0 && zeta == 0.0; }
};

inline void validate(const Material& m) {
  auto fail = [](const char* what, double v) {
    std::ostringstream os;
    os << "invalid material: " << what << " = " << v;
    throw ConfigError(os.str());
  };
  if (!(m.c_v > 0.0) || !std::isfinite(m.c_v)) fail("c_v", m.c_v);
  if (!(m.R_g > 0.0) || !std::isfinite(m.R_g)) fail("R_g", m.R_g);
  if (!std::isfinite(m.s_ref)) fail("s_ref", m.s_ref);
  if (!(m.kappa >= 0.0) || !std::isfinite(m.kappa)) fail("kappa", m.kappa);
  if (!(m.eta >= 0.0) || !std::isfinite(m.eta)) fail("eta", m.eta);
  if (!(m.zeta >= 0.0) || !std::isfinite(m.zeta)) fail("zeta", m.zeta);
  if (!(m.tau0 > 0.0) || !std::isfinite(m.tau0)) fail("tau0", m.tau0);
}

struct ThermoPoint {
  double rho = 0.0;
  double u = 0.0;
  double theta = 0.0;
  double tau = 0.0;
  double p = 0.0;
  double s = 0.0;
  double mu = 0.0;
  double s_tilde = 0.0;
};

/// Partial derivatives with respect to (rho, u) of the derived quantities.
struct ThermoPartials {
  double theta_rho, theta_u;
  double p_rho, p_u;
  double s_rho, s_u;
  double mu_rho, mu_u;
};

inline void check_admissible(double rho, double u) {
  if (!(rho >= kAdmissibleFloor) || !(u >= kAdmissibleFloor) || !std::isfinite(rho) ||
      !std::isfinite(u)) {
    std::ostringstream os;
    os << "inadmissible thermodynamic state (rho = " << rho << ", u = " << u << ")";
    throw DomainError(os.str());
  }
}

inline ThermoPoint eval_eos(double rho, double u, const Material& m) {
  check_admissible(rho, u);
  ThermoPoint tp;
  tp.rho = rho;
  tp.u = u;
  tp.theta = u / (rho * m.c_v);
  tp.tau = rho * m.c_v / u;
  tp.p = m.R_g * u / m.c_v;
  tp.s = rho * (m.c_v * std::log(u / (m.c_v * rho)) - m.R_g * std::log(rho) + m.s_ref);
  tp.mu = tp.theta * (m.c_v + m.R_g - tp.s / rho);
  tp.s_tilde = tp.s / m.tau0;
  return tp;
}

inline ThermoPartials eos_partials(const ThermoPoint& tp, const Material& m) {
  ThermoPartials d{};
  d.theta_rho = -tp.theta / tp.rho;
  d.theta_u = 1.0 / (tp.rho * m.c_v);
  d.p_rho = 0.0;
  d.p_u = m.R_g / m.c_v;
  d.s_u = tp.tau;
  d.s_rho = -tp.mu / tp.theta;
  // mu = theta * g with g = c_v + R_g - s / rho.
  const double g = m.c_v + m.R_g - tp.s / tp.rho;
  const double g_rho = -d.s_rho / tp.rho + tp.s / (tp.rho * tp.rho);
  const double g_u = -d.s_u / tp.rho;
  d.mu_rho = d.theta_rho * g + tp.theta * g_rho;
  d.mu_u = d.theta_u * g + tp.theta * g_u;
  return d;
}

/// rho grad(mu/theta) - u grad(1/theta) - grad(p/theta), every gradient
/// expanded through the closure's partials.  Zero for a consistent closure.
inline double gibbs_duhem_residual(double rho, double u, double grad_rho, double grad_u,
                                   const Material& m) {
  const ThermoPoint tp = eval_eos(rho, u, m);
  const ThermoPartials d = eos_partials(tp, m);
  const double grad_theta = d.theta_rho * grad_rho + d.theta_u * grad_u;
  const double grad_mu = d.mu_rho * grad_rho + d.mu_u * grad_u;
  const double grad_p = d.p_rho * grad_rho + d.p_u * grad_u;
  const double th2 = tp.theta * tp.theta;
  const double grad_mu_over_theta = grad_mu / tp.theta - tp.mu * grad_theta / th2;
  const double grad_tau = -grad_theta / th2;
  const double grad_p_over_theta = grad_p / tp.theta - tp.p * grad_theta / th2;
  return rho * grad_mu_over_theta - u * grad_tau - grad_p_over_theta;
}

/// Three-component pointwise derivative [d/drho, d/dM, d/du].
using FieldTriple = std::array<double, 3>;

struct PointwiseDerivatives {
  FieldTriple dH;
  FieldTriple dS;
  FieldTriple dE;
};

/// dH = [-v^2/2, v, 1], dS = [-mu/theta, 0, 1/theta], dE = dH - dS / tau0.
inline PointwiseDerivatives pointwise_derivatives(double rho, double M, double u,
                                                  const Material& m) {
  const ThermoPoint tp = eval_eos(rho, u, m);
  const double v = M / rho;
  PointwiseDerivatives out;
  out.dH = {-0.5 * v * v, v, 1.0};
  out.dS = {-tp.mu / tp.theta, 0.0, tp.tau};
  for (int k = 0; k < 3; ++k) out.dE[k] = out.dH[k] - out.dS[k] / m.tau0;
  return out;
}

}  // namespace phydro
