#pragma once

// Strong-form finite-difference solver for the periodic compressible
// heat-conducting (optionally viscous) fluid.  Shares only Material and the
// closure with the Galerkin code so it can serve as an independent check.

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <vector>

#include "phydro/errors.hpp"
#include "phydro/thermo.hpp"

namespace phydro {

/// Uniform periodic collocation grid x_i = a + i h, i = 0..n-1.
struct FDGrid {
  double a = 0.0;
  double b = 1.0;
  int n = 64;

  FDGrid() = default;
  FDGrid(double a_, double b_, int n_) : a(a_), b(b_), n(n_) {
    if (!(a < b)) throw ConfigError("FD grid requires a < b");
    if (n < 3) throw ConfigError("FD grid requires at least three points");
  }
  double h() const { return (b - a) / n; }
  double x(int i) const { return a + i * h(); }
};

struct FDFields {
  std::vector<double> rho, M, u;

  FDFields() = default;
  explicit FDFields(int n) : rho(n, 0.0), M(n, 0.0), u(n, 0.0) {}
  int n() const { return static_cast<int>(rho.size()); }

  FDFields& axpy(double alpha, const FDFields& x) {
    for (int i = 0; i < n(); ++i) {
      rho[i] += alpha * x.rho[i];
      M[i] += alpha * x.M[i];
      u[i] += alpha * x.u[i];
    }
    return *this;
  }
};

template <class FR, class FM, class FU>
FDFields sample(const FDGrid& g, FR&& rho, FM&& M, FU&& u) {
  FDFields f(g.n);
  for (int i = 0; i < g.n; ++i) {
    f.rho[i] = rho(g.x(i));
    f.M[i] = M(g.x(i));
    f.u[i] = u(g.x(i));
  }
  return f;
}

/// Time derivatives of (rho, M, u):
///   rho_t = -(M)_x
///   M_t   = -(M v + p)_x + (nu v_x)_x
///   u_t   = -(u v)_x - p v_x + (kappa theta_x)_x + nu v_x^2
/// with nu = lambda + 2 eta, using centered first differences and the
/// compact three-point second difference.  `viscous` switches the nu terms.
inline FDFields fd_rhs(const FDGrid& g, const FDFields& z, const Material& m, bool viscous) {
  const int n = g.n;
  if (z.n() != n) throw ConfigError("FD fields do not match the grid");
  const double h = g.h();
  std::vector<double> v(n), p(n), theta(n), mom_flux(n), en_flux(n);
  for (int i = 0; i < n; ++i) {
    const ThermoPoint tp = eval_eos(z.rho[i], z.u[i], m);
    v[i] = z.M[i] / z.rho[i];
    p[i] = tp.p;
    theta[i] = tp.theta;
    mom_flux[i] = z.M[i] * v[i] + p[i];
    en_flux[i] = z.u[i] * v[i];
  }
  const double nu = viscous ? m.longitudinal_viscosity() : 0.0;
  FDFields out(n);
  for (int i = 0; i < n; ++i) {
    const int l = (i + n - 1) % n;
    const int r = (i + 1) % n;
    const double dv = (v[r] - v[l]) / (2.0 * h);
    out.rho[i] = -(z.M[r] - z.M[l]) / (2.0 * h);
    out.M[i] = -(mom_flux[r] - mom_flux[l]) / (2.0 * h) + nu * (v[r] - 2.0 * v[i] + v[l]) / (h * h);
    out.u[i] = -(en_flux[r] - en_flux[l]) / (2.0 * h) - p[i] * dv +
               m.kappa * (theta[r] - 2.0 * theta[i] + theta[l]) / (h * h) + nu * dv * dv;
  }
  return out;
}

inline FDFields fd_step_rk4(const FDGrid& g, const FDFields& z, const Material& m, bool viscous,
                            double dt) {
  const FDFields k1 = fd_rhs(g, z, m, viscous);
  const FDFields k2 = fd_rhs(g, FDFields(z).axpy(0.5 * dt, k1), m, viscous);
  const FDFields k3 = fd_rhs(g, FDFields(z).axpy(0.5 * dt, k2), m, viscous);
  const FDFields k4 = fd_rhs(g, FDFields(z).axpy(dt, k3), m, viscous);
  FDFields out(z);
  out.axpy(dt / 6.0, k1).axpy(dt / 3.0, k2).axpy(dt / 3.0, k3).axpy(dt / 6.0, k4);
  return out;
}

/// Nodal values of (rho, M, u) on a uniform periodic grid over time.
struct NodalTrajectory {
  double a = 0.0, b = 1.0;
  int n = 0;  // points per field (periodic: node b omitted)
  Material material;
  std::vector<double> times;
  std::vector<std::array<std::vector<double>, 3>> fields;
};

inline NodalTrajectory fd_run(const FDGrid& g, const FDFields& z0, const Material& m, bool viscous,
                              double dt, double T, int output_every) {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  const int steps = static_cast<int>(std::round(T / dt));
  if (std::abs(steps * dt - T) > 1e-9 * std::max(1.0, T))
    throw ConfigError("final time is not an integer multiple of dt");
  if (output_every < 1) throw ConfigError("output stride must be positive");
  NodalTrajectory tr{g.a, g.b, g.n, m, {}, {}};
  FDFields z = z0;
  for (int k = 0; k <= steps; ++k) {
    if (k > 0) z = fd_step_rk4(g, z, m, viscous, dt);
    if (k % output_every == 0 || k == steps) {
      if (!tr.times.empty() && tr.times.back() == k * dt) continue;
      tr.times.push_back(k * dt);
      tr.fields.push_back({z.rho, z.M, z.u});
    }
  }
  return tr;
}

struct CompareResult {
  std::vector<double> times;
  std::vector<std::array<double, 3>> l2;  // per output time: (rho, M, u)

  double max_l2() const {
    double m = 0.0;
    for (const auto& e : l2)
      for (double v : e) m = std::max(m, v);
    return m;
  }
};

/// Discrete L2 differences sampled on the coarser of the two grids.
inline CompareResult compare(const NodalTrajectory& A, const NodalTrajectory& B) {
  const double len = std::max(A.b - A.a, B.b - B.a);
  if (std::abs(A.a - B.a) > 1e-12 * len || std::abs(A.b - B.b) > 1e-12 * len)
    throw ConfigError("trajectories live on different intervals");
  const Material &ma = A.material, &mb = B.material;
  if (ma.c_v != mb.c_v || ma.R_g != mb.R_g || ma.s_ref != mb.s_ref || ma.kappa != mb.kappa ||
      ma.eta != mb.eta || ma.zeta != mb.zeta || ma.tau0 != mb.tau0)
    throw ConfigError("trajectories use different materials");
  if (A.times.size() != B.times.size()) throw ConfigError("trajectories have different output times");
  for (std::size_t k = 0; k < A.times.size(); ++k)
    if (std::abs(A.times[k] - B.times[k]) > 1e-9 * std::max(1.0, A.times[k]))
      throw ConfigError("trajectories have different output times");
  const int nc = std::min(A.n, B.n);
  if (nc < 1 || A.n % nc != 0 || B.n % nc != 0) {
    std::ostringstream os;
    os << "incompatible resolutions " << A.n << " and " << B.n;
    throw ConfigError(os.str());
  }
  const int sa = A.n / nc, sb = B.n / nc;
  const double h = (A.b - A.a) / nc;
  CompareResult out;
  out.times = A.times;
  for (std::size_t k = 0; k < A.times.size(); ++k) {
    std::array<double, 3> e{0.0, 0.0, 0.0};
    for (int f = 0; f < 3; ++f) {
      const auto& fa = A.fields[k][f];
      const auto& fb = B.fields[k][f];
      if (static_cast<int>(fa.size()) != A.n || static_cast<int>(fb.size()) != B.n)
        throw ConfigError("trajectory snapshot has the wrong size");
      double sum = 0.0;
      for (int i = 0; i < nc; ++i) {
        const double d = fa[i * sa] - fb[i * sb];
        sum += d * d;
      }
      e[f] = std::sqrt(h * sum);
    }
    out.l2.push_back(e);
  }
  return out;
}

}  // namespace phydro
