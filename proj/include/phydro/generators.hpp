#pragma once

// Discrete generating functionals H, S, E = H - S / tau0 and their discrete
// variational derivatives.
//
// The discrete functionals are quadratures of the densities evaluated on the
// interpolated fields.  Their coefficient gradients are load vectors
// g_i = Q[delta(x) phi_i]; the discrete variational derivative is the P1
// field M^{-1} g, i.e. the L2 projection of the pointwise derivative.  With
// this choice dF/dt = <dF, M zdot> holds exactly for every discrete
// functional, which is what makes the balance laws exact after
// discretization.

#include <Eigen/Dense>

#include <memory>
#include <vector>

#include "phydro/mesh.hpp"
#include "phydro/thermo.hpp"

namespace phydro {

/// Mesh, material and the factorized mass matrix shared by all operators.
struct Model {
  Mesh mesh;
  Material material;
  std::shared_ptr<const MassSolver> mass;

  Model(Mesh mesh_, Material material_)
      : mesh(std::move(mesh_)), material(material_),
        mass(std::make_shared<MassSolver>(mesh)) {
    validate(material);
  }
  int n() const { return mesh.n_free(); }
};

struct Functionals {
  double H = 0.0;
  double S = 0.0;
  double E = 0.0;
};

inline Functionals functionals(const Mesh& mesh, const State& z, const Material& m) {
  check_admissible(mesh, z);
  Functionals f;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    for (int k = 0; k < 2; ++k) {
      const double rho = eval_p1(mesh, z.rho(), c, k)[0];
      const double M = eval_p1(mesh, z.M(), c, k)[0];
      const double u = eval_p1(mesh, z.u(), c, k)[0];
      const ThermoPoint tp = eval_eos(rho, u, m);
      f.H += mesh.qp_weight() * (0.5 * M * M / rho + u);
      f.S += mesh.qp_weight() * tp.s;
    }
  }
  f.E = f.H - f.S / m.tau0;
  return f;
}

inline Functionals functionals(const Model& model, const State& z) {
  return functionals(model.mesh, z, model.material);
}

/// Stacked coefficient vectors of the three discrete variational derivatives.
struct DiscreteDerivatives {
  Eigen::VectorXd dH;
  Eigen::VectorXd dS;
  Eigen::VectorXd dE;
};

/// Load vectors Q[delta phi_i]: gradients of the discrete H and S with
/// respect to the nodal coefficients.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> functional_gradients(const Mesh& mesh,
                                                                         const State& z,
                                                                         const Material& m) {
  check_admissible(mesh, z);
  const int n = mesh.n_free();
  Eigen::VectorXd gH = Eigen::VectorXd::Zero(3 * n);
  Eigen::VectorXd gS = Eigen::VectorXd::Zero(3 * n);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto nodes = mesh.cell_nodes(c);
    for (int k = 0; k < 2; ++k) {
      const auto N = mesh.shape(k);
      const double rho = eval_p1(mesh, z.rho(), c, k)[0];
      const double M = eval_p1(mesh, z.M(), c, k)[0];
      const double u = eval_p1(mesh, z.u(), c, k)[0];
      const PointwiseDerivatives d = pointwise_derivatives(rho, M, u, m);
      const double w = mesh.qp_weight();
      for (int a = 0; a < 2; ++a) {
        for (int f = 0; f < 3; ++f) {
          gH[f * n + nodes[a]] += w * d.dH[f] * N[a];
          gS[f * n + nodes[a]] += w * d.dS[f] * N[a];
        }
      }
    }
  }
  return {gH, gS};
}

/// L2 projection of pointwise triples given at the quadrature points (index
/// 2c + k).  The load is assembled relative to the first value, so a
/// constant field comes back bit-exact instead of carrying solver roundoff.
inline Eigen::VectorXd project_qp(const Model& model, const std::vector<FieldTriple>& values) {
  const Mesh& mesh = model.mesh;
  const int n = model.n();
  const FieldTriple ref = values.front();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(3 * n);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto nodes = mesh.cell_nodes(c);
    for (int k = 0; k < 2; ++k) {
      const auto N = mesh.shape(k);
      const FieldTriple& v = values[2 * c + k];
      for (int a = 0; a < 2; ++a)
        for (int f = 0; f < 3; ++f) g[f * n + nodes[a]] += mesh.qp_weight() * (v[f] - ref[f]) * N[a];
    }
  }
  Eigen::VectorXd d = model.mass->solve_stacked(g);
  for (int f = 0; f < 3; ++f) d.segment(f * n, n).array() += ref[f];
  return d;
}

inline DiscreteDerivatives generator_derivatives(const Model& model, const State& z) {
  const Mesh& mesh = model.mesh;
  check_admissible(mesh, z);
  const int n = model.n();
  std::vector<FieldTriple> vH, vS;
  vH.reserve(mesh.n_qp());
  vS.reserve(mesh.n_qp());
  for (int c = 0; c < mesh.n_cells(); ++c) {
    for (int k = 0; k < 2; ++k) {
      const PointwiseDerivatives d =
          pointwise_derivatives(eval_p1(mesh, z.rho(), c, k)[0], eval_p1(mesh, z.M(), c, k)[0],
                                eval_p1(mesh, z.u(), c, k)[0], model.material);
      vH.push_back(d.dH);
      vS.push_back(d.dS);
    }
  }
  DiscreteDerivatives d;
  d.dH = project_qp(model, vH);
  d.dS = project_qp(model, vS);
  // Constants and zero lie in the P1 space; their projections are exact.
  d.dH.segment(2 * n, n).setOnes();
  d.dS.segment(n, n).setZero();
  d.dE = d.dH - d.dS / model.material.tau0;
  return d;
}

/// Averaged entropy gradient along the segment z0 -> z1: the projection of
/// the integral over s in [0, 1] of the entropy load vector at z0 + s (z1 - z0)
/// (five-point Gauss in s).  Its pairing with z1 - z0 reproduces
/// S(z1) - S(z0) up to the quadrature error in s.
inline Eigen::VectorXd entropy_discrete_gradient(const Model& model, const State& z0,
                                                 const State& z1) {
  static const double gs[5] = {0.0469100770306680, 0.2307653449471585, 0.5,
                               0.7692346550528415, 0.9530899229693320};
  static const double gw[5] = {0.1184634425280945, 0.2393143352496832, 0.2844444444444444,
                               0.2393143352496832, 0.1184634425280945};
  const Mesh& mesh = model.mesh;
  const Material& m = model.material;
  check_admissible(mesh, z0);
  check_admissible(mesh, z1);
  const int n = model.n();
  std::vector<FieldTriple> vals;
  vals.reserve(mesh.n_qp());
  for (int c = 0; c < mesh.n_cells(); ++c) {
    for (int k = 0; k < 2; ++k) {
      const double r0 = eval_p1(mesh, z0.rho(), c, k)[0], r1 = eval_p1(mesh, z1.rho(), c, k)[0];
      const double u0 = eval_p1(mesh, z0.u(), c, k)[0], u1 = eval_p1(mesh, z1.u(), c, k)[0];
      double a = 0.0, b = 0.0;
      for (int j = 0; j < 5; ++j) {
        const double rho = r0 + gs[j] * (r1 - r0);
        const double u = u0 + gs[j] * (u1 - u0);
        const PointwiseDerivatives d = pointwise_derivatives(rho, 0.0, u, m);
        a += gw[j] * d.dS[0];
        b += gw[j] * d.dS[2];
      }
      vals.push_back({a, 0.0, b});
    }
  }
  Eigen::VectorXd d = project_qp(model, vals);
  d.segment(n, n).setZero();
  return d;
}

}  // namespace phydro
