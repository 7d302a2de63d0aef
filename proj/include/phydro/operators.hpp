#pragma once

// Galerkin matrices of the Poisson operator J(z), the dissipation operator
// R(z), the heat-conduction factorization tau0 R = C D C^T, and the boundary
// port operator B(z), all built on the shared two-point Gauss rule.
//
// Stacked dof ordering: field-major, (rho_0..rho_{N-1}, M_0.., u_0..).
// Every operator is defined cell by cell through a 6x6 element matrix over
// the local dofs (field f, local vertex a) -> 2 f + a, so the assembled
// matrix and the matrix-free application share one code path.
//
// Two coefficient choices tie the discrete operators to the discrete
// generator derivatives (see generators.hpp):
//  * the pressure gradient inside J_{u,M} is the discrete Gibbs-Duhem
//    gradient g = -(rho da + (u + p) db) / b, with a, b the discrete entropy
//    derivative fields.  Then J dS = 0 holds at every quadrature point.
//  * the velocity gradient inside R is the slope of the discrete velocity
//    field (the M-component of dH).  Then R dH = 0 holds pointwise.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <sstream>
#include <vector>

#include "phydro/assembled.hpp"
#include "phydro/errors.hpp"
#include "phydro/generators.hpp"
#include "phydro/mesh.hpp"
#include "phydro/thermo.hpp"

namespace phydro {

/// Fault injection used to exercise the verification suite.
struct AssemblyHooks {
  bool corrupt_J = false;  // assemble J_{M,rho} with the wrong sign
};

/// State-dependent coefficients at every quadrature point plus the discrete
/// generator derivatives they were derived from.
struct OperatorContext {
  const Model* model = nullptr;
  State z;
  DiscreteDerivatives d;
  std::vector<QuadPointData> qp;
  std::vector<double> grad_p;      // discrete Gibbs-Duhem pressure gradient per qp
  std::vector<double> grad_v;      // slope of the discrete velocity per qp
  std::vector<double> tau_slope;   // slope of the discrete reciprocal temperature per qp
  AssemblyHooks hooks;

  const Mesh& mesh() const { return model->mesh; }
  const Material& material() const { return model->material; }
  int n() const { return model->n(); }
};

/// `dS_override` replaces the entropy derivative (used by the time stepper's
/// averaged gradient); the operators are then built around that field.
inline OperatorContext make_context(const Model& model, const State& z, AssemblyHooks hooks = {},
                                    const Eigen::VectorXd* dS_override = nullptr) {
  check_admissible(model.mesh, z);
  OperatorContext ctx;
  ctx.model = &model;
  ctx.z = z;
  ctx.hooks = hooks;
  ctx.d = generator_derivatives(model, z);
  if (dS_override) {
    ctx.d.dS = *dS_override;
    ctx.d.dE = ctx.d.dH - ctx.d.dS / model.material.tau0;
  }
  ctx.qp = eval_all(model.mesh, z, model.material);
  const int n = model.n();
  const Eigen::VectorXd a = ctx.d.dS.segment(0, n);
  const Eigen::VectorXd b = ctx.d.dS.segment(2 * n, n);
  const Eigen::VectorXd vh = ctx.d.dH.segment(n, n);
  const Mesh& mesh = model.mesh;
  ctx.grad_p.resize(mesh.n_qp());
  ctx.grad_v.resize(mesh.n_qp());
  ctx.tau_slope.resize(mesh.n_qp());
  for (int c = 0; c < mesh.n_cells(); ++c) {
    for (int k = 0; k < 2; ++k) {
      const int q = 2 * c + k;
      const auto av = eval_p1(mesh, a, c, k);
      const auto bv = eval_p1(mesh, b, c, k);
      if (!(bv[0] > 0.0)) {
        std::ostringstream os;
        os << "discrete reciprocal temperature is nonpositive at x = " << ctx.qp[q].x;
        throw DomainError(os.str());
      }
      const QuadPointData& p = ctx.qp[q];
      ctx.grad_p[q] = -(p.rho * av[1] + (p.u + p.thermo.p) * bv[1]) / bv[0];
      ctx.grad_v[q] = eval_p1(mesh, vh, c, k)[1];
      ctx.tau_slope[q] = bv[1];
    }
  }
  return ctx;
}

using ElementMatrix = Eigen::Matrix<double, 6, 6>;

inline constexpr int local_dof(Field f, int a) { return 2 * static_cast<int>(f) + a; }

inline ElementMatrix element_J(const OperatorContext& ctx, int c) {
  const Mesh& mesh = ctx.mesh();
  const auto dN = mesh.dshape();
  const double w = mesh.qp_weight();
  ElementMatrix E = ElementMatrix::Zero();
  constexpr Field R = Field::rho, M = Field::M, U = Field::u;
  for (int k = 0; k < 2; ++k) {
    const QuadPointData& q = ctx.qp[2 * c + k];
    const double g = ctx.grad_p[2 * c + k];
    const auto N = mesh.shape(k);
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        E(local_dof(R, a), local_dof(M, b)) += w * q.rho * N[b] * dN[a];
        E(local_dof(U, a), local_dof(M, b)) +=
            w * (q.u * N[b] * dN[a] + N[b] * (dN[a] * q.thermo.p + N[a] * g));
        if (a < b) E(local_dof(M, a), local_dof(M, b)) += w * q.M * (N[b] * dN[a] - N[a] * dN[b]);
      }
    }
  }
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double sign = ctx.hooks.corrupt_J ? 1.0 : -1.0;
      E(local_dof(M, a), local_dof(R, b)) = sign * E(local_dof(R, b), local_dof(M, a));
      E(local_dof(M, a), local_dof(U, b)) = -E(local_dof(U, b), local_dof(M, a));
      if (a > b) E(local_dof(M, a), local_dof(M, b)) = -E(local_dof(M, b), local_dof(M, a));
    }
  }
  return E;
}

inline ElementMatrix element_R(const OperatorContext& ctx, int c) {
  const Mesh& mesh = ctx.mesh();
  const Material& m = ctx.material();
  const auto dN = mesh.dshape();
  const double w = mesh.qp_weight();
  const double visc = m.longitudinal_viscosity();
  ElementMatrix E = ElementMatrix::Zero();
  constexpr Field M = Field::M, U = Field::u;
  for (int k = 0; k < 2; ++k) {
    const QuadPointData& q = ctx.qp[2 * c + k];
    const double dv = ctx.grad_v[2 * c + k];
    const double th = q.thermo.theta;
    const auto N = mesh.shape(k);
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        E(local_dof(M, a), local_dof(U, b)) += w * (-visc * th * dN[a] * dv) * N[b];
        if (a <= b) {
          E(local_dof(M, a), local_dof(M, b)) += w * visc * th * dN[a] * dN[b];
          E(local_dof(U, a), local_dof(U, b)) +=
              w * (visc * th * dv * dv * N[a] * N[b] + m.kappa * th * th * dN[a] * dN[b]);
        }
      }
    }
  }
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      E(local_dof(U, b), local_dof(M, a)) = E(local_dof(M, a), local_dof(U, b));
      if (a > b) {
        E(local_dof(M, a), local_dof(M, b)) = E(local_dof(M, b), local_dof(M, a));
        E(local_dof(U, a), local_dof(U, b)) = E(local_dof(U, b), local_dof(U, a));
      }
    }
  }
  return E;
}

inline std::array<int, 6> global_dofs(const OperatorContext& ctx, int c) {
  const auto nodes = ctx.mesh().cell_nodes(c);
  const int n = ctx.n();
  std::array<int, 6> g{};
  for (int f = 0; f < 3; ++f)
    for (int a = 0; a < 2; ++a) g[2 * f + a] = f * n + nodes[a];
  return g;
}

template <class ElementFn>
AssembledOperator assemble(const OperatorContext& ctx, ElementFn&& element, SymmetryClass cls) {
  const int dim = 3 * ctx.n();
  AssembledOperator op;
  op.matrix = Eigen::MatrixXd::Zero(dim, dim);
  op.symmetry = cls;
  op.snapshot = ctx.z.z;
  for (int c = 0; c < ctx.mesh().n_cells(); ++c) {
    const ElementMatrix E = element(ctx, c);
    const auto g = global_dofs(ctx, c);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) op.matrix(g[i], g[j]) += E(i, j);
  }
  return op;
}

/// Matrix-free product with the operator defined by `element`.
template <class ElementFn>
Eigen::VectorXd apply(const OperatorContext& ctx, ElementFn&& element, const Eigen::VectorXd& x) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
  for (int c = 0; c < ctx.mesh().n_cells(); ++c) {
    const ElementMatrix E = element(ctx, c);
    const auto g = global_dofs(ctx, c);
    Eigen::Matrix<double, 6, 1> xl;
    for (int i = 0; i < 6; ++i) xl[i] = x[g[i]];
    const Eigen::Matrix<double, 6, 1> yl = E * xl;
    for (int i = 0; i < 6; ++i) y[g[i]] += yl[i];
  }
  return y;
}

inline AssembledOperator assemble_J(const OperatorContext& ctx) {
  return assemble(ctx, element_J, SymmetryClass::skew);
}
inline AssembledOperator assemble_R(const OperatorContext& ctx) {
  return assemble(ctx, element_R, SymmetryClass::symmetric_psd);
}
inline Eigen::VectorXd apply_J(const OperatorContext& ctx, const Eigen::VectorXd& x) {
  return apply(ctx, element_J, x);
}
inline Eigen::VectorXd apply_R(const OperatorContext& ctx, const Eigen::VectorXd& x) {
  return apply(ctx, element_R, x);
}

// ---------------------------------------------------------------------------
// Heat-conduction factorization.  The flux space holds one value per
// quadrature point.  C^T maps a P1 coefficient vector to the slopes of its
// u-component at the quadrature points (a pointwise force); D multiplies by
// w kappa tau0 / tau^2 and returns quadrature-weighted fluxes; C sums
// weighted fluxes against the test-function slopes.

inline void require_inviscid(const Material& m) {
  if (!m.inviscid())
    throw ConfigError("heat-conduction factorization requires eta = zeta = 0");
}

struct Factorization {
  AssembledOperator C;       // 3N x Q
  AssembledOperator D;       // Q x Q, diagonal
  AssembledOperator C_star;  // Q x 3N
};

inline Factorization assemble_factorization(const OperatorContext& ctx) {
  require_inviscid(ctx.material());
  const Mesh& mesh = ctx.mesh();
  const int n = ctx.n();
  const int nq = mesh.n_qp();
  const auto dN = mesh.dshape();
  Factorization f;
  f.C.matrix = Eigen::MatrixXd::Zero(3 * n, nq);
  f.D.matrix = Eigen::MatrixXd::Zero(nq, nq);
  f.D.symmetry = SymmetryClass::symmetric_psd;
  f.C.snapshot = f.D.snapshot = f.C_star.snapshot = ctx.z.z;
  const Material& m = ctx.material();
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto nodes = mesh.cell_nodes(c);
    for (int k = 0; k < 2; ++k) {
      const int q = 2 * c + k;
      for (int a = 0; a < 2; ++a) f.C.matrix(2 * n + nodes[a], q) += dN[a];
      const double tau = ctx.qp[q].thermo.tau;
      f.D.matrix(q, q) = mesh.qp_weight() * m.kappa * m.tau0 / (tau * tau);
    }
  }
  f.C_star.matrix = f.C.matrix.transpose();
  return f;
}

/// C^T x: slopes of the u-component of x at each quadrature point.
inline Eigen::VectorXd apply_C_star(const Mesh& mesh, const Eigen::VectorXd& x) {
  const int n = mesh.n_free();
  Eigen::VectorXd out(mesh.n_qp());
  const Eigen::VectorXd xu = x.segment(2 * n, n);
  for (int c = 0; c < mesh.n_cells(); ++c)
    for (int k = 0; k < 2; ++k) out[2 * c + k] = eval_p1(mesh, xu, c, k)[1];
  return out;
}

/// C D C^T x without forming any matrix.
inline Eigen::VectorXd apply_CDC(const OperatorContext& ctx, const Eigen::VectorXd& x) {
  require_inviscid(ctx.material());
  const Mesh& mesh = ctx.mesh();
  const Material& m = ctx.material();
  const int n = ctx.n();
  const auto dN = mesh.dshape();
  const Eigen::VectorXd force = apply_C_star(mesh, x);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto nodes = mesh.cell_nodes(c);
    for (int k = 0; k < 2; ++k) {
      const int q = 2 * c + k;
      const double tau = ctx.qp[q].thermo.tau;
      const double flux = mesh.qp_weight() * m.kappa * m.tau0 / (tau * tau) * force[q];
      for (int a = 0; a < 2; ++a) y[2 * n + nodes[a]] += dN[a] * flux;
    }
  }
  return y;
}

/// Thermodynamic force and flux evaluated pointwise by the chain rule.
struct ForceFlux {
  std::vector<double> force;     // d/dx (tau / tau0)
  std::vector<double> flux;      // kappa tau0 / tau^2 * force (flux density)
  std::vector<double> fourier;   // -kappa dtheta/dx
};

inline ForceFlux force_flux(const OperatorContext& ctx) {
  require_inviscid(ctx.material());
  const Material& m = ctx.material();
  ForceFlux ff;
  for (const QuadPointData& q : ctx.qp) {
    const double force = q.dtau / m.tau0;
    ff.force.push_back(force);
    ff.flux.push_back(m.kappa * m.tau0 / (q.thermo.tau * q.thermo.tau) * force);
    ff.fourier.push_back(-m.kappa * q.dtheta);
  }
  return ff;
}

/// Discrete force C^T (dS / tau0) and flux D C^T (dS / tau0) driving the
/// dynamics.  Equals -C^T dE and -D C^T dE because C^T dH = 0.
struct DiscreteForceFlux {
  Eigen::VectorXd force;
  Eigen::VectorXd flux;  // quadrature-weighted
};

inline DiscreteForceFlux discrete_force_flux(const OperatorContext& ctx) {
  require_inviscid(ctx.material());
  const Mesh& mesh = ctx.mesh();
  const Material& m = ctx.material();
  DiscreteForceFlux out;
  out.force = apply_C_star(mesh, ctx.d.dS / m.tau0);
  out.flux.resize(out.force.size());
  for (int q = 0; q < mesh.n_qp(); ++q) {
    const double tau = ctx.qp[q].thermo.tau;
    out.flux[q] = mesh.qp_weight() * m.kappa * m.tau0 / (tau * tau) * out.force[q];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Boundary ports.

using PortTriple = std::array<double, 3>;

/// Boundary input (v nu, q nu, sigma nu) at each endpoint.
struct PortSignal {
  PortTriple left{0.0, 0.0, 0.0};
  PortTriple right{0.0, 0.0, 0.0};

  Eigen::Matrix<double, 6, 1> stacked() const {
    Eigen::Matrix<double, 6, 1> s;
    s << left[0], left[1], left[2], right[0], right[1], right[2];
    return s;
  }
  PortSignal operator-() const {
    PortSignal out;
    for (int k = 0; k < 3; ++k) {
      out.left[k] = -left[k];
      out.right[k] = -right[k];
    }
    return out;
  }
};

struct PortOutput {
  PortTriple left{0.0, 0.0, 0.0};
  PortTriple right{0.0, 0.0, 0.0};
};

struct PortReadout {
  PortOutput y_H;
  PortOutput y_S;
  PortOutput y_E;
  PortOutput y_S_scaled;  // y_S / tau0
};

inline double pairing(const PortOutput& y, const PortSignal& u) {
  double s = 0.0;
  for (int k = 0; k < 3; ++k) s += y.left[k] * u.left[k] + y.right[k] * u.right[k];
  return s;
}

/// B(z) as a 3N x 6 matrix: column 3 e + k is the dual vector of the k-th
/// input at endpoint e (0 = left, 1 = right).
inline AssembledOperator assemble_B(const Model& model, const State& z) {
  const Mesh& mesh = model.mesh;
  if (mesh.periodic()) throw TopologyError("boundary operator requested on a periodic mesh");
  check_admissible(mesh, z);
  const int n = model.n();
  AssembledOperator op;
  op.matrix = Eigen::MatrixXd::Zero(3 * n, 6);
  op.snapshot = z.z;
  const std::array<int, 2> ends{0, n - 1};
  for (int e = 0; e < 2; ++e) {
    const int i = ends[e];
    const double rho = z.rho()[i], M = z.M()[i], u = z.u()[i];
    const double p = eval_eos(rho, u, model.material).p;
    // -[phi_rho rho u1 - phi_M (u3 - M u1) + phi_u ((u + p) u1 + u2)]
    op.matrix(i, 3 * e + 0) = -rho;
    op.matrix(n + i, 3 * e + 0) = -M;
    op.matrix(n + i, 3 * e + 2) = 1.0;
    op.matrix(2 * n + i, 3 * e + 0) = -(u + p);
    op.matrix(2 * n + i, 3 * e + 1) = -1.0;
  }
  return op;
}

inline Eigen::VectorXd apply_B(const Model& model, const State& z, const PortSignal& u) {
  return assemble_B(model, z).matrix * u.stacked();
}

/// <phi, B(z) u> for the basis function with stacked index `test`.
inline double apply_B(const Model& model, const State& z, const PortSignal& u, int test) {
  return apply_B(model, z, u)[test];
}

inline PortOutput to_output(const Eigen::Matrix<double, 6, 1>& y) {
  return {{y[0], y[1], y[2]}, {y[3], y[4], y[5]}};
}

/// Outputs B^T dF for the discrete generator derivatives.
inline PortReadout outputs(const Model& model, const State& z, const DiscreteDerivatives& d) {
  const Eigen::MatrixXd B = assemble_B(model, z).matrix;
  PortReadout r;
  r.y_H = to_output(B.transpose() * d.dH);
  r.y_S = to_output(B.transpose() * d.dS);
  r.y_E = to_output(B.transpose() * d.dE);
  r.y_S_scaled = to_output(B.transpose() * (d.dS / model.material.tau0));
  return r;
}

inline PortReadout outputs(const Model& model, const State& z) {
  return outputs(model, z, generator_derivatives(model, z));
}

/// Closed-form outputs from the endpoint traces:
///   y_H = [-(M^2/2rho + u + p), -1, v], y_S = [-s, -1/theta, 0],
///   y_E = [-(M^2/2rho + u + p - s/tau0), tau/tau0 - 1, v].
inline PortReadout closed_form_outputs(const Model& model, const State& z) {
  const Material& m = model.material;
  PortReadout r;
  for (Endpoint end : {Endpoint::left, Endpoint::right}) {
    const BoundaryTrace t = trace(model.mesh, z, m, end);
    const double kin = 0.5 * t.M * t.M / t.rho;
    const PortTriple yH{-(kin + t.u + t.thermo.p), -1.0, t.v};
    const PortTriple yS{-t.thermo.s, -t.thermo.tau, 0.0};
    const PortTriple yE{-(kin + t.u + t.thermo.p - t.thermo.s_tilde), t.thermo.tau / m.tau0 - 1.0,
                        t.v};
    const PortTriple ySs{yS[0] / m.tau0, yS[1] / m.tau0, 0.0};
    auto put = [&](PortOutput& o, const PortTriple& v) {
      (end == Endpoint::left ? o.left : o.right) = v;
    };
    put(r.y_H, yH);
    put(r.y_S, yS);
    put(r.y_E, yE);
    put(r.y_S_scaled, ySs);
  }
  return r;
}

/// Input closed from the current state's traces.
inline PortSignal self_trace_input(const Model& model, const State& z) {
  PortSignal s;
  for (Endpoint end : {Endpoint::left, Endpoint::right}) {
    const BoundaryTrace t = trace(model.mesh, z, model.material, end);
    const PortTriple v{t.v * t.nu, t.q_nu, t.sigma_nu};
    (end == Endpoint::left ? s.left : s.right) = v;
  }
  return s;
}

// ---------------------------------------------------------------------------

struct DegeneracyResiduals {
  double r_J = 0.0;       // ||J dS||_inf / || |J| |dS| ||_inf
  double r_R = 0.0;       // ||R dH||_inf / || |R| |dH| ||_inf
  double c_star_dH = 0.0; // ||C^T dH||_inf
};

inline double scaled_product_residual(const Eigen::MatrixXd& A, const Eigen::VectorXd& x) {
  const double num = (A * x).cwiseAbs().maxCoeff();
  const double scale = (A.cwiseAbs() * x.cwiseAbs()).maxCoeff();
  return scale == 0.0 ? num : num / scale;
}

inline DegeneracyResiduals degeneracy_residuals(const OperatorContext& ctx) {
  DegeneracyResiduals r;
  r.r_J = scaled_product_residual(assemble_J(ctx).matrix, ctx.d.dS);
  r.r_R = scaled_product_residual(assemble_R(ctx).matrix, ctx.d.dH);
  r.c_star_dH = apply_C_star(ctx.mesh(), ctx.d.dH).cwiseAbs().maxCoeff();
  return r;
}

/// [[J, C, B], [-C^T, 0, 0], [-B^T, 0, 0]] over (state dual, flux, port).
inline AssembledOperator extended_block(const OperatorContext& ctx) {
  require_inviscid(ctx.material());
  if (ctx.mesh().periodic()) throw TopologyError("extended block needs a bounded mesh");
  const Eigen::MatrixXd J = assemble_J(ctx).matrix;
  const Factorization f = assemble_factorization(ctx);
  const Eigen::MatrixXd B = assemble_B(*ctx.model, ctx.z).matrix;
  const int ns = static_cast<int>(J.rows());
  const int nf = static_cast<int>(f.C.matrix.cols());
  const int np = static_cast<int>(B.cols());
  AssembledOperator op;
  op.symmetry = SymmetryClass::skew;
  op.snapshot = ctx.z.z;
  op.matrix = Eigen::MatrixXd::Zero(ns + nf + np, ns + nf + np);
  op.matrix.block(0, 0, ns, ns) = J;
  op.matrix.block(0, ns, ns, nf) = f.C.matrix;
  op.matrix.block(0, ns + nf, ns, np) = B;
  op.matrix.block(ns, 0, nf, ns) = -f.C.matrix.transpose();
  op.matrix.block(ns + nf, 0, np, ns) = -B.transpose();
  return op;
}

}  // namespace phydro
