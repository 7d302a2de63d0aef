#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "phydro/operators.hpp"
#include "support.hpp"

using namespace phydro;
using phydro::fixtures::kPi;
using phydro::fixtures::random_smooth_state;
using phydro::fixtures::uniform_state;

namespace {

Material viscous_conducting() {
  Material m;
  m.kappa = 0.05;
  m.eta = 0.02;
  m.zeta = 0.01;
  m.tau0 = 0.9;
  return m;
}

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST(PoissonOperator, ExactlySkewOnRandomStates) {
  std::mt19937_64 rng(101);
  for (bool periodic : {true, false}) {
    const Model model(Mesh(0.0, 1.0, 32, periodic), viscous_conducting());
    for (int i = 0; i < 10; ++i) {
      const OperatorContext ctx = make_context(model, random_smooth_state(model.mesh, rng));
      const AssembledOperator J = assemble_J(ctx);
      EXPECT_EQ((J.matrix + J.matrix.transpose()).cwiseAbs().maxCoeff(), 0.0);
      EXPECT_GT(J.max_abs(), 0.0);
      EXPECT_EQ(J.symmetry, SymmetryClass::skew);
    }
  }
}

TEST(PoissonOperator, MatrixFreeMatchesAssembled) {
  std::mt19937_64 rng(5);
  const Model model(Mesh(0.0, 2.0, 12, false), viscous_conducting());
  const OperatorContext ctx = make_context(model, random_smooth_state(model.mesh, rng));
  const Eigen::VectorXd x = Eigen::VectorXd::Random(3 * model.n());
  EXPECT_LE(max_abs(assemble_J(ctx).matrix * x - apply_J(ctx, x)), 1e-13);
  EXPECT_LE(max_abs(assemble_R(ctx).matrix * x - apply_R(ctx, x)), 1e-13);
}

TEST(PoissonOperator, UniformStateAnnihilatesEnergyDerivative) {
  const Model model(Mesh(0.0, 1.0, 16, true), Material{});
  const OperatorContext ctx = make_context(model, uniform_state(model.mesh, 1.0, 0.0, 1.0));
  EXPECT_LE(max_abs(apply_J(ctx, ctx.d.dH)), 1e-15);
}

TEST(PoissonOperator, NoFlowConstantPressureKillsEnergyRow) {
  const Model model(Mesh(0.0, 1.0, 10, true), Material{});
  const OperatorContext ctx = make_context(model, uniform_state(model.mesh, 1.0, 0.0, 1.3));
  const Eigen::VectorXd JdH = apply_J(ctx, ctx.d.dH);
  EXPECT_LE(max_abs(JdH.segment(2 * model.n(), model.n())), 1e-15);
}

TEST(PoissonOperator, CorruptionHookBreaksSkewness) {
  std::mt19937_64 rng(8);
  const Model model(Mesh(0.0, 1.0, 8, true), Material{});
  AssemblyHooks hooks;
  hooks.corrupt_J = true;
  const OperatorContext ctx = make_context(model, random_smooth_state(model.mesh, rng), hooks);
  EXPECT_GT(assemble_J(ctx).symmetry_defect(), 1e-3);
}

TEST(DissipationOperator, SymmetricAndSemidefinite) {
  std::mt19937_64 rng(202);
  for (bool periodic : {true, false}) {
    const Model model(Mesh(0.0, 1.0, 32, periodic), viscous_conducting());
    for (int i = 0; i < 10; ++i) {
      const OperatorContext ctx = make_context(model, random_smooth_state(model.mesh, rng));
      const AssembledOperator R = assemble_R(ctx);
      EXPECT_EQ((R.matrix - R.matrix.transpose()).cwiseAbs().maxCoeff(), 0.0);
      EXPECT_GE(R.min_eigenvalue(), -1e-10 * R.max_abs());
    }
  }
}

TEST(DissipationOperator, VanishesWithoutTransport) {
  std::mt19937_64 rng(1);
  const Model model(Mesh(0.0, 1.0, 16, true), Material{});
  const OperatorContext ctx = make_context(model, random_smooth_state(model.mesh, rng));
  EXPECT_EQ(assemble_R(ctx).max_abs(), 0.0);
}

TEST(DissipationOperator, UniformTemperatureProducesNoEntropy) {
  const Model model(Mesh(0.0, 1.0, 16, true), fixtures::conducting(0.5));
  State z(model.n());
  z.rho() = interpolate(model.mesh, [](double x) { return 1.0 + 0.2 * std::sin(2 * kPi * x); });
  z.u() = z.rho();  // theta = u / rho = 1
  const OperatorContext ctx = make_context(model, z);
  EXPECT_LE(std::abs(ctx.d.dS.dot(apply_R(ctx, ctx.d.dS))), 1e-14);
}

TEST(DissipationOperator, EntropyProductionMatchesIndependentQuadrature) {
  const double kappa = 0.01;
  const Model model(Mesh(0.0, 1.0, 64, true), fixtures::conducting(kappa));
  State z(model.n());
  z.rho().setOnes();
  z.u() = interpolate(model.mesh, [](double x) { return 1.0 + 0.1 * std::sin(2 * kPi * x); });
  const OperatorContext ctx = make_context(model, z);
  const double production = ctx.d.dS.dot(apply_R(ctx, ctx.d.dS));

  // Oracle: project 1/theta onto P1 with a dense mass solve and integrate
  // kappa theta^2 (d/dx of that field)^2 with the two-point rule.
  const Mesh& mesh = model.mesh;
  const int n = mesh.n_free();
  const Eigen::MatrixXd M = mass_matrix(mesh).matrix;
  Eigen::VectorXd load = Eigen::VectorXd::Zero(n);
  const double g = 0.5 / std::sqrt(3.0);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const int l = c, r = (c + 1) % n;
    for (double xi : {0.5 - g, 0.5 + g}) {
      const double u = (1 - xi) * z.u()[l] + xi * z.u()[r];
      load[l] += 0.5 * mesh.h() * (1 - xi) / u;
      load[r] += 0.5 * mesh.h() * xi / u;
    }
  }
  const Eigen::VectorXd b = M.ldlt().solve(load);
  double oracle = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const int l = c, r = (c + 1) % n;
    const double slope = (b[r] - b[l]) / mesh.h();
    for (double xi : {0.5 - g, 0.5 + g}) {
      const double theta = (1 - xi) * z.u()[l] + xi * z.u()[r];
      oracle += 0.5 * mesh.h() * kappa * theta * theta * slope * slope;
    }
  }
  EXPECT_GT(production, 0.0);
  EXPECT_NEAR(production, oracle, 1e-12 * oracle);

  // Close to the continuous integral already at this resolution.
  const double exact_integrand_integral = [&] {
    double s = 0.0;
    const int fine = 20000;
    for (int i = 0; i < fine; ++i) {
      const double x = (i + 0.5) / fine;
      const double th = 1.0 + 0.1 * std::sin(2 * kPi * x);
      const double dth = 0.2 * kPi * std::cos(2 * kPi * x);
      s += kappa * dth * dth / (th * th) / fine;
    }
    return s;
  }();
  EXPECT_NEAR(production, exact_integrand_integral, 1e-2 * exact_integrand_integral);
}

TEST(Degeneracy, UniformStateIsExact) {
  const Model model(Mesh(0.0, 1.0, 8, true), viscous_conducting());
  const DegeneracyResiduals r =
      degeneracy_residuals(make_context(model, uniform_state(model.mesh, 1.2, 0.3, 0.8)));
  EXPECT_LE(r.r_J, 1e-15);
  EXPECT_LE(r.r_R, 1e-15);
  EXPECT_EQ(r.c_star_dH, 0.0);
}

TEST(Degeneracy, RandomStates) {
  std::mt19937_64 rng(303);
  for (bool periodic : {true, false}) {
    const Model model(Mesh(0.0, 1.0, 32, periodic), viscous_conducting());
    for (int i = 0; i < 20; ++i) {
      const DegeneracyResiduals r =
          degeneracy_residuals(make_context(model, random_smooth_state(model.mesh, rng)));
      EXPECT_LE(r.r_J, 1e-12);
      EXPECT_LE(r.r_R, 1e-12);
      EXPECT_EQ(r.c_star_dH, 0.0);
    }
  }
}

TEST(Factorization, ReproducesScaledDissipation) {
  std::mt19937_64 rng(404);
  Material m = fixtures::conducting(0.07);
  m.tau0 = 1.3;
  for (bool periodic : {true, false}) {
    const Model model(Mesh(0.0, 1.0, 24, periodic), m);
    for (int i = 0; i < 10; ++i) {
      const OperatorContext ctx = make_context(model, random_smooth_state(model.mesh, rng));
      const Factorization f = assemble_factorization(ctx);
      const Eigen::MatrixXd tR = m.tau0 * assemble_R(ctx).matrix;
      const Eigen::MatrixXd CDC = f.C.matrix * f.D.matrix * f.C_star.matrix;
      EXPECT_LE((tR - CDC).cwiseAbs().maxCoeff(), 1e-13 * tR.cwiseAbs().maxCoeff());
      EXPECT_EQ((f.C_star.matrix - f.C.matrix.transpose()).cwiseAbs().maxCoeff(), 0.0);
      EXPECT_GE(f.D.matrix.diagonal().minCoeff(), 0.0);
      const Eigen::VectorXd x = Eigen::VectorXd::Random(3 * model.n());
      EXPECT_LE(max_abs(apply_CDC(ctx, x) - CDC * x), 1e-13 * (1.0 + max_abs(CDC * x)));
    }
  }
}

TEST(Factorization, NoConductionMeansZeroDissipation) {
  std::mt19937_64 rng(1);
  const Model model(Mesh(0.0, 1.0, 8, true), Material{});
  const OperatorContext ctx = make_context(model, random_smooth_state(model.mesh, rng));
  const Factorization f = assemble_factorization(ctx);
  EXPECT_EQ(f.D.max_abs(), 0.0);
  EXPECT_EQ((f.C.matrix * f.D.matrix * f.C_star.matrix).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Factorization, RejectsViscousMaterial) {
  const Model model(Mesh(0.0, 1.0, 8, true), viscous_conducting());
  const OperatorContext ctx = make_context(model, uniform_state(model.mesh, 1, 0, 1));
  EXPECT_THROW(assemble_factorization(ctx), ConfigError);
  EXPECT_THROW(force_flux(ctx), ConfigError);
}

TEST(ForceFlux, UniformTemperature) {
  const Model model(Mesh(0.0, 1.0, 8, false), fixtures::conducting(1.0));
  const ForceFlux ff = force_flux(make_context(model, uniform_state(model.mesh, 2.0, 0.0, 3.0)));
  for (std::size_t q = 0; q < ff.force.size(); ++q) {
    EXPECT_EQ(ff.force[q], 0.0);
    EXPECT_EQ(ff.flux[q], 0.0);
  }
}

TEST(ForceFlux, LinearTemperatureProfile) {
  const Model model(Mesh(0.0, 1.0, 16, false), fixtures::conducting(1.0));
  State z(model.n());
  z.rho().setOnes();
  z.u() = interpolate(model.mesh, [](double x) { return 1.0 + x; });
  const OperatorContext ctx = make_context(model, z);
  const ForceFlux ff = force_flux(ctx);
  ASSERT_EQ(static_cast<int>(ff.force.size()), model.mesh.n_qp());
  for (int q = 0; q < model.mesh.n_qp(); ++q) {
    const double x = ctx.qp[q].x;
    EXPECT_NEAR(ff.force[q], -1.0 / ((1 + x) * (1 + x)), 1e-14);
    EXPECT_NEAR(ff.flux[q], -1.0, 1e-14);
  }
}

TEST(ForceFlux, FourierLawOnRandomStates) {
  std::mt19937_64 rng(505);
  Material m = fixtures::conducting(0.3);
  m.c_v = 1.4;
  m.tau0 = 2.0;
  const Model model(Mesh(0.0, 1.0, 32, true), m);
  for (int i = 0; i < 10; ++i) {
    const ForceFlux ff = force_flux(make_context(model, random_smooth_state(model.mesh, rng)));
    double scale = 0.0;
    for (double f : ff.fourier) scale = std::max(scale, std::abs(f));
    for (std::size_t q = 0; q < ff.flux.size(); ++q)
      EXPECT_LE(std::abs(ff.flux[q] - ff.fourier[q]), 1e-13 * scale);
  }
}

TEST(Ports, ZeroInputGivesZeroForcing) {
  std::mt19937_64 rng(2);
  const Model model(Mesh(0.0, 1.0, 8, false), Material{});
  const State z = random_smooth_state(model.mesh, rng);
  EXPECT_EQ(max_abs(apply_B(model, z, PortSignal{})), 0.0);
}

TEST(Ports, HeatInfluxReachesOnlyEnergyEquation) {
  const Model model(Mesh(0.0, 1.0, 8, false), Material{});
  const State z = uniform_state(model.mesh, 1.0, 0.0, 1.0);
  PortSignal u;
  u.right[1] = 1.0;
  const int n = model.n();
  EXPECT_EQ(apply_B(model, z, u, 2 * n + n - 1), -1.0);
  const Eigen::VectorXd Bu = apply_B(model, z, u);
  EXPECT_EQ(max_abs(Bu.head(2 * n)), 0.0);
  EXPECT_EQ(max_abs(Bu.segment(2 * n, n - 1)), 0.0);
}

TEST(Ports, SelfTraceAtRestIsSilent) {
  Material m = viscous_conducting();
  const Model model(Mesh(0.0, 1.0, 8, false), m);
  const State z = uniform_state(model.mesh, 1.0, 0.0, 1.0);
  EXPECT_EQ(max_abs(apply_B(model, z, self_trace_input(model, z))), 0.0);
}

TEST(Ports, PeriodicMeshHasNoPorts) {
  const Model model(Mesh(0.0, 1.0, 8, true), Material{});
  EXPECT_THROW(assemble_B(model, uniform_state(model.mesh, 1, 0, 1)), TopologyError);
}

TEST(Outputs, RestStateValues) {
  const Model model(Mesh(0.0, 1.0, 8, false), Material{});
  const State z = uniform_state(model.mesh, 1.0, 0.0, 1.0);
  for (const PortReadout& r : {outputs(model, z), closed_form_outputs(model, z)}) {
    for (const PortTriple* e : {&r.y_H.left, &r.y_H.right}) {
      EXPECT_NEAR((*e)[0], -2.0, 1e-14);
      EXPECT_NEAR((*e)[1], -1.0, 1e-14);
      EXPECT_NEAR((*e)[2], 0.0, 1e-14);
    }
    for (const PortTriple* e : {&r.y_S.left, &r.y_S.right}) {
      EXPECT_NEAR((*e)[0], 0.0, 1e-14);
      EXPECT_NEAR((*e)[1], -1.0, 1e-14);
      EXPECT_NEAR((*e)[2], 0.0, 1e-14);
    }
    for (const PortTriple* e : {&r.y_E.left, &r.y_E.right}) {
      EXPECT_NEAR((*e)[0], -2.0, 1e-14);
      EXPECT_NEAR((*e)[1], 0.0, 1e-14);
      EXPECT_NEAR((*e)[2], 0.0, 1e-14);
    }
  }
}

TEST(Outputs, ReferenceTemperatureSwitchesOffExergyHeatOutput) {
  Material m;
  m.tau0 = 0.5;
  const Model model(Mesh(0.0, 1.0, 8, false), m);
  // theta = u / rho = 2 = 1 / tau0 at both ends.
  const PortReadout r = closed_form_outputs(model, uniform_state(model.mesh, 1.0, 0.3, 2.0));
  EXPECT_EQ(r.y_E.left[1], 0.0);
  EXPECT_EQ(r.y_E.right[1], 0.0);
}

TEST(Outputs, NoFlowHasNoConvectiveOutput) {
  std::mt19937_64 rng(6);
  const Model model(Mesh(0.0, 1.0, 16, false), fixtures::conducting(0.1));
  State z = random_smooth_state(model.mesh, rng);
  z.M().setZero();
  const PortReadout r = outputs(model, z);
  EXPECT_EQ(r.y_H.left[2], 0.0);
  EXPECT_EQ(r.y_H.right[2], 0.0);
  EXPECT_EQ(r.y_E.left[2], 0.0);
  EXPECT_EQ(r.y_E.right[2], 0.0);
}

TEST(Outputs, DiscreteOutputsApproachTraceFormulas) {
  // B^T dF uses the projected derivatives; they converge to the trace values.
  std::vector<double> err;
  for (int n : {16, 32, 64}) {
    std::mt19937_64 rng(77);
    Material m = fixtures::conducting(0.1);
    m.tau0 = 0.8;
    const Model model(Mesh(0.0, 1.0, n, false), m);
    const State z = random_smooth_state(model.mesh, rng);
    const PortReadout a = outputs(model, z), b = closed_form_outputs(model, z);
    double e = 0.0;
    for (int k = 0; k < 3; ++k) {
      e = std::max({e, std::abs(a.y_H.left[k] - b.y_H.left[k]), std::abs(a.y_H.right[k] - b.y_H.right[k]),
                    std::abs(a.y_E.left[k] - b.y_E.left[k]), std::abs(a.y_E.right[k] - b.y_E.right[k])});
    }
    err.push_back(e);
  }
  EXPECT_LT(err[1], err[0]);
  EXPECT_LT(err[2], err[1]);
  EXPECT_LT(err[2], 1e-2);
}

TEST(Outputs, PairingEqualsPortWork) {
  // <dH, B u> = <y_H, u> for every input; with J skew and R dH = 0 this is
  // the whole of the semi-discrete energy rate.
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const Model model(Mesh(0.0, 1.0, 20, false), viscous_conducting());
  for (int i = 0; i < 10; ++i) {
    const OperatorContext ctx = make_context(model, random_smooth_state(model.mesh, rng));
    PortSignal u;
    for (int k = 0; k < 3; ++k) {
      u.left[k] = U(rng);
      u.right[k] = U(rng);
    }
    const PortReadout y = outputs(model, ctx.z, ctx.d);
    const Eigen::VectorXd Bu = apply_B(model, ctx.z, u);
    EXPECT_NEAR(ctx.d.dH.dot(Bu), pairing(y.y_H, u), 1e-12);
    EXPECT_NEAR(ctx.d.dE.dot(Bu), pairing(y.y_E, u), 1e-12);
    const Eigen::VectorXd F = apply_J(ctx, ctx.d.dH) + apply_R(ctx, ctx.d.dS) + Bu;
    EXPECT_NEAR(ctx.d.dH.dot(F), pairing(y.y_H, u), 1e-11);
  }
}

TEST(ExtendedBlock, SkewAndRowIdentities) {
  std::mt19937_64 rng(606);
  Material m = fixtures::conducting(0.2);
  m.tau0 = 1.1;
  const Model model(Mesh(0.0, 1.0, 16, false), m);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int i = 0; i < 5; ++i) {
    const OperatorContext ctx = make_context(model, random_smooth_state(model.mesh, rng));
    const AssembledOperator K = extended_block(ctx);
    EXPECT_EQ((K.matrix + K.matrix.transpose()).cwiseAbs().maxCoeff(), 0.0);

    const int ns = 3 * model.n(), nf = model.mesh.n_qp();
    const DiscreteForceFlux ff = discrete_force_flux(ctx);
    PortSignal u;
    for (int k = 0; k < 3; ++k) u.left[k] = u.right[k] = U(rng);
    Eigen::VectorXd x(ns + nf + 6);
    x << ctx.d.dE, ff.flux, u.stacked();
    const Eigen::VectorXd y = K.matrix * x;

    const Eigen::VectorXd single = apply_J(ctx, ctx.d.dE) - apply_CDC(ctx, ctx.d.dE) +
                                   apply_B(model, ctx.z, u);
    EXPECT_LE(max_abs(y.head(ns) - single), 1e-12 * (1.0 + max_abs(single)));
    EXPECT_LE(max_abs(y.segment(ns, nf) - ff.force), 1e-13 * (1.0 + max_abs(ff.force)));
    const PortReadout r = outputs(model, ctx.z, ctx.d);
    const Eigen::Matrix<double, 6, 1> yE{r.y_E.left[0], r.y_E.left[1], r.y_E.left[2],
                                         r.y_E.right[0], r.y_E.right[1], r.y_E.right[2]};
    EXPECT_LE((y.tail(6) + yE).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(ExtendedBlock, EquilibriumWithoutInput) {
  const Model model(Mesh(0.0, 1.0, 8, false), fixtures::conducting(0.1));
  const OperatorContext ctx = make_context(model, uniform_state(model.mesh, 1.0, 0.0, 1.0));
  const AssembledOperator K = extended_block(ctx);
  const int ns = 3 * model.n(), nf = model.mesh.n_qp();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(ns + nf + 6);
  x.head(ns) = ctx.d.dE;
  const Eigen::VectorXd y = K.matrix * x;
  EXPECT_LE(max_abs(y.head(ns + nf)), 1e-14);
  const PortReadout r = outputs(model, ctx.z, ctx.d);
  EXPECT_NEAR(y[ns + nf + 0], -r.y_E.left[0], 1e-14);
  EXPECT_NEAR(y[ns + nf + 0], 2.0, 1e-14);
  EXPECT_NEAR(y[ns + nf + 3], 2.0, 1e-14);
  for (int k : {1, 2, 4, 5}) EXPECT_NEAR(y[ns + nf + k], 0.0, 1e-14);
}

TEST(ExtendedBlock, NeedsBoundedInviscidSetting) {
  const Model periodic(Mesh(0.0, 1.0, 8, true), fixtures::conducting(0.1));
  EXPECT_THROW(extended_block(make_context(periodic, uniform_state(periodic.mesh, 1, 0, 1))),
               TopologyError);
  const Model visc(Mesh(0.0, 1.0, 8, false), viscous_conducting());
  EXPECT_THROW(extended_block(make_context(visc, uniform_state(visc.mesh, 1, 0, 1))), ConfigError);
}

TEST(Context, RejectsInadmissibleState) {
  const Model model(Mesh(0.0, 1.0, 8, true), Material{});
  State z = uniform_state(model.mesh, 1.0, 0.0, 1.0);
  z.u()[3] = -0.1;
  EXPECT_THROW(make_context(model, z), DomainError);
}
