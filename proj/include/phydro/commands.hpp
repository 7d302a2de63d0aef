#pragma once

// The three command-line workflows (verify, run, converge) as library
// functions so they can be driven from tests.

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "phydro/config.hpp"
#include "phydro/dynamics.hpp"
#include "phydro/errors.hpp"
#include "phydro/operators.hpp"
#include "phydro/reference.hpp"

namespace phydro {

// ---------------------------------------------------------------------------
// Output helpers.

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IOError("cannot create output directory '" + dir.string() + "'");
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  return out;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw IOError("write failed for '" + path.string() + "'");
}

inline void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& A) {
  std::ofstream out = open_output(path);
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) out << (j ? " " : "") << A(i, j);
    out << '\n';
  }
  if (!out) throw IOError("write failed for '" + path.string() + "'");
}

/// Least-squares slope of log(err) against log(h).
inline double fitted_slope(const std::vector<double>& h, const std::vector<double>& err) {
  const std::size_t n = std::min(h.size(), err.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double d = n * sxx - sx * sx;
  return d == 0.0 ? std::numeric_limits<double>::quiet_NaN() : (n * sxy - sx * sy) / d;
}

/// Random admissible state near `base`: nodal density and internal energy
/// scaled by factors in [1 - amp, 1 + amp], momentum shifted by up to amp.
inline State random_state(const State& base, std::mt19937_64& rng, double amp) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  State z = base;
  for (int i = 0; i < z.n(); ++i) {
    z.rho()[i] *= 1.0 + amp * U(rng);
    z.M()[i] += amp * U(rng);
    z.u()[i] *= 1.0 + amp * U(rng);
  }
  return z;
}

// ---------------------------------------------------------------------------
// verify

struct CheckResult {
  std::string name;
  bool pass = true;
  bool applicable = true;
  double worst = 0.0;      // largest measured defect over the state family
  double tolerance = 0.0;

  void record(double value) {
    worst = std::max(worst, value);
    pass = pass && value <= tolerance;
  }
};

struct VerifyReport {
  std::uint64_t seed = 0;
  int n_states = 0;
  std::vector<CheckResult> checks;

  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
  }
  std::vector<std::string> failed() const {
    std::vector<std::string> out;
    for (const auto& c : checks)
      if (!c.pass) out.push_back(c.name);
    return out;
  }
  Json to_json() const {
    Json j;
    j["schema"] = kSchemaVersion;
    j["seed"] = seed;
    j["n_states"] = n_states;
    j["pass"] = pass();
    j["failed"] = failed();
    j["checks"] = Json::array();
    for (const auto& c : checks)
      j["checks"].push_back({{"name", c.name},
                             {"pass", c.pass},
                             {"applicable", c.applicable},
                             {"worst", c.worst},
                             {"tolerance", c.tolerance}});
    return j;
  }
};

struct VerifyOptions {
  std::optional<std::uint64_t> seed;
  bool dump_operators = false;
  std::optional<std::string> out_dir;
};

/// Structural property suite on a seeded family of random states around the
/// configured initial state.  Writes verify_report.json.
inline VerifyReport cmd_verify(const RunConfig& cfg, const VerifyOptions& opt = {}) {
  const Model model(cfg.mesh(), cfg.material);
  const Material& m = cfg.material;
  const bool inviscid = m.inviscid();
  const bool bounded = !model.mesh.periodic();
  VerifyReport rep;
  rep.seed = opt.seed.value_or(cfg.verify.seed);
  rep.n_states = cfg.verify.n_states;
  std::mt19937_64 rng(rep.seed);
  const State base = cfg.initial_state(model.mesh);

  CheckResult j_skew{"J_skew", true, true, 0.0, 0.0};
  CheckResult r_sym{"R_symmetric", true, true, 0.0, 0.0};
  CheckResult r_psd{"R_psd", true, true, 0.0, 1e-10};
  CheckResult j_ds{"J_dS_degeneracy", true, true, 0.0, 1e-12};
  CheckResult r_dh{"R_dH_degeneracy", true, true, 0.0, 1e-12};
  CheckResult c_dh{"Cstar_dH_zero", true, inviscid, 0.0, 0.0};
  CheckResult fact{"factorization", true, inviscid, 0.0, 1e-13};
  CheckResult flux{"fourier_law", true, inviscid, 0.0, 1e-13};
  CheckResult ext{"extended_block_skew", true, inviscid && bounded, 0.0, 0.0};
  CheckResult row{"extended_block_force_row", true, inviscid && bounded, 0.0, 1e-13};
  CheckResult paths{"two_path_rhs", true, inviscid, 0.0, 1e-11};
  CheckResult gd{"gibbs_duhem", true, true, 0.0, 1e-12};
  CheckResult lte{"local_equilibrium_identity", true, true, 0.0, 1e-12};

  const std::filesystem::path out_dir = opt.out_dir.value_or(cfg.out_dir);
  if (opt.dump_operators) ensure_directory(out_dir);

  for (int k = 0; k < rep.n_states; ++k) {
    const State z = random_state(base, rng, cfg.verify.amplitude);
    const OperatorContext ctx = make_context(model, z, cfg.hooks);
    const AssembledOperator J = assemble_J(ctx);
    const AssembledOperator R = assemble_R(ctx);
    j_skew.record(J.symmetry_defect());
    r_sym.record(R.symmetry_defect());
    const double rmax = R.max_abs();
    r_psd.record(rmax == 0.0 ? 0.0 : std::max(0.0, -R.min_eigenvalue() / rmax));
    j_ds.record(scaled_product_residual(J.matrix, ctx.d.dS));
    r_dh.record(scaled_product_residual(R.matrix, ctx.d.dH));

    if (inviscid) {
      c_dh.record(apply_C_star(model.mesh, ctx.d.dH).cwiseAbs().maxCoeff());
      const Factorization f = assemble_factorization(ctx);
      const Eigen::MatrixXd CDC = f.C.matrix * f.D.matrix * f.C_star.matrix;
      const double scale = m.tau0 * rmax;
      fact.record(scale == 0.0 ? 0.0 : (m.tau0 * R.matrix - CDC).cwiseAbs().maxCoeff() / scale);
      const ForceFlux ff = force_flux(ctx);
      double fmax = 0.0, dmax = 0.0;
      for (std::size_t q = 0; q < ff.flux.size(); ++q) {
        fmax = std::max(fmax, std::abs(ff.fourier[q]));
        dmax = std::max(dmax, std::abs(ff.flux[q] - ff.fourier[q]));
      }
      flux.record(fmax == 0.0 ? dmax : dmax / fmax);
      if (bounded) {
        const AssembledOperator X = extended_block(ctx);
        ext.record(X.symmetry_defect());
        const Eigen::VectorXd force = -(f.C_star.matrix * ctx.d.dE);
        const DiscreteForceFlux dff = discrete_force_flux(ctx);
        row.record((force - dff.force).cwiseAbs().maxCoeff() /
                   std::max(1.0, dff.force.cwiseAbs().maxCoeff()));
      }
      const Eigen::VectorXd two =
          rhs(model, z, bounded ? std::optional(self_trace_input(model, z)) : std::nullopt,
              GeneratorPath::two_generator);
      const Eigen::VectorXd one =
          rhs(model, z, bounded ? std::optional(self_trace_input(model, z)) : std::nullopt,
              GeneratorPath::single_generator);
      paths.record((two - one).cwiseAbs().maxCoeff());
    }

    for (const QuadPointData& q : ctx.qp) {
      const ThermoPoint& t = q.thermo;
      const double res = gibbs_duhem_residual(q.rho, q.u, q.drho, q.du, m);
      gd.record(std::abs(res) / std::max(1.0, std::abs(q.drho) + std::abs(q.du)));
      const double lhs = t.p + t.u, rhs_ = t.theta * t.s + t.rho * t.mu;
      const double sc = std::abs(t.p) + std::abs(t.u) + std::abs(t.theta * t.s) + std::abs(t.rho * t.mu);
      lte.record(std::abs(lhs - rhs_) / sc);
    }

    if (opt.dump_operators && k == 0) {
      write_matrix(out_dir / "J.txt", J.matrix);
      write_matrix(out_dir / "R.txt", R.matrix);
      write_matrix(out_dir / "mass.txt", mass_matrix(model.mesh).matrix);
      if (inviscid) {
        const Factorization f = assemble_factorization(ctx);
        write_matrix(out_dir / "C.txt", f.C.matrix);
        write_matrix(out_dir / "D.txt", f.D.matrix);
      }
      if (bounded) write_matrix(out_dir / "B.txt", assemble_B(model, z).matrix);
    }
  }
  for (CheckResult* c : {&j_skew, &r_sym, &r_psd, &j_ds, &r_dh, &c_dh, &fact, &flux, &ext, &row,
                         &paths, &gd, &lte})
    rep.checks.push_back(*c);
  ensure_directory(out_dir);
  write_json(out_dir / "verify_report.json", rep.to_json());
  return rep;
}

// ---------------------------------------------------------------------------
// run

inline constexpr const char* kBalanceHeader =
    "t,H,S,E,dHdt,dSdt,dEdt,pair_yH_u,pair_yS_u,pair_yE_u,dissipation,res_H,res_S,res_E";

inline void write_balance_csv(const std::filesystem::path& path,
                              const std::vector<BalanceReport>& rows) {
  std::ofstream out = open_output(path);
  out << std::setprecision(17);
  out << "# " << kSchemaVersion << " balance\n" << kBalanceHeader << '\n';
  for (const BalanceReport& r : rows)
    out << r.t << ',' << r.H << ',' << r.S << ',' << r.E << ',' << r.dHdt << ',' << r.dSdt << ','
        << r.dEdt << ',' << r.pair_yH_u << ',' << r.pair_yS_u << ',' << r.pair_yE_u << ','
        << r.dissipation << ',' << r.res_H << ',' << r.res_S << ',' << r.res_E << '\n';
  if (!out) throw IOError("write failed for '" + path.string() + "'");
}

inline std::string snapshot_name(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "state_%.6f.json", t);
  return buf;
}

inline Json snapshot_json(const Mesh& mesh, const Snapshot& s) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"t", s.t},
          {"x", mesh.nodes()},
          {"periodic", mesh.periodic()},
          {"rho", vec(s.z.rho())},
          {"M", vec(s.z.M())},
          {"u", vec(s.z.u())}};
}

struct RunOutput {
  RunResult result;
  std::vector<std::filesystem::path> files;
};

inline RunOutput cmd_run(const RunConfig& cfg, const std::optional<std::string>& out_override = {}) {
  const std::filesystem::path out_dir = out_override.value_or(cfg.out_dir);
  ensure_directory(out_dir);
  // Fail on an unwritable directory before spending time on the run.
  write_balance_csv(out_dir / "balance.csv", {});
  const Model model(cfg.mesh(), cfg.material);
  RunOutput out;
  out.result = run(model, cfg.initial_state(model.mesh), cfg.run_spec());
  write_balance_csv(out_dir / "balance.csv", out.result.reports);
  out.files.push_back(out_dir / "balance.csv");
  for (const Snapshot& s : out.result.snapshots) {
    const auto path = out_dir / snapshot_name(s.t);
    write_json(path, snapshot_json(model.mesh, s));
    out.files.push_back(path);
  }
  return out;
}

// ---------------------------------------------------------------------------
// converge

struct SlopeSeries {
  std::vector<double> h;
  std::vector<double> error;
  double slope = std::numeric_limits<double>::quiet_NaN();

  Json to_json() const { return {{"h", h}, {"error", error}, {"slope", slope}}; }
};

struct ConvergeReport {
  std::vector<int> cells;
  std::optional<std::array<SlopeSeries, 3>> spatial;  // weak-to-strong residuals per field
  std::optional<std::array<SlopeSeries, 3>> oracle;   // Galerkin vs finite differences
  SlopeSeries rk4;                                     // self-convergence, x axis = dt
  SlopeSeries midpoint;

  Json to_json() const {
    static const char* names[3] = {"rho", "M", "u"};
    Json j;
    j["schema"] = kSchemaVersion;
    j["cells"] = cells;
    auto fields = [&](const std::optional<std::array<SlopeSeries, 3>>& s) {
      if (!s) return Json(nullptr);
      Json o;
      for (int f = 0; f < 3; ++f) o[names[f]] = (*s)[f].to_json();
      return o;
    };
    j["spatial_consistency"] = fields(spatial);
    j["oracle_agreement"] = fields(oracle);
    j["integrator"] = {{"rk4", rk4.to_json()}, {"implicit-midpoint", midpoint.to_json()}};
    return j;
  }
};

/// Self-convergence of a scheme: differences between successive dt halvings.
inline SlopeSeries integrator_order(const Model& model, const State& z0, const RunConfig& cfg,
                                    Scheme scheme, int levels) {
  SlopeSeries s;
  std::vector<Eigen::VectorXd> finals;
  std::vector<double> dts;
  for (int l = 0; l <= levels; ++l) {
    RunSpec spec = cfg.run_spec();
    spec.scheme = scheme;
    spec.dt = cfg.converge.dt / std::pow(2.0, l);
    spec.T = cfg.converge.T;
    spec.output_interval = 0.0;
    spec.snapshot_times.clear();
    finals.push_back(run(model, z0, spec).final_state.z);
    dts.push_back(spec.dt);
  }
  for (int l = 0; l < levels; ++l) {
    s.h.push_back(dts[l]);
    s.error.push_back((finals[l] - finals[l + 1]).cwiseAbs().maxCoeff());
  }
  s.slope = fitted_slope(s.h, s.error);
  return s;
}

inline ConvergeReport cmd_converge(const RunConfig& cfg, std::optional<int> levels_override = {},
                                   const std::optional<std::string>& out_override = {}) {
  const int levels = levels_override.value_or(cfg.converge.levels);
  if (levels < 3) throw ConfigError("convergence study needs at least three levels");
  if (cfg.converge.base_cells < 2) throw ConfigError("converge.base_cells must be at least 2");
  if (!(cfg.converge.T > 0.0) || !(cfg.converge.dt > 0.0))
    throw ConfigError("converge.T and converge.dt must be positive");
  (void)steps_for(cfg.converge.T, cfg.converge.dt, "converge.T");
  const Material& m = cfg.material;
  ConvergeReport rep;
  for (int l = 0; l < levels; ++l) rep.cells.push_back(cfg.converge.base_cells << l);

  if (m.inviscid()) {
    std::array<SlopeSeries, 3> sp;
    for (int n : rep.cells) {
      const Model model(cfg.mesh(n), m);
      const ConsistencyResidual r = weak_strong_consistency(model, cfg.smooth_state());
      for (int f = 0; f < 3; ++f) {
        sp[f].h.push_back(model.mesh.h());
        sp[f].error.push_back(r.field[f]);
      }
    }
    for (auto& s : sp) s.slope = fitted_slope(s.h, s.error);
    rep.spatial = sp;
  }

  if (cfg.periodic) {
    std::array<SlopeSeries, 3> orc;
    for (int n : rep.cells) {
      const Model model(cfg.mesh(n), m);
      const State z0 = cfg.initial_state(model.mesh);
      const double h = model.mesh.h();
      const int steps = explicit_steps(model, z0, cfg.converge.T);
      const double dt = cfg.converge.T / steps;
      RunSpec spec;
      spec.scheme = Scheme::rk4;
      spec.dt = dt;
      spec.T = steps * dt;
      spec.mode = BoundaryMode::isolated();
      const RunResult fe = run(model, z0, spec);
      const FDGrid g(cfg.a, cfg.b, n);
      FDFields f0(n);
      for (int i = 0; i < n; ++i) {
        f0.rho[i] = z0.rho()[i];
        f0.M[i] = z0.M()[i];
        f0.u[i] = z0.u()[i];
      }
      const NodalTrajectory fd = fd_run(g, f0, m, !m.inviscid(), dt, spec.T, steps);
      const CompareResult c = compare(to_nodal(model, fe.snapshots), fd);
      for (int f = 0; f < 3; ++f) {
        orc[f].h.push_back(h);
        orc[f].error.push_back(c.l2.back()[f]);
      }
    }
    for (auto& s : orc) s.slope = fitted_slope(s.h, s.error);
    rep.oracle = orc;
  }

  const Model coarse(cfg.mesh(rep.cells.front()), m);
  const State z0 = cfg.initial_state(coarse.mesh);
  rep.rk4 = integrator_order(coarse, z0, cfg, Scheme::rk4, levels - 1);
  rep.midpoint = integrator_order(coarse, z0, cfg, Scheme::implicit_midpoint, levels - 1);

  const std::filesystem::path out_dir = out_override.value_or(cfg.out_dir);
  ensure_directory(out_dir);
  Json j = rep.to_json();
  j["levels"] = levels;
  write_json(out_dir / "converge_report.json", j);
  return rep;
}

}  // namespace phydro
