#pragma once

// Semi-discrete evolution M zdot = J dH + R dS + B u (or, for inviscid
// media, M zdot = (J - C D C^T) dE + B u), fixed-step time integration and
// balance monitoring.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "phydro/errors.hpp"
#include "phydro/generators.hpp"
#include "phydro/mesh.hpp"
#include "phydro/operators.hpp"
#include "phydro/reference.hpp"

namespace phydro {

enum class Scheme { rk4, implicit_midpoint };
enum class GeneratorPath { two_generator, single_generator };

/// Piecewise-linear port input in time; constant beyond the end points.
struct PortSeries {
  std::vector<double> times;
  std::vector<PortSignal> values;

  static PortSeries constant(const PortSignal& s) { return {{0.0}, {s}}; }

  PortSignal at(double t) const {
    if (values.empty()) return {};
    if (t <= times.front()) return values.front();
    if (t >= times.back()) return values.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t j = static_cast<std::size_t>(it - times.begin());
    const double s = (t - times[j - 1]) / (times[j] - times[j - 1]);
    PortSignal out;
    for (int k = 0; k < 3; ++k) {
      out.left[k] = (1.0 - s) * values[j - 1].left[k] + s * values[j].left[k];
      out.right[k] = (1.0 - s) * values[j - 1].right[k] + s * values[j].right[k];
    }
    return out;
  }
};

struct BoundaryMode {
  enum class Kind { isolated_periodic, prescribed, self_trace };
  Kind kind = Kind::self_trace;
  PortSeries series;

  static BoundaryMode isolated() { return {Kind::isolated_periodic, {}}; }
  static BoundaryMode self_trace() { return {Kind::self_trace, {}}; }
  static BoundaryMode prescribed(PortSeries s) { return {Kind::prescribed, std::move(s)}; }
};

inline std::string to_string(BoundaryMode::Kind k) {
  switch (k) {
    case BoundaryMode::Kind::isolated_periodic: return "isolated-periodic";
    case BoundaryMode::Kind::prescribed: return "prescribed";
    case BoundaryMode::Kind::self_trace: return "self-trace";
  }
  return "self-trace";
}

inline void validate(const BoundaryMode& mode, const Mesh& mesh) {
  const bool iso = mode.kind == BoundaryMode::Kind::isolated_periodic;
  if (iso && !mesh.periodic()) throw ConfigError("isolated-periodic mode requires a periodic mesh");
  if (!iso && mesh.periodic())
    throw ConfigError(to_string(mode.kind) + " boundary mode requires a bounded mesh");
  if (mode.kind == BoundaryMode::Kind::prescribed) {
    if (mode.series.values.empty() || mode.series.values.size() != mode.series.times.size())
      throw ConfigError("prescribed boundary mode needs a nonempty port time series");
    if (!std::is_sorted(mode.series.times.begin(), mode.series.times.end()))
      throw ConfigError("port time series must be sorted in time");
  }
}

/// Port input at time t for the state z; empty for isolated systems.
inline std::optional<PortSignal> boundary_input(const Model& model, const State& z,
                                                const BoundaryMode& mode, double t) {
  switch (mode.kind) {
    case BoundaryMode::Kind::isolated_periodic: return std::nullopt;
    case BoundaryMode::Kind::prescribed: return mode.series.at(t);
    case BoundaryMode::Kind::self_trace: return self_trace_input(model, z);
  }
  return std::nullopt;
}

/// Dual-space right-hand side <phi_i, J dH + R dS + B u>.
inline Eigen::VectorXd rhs_dual(const OperatorContext& ctx, const std::optional<PortSignal>& input,
                                GeneratorPath path) {
  Eigen::VectorXd F;
  if (path == GeneratorPath::two_generator) {
    F = apply_J(ctx, ctx.d.dH) + apply_R(ctx, ctx.d.dS);
  } else {
    require_inviscid(ctx.material());
    F = apply_J(ctx, ctx.d.dE) - apply_CDC(ctx, ctx.d.dE);
  }
  if (input) {
    if (ctx.mesh().periodic()) throw TopologyError("port input supplied on a periodic mesh");
    F += apply_B(*ctx.model, ctx.z, *input);
  }
  return F;
}

/// Coefficient time derivative for an explicit input.
inline Eigen::VectorXd rhs(const Model& model, const State& z, const std::optional<PortSignal>& input,
                           GeneratorPath path = GeneratorPath::two_generator) {
  const OperatorContext ctx = make_context(model, z);
  return model.mass->solve_stacked(rhs_dual(ctx, input, path));
}

inline Eigen::VectorXd rhs(const Model& model, const State& z, const BoundaryMode& mode, double t,
                           GeneratorPath path = GeneratorPath::two_generator) {
  return rhs(model, z, boundary_input(model, z, mode, t), path);
}

struct StepOptions {
  GeneratorPath path = GeneratorPath::two_generator;
  double tolerance = 1e-12;  // implicit stage residual, relative to max(1, |z|_inf)
  int max_iterations = 200;
  int anderson_depth = 30;
};

namespace detail {

inline void check_step_admissible(const Model& model, const State& z, double t) {
  try {
    check_admissible(model.mesh, z);
  } catch (const DomainError& e) {
    std::ostringstream os;
    os << "state left the admissible set at t = " << t << " (" << e.what()
       << "); reduce the time step";
    throw StepError(os.str());
  }
}

template <class Fn>
auto guarded(double t, Fn&& fn) {
  try {
    return fn();
  } catch (const DomainError& e) {
    std::ostringstream os;
    os << "inadmissible stage state near t = " << t << " (" << e.what()
       << "); reduce the time step";
    throw StepError(os.str());
  }
}

struct StageResult {
  Eigen::VectorXd y;
  double residual = std::numeric_limits<double>::infinity();
};

using StageFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Anderson-accelerated fixed-point iteration for y = z + c f(y).  Returns the
// best iterate found; inadmissible iterates end the attempt.
inline StageResult anderson_stage(const Eigen::VectorXd& z, double c, const StageFn& f,
                                  const StepOptions& opt, double tol, double floor) {
  StageResult best{z, std::numeric_limits<double>::infinity()};
  try {
    std::deque<Eigen::VectorXd> dF, dG;
    Eigen::VectorXd y = z;
    Eigen::VectorXd g = z + c * f(y);
    Eigen::VectorXd res = g - y;
    int since_best = 0;
    for (int it = 0;; ++it) {
      const double r = res.cwiseAbs().maxCoeff();
      if (!std::isfinite(r)) break;
      if (r < best.residual) {
        best = {y, r};
        since_best = 0;
      } else if (++since_best >= 8) {
        break;
      }
      if (best.residual <= floor || (best.residual <= tol && since_best >= 3)) break;
      if (it >= opt.max_iterations) break;
      Eigen::VectorXd y_next = g;
      if (!dF.empty()) {
        const auto m = static_cast<Eigen::Index>(dF.size());
        Eigen::MatrixXd Fm(res.size(), m), Gm(res.size(), m);
        for (Eigen::Index j = 0; j < m; ++j) {
          Fm.col(j) = dF[j];
          Gm.col(j) = dG[j];
        }
        y_next -= Gm * Fm.colPivHouseholderQr().solve(res);
      }
      const Eigen::VectorXd g_next = z + c * f(y_next);
      const Eigen::VectorXd res_next = g_next - y_next;
      dF.push_back(res_next - res);
      dG.push_back(g_next - g);
      if (static_cast<int>(dF.size()) > opt.anderson_depth) {
        dF.pop_front();
        dG.pop_front();
      }
      y = y_next;
      g = g_next;
      res = res_next;
    }
  } catch (const DomainError&) {
  }
  return best;
}

// Chord-Newton iteration with a finite-difference Jacobian, used when the
// accelerated fixed-point iteration fails (stiff conduction at large dt).
inline StageResult newton_stage(const Eigen::VectorXd& z, const Eigen::VectorXd& y0, double c,
                                const StageFn& f, double tol, double floor) {
  const Eigen::Index n = z.size();
  StageResult best{y0, std::numeric_limits<double>::infinity()};
  Eigen::VectorXd y = y0;
  for (int refresh = 0; refresh < 3; ++refresh) {
    const Eigen::VectorXd fy = f(y);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double eps = 1e-7 * std::max(1.0, std::abs(y[j]));
      Eigen::VectorXd yp = y;
      yp[j] += eps;
      A.col(j) -= c * (f(yp) - fy) / eps;
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd res = z + c * fy - y;
    int since_best = 0;
    for (int it = 0; it < 50; ++it) {
      const double r = res.cwiseAbs().maxCoeff();
      if (!std::isfinite(r)) break;
      if (r < best.residual) {
        best = {y, r};
        since_best = 0;
      } else if (++since_best >= 3) {
        break;
      }
      if (best.residual <= floor) return best;
      y += lu.solve(res);
      res = z + c * f(y) - y;
    }
    if (best.residual <= tol) return best;
    y = best.y;
  }
  return best;
}

inline Eigen::VectorXd solve_midpoint_stage(const Eigen::VectorXd& z, double c, const StageFn& f,
                                            const StepOptions& opt, double t) {
  const double scale = std::max(1.0, z.cwiseAbs().maxCoeff());
  const double tol = opt.tolerance * scale;
  const double floor = 1e-15 * scale;
  StageResult r = anderson_stage(z, c, f, opt, tol, floor);
  if (!(r.residual <= tol)) {
    const Eigen::VectorXd start = std::isfinite(r.residual) ? r.y : z;
    r = guarded(t, [&] { return newton_stage(z, start, c, f, tol, floor); });
  }
  if (!(r.residual <= tol)) {
    std::ostringstream os;
    os << "implicit midpoint did not converge at t = " << t << " (residual " << r.residual << ")";
    throw ConvergenceError(os.str());
  }
  return r.y;
}

}  // namespace detail

inline State step(const Model& model, const State& z, double t, double dt, Scheme scheme,
                  const BoundaryMode& mode, const StepOptions& opt = {}) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  check_admissible(model.mesh, z);
  auto f = [&](const Eigen::VectorXd& y, double time) {
    return detail::guarded(time, [&] { return rhs(model, State(y), mode, time, opt.path); });
  };
  State next;
  if (scheme == Scheme::rk4) {
    const Eigen::VectorXd k1 = f(z.z, t);
    const Eigen::VectorXd k2 = f(z.z + 0.5 * dt * k1, t + 0.5 * dt);
    const Eigen::VectorXd k3 = f(z.z + 0.5 * dt * k2, t + 0.5 * dt);
    const Eigen::VectorXd k4 = f(z.z + dt * k3, t + dt);
    next = State(Eigen::VectorXd(z.z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)));
  } else {
    // Midpoint rule with the entropy derivative averaged along the step, so
    // that the entropy change is exactly dt <dS, R dS> plus the port term.
    const double tm = t + 0.5 * dt;
    const Eigen::VectorXd y = detail::solve_midpoint_stage(
        z.z, 0.5 * dt,
        [&](const Eigen::VectorXd& x) {
          const State mid(x);
          const State end(Eigen::VectorXd(2.0 * x - z.z));
          const Eigen::VectorXd dS = entropy_discrete_gradient(model, z, end);
          const OperatorContext ctx = make_context(model, mid, {}, &dS);
          return Eigen::VectorXd(
              model.mass->solve_stacked(rhs_dual(ctx, boundary_input(model, mid, mode, tm), opt.path)));
        },
        opt, t);
    next = State(Eigen::VectorXd(2.0 * y - z.z));
  }
  detail::check_step_admissible(model, next, t + dt);
  return next;
}

// ---------------------------------------------------------------------------
// Balance bookkeeping.

/// Instantaneous balance quantities of the semi-discrete system.
struct BalanceSample {
  double t = 0.0;
  double H = 0.0, S = 0.0, E = 0.0;
  double pair_H = 0.0, pair_S = 0.0, pair_E = 0.0;
  double dissipation = 0.0;  // <dS, R dS> / tau0 (= <dE, C D C^T dE> when inviscid)
  double rate_H = 0.0, rate_S = 0.0, rate_E = 0.0;  // dF/dt = <dF, M zdot>
};

inline BalanceSample sample_balance(const Model& model, const State& z, const BoundaryMode& mode,
                                    double t, GeneratorPath path = GeneratorPath::two_generator) {
  const OperatorContext ctx = make_context(model, z);
  const Functionals fn = functionals(model, z);
  BalanceSample s;
  s.t = t;
  s.H = fn.H;
  s.S = fn.S;
  s.E = fn.E;
  const auto input = boundary_input(model, z, mode, t);
  if (input) {
    const PortReadout y = outputs(model, z, ctx.d);
    s.pair_H = pairing(y.y_H, *input);
    s.pair_S = pairing(y.y_S, *input);
    s.pair_E = pairing(y.y_E, *input);
  }
  s.dissipation = ctx.d.dS.dot(apply_R(ctx, ctx.d.dS)) / model.material.tau0;
  const Eigen::VectorXd F = rhs_dual(ctx, input, path);
  s.rate_H = ctx.d.dH.dot(F);
  s.rate_S = ctx.d.dS.dot(F);
  s.rate_E = ctx.d.dE.dot(F);
  return s;
}

struct BalanceReport {
  double t = 0.0;
  double H = 0.0, S = 0.0, E = 0.0;
  double dHdt = 0.0, dSdt = 0.0, dEdt = 0.0;
  double pair_yH_u = 0.0, pair_yS_u = 0.0, pair_yE_u = 0.0;
  double dissipation = 0.0;
  double res_H = 0.0;  // dH/dt - <y_H, u>
  double res_S = 0.0;  // dS/dt - <y_S, u> - tau0 * dissipation
  double res_E = 0.0;  // dE/dt - <y_E, u> + dissipation
};

/// Rates by finite differences of the sampled trajectory: centered in the
/// interior, second-order one-sided at the ends.  A single sample falls back
/// to the semi-discrete rates.
inline std::vector<BalanceReport> balance_reports(const std::vector<BalanceSample>& samples,
                                                  double dt, double tau0) {
  const std::size_t n = samples.size();
  std::vector<BalanceReport> out(n);
  auto rate = [&](std::size_t k, auto get) {
    if (n == 1) return std::numeric_limits<double>::quiet_NaN();
    if (n == 2) return (get(samples[1]) - get(samples[0])) / dt;
    if (k == 0)
      return (-3.0 * get(samples[0]) + 4.0 * get(samples[1]) - get(samples[2])) / (2.0 * dt);
    if (k == n - 1)
      return (3.0 * get(samples[n - 1]) - 4.0 * get(samples[n - 2]) + get(samples[n - 3])) /
             (2.0 * dt);
    return (get(samples[k + 1]) - get(samples[k - 1])) / (2.0 * dt);
  };
  for (std::size_t k = 0; k < n; ++k) {
    const BalanceSample& s = samples[k];
    BalanceReport& r = out[k];
    r.t = s.t;
    r.H = s.H;
    r.S = s.S;
    r.E = s.E;
    r.dHdt = rate(k, [](const BalanceSample& x) { return x.H; });
    r.dSdt = rate(k, [](const BalanceSample& x) { return x.S; });
    r.dEdt = rate(k, [](const BalanceSample& x) { return x.E; });
    if (n == 1) {
      r.dHdt = s.rate_H;
      r.dSdt = s.rate_S;
      r.dEdt = s.rate_E;
    }
    r.pair_yH_u = s.pair_H;
    r.pair_yS_u = s.pair_S;
    r.pair_yE_u = s.pair_E;
    r.dissipation = s.dissipation;
    r.res_H = r.dHdt - r.pair_yH_u;
    r.res_S = r.dSdt - r.pair_yS_u - tau0 * r.dissipation;
    r.res_E = r.dEdt - r.pair_yE_u + r.dissipation;
  }
  return out;
}

struct BalanceTolerance {
  double energy = 1e-6;    // |dH/dt - <y_H,u>|
  double entropy = 1e-6;   // dS/dt >= <y_S,u> - entropy
  double exergy = 1e-6;    // dE/dt <= <y_E,u> + exergy
  double identity = 1e-6;  // |dE/dt - <y_E,u> + dissipation|
};

/// Combined time/space tolerance 4 (dt^2 + h^2) scale used for the rate
/// balances, and the relative slack for the exergy inequality.
inline BalanceTolerance default_tolerance(double dt, double h, const BalanceReport& r) {
  const double order = 4.0 * (dt * dt + h * h);
  BalanceTolerance tol;
  tol.energy = order * std::max({1.0, std::abs(r.pair_yH_u), std::abs(r.dHdt)});
  tol.entropy = order * std::max({1.0, std::abs(r.pair_yS_u), std::abs(r.dSdt)});
  tol.identity = order * std::max({1.0, std::abs(r.pair_yE_u), std::abs(r.dEdt)});
  tol.exergy = 1e-9 * std::abs(r.E);
  return tol;
}

struct Verdict {
  std::string law;
  bool pass = true;
  double value = 0.0;      // signed defect
  double tolerance = 0.0;
};

inline std::vector<Verdict> balance_check(const BalanceReport& r, const BalanceTolerance& tol) {
  std::vector<Verdict> v;
  v.push_back({"energy", std::abs(r.res_H) <= tol.energy, r.res_H, tol.energy});
  const double ds = r.dSdt - r.pair_yS_u;
  v.push_back({"entropy", ds >= -tol.entropy, ds, tol.entropy});
  const double de = r.dEdt - r.pair_yE_u;
  v.push_back({"exergy", de <= tol.exergy, de, tol.exergy});
  v.push_back({"exergy_identity", std::abs(r.res_E) <= tol.identity, r.res_E, tol.identity});
  return v;
}

inline bool all_pass(const std::vector<Verdict>& v) {
  return std::all_of(v.begin(), v.end(), [](const Verdict& x) { return x.pass; });
}

/// Integral of kappa tau0 / tau^2 (d/dx (tau_h / tau0))^2, with tau_h the
/// discrete reciprocal temperature field.
inline double exergy_dissipation(const OperatorContext& ctx) {
  require_inviscid(ctx.material());
  const Material& m = ctx.material();
  double sum = 0.0;
  for (int q = 0; q < ctx.mesh().n_qp(); ++q) {
    const double tau = ctx.qp[q].thermo.tau;
    const double g = ctx.tau_slope[q] / m.tau0;
    sum += ctx.mesh().qp_weight() * m.kappa * m.tau0 / (tau * tau) * g * g;
  }
  return sum;
}

inline double exergy_dissipation(const Model& model, const State& z) {
  return exergy_dissipation(make_context(model, z));
}

// ---------------------------------------------------------------------------
// Fixed-step runs.

struct RunSpec {
  Scheme scheme = Scheme::implicit_midpoint;
  double dt = 1e-3;
  double T = 1.0;
  double output_interval = 0.0;  // 0 = every step
  GeneratorPath path = GeneratorPath::two_generator;
  BoundaryMode mode = BoundaryMode::self_trace();
  std::vector<double> snapshot_times;  // empty = initial and final state
};

struct Snapshot {
  double t = 0.0;
  State z;
};

struct RunResult {
  std::vector<BalanceSample> samples;  // every step
  std::vector<BalanceReport> reports;  // every output interval
  std::vector<Snapshot> snapshots;
  State final_state;
  int steps = 0;
};

inline int steps_for(double span, double dt, const char* what) {
  const double ratio = span / dt;
  const double k = std::round(ratio);
  if (std::abs(ratio - k) > 1e-8 * std::max(1.0, ratio)) {
    std::ostringstream os;
    os << what << " (" << span << ") is not an integer multiple of dt (" << dt << ")";
    throw ConfigError(os.str());
  }
  return static_cast<int>(k);
}

/// Number of explicit steps covering [0, T] with dt below both the
/// advective bound 0.25 h and a diffusive bound 0.1 h^2 / D, where D is the
/// largest of the thermal and viscous diffusivities over the nodal state.
inline int explicit_steps(const Model& model, const State& z, double T) {
  check_admissible(model.mesh, z);
  const Material& m = model.material;
  const double rho_min = z.rho().minCoeff();
  const double D = std::max(m.kappa / (m.c_v * rho_min), m.longitudinal_viscosity() / rho_min);
  const double h = model.mesh.h();
  double dt = 0.25 * h;
  if (D > 0.0) dt = std::min(dt, 0.1 * h * h / D);
  return std::max(1, static_cast<int>(std::ceil(T / dt)));
}

inline RunResult run(const Model& model, const State& z0, const RunSpec& spec,
                     const std::function<void(int, double, const State&)>& observer = {}) {
  validate(spec.mode, model.mesh);
  if (!(spec.dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(spec.T >= 0.0)) throw ConfigError("final time must be nonnegative");
  if (spec.path == GeneratorPath::single_generator) require_inviscid(model.material);
  check_admissible(model.mesh, z0);
  const int n_steps = steps_for(spec.T, spec.dt, "final time");
  const int every =
      spec.output_interval > 0.0 ? steps_for(spec.output_interval, spec.dt, "output interval") : 1;
  if (every == 0) throw ConfigError("output interval must be at least one step");

  std::vector<int> snap_steps;
  if (spec.snapshot_times.empty()) {
    snap_steps = {0, n_steps};
  } else {
    for (double ts : spec.snapshot_times) {
      if (ts < 0.0 || ts > spec.T + 1e-12) throw ConfigError("snapshot time outside [0, T]");
      snap_steps.push_back(steps_for(ts, spec.dt, "snapshot time"));
    }
  }

  RunResult res;
  State z = z0;
  StepOptions opt;
  opt.path = spec.path;
  for (int k = 0; k <= n_steps; ++k) {
    const double t = k * spec.dt;
    if (k > 0) z = step(model, z, (k - 1) * spec.dt, spec.dt, spec.scheme, spec.mode, opt);
    res.samples.push_back(sample_balance(model, z, spec.mode, t, spec.path));
    if (std::find(snap_steps.begin(), snap_steps.end(), k) != snap_steps.end())
      res.snapshots.push_back({t, z});
    if (observer) observer(k, t, z);
  }
  const auto all = balance_reports(res.samples, spec.dt, model.material.tau0);
  for (int k = 0; k <= n_steps; ++k)
    if (k % every == 0) res.reports.push_back(all[k]);
  res.final_state = z;
  res.steps = n_steps;
  return res;
}

// ---------------------------------------------------------------------------
// Weak-to-strong consistency.

/// A smooth scalar profile with its first two derivatives.
struct SmoothField {
  std::function<double(double)> f, df, d2f;
};

struct SmoothState {
  SmoothField rho, M, u;
};

struct ConsistencyResidual {
  std::array<double, 3> field{0.0, 0.0, 0.0};  // rho, M, u
  double max() const { return std::max({field[0], field[1], field[2]}); }
};

/// Strong-form right-hand sides of the inviscid heat-conducting system at x:
///   -M', -(M^2/rho + p)', -[(u v)' + p v' - kappa theta''].
inline std::array<double, 3> strong_rhs(const SmoothState& s, const Material& m, double x) {
  const double r = s.rho.f(x), dr = s.rho.df(x), d2r = s.rho.d2f(x);
  const double M = s.M.f(x), dM = s.M.df(x);
  const double u = s.u.f(x), du = s.u.df(x), d2u = s.u.d2f(x);
  const double v = M / r;
  const double dv = (dM * r - M * dr) / (r * r);
  const double dp = m.R_g / m.c_v * du;
  const double p = m.R_g / m.c_v * u;
  const double w = 1.0 / (m.c_v * r);
  const double dw = -dr / (m.c_v * r * r);
  const double d2w = (2.0 * dr * dr / (r * r * r) - d2r / (r * r)) / m.c_v;
  const double d2theta = d2u * w + 2.0 * du * dw + u * d2w;
  return {-dM, -(2.0 * M * dM / r - M * M * dr / (r * r)) - dp,
          -(du * v + u * dv + p * dv - m.kappa * d2theta)};
}

/// Compares the Galerkin right-hand side of the nodal interpolant of `s`
/// with the strong form paired against each test function (three-point
/// Gauss per cell), scaled by the test function's integral.  Bounded meshes
/// run in self-trace mode and use interior test functions only.
inline ConsistencyResidual weak_strong_consistency(const Model& model, const SmoothState& s) {
  require_inviscid(model.material);
  const Mesh& mesh = model.mesh;
  const int n = model.n();
  State z(n);
  z.rho() = interpolate(mesh, s.rho.f);
  z.M() = interpolate(mesh, s.M.f);
  z.u() = interpolate(mesh, s.u.f);
  const OperatorContext ctx = make_context(model, z);
  std::optional<PortSignal> input;
  if (!mesh.periodic()) input = self_trace_input(model, z);
  const Eigen::VectorXd F = rhs_dual(ctx, input, GeneratorPath::two_generator);

  static const double gx[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  static const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  Eigen::VectorXd G = Eigen::VectorXd::Zero(3 * n);
  Eigen::VectorXd lumped = Eigen::VectorXd::Zero(n);
  const double h = mesh.h();
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto nodes = mesh.cell_nodes(c);
    for (int k = 0; k < 3; ++k) {
      const double xi = 0.5 * (1.0 + gx[k]);
      const double x = mesh.node(c) + xi * h;
      const double w = 0.5 * h * gw[k];
      const auto g = strong_rhs(s, model.material, x);
      const double N[2] = {1.0 - xi, xi};
      for (int a = 0; a < 2; ++a) {
        lumped[nodes[a]] += w * N[a];
        for (int f = 0; f < 3; ++f) G[f * n + nodes[a]] += w * g[f] * N[a];
      }
    }
  }
  ConsistencyResidual out;
  const int first = mesh.periodic() ? 0 : 1;
  const int last = mesh.periodic() ? n : n - 1;
  for (int f = 0; f < 3; ++f)
    for (int i = first; i < last; ++i)
      out.field[f] = std::max(out.field[f], std::abs(F[f * n + i] - G[f * n + i]) / lumped[i]);
  return out;
}

/// Nodal snapshots of a periodic Galerkin run in the form used by compare().
inline NodalTrajectory to_nodal(const Model& model, const std::vector<Snapshot>& snaps) {
  if (!model.mesh.periodic()) throw ConfigError("nodal comparison needs a periodic mesh");
  NodalTrajectory tr;
  tr.a = model.mesh.a();
  tr.b = model.mesh.b();
  tr.n = model.n();
  tr.material = model.material;
  for (const Snapshot& s : snaps) {
    tr.times.push_back(s.t);
    auto get = [&](Field f) {
      const Eigen::VectorXd v = s.z.field(f);
      return std::vector<double>(v.data(), v.data() + v.size());
    };
    tr.fields.push_back({get(Field::rho), get(Field::M), get(Field::u)});
  }
  return tr;
}

}  // namespace phydro
