#pragma once

// Run configuration: one JSON document describing mesh, material, initial
// profiles, boundary ports, integrator and output settings.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phydro/dynamics.hpp"
#include "phydro/errors.hpp"
#include "phydro/mesh.hpp"
#include "phydro/thermo.hpp"

namespace phydro {

using Json = nlohmann::json;

inline constexpr const char* kSchemaVersion = "phydro/1";

/// One analytic initial profile: mean + amp * shape(x).
struct Profile {
  enum class Shape { uniform, sine, gaussian_pulse };
  Shape shape = Shape::uniform;
  double mean = 0.0;
  double amp = 0.0;
  double k = 1.0;        // sine: wave number in units of 2 pi / (b - a)
  double phase = 0.0;    // sine: phase shift
  double center = 0.5;   // gaussian: center
  double width = 0.1;    // gaussian: standard deviation

  /// Profile value and its first two derivatives on [a, b].
  SmoothField smooth(double a, double b) const {
    const Profile p = *this;
    switch (shape) {
      case Shape::uniform:
        return {[p](double) { return p.mean; }, [](double) { return 0.0; },
                [](double) { return 0.0; }};
      case Shape::sine: {
        const double w = 2.0 * std::numbers::pi * p.k / (b - a);
        return {[p, w, a](double x) { return p.mean + p.amp * std::sin(w * (x - a) + p.phase); },
                [p, w, a](double x) { return p.amp * w * std::cos(w * (x - a) + p.phase); },
                [p, w, a](double x) { return -p.amp * w * w * std::sin(w * (x - a) + p.phase); }};
      }
      case Shape::gaussian_pulse: {
        auto g = [p](double x) {
          const double r = (x - p.center) / p.width;
          return std::exp(-0.5 * r * r);
        };
        return {[p, g](double x) { return p.mean + p.amp * g(x); },
                [p, g](double x) { return -p.amp * g(x) * (x - p.center) / (p.width * p.width); },
                [p, g](double x) {
                  const double s2 = p.width * p.width;
                  const double r = x - p.center;
                  return p.amp * g(x) * (r * r / (s2 * s2) - 1.0 / s2);
                }};
      }
    }
    return {};
  }
};

struct VerifySettings {
  int n_states = 20;
  double amplitude = 0.3;  // relative nodal perturbation of the state family
  std::uint64_t seed = 20240601;
};

struct ConvergeSettings {
  int levels = 4;
  int base_cells = 32;
  double T = 0.1;
  double dt = 0.01;  // coarsest step of the integrator-order study
};

struct RunConfig {
  double a = 0.0, b = 1.0;
  int n_cells = 64;
  bool periodic = true;
  Material material;
  Profile rho{Profile::Shape::uniform, 1.0};
  Profile M{Profile::Shape::uniform, 0.0};
  Profile u{Profile::Shape::uniform, 1.0};
  BoundaryMode boundary = BoundaryMode::isolated();
  Scheme scheme = Scheme::implicit_midpoint;
  double dt = 1e-3;
  double T = 1.0;
  double output_interval = 0.0;
  std::vector<double> snapshot_times;
  GeneratorPath path = GeneratorPath::two_generator;
  std::string out_dir = ".";
  VerifySettings verify;
  ConvergeSettings converge;
  AssemblyHooks hooks;

  Mesh mesh() const { return Mesh(a, b, n_cells, periodic); }
  Mesh mesh(int n) const { return Mesh(a, b, n, periodic); }
  SmoothState smooth_state() const {
    return {rho.smooth(a, b), M.smooth(a, b), u.smooth(a, b)};
  }
  State initial_state(const Mesh& m) const {
    const SmoothState s = smooth_state();
    State z(m.n_free());
    z.rho() = interpolate(m, s.rho.f);
    z.M() = interpolate(m, s.M.f);
    z.u() = interpolate(m, s.u.f);
    return z;
  }
  RunSpec run_spec() const {
    RunSpec r;
    r.scheme = scheme;
    r.dt = dt;
    r.T = T;
    r.output_interval = output_interval;
    r.path = path;
    r.mode = boundary;
    r.snapshot_times = snapshot_times;
    return r;
  }
};

namespace detail {

inline void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
  }
}

inline Profile::Shape parse_shape(const std::string& s) {
  if (s == "uniform") return Profile::Shape::uniform;
  if (s == "sine") return Profile::Shape::sine;
  if (s == "gaussian-pulse") return Profile::Shape::gaussian_pulse;
  throw ConfigError("unknown initial profile '" + s + "' (uniform | sine | gaussian-pulse)");
}

inline Profile parse_profile(const Json& j, Profile p, Profile::Shape default_shape,
                             const std::string& where) {
  if (j.is_number()) {
    p.shape = Profile::Shape::uniform;
    p.mean = j.get<double>();
    return p;
  }
  reject_unknown(j, {"shape", "mean", "amp", "k", "phase", "center", "width"}, where);
  p.shape = default_shape;
  if (j.contains("shape")) p.shape = parse_shape(j.at("shape").get<std::string>());
  read(j, "mean", p.mean, where);
  read(j, "amp", p.amp, where);
  read(j, "k", p.k, where);
  read(j, "phase", p.phase, where);
  read(j, "center", p.center, where);
  read(j, "width", p.width, where);
  if (p.shape == Profile::Shape::gaussian_pulse && !(p.width > 0.0))
    throw ConfigError(where + ": gaussian width must be positive");
  return p;
}

inline PortTriple parse_triple(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + " must be an array of three numbers");
  PortTriple t{};
  for (int k = 0; k < 3; ++k) {
    if (!j[k].is_number()) throw ConfigError(where + " must be an array of three numbers");
    t[k] = j[k].get<double>();
  }
  return t;
}

}  // namespace detail

inline RunConfig parse_config(const Json& j) {
  using detail::read;
  detail::reject_unknown(j, {"schema", "mesh", "material", "initial", "boundary", "integrator",
                             "generator", "output", "verify", "converge", "test_hooks"},
                         "config");
  RunConfig c;
  if (j.contains("schema") && j.at("schema") != kSchemaVersion)
    throw ConfigError("unsupported config schema (expected " + std::string(kSchemaVersion) + ")");

  if (j.contains("mesh")) {
    const Json& m = j.at("mesh");
    detail::reject_unknown(m, {"a", "b", "n_cells", "periodic"}, "mesh");
    read(m, "a", c.a, "mesh");
    read(m, "b", c.b, "mesh");
    read(m, "n_cells", c.n_cells, "mesh");
    read(m, "periodic", c.periodic, "mesh");
  }
  (void)c.mesh();  // validates the interval and cell count

  if (j.contains("material")) {
    const Json& m = j.at("material");
    detail::reject_unknown(m, {"c_v", "R_g", "s_ref", "kappa", "eta", "zeta", "tau0"}, "material");
    read(m, "c_v", c.material.c_v, "material");
    read(m, "R_g", c.material.R_g, "material");
    read(m, "s_ref", c.material.s_ref, "material");
    read(m, "kappa", c.material.kappa, "material");
    read(m, "eta", c.material.eta, "material");
    read(m, "zeta", c.material.zeta, "material");
    read(m, "tau0", c.material.tau0, "material");
  }
  validate(c.material);

  if (j.contains("initial")) {
    const Json& ic = j.at("initial");
    detail::reject_unknown(ic, {"profile", "rho", "M", "u"}, "initial");
    Profile::Shape shape = Profile::Shape::uniform;
    if (ic.contains("profile")) shape = detail::parse_shape(ic.at("profile").get<std::string>());
    if (ic.contains("rho")) c.rho = detail::parse_profile(ic.at("rho"), c.rho, shape, "initial.rho");
    if (ic.contains("M")) c.M = detail::parse_profile(ic.at("M"), c.M, shape, "initial.M");
    if (ic.contains("u")) c.u = detail::parse_profile(ic.at("u"), c.u, shape, "initial.u");
  }

  c.boundary = c.periodic ? BoundaryMode::isolated() : BoundaryMode::self_trace();
  if (j.contains("boundary")) {
    const Json& bc = j.at("boundary");
    detail::reject_unknown(bc, {"mode", "ports"}, "boundary");
    if (bc.contains("mode")) {
      const std::string mode = bc.at("mode").get<std::string>();
      if (mode == "isolated-periodic") c.boundary.kind = BoundaryMode::Kind::isolated_periodic;
      else if (mode == "prescribed") c.boundary.kind = BoundaryMode::Kind::prescribed;
      else if (mode == "self-trace") c.boundary.kind = BoundaryMode::Kind::self_trace;
      else throw ConfigError("unknown boundary mode '" + mode + "'");
    }
    if (bc.contains("ports")) {
      if (c.periodic) throw ConfigError("port time series given for a periodic mesh");
      const Json& ports = bc.at("ports");
      if (!ports.is_array()) throw ConfigError("boundary.ports must be an array");
      for (const Json& e : ports) {
        detail::reject_unknown(e, {"t", "left", "right"}, "boundary.ports entry");
        double t = 0.0;
        read(e, "t", t, "boundary.ports entry");
        PortSignal s;
        if (e.contains("left")) s.left = detail::parse_triple(e.at("left"), "ports.left");
        if (e.contains("right")) s.right = detail::parse_triple(e.at("right"), "ports.right");
        c.boundary.series.times.push_back(t);
        c.boundary.series.values.push_back(s);
      }
    }
    if (c.boundary.kind != BoundaryMode::Kind::prescribed && !c.boundary.series.values.empty())
      throw ConfigError("port time series requires boundary mode 'prescribed'");
  }
  validate(c.boundary, c.mesh());

  if (j.contains("integrator")) {
    const Json& in = j.at("integrator");
    detail::reject_unknown(in, {"scheme", "dt", "T", "output_interval", "snapshot_times"},
                           "integrator");
    if (in.contains("scheme")) {
      const std::string s = in.at("scheme").get<std::string>();
      if (s == "rk4") c.scheme = Scheme::rk4;
      else if (s == "implicit-midpoint") c.scheme = Scheme::implicit_midpoint;
      else throw ConfigError("unknown scheme '" + s + "' (rk4 | implicit-midpoint)");
    }
    read(in, "dt", c.dt, "integrator");
    read(in, "T", c.T, "integrator");
    read(in, "output_interval", c.output_interval, "integrator");
    read(in, "snapshot_times", c.snapshot_times, "integrator");
  }
  if (!(c.dt > 0.0)) throw ConfigError("integrator.dt must be positive");
  if (!(c.T >= 0.0)) throw ConfigError("integrator.T must be nonnegative");
  if (c.output_interval < 0.0) throw ConfigError("integrator.output_interval must be nonnegative");
  (void)steps_for(c.T, c.dt, "final time");
  if (c.output_interval > 0.0) (void)steps_for(c.output_interval, c.dt, "output interval");

  if (j.contains("generator")) {
    const std::string g = j.at("generator").get<std::string>();
    if (g == "two-generator") c.path = GeneratorPath::two_generator;
    else if (g == "single-generator") c.path = GeneratorPath::single_generator;
    else throw ConfigError("unknown generator path '" + g + "'");
  }
  if (c.path == GeneratorPath::single_generator && !c.material.inviscid())
    throw ConfigError("single-generator path requires eta = zeta = 0");

  if (j.contains("output")) {
    const Json& o = j.at("output");
    detail::reject_unknown(o, {"dir"}, "output");
    read(o, "dir", c.out_dir, "output");
  }
  if (j.contains("verify")) {
    const Json& v = j.at("verify");
    detail::reject_unknown(v, {"n_states", "amplitude", "seed"}, "verify");
    read(v, "n_states", c.verify.n_states, "verify");
    read(v, "amplitude", c.verify.amplitude, "verify");
    read(v, "seed", c.verify.seed, "verify");
    if (c.verify.n_states < 1) throw ConfigError("verify.n_states must be positive");
    if (!(c.verify.amplitude >= 0.0 && c.verify.amplitude < 1.0))
      throw ConfigError("verify.amplitude must lie in [0, 1)");
  }
  if (j.contains("converge")) {
    const Json& v = j.at("converge");
    detail::reject_unknown(v, {"levels", "base_cells", "T", "dt"}, "converge");
    read(v, "levels", c.converge.levels, "converge");
    read(v, "base_cells", c.converge.base_cells, "converge");
    read(v, "T", c.converge.T, "converge");
    read(v, "dt", c.converge.dt, "converge");
  }
  if (j.contains("test_hooks")) {
    const Json& h = j.at("test_hooks");
    detail::reject_unknown(h, {"corrupt_J"}, "test_hooks");
    read(h, "corrupt_J", c.hooks.corrupt_J, "test_hooks");
  }

  // The initial state must be admissible on the configured mesh.
  check_admissible(c.mesh(), c.initial_state(c.mesh()));
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return parse_config(j);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("initial state is inadmissible: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace phydro
