// Command-line driver: verify | run | converge.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "phydro/commands.hpp"

namespace {

phydro::RunConfig config_from(const std::string& path) {
  if (path.empty()) return phydro::parse_config_text("{}");
  return phydro::load_config(path);
}

int report_verify(const phydro::VerifyReport& rep) {
  for (const auto& c : rep.checks) {
    if (!c.applicable) {
      std::printf("%-28s n/a\n", c.name.c_str());
      continue;
    }
    std::printf("%-28s %s  worst %.3e  tol %.1e\n", c.name.c_str(), c.pass ? "PASS" : "FAIL",
                c.worst, c.tolerance);
  }
  if (rep.pass()) return 0;
  std::printf("failed:");
  for (const auto& n : rep.failed()) std::printf(" %s", n.c_str());
  std::printf("\n");
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-preserving 1D compressible heat-conducting fluid simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool dump = false;
  std::optional<int> levels;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
  };
  CLI::App* verify = app.add_subcommand("verify", "structural property suite");
  add_common(verify);
  verify->add_flag("--dump-operators", dump, "write the assembled matrices of the first state");
  verify->add_option("--seed", seed, "seed of the random state family");
  CLI::App* runc = app.add_subcommand("run", "fixed-step simulation");
  add_common(runc);
  CLI::App* conv = app.add_subcommand("converge", "refinement study");
  add_common(conv);
  conv->add_option("--levels", levels, "number of refinement levels (>= 3)");

  CLI11_PARSE(app, argc, argv);

  const std::optional<std::string> out =
      out_dir.empty() ? std::nullopt : std::optional<std::string>(out_dir);
  try {
    const phydro::RunConfig cfg = config_from(config_path);
    if (*verify) {
      phydro::VerifyOptions opt;
      opt.seed = seed;
      opt.dump_operators = dump;
      opt.out_dir = out;
      return report_verify(phydro::cmd_verify(cfg, opt));
    }
    if (*runc) {
      const phydro::RunOutput r = phydro::cmd_run(cfg, out);
      std::printf("%d steps, %zu balance rows\n", r.result.steps, r.result.reports.size());
      for (const auto& f : r.files) std::printf("wrote %s\n", f.string().c_str());
      return 0;
    }
    if (*conv) {
      const phydro::ConvergeReport rep = phydro::cmd_converge(cfg, levels, out);
      std::cout << rep.to_json().dump(2) << '\n';
      return 0;
    }
  } catch (const phydro::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const phydro::IOError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 3;
  } catch (const phydro::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
