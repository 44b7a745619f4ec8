#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "wkam/cli.hpp"

namespace {

// machine-readable error on stdout, mirrored into the run directory when one
// is known; exit 2 = config/usage, exit 3 = numerical failure
int emit_error(const std::string& message, int code, const std::string& out_dir) {
  const nlohmann::json j{{"error", message}, {"exit", code}};
  std::printf("%s\n", j.dump().c_str());
  if (!out_dir.empty()) {
    try {
      std::filesystem::create_directories(out_dir);
      std::ofstream f(out_dir + "/error.json");
      f << j.dump(2) << "\n";
    } catch (...) {
    }
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weak KAM toolkit on flat tori"};
  app.require_subcommand(1);
  app.fallthrough(true);  // app-level flags may follow the subcommand

  std::string config_path;
  std::string out_dir;
  bool plots = false;
  std::uint64_t seed = 20260816ULL;
  int grid = 0;
  app.add_option("--config", config_path, "experiment config JSON path");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_flag("--plots", plots, "emit static SVG plots");
  app.add_option("--seed", seed, "seed for sampled checks");
  app.add_option("--grid", grid, "override system.n");

  CLI::App* c_solve = app.add_subcommand("solve", "weak KAM pair (u, c) with residuals");
  CLI::App* c_flow =
      app.add_subcommand("flow", "generalized gradient flow plus invariance verdict");
  CLI::App* c_moll = app.add_subcommand(
      "mollify-study", "psi decay and Hessian checks along the mollifier ladder");
  CLI::App* c_oracle =
      app.add_subcommand("oracle-compare", "solver output against closed-form references");
  CLI::App* c_crit =
      app.add_subcommand("critical-value", "vanishing-discount estimate with loop bound");
  (void)c_crit;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::string effective_out = out_dir;
  try {
    wkam::ExperimentConfig cfg =
        config_path.empty() ? wkam::ExperimentConfig::from_json(nlohmann::json::object())
                            : wkam::ExperimentConfig::load(config_path);
    if (grid > 0) {
      cfg.system.n = grid;
      cfg = wkam::ExperimentConfig::from_json(cfg.to_json());
    }
    if (effective_out.empty()) effective_out = cfg.out;

    const wkam::RunContext ctx{cfg, effective_out, seed, plots};
    if (c_solve->parsed()) return wkam::cmd_solve(ctx);
    if (c_flow->parsed()) return wkam::cmd_flow(ctx);
    if (c_moll->parsed()) return wkam::cmd_mollify_study(ctx);
    if (c_oracle->parsed()) return wkam::cmd_oracle_compare(ctx);
    return wkam::cmd_critical_value(ctx);
  } catch (const wkam::ConfigError& e) {
    return emit_error(e.what(), 2, effective_out);
  } catch (const std::exception& e) {
    return emit_error(e.what(), 3, effective_out);
  }
}
