#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "wkam/system.hpp"

namespace wkam {

// Configuration or usage mistakes; the runner maps these to exit code 2,
// anything else thrown during a run to exit code 3.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// System catalog: pendulum | magnetic-1d | magnetic-2d | torus-distance.
// "a" is the constant 1-form coefficient and is only accepted (and emitted)
// for the magnetic systems.
struct SystemConfig {
  std::string id = "pendulum";
  int n = 1024;
  std::string metric = "flat";
  double a = 0.0;
};

struct SolverConfig {
  std::vector<double> lambda_ladder{0.02, 0.01, 0.005};
  double residual_tol = 0.02;
  double shape_tol = 0.0;  // sweep convergence tolerance, 0 -> 1e-9 (1D) / 1e-6 (2D)
};

double resolve_shape_tol(const SystemConfig& system, const SolverConfig& solver);

struct FlowConfig {
  std::vector<Vec2> starts;  // defaulted per system when absent
  double T = 0.2;
  double step_factor = 0.5;  // step = step_factor * h, capped at 1/2
  double delta_sing = 0.0;   // 0 -> max(10h, 0.02)
  double eps_f = 1e-3;
  double fan_radius = 0.0;  // momentum fan radius in cells, 0 -> 2; wide
                            // kink bands need more reach, up to 8
  std::string variant = "g1";  // g1 | g2
};

struct MollifyConfig {
  std::vector<int> ladder{16, 32, 64, 128};
  int hessian_samples = 500;
  std::string mode = "auto";  // auto | riemannian | magnetic
};

// Round-trips losslessly through to_json/from_json; unknown keys reject.
struct ExperimentConfig {
  SystemConfig system;
  SolverConfig solver;
  FlowConfig flow;
  MollifyConfig mollify;
  std::string out = "out";

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);

  // FNV-1a of the canonical serialization, as 16 hex digits.
  std::string hash() const;
};

int system_dim(const std::string& id);
MagneticSystem build_system(const SystemConfig& sc);

// Weak KAM data for the configured system: closed form for torus-distance,
// vanishing-discount estimate plus upwind marching otherwise. 2D critical
// values are estimated on a grid capped at estimate_cap (c is resolution
// robust, the marching grid is not) and reported alongside.
struct SolvedField {
  MagneticSystem sys;
  ScalarField u;
  double c = 0.0;
  double residual = 0.0;
  std::string method;
  int estimate_grid = 0;
};
SolvedField solve_system(const ExperimentConfig& cfg, int estimate_cap = 32);

struct RunContext {
  ExperimentConfig cfg;
  std::string out_dir;
  std::uint64_t seed = 20260816ULL;
  bool plots = false;
};

// Command bodies; each writes a manifest plus its artifacts into out_dir and
// returns the process exit code (0 pass, 1 verdict fail).
int cmd_solve(const RunContext& ctx);
int cmd_flow(const RunContext& ctx);
int cmd_mollify_study(const RunContext& ctx);
int cmd_oracle_compare(const RunContext& ctx);
int cmd_critical_value(const RunContext& ctx);

}  // namespace wkam
