#include "wkam/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <utility>

#include "wkam/hj_solver.hpp"
#include "wkam/oracle.hpp"

namespace wkam {

namespace {

void expect_keys(const nlohmann::json& j, const char* scope,
                 std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(scope) + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + scope);
  }
}

bool is_magnetic(const std::string& id) { return id == "magnetic-1d" || id == "magnetic-2d"; }

std::vector<Vec2> parse_starts(const nlohmann::json& js, int dim) {
  if (!js.is_array() || js.empty())
    throw ConfigError("flow.starts must be a non-empty array of points");
  std::vector<Vec2> starts;
  for (const auto& entry : js) {
    if (!entry.is_array() || static_cast<int>(entry.size()) != dim)
      throw ConfigError("flow.starts entries must be arrays of length " + std::to_string(dim));
    Vec2 x{0.0, 0.0};
    for (int axis = 0; axis < dim; ++axis) x[axis] = entry[axis].get<double>();
    starts.push_back(PeriodicGrid::wrap_point(x, dim));
  }
  return starts;
}

void validate(ExperimentConfig& cfg, bool a_given, bool starts_given) {
  const int dim = system_dim(cfg.system.id);
  if (cfg.system.metric != "flat")
    throw ConfigError("unsupported metric '" + cfg.system.metric + "' (only flat)");
  if (cfg.system.n < 8) throw ConfigError("system.n must be at least 8");
  if (a_given && !is_magnetic(cfg.system.id))
    throw ConfigError("key 'a' only applies to the magnetic systems");
  if (!a_given) cfg.system.a = cfg.system.id == "magnetic-1d" ? 1.0 : 0.3;

  if (cfg.solver.lambda_ladder.empty()) throw ConfigError("solver.lambda_ladder must be non-empty");
  double prev = std::numeric_limits<double>::infinity();
  for (double lam : cfg.solver.lambda_ladder) {
    if (!(lam > 0.0) || !(lam < prev))
      throw ConfigError("solver.lambda_ladder must be positive and strictly decreasing");
    prev = lam;
  }
  if (!(cfg.solver.residual_tol > 0.0)) throw ConfigError("solver.residual_tol must be positive");
  if (cfg.solver.shape_tol < 0.0) throw ConfigError("solver.shape_tol must be non-negative");

  if (!starts_given) {
    if (cfg.system.id == "pendulum")
      cfg.flow.starts = {{0.5, 0.0}};
    else if (cfg.system.id == "magnetic-1d")
      cfg.flow.starts = {{0.25, 0.0}};
    else if (cfg.system.id == "magnetic-2d")
      cfg.flow.starts = {{0.25, 0.5}};
    else
      cfg.flow.starts = {{0.5, 0.25}};
  }
  if (!(cfg.flow.T > 0.0)) throw ConfigError("flow.T must be positive");
  if (!(cfg.flow.step_factor > 0.0) || cfg.flow.step_factor > 0.5)
    throw ConfigError("flow.step_factor must lie in (0, 1/2]");
  if (cfg.flow.delta_sing < 0.0) throw ConfigError("flow.delta_sing must be non-negative");
  if (!(cfg.flow.eps_f > 0.0)) throw ConfigError("flow.eps_f must be positive");
  if (cfg.flow.fan_radius != 0.0 && (cfg.flow.fan_radius < 2.0 || cfg.flow.fan_radius > 8.0))
    throw ConfigError("flow.fan_radius must lie in [2, 8] grid cells");
  if (cfg.flow.variant != "g1" && cfg.flow.variant != "g2")
    throw ConfigError("flow.variant must be g1 or g2");

  if (cfg.mollify.ladder.empty()) throw ConfigError("mollify.ladder must be non-empty");
  for (int m : cfg.mollify.ladder)
    if (m < 1) throw ConfigError("mollify.ladder entries must be at least 1");
  if (cfg.mollify.hessian_samples < 1)
    throw ConfigError("mollify.hessian_samples must be at least 1");
  if (cfg.mollify.mode != "auto" && cfg.mollify.mode != "riemannian" &&
      cfg.mollify.mode != "magnetic")
    throw ConfigError("mollify.mode must be auto, riemannian, or magnetic");

  if (cfg.out.empty()) throw ConfigError("out must be a non-empty path");
  (void)dim;
}

}  // namespace

int system_dim(const std::string& id) {
  if (id == "pendulum" || id == "magnetic-1d") return 1;
  if (id == "magnetic-2d" || id == "torus-distance") return 2;
  throw ConfigError("unknown system id '" + id + "'");
}

double resolve_shape_tol(const SystemConfig& system, const SolverConfig& solver) {
  if (solver.shape_tol > 0.0) return solver.shape_tol;
  return system_dim(system.id) == 1 ? 1e-9 : 1e-6;
}

nlohmann::json ExperimentConfig::to_json() const {
  const int dim = system_dim(system.id);
  nlohmann::json js{{"id", system.id}, {"n", system.n}, {"metric", system.metric}};
  if (is_magnetic(system.id)) js["a"] = system.a;

  nlohmann::json starts = nlohmann::json::array();
  for (const Vec2& x : flow.starts) {
    nlohmann::json pt = nlohmann::json::array();
    for (int axis = 0; axis < dim; ++axis) pt.push_back(x[axis]);
    starts.push_back(pt);
  }

  return nlohmann::json{
      {"system", js},
      {"solver",
       {{"lambda_ladder", solver.lambda_ladder},
        {"residual_tol", solver.residual_tol},
        {"shape_tol", solver.shape_tol}}},
      {"flow",
       {{"starts", starts},
        {"T", flow.T},
        {"step_factor", flow.step_factor},
        {"delta_sing", flow.delta_sing},
        {"eps_f", flow.eps_f},
        {"fan_radius", flow.fan_radius},
        {"variant", flow.variant}}},
      {"mollify",
       {{"ladder", mollify.ladder},
        {"hessian_samples", mollify.hessian_samples},
        {"mode", mollify.mode}}},
      {"out", out}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  try {
    ExperimentConfig cfg;
    bool a_given = false;
    bool starts_given = false;
    expect_keys(j, "config", {"system", "solver", "flow", "mollify", "out"});

    if (j.contains("system")) {
      const auto& js = j.at("system");
      expect_keys(js, "system", {"id", "n", "metric", "a"});
      if (js.contains("id")) cfg.system.id = js.at("id").get<std::string>();
      if (js.contains("n")) cfg.system.n = js.at("n").get<int>();
      if (js.contains("metric")) cfg.system.metric = js.at("metric").get<std::string>();
      if (js.contains("a")) {
        cfg.system.a = js.at("a").get<double>();
        a_given = true;
      }
    }
    if (j.contains("solver")) {
      const auto& js = j.at("solver");
      expect_keys(js, "solver", {"lambda_ladder", "residual_tol", "shape_tol"});
      if (js.contains("lambda_ladder"))
        cfg.solver.lambda_ladder = js.at("lambda_ladder").get<std::vector<double>>();
      if (js.contains("residual_tol"))
        cfg.solver.residual_tol = js.at("residual_tol").get<double>();
      if (js.contains("shape_tol")) cfg.solver.shape_tol = js.at("shape_tol").get<double>();
    }
    if (j.contains("flow")) {
      const auto& js = j.at("flow");
      expect_keys(js, "flow",
                  {"starts", "T", "step_factor", "delta_sing", "eps_f", "fan_radius", "variant"});
      if (js.contains("starts")) {
        cfg.flow.starts = parse_starts(js.at("starts"), system_dim(cfg.system.id));
        starts_given = true;
      }
      if (js.contains("T")) cfg.flow.T = js.at("T").get<double>();
      if (js.contains("step_factor")) cfg.flow.step_factor = js.at("step_factor").get<double>();
      if (js.contains("delta_sing")) cfg.flow.delta_sing = js.at("delta_sing").get<double>();
      if (js.contains("eps_f")) cfg.flow.eps_f = js.at("eps_f").get<double>();
      if (js.contains("fan_radius")) cfg.flow.fan_radius = js.at("fan_radius").get<double>();
      if (js.contains("variant")) cfg.flow.variant = js.at("variant").get<std::string>();
    }
    if (j.contains("mollify")) {
      const auto& js = j.at("mollify");
      expect_keys(js, "mollify", {"ladder", "hessian_samples", "mode"});
      if (js.contains("ladder")) cfg.mollify.ladder = js.at("ladder").get<std::vector<int>>();
      if (js.contains("hessian_samples"))
        cfg.mollify.hessian_samples = js.at("hessian_samples").get<int>();
      if (js.contains("mode")) cfg.mollify.mode = js.at("mode").get<std::string>();
    }
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();

    validate(cfg, a_given, starts_given);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  return from_json(j);
}

std::string ExperimentConfig::hash() const {
  const std::string s = to_json().dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

MagneticSystem build_system(const SystemConfig& sc) {
  if (sc.id == "pendulum") return oracle::Pendulum1D::system(sc.n);
  if (sc.id == "magnetic-1d") return oracle::Magnetic1D{sc.a}.system(sc.n);
  if (sc.id == "torus-distance") return oracle::TorusDistance::eikonal_system(sc.n);
  if (sc.id != "magnetic-2d") throw ConfigError("unknown system id '" + sc.id + "'");

  // product wells with a constant drift along the first axis; the critical
  // value a^2/2 matches the coordinate-loop bound exactly
  const PeriodicGrid grid(2, sc.n);
  ScalarField v(grid);
  for (std::size_t id = 0; id < grid.size(); ++id) {
    const Vec2 x = grid.point(id);
    v.at(id) = -0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * x[0])) *
               (1.0 - std::cos(2.0 * std::numbers::pi * x[1]));
  }
  return MagneticSystem(grid, MetricField::flat(grid),
                        OneFormField::constant(grid, {sc.a, 0.0}), PotentialField(std::move(v)));
}

SolvedField solve_system(const ExperimentConfig& cfg, int estimate_cap) {
  const SystemConfig& sc = cfg.system;
  MagneticSystem sys = build_system(sc);

  if (sc.id == "torus-distance") {
    ScalarField u = oracle::TorusDistance{}.sample(sys.grid);
    const double c = oracle::TorusDistance::eikonal_c();
    const ResidualStats res = hj_residual(u, sys, c);
    return {std::move(sys), std::move(u), c, res.max_abs, "closed-form", 0};
  }

  int n_est = sc.n;
  if (system_dim(sc.id) == 2 && estimate_cap > 0 && n_est > estimate_cap) n_est = estimate_cap;
  CriticalValueOptions copt;
  copt.lambdas = cfg.solver.lambda_ladder;
  copt.shape_tol = resolve_shape_tol(sc, cfg.solver);
  SystemConfig est_sc = sc;
  est_sc.n = n_est;
  const CriticalValueEstimate est =
      n_est == sc.n ? estimate_critical_value(sys, copt)
                    : estimate_critical_value(build_system(est_sc), copt);

  WeakKamField wk = solve_critical(sys, est.c);
  return {std::move(sys), std::move(wk.u), est.c, wk.residual_max, "estimate+march", n_est};
}

}  // namespace wkam
