#include "wkam/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "wkam/flow.hpp"
#include "wkam/hj_solver.hpp"
#include "wkam/mollify.hpp"
#include "wkam/oracle.hpp"
#include "wkam/subdiff.hpp"

namespace wkam {

namespace {

namespace fs = std::filesystem;

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

double resolve_delta(const ExperimentConfig& cfg) {
  if (cfg.flow.delta_sing > 0.0) return cfg.flow.delta_sing;
  const double h = 1.0 / cfg.system.n;
  return std::max(10.0 * h, 0.02);
}

void write_manifest(const RunContext& ctx, const char* command) {
  const double h = 1.0 / ctx.cfg.system.n;
  const nlohmann::json j{
      {"command", command},
      {"config", ctx.cfg.to_json()},
      {"config_hash", ctx.cfg.hash()},
      {"grid", {{"dim", system_dim(ctx.cfg.system.id)}, {"n", ctx.cfg.system.n}, {"h", h}}},
      {"seed", ctx.seed},
      {"thresholds",
       {{"delta_sing", resolve_delta(ctx.cfg)},
        {"theta_c", std::max(6.0 * h, 0.05)},
        {"eps_f", ctx.cfg.flow.eps_f},
        {"residual_tol", ctx.cfg.solver.residual_tol},
        {"shape_tol", resolve_shape_tol(ctx.cfg.system, ctx.cfg.solver)}}}};
  write_json_file(j, ctx.out_dir + "/manifest.json");
}

nlohmann::json point_json(const Vec2& x, int dim) {
  nlohmann::json pt = nlohmann::json::array();
  for (int axis = 0; axis < dim; ++axis) pt.push_back(x[axis]);
  return pt;
}

// Static line plot, self-contained SVG. Outputs are watched, not steered.
struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

void write_line_plot_svg(const std::vector<PlotSeries>& series, const std::string& xlabel,
                         const std::string& ylabel, const std::string& path) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#17becf"};
  const double width = 640.0, height = 400.0;
  const double ml = 62.0, mr = 18.0, mt = 18.0, mb = 46.0;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const PlotSeries& s : series)
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      xmin = std::min(xmin, s.x[k]);
      xmax = std::max(xmax, s.x[k]);
      ymin = std::min(ymin, s.y[k]);
      ymax = std::max(ymax, s.y[k]);
    }
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  const auto px = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * (width - ml - mr); };
  const auto py = [&](double v) {
    return height - mb - (v - ymin) / (ymax - ymin) * (height - mt - mb);
  };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width << " " << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + k * (xmax - xmin) / 4.0;
    const double yv = ymin + k * (ymax - ymin) / 4.0;
    out << "<line x1=\"" << fmt6(px(xv)) << "\" y1=\"" << fmt6(height - mb) << "\" x2=\""
        << fmt6(px(xv)) << "\" y2=\"" << fmt6(height - mb + 5) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt6(px(xv)) << "\" y=\"" << fmt6(height - mb + 18)
        << "\" text-anchor=\"middle\">" << fmt6(xv) << "</text>\n";
    out << "<line x1=\"" << fmt6(ml - 5) << "\" y1=\"" << fmt6(py(yv)) << "\" x2=\"" << fmt6(ml)
        << "\" y2=\"" << fmt6(py(yv)) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt6(ml - 8) << "\" y=\"" << fmt6(py(yv) + 4)
        << "\" text-anchor=\"end\">" << fmt6(yv) << "</text>\n";
  }
  out << "<line x1=\"" << fmt6(ml) << "\" y1=\"" << fmt6(mt) << "\" x2=\"" << fmt6(ml)
      << "\" y2=\"" << fmt6(height - mb) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << fmt6(ml) << "\" y1=\"" << fmt6(height - mb) << "\" x2=\""
      << fmt6(width - mr) << "\" y2=\"" << fmt6(height - mb) << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << fmt6((ml + width - mr) / 2) << "\" y=\"" << fmt6(height - 8)
      << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  out << "<text x=\"14\" y=\"" << fmt6((mt + height - mb) / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << fmt6((mt + height - mb) / 2)
      << ")\">" << ylabel << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % (sizeof palette / sizeof palette[0])];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < series[s].x.size(); ++k) {
      if (k) out << " ";
      out << fmt6(px(series[s].x[k])) << "," << fmt6(py(series[s].y[k]));
    }
    out << "\"/>\n";
    const double ly = mt + 16.0 * (1 + static_cast<double>(s));
    out << "<line x1=\"" << fmt6(width - mr - 120) << "\" y1=\"" << fmt6(ly - 4) << "\" x2=\""
        << fmt6(width - mr - 96) << "\" y2=\"" << fmt6(ly - 4) << "\" stroke=\"" << color
        << "\" stroke-width=\"1.5\"/>\n";
    out << "<text x=\"" << fmt6(width - mr - 90) << "\" y=\"" << fmt6(ly) << "\">"
        << series[s].label << "</text>\n";
  }
  out << "</svg>\n";
}

// u(y) - u(x) <= action + cT + tol on random pairs; the action minimizer only
// returns an upper bound, so violations are genuine failures.
nlohmann::json domination_check(const MagneticSystem& sys, const ScalarField& u, double c,
                                int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  const int dim = sys.grid.dim();

  oracle::BruteForceOptions bopt;
  bopt.restarts = 20;
  bopt.seed = seed + 1;

  double worst = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < count; ++k) {
    Vec2 x{unit(), 0.0}, y{unit(), 0.0};
    if (dim == 2) {
      x[1] = unit();
      y[1] = unit();
    }
    const double T = 0.1 + 0.5 * unit();
    const double action = oracle::brute_force_action(sys, x, y, T, bopt);
    worst = std::max(worst, u.interp(y) - u.interp(x) - action - c * T);
  }
  const bool pass = worst <= 1e-3;
  return {{"name", "domination"}, {"value", worst}, {"bound", 1e-3}, {"pass", pass},
          {"samples", count}};
}

}  // namespace

int cmd_solve(const RunContext& ctx) {
  fs::create_directories(ctx.out_dir);
  write_manifest(ctx, "solve");

  const SolvedField sf = solve_system(ctx.cfg);
  save_scalar_field(sf.u, ctx.out_dir + "/u", "weak-kam");

  const ResidualStats res = hj_residual(sf.u, sf.sys, sf.c);
  const bool pass = res.max_abs <= ctx.cfg.solver.residual_tol;
  const nlohmann::json summary{{"system", ctx.cfg.system.id},
                               {"n", ctx.cfg.system.n},
                               {"c", sf.c},
                               {"method", sf.method},
                               {"estimate_grid", sf.estimate_grid},
                               {"residual_max", res.max_abs},
                               {"residual_l2", res.l2},
                               {"residual_nodes", res.nodes_used},
                               {"u_min", sf.u.min_value()},
                               {"u_max", sf.u.max_value()},
                               {"residual_tol", ctx.cfg.solver.residual_tol},
                               {"pass", pass}};
  write_json_file(summary, ctx.out_dir + "/summary.json");

  if (ctx.plots && system_dim(ctx.cfg.system.id) == 1) {
    PlotSeries s;
    s.label = "u";
    for (std::size_t id = 0; id < sf.sys.grid.size(); ++id) {
      s.x.push_back(sf.sys.grid.point(id)[0]);
      s.y.push_back(sf.u.at(id));
    }
    write_line_plot_svg({s}, "x", "u(x)", ctx.out_dir + "/u_plot.svg");
  }
  return pass ? 0 : 1;
}

int cmd_flow(const RunContext& ctx) {
  fs::create_directories(ctx.out_dir);
  write_manifest(ctx, "flow");

  const SolvedField sf = solve_system(ctx.cfg);
  const int dim = sf.sys.grid.dim();
  const double h = sf.sys.grid.h();
  const double step = ctx.cfg.flow.step_factor * h;
  const double delta = resolve_delta(ctx.cfg);
  FlowOptions fopt;
  fopt.eps_f = ctx.cfg.flow.eps_f;
  if (ctx.cfg.flow.fan_radius > 0.0) fopt.subdiff.radius = ctx.cfg.flow.fan_radius * h;
  const bool g2 = ctx.cfg.flow.variant == "g2";

  nlohmann::json runs = nlohmann::json::array();
  std::vector<PlotSeries> plot;
  bool all_pass = true;
  double min_ind = std::numeric_limits<double>::infinity();

  for (std::size_t k = 0; k < ctx.cfg.flow.starts.size(); ++k) {
    const Vec2& x0 = ctx.cfg.flow.starts[k];
    nlohmann::json r{{"start", point_json(x0, dim)}};
    try {
      const Trajectory traj =
          g2 ? integrate_g2(sf.u, sf.sys, sf.c, x0, ctx.cfg.flow.T, step, fopt)
             : integrate_g1(sf.u, sf.sys, sf.c, x0, ctx.cfg.flow.T, step, fopt);
      save_trajectory_csv(traj, ctx.out_dir + "/trajectory_" + std::to_string(k) + ".csv");

      if (traj.points.empty()) {
        // the momentum fan could not be built at the start; nothing accepted,
        // nothing to verify
        r["status"] = flow_status_name(traj.status);
        r["verdict"] = "stalled-at-start";
        r["note"] = traj.note;
        r["min_indicator"] = 0.0;
        r["pass"] = true;
        runs.push_back(std::move(r));
        continue;
      }

      const InvarianceReport rep = verify_invariance(traj, delta);
      r["status"] = flow_status_name(traj.status);
      r["min_indicator"] = rep.min_indicator;
      r["verdict"] = !rep.applicable ? "not-applicable" : (rep.pass ? "pass" : "fail");
      r["pass"] = rep.pass;
      if (!rep.pass) all_pass = false;
      if (rep.applicable) min_ind = std::min(min_ind, rep.min_indicator);

      if (ctx.plots) {
        PlotSeries s;
        s.label = "start " + std::to_string(k);
        for (std::size_t i = 0; i < traj.points.size(); ++i) {
          s.x.push_back(dim == 2 ? traj.points[i][0] : traj.times[i]);
          s.y.push_back(dim == 2 ? traj.points[i][1] : traj.points[i][0]);
        }
        plot.push_back(std::move(s));
      }
    } catch (const std::invalid_argument& e) {
      if (std::string(e.what()).find("outside W") == std::string::npos) throw;
      // nothing to verify from a start outside the admissible set
      r["status"] = "left-w";
      r["verdict"] = "left-w";
      r["min_indicator"] = 0.0;
      r["pass"] = true;
    }
    runs.push_back(std::move(r));
  }

  const nlohmann::json verdict{
      {"pass", all_pass},
      {"delta_sing", delta},
      {"min_indicator", std::isfinite(min_ind) ? min_ind : 0.0},
      {"variant", ctx.cfg.flow.variant},
      {"runs", runs}};
  write_json_file(verdict, ctx.out_dir + "/verdict.json");

  if (ctx.plots && !plot.empty())
    write_line_plot_svg(plot, dim == 2 ? "x" : "t", dim == 2 ? "y" : "x",
                        ctx.out_dir + "/trajectory_plot.svg");
  return all_pass ? 0 : 1;
}

int cmd_mollify_study(const RunContext& ctx) {
  fs::create_directories(ctx.out_dir);
  write_manifest(ctx, "mollify-study");

  const SolvedField sf = solve_system(ctx.cfg);
  const FlowMode mode = ctx.cfg.mollify.mode == "riemannian" ? FlowMode::Riemannian
                        : ctx.cfg.mollify.mode == "magnetic"
                            ? FlowMode::Magnetic
                            : (ctx.cfg.system.id == "torus-distance" ? FlowMode::Riemannian
                                                                     : FlowMode::Magnetic);
  const Vec2 x0 = ctx.cfg.flow.starts.front();
  const double step = ctx.cfg.flow.step_factor * sf.sys.grid.h();

  nlohmann::json rungs = nlohmann::json::array();
  std::vector<PlotSeries> plot;
  int valid = 0;
  bool fits_ok = true;

  for (int m : ctx.cfg.mollify.ladder) {
    if (!kernel_resolvable(m, sf.sys.grid)) {
      rungs.push_back({{"m", m}, {"status", "kernel under-resolved"}});
      continue;
    }
    const ScalarField um = mollify(sf.u, m);
    Trajectory traj;
    try {
      traj = smooth_flow(um, sf.sys, mode, sf.c, x0, ctx.cfg.flow.T, step, ctx.cfg.flow.eps_f);
    } catch (const std::invalid_argument& e) {
      if (std::string(e.what()).find("outside W") == std::string::npos) throw;
      rungs.push_back({{"m", m}, {"status", "start outside W"}});
      continue;
    }
    const PsiTrace trace = psi_track(um, sf.sys, mode, sf.c, traj, m);
    save_psi_csv(trace, ctx.out_dir + "/psi_m" + std::to_string(m) + ".csv");

    HessianOptions hopt;
    hopt.seed = ctx.seed;
    const HessianReport hess =
        hessian_checks(um, sf.sys, mode, sf.c, ctx.cfg.mollify.hessian_samples, hopt);
    save_hessian_json(hess, ctx.out_dir + "/hessian_m" + std::to_string(m) + ".json");

    double sup = -std::numeric_limits<double>::infinity();
    for (double v : trace.psi) sup = std::max(sup, v);
    rungs.push_back({{"m", m},
                     {"status", "ok"},
                     {"flow_status", flow_status_name(traj.status)},
                     {"psi0", trace.psi.front()},
                     {"psi_sup", sup},
                     {"c_fit", trace.c_fit},
                     {"slack", trace.slack},
                     {"fit_ok", trace.fit_ok},
                     {"defect_max", hess.defect_max},
                     {"k_fit", hess.k_fit},
                     {"hessian_usable", hess.usable},
                     {"hessian_warn", hess.warn}});
    ++valid;
    if (!trace.fit_ok) fits_ok = false;

    if (ctx.plots) {
      PlotSeries s;
      s.label = "m=" + std::to_string(m);
      s.x = trace.times;
      s.y = trace.psi;
      plot.push_back(std::move(s));
    }
  }

  const bool pass = valid > 0 && fits_ok;
  const nlohmann::json study{{"system", ctx.cfg.system.id},
                             {"mode", mode == FlowMode::Riemannian ? "riemannian" : "magnetic"},
                             {"start", point_json(x0, sf.sys.grid.dim())},
                             {"valid_rungs", valid},
                             {"pass", pass},
                             {"rungs", rungs}};
  write_json_file(study, ctx.out_dir + "/study.json");

  if (ctx.plots && !plot.empty())
    write_line_plot_svg(plot, "t", "psi", ctx.out_dir + "/psi_plot.svg");
  return pass ? 0 : 1;
}

int cmd_critical_value(const RunContext& ctx) {
  fs::create_directories(ctx.out_dir);
  write_manifest(ctx, "critical-value");

  nlohmann::json out;
  bool pass = true;
  if (ctx.cfg.system.id == "torus-distance") {
    out = {{"system", ctx.cfg.system.id}, {"c", oracle::TorusDistance::eikonal_c()},
           {"loop_bound", 0.0},           {"gap", oracle::TorusDistance::eikonal_c()},
           {"method", "closed-form"},     {"pass", true}};
  } else {
    const MagneticSystem sys = build_system(ctx.cfg.system);
    CriticalValueOptions copt;
    copt.lambdas = ctx.cfg.solver.lambda_ladder;
    copt.shape_tol = resolve_shape_tol(ctx.cfg.system, ctx.cfg.solver);
    const CriticalValueEstimate est = estimate_critical_value(sys, copt);
    nlohmann::json rungs = nlohmann::json::array();
    for (const auto& [lam, cl] : est.rungs) rungs.push_back({{"lambda", lam}, {"c", cl}});
    pass = est.c >= est.loop_bound - copt.bound_tol;
    out = {{"system", ctx.cfg.system.id},
           {"c", est.c},
           {"loop_bound", est.loop_bound},
           {"gap", est.c - est.loop_bound},
           {"iterations", est.iterations},
           {"rungs", rungs},
           {"method", "vanishing-discount"},
           {"pass", pass}};
  }
  write_json_file(out, ctx.out_dir + "/critical.json");
  return pass ? 0 : 1;
}

int cmd_oracle_compare(const RunContext& ctx) {
  fs::create_directories(ctx.out_dir);
  write_manifest(ctx, "oracle-compare");

  const SolvedField sf = solve_system(ctx.cfg);
  const double h = sf.sys.grid.h();
  const std::string& id = ctx.cfg.system.id;
  nlohmann::json checks = nlohmann::json::array();
  const auto push = [&checks](const char* name, double value, double bound) {
    checks.push_back(
        {{"name", name}, {"value", value}, {"bound", bound}, {"pass", value <= bound}});
  };

  if (id == "pendulum") {
    push("critical_value_abs_err", std::abs(sf.c - oracle::Pendulum1D::critical_value()), 0.02);
    const ScalarField ref = oracle::Pendulum1D::sample_u(sf.sys.grid);
    double linf = 0.0;
    for (std::size_t nid = 0; nid < sf.sys.grid.size(); ++nid)
      linf = std::max(linf, std::abs(sf.u.at(nid) - ref.at(nid)));
    push("u_linf_err", linf, 5.0 * h);
    push("u_half_err", std::abs(sf.u.interp({0.5, 0.0}) - oracle::Pendulum1D::u(0.5)), 2.0 * h);
  } else if (id == "magnetic-1d") {
    const oracle::Magnetic1D ora{ctx.cfg.system.a};
    push("critical_value_abs_err", std::abs(sf.c - ora.critical_value()), 0.02);
    push("loop_bound_gap", std::abs(sf.c - ora.loop_bound()), 0.02);
    double linf = 0.0;
    for (std::size_t nid = 0; nid < sf.sys.grid.size(); ++nid)
      linf = std::max(linf, std::abs(sf.u.at(nid)));
    push("u_linf_err", linf, 5.0 * h);
    const SingularSet ss = singular_set(sf.u, sf.sys, sf.c);
    push("singular_nodes", static_cast<double>(ss.singular_nodes.size()), 0.0);
  } else if (id == "magnetic-2d") {
    const double c_ref = 0.5 * ctx.cfg.system.a * ctx.cfg.system.a;
    push("critical_value_abs_err", std::abs(sf.c - c_ref), 0.02);
    push("residual_max", sf.residual, ctx.cfg.solver.residual_tol);
  } else {
    const oracle::TorusDistance td;
    const auto cut = td.cut_locus();
    const SingularSet ss = singular_set(sf.u, sf.sys, sf.c);

    // symmetric Hausdorff distance between detected singular nodes and the
    // two exact cut lines
    double detect_to_cut = 0.0;
    for (std::size_t nid : ss.singular_nodes) {
      const Vec2 x = sf.sys.grid.point(nid);
      const double d = std::min(std::abs(PeriodicGrid::torus_delta(x[0], cut.xline)),
                                std::abs(PeriodicGrid::torus_delta(x[1], cut.yline)));
      detect_to_cut = std::max(detect_to_cut, d);
    }
    double cut_to_detect = 0.0;
    const int n = sf.sys.grid.n();
    for (int i = 0; i < n; ++i) {
      for (const Vec2 probe :
           {Vec2{cut.xline, i * h}, Vec2{i * h, cut.yline}}) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t nid : ss.singular_nodes)
          best = std::min(best, sf.sys.grid.torus_dist(sf.sys.grid.point(nid), probe));
        cut_to_detect = std::max(cut_to_detect, best);
      }
    }
    push("cut_hausdorff", std::max(detect_to_cut, cut_to_detect), 3.0 * h);
    push("u_value_err", std::abs(sf.u.interp({0.5, 0.25}) - td.value({0.5, 0.25})), 1e-9);
    push("residual_max", sf.residual, ctx.cfg.solver.residual_tol);
  }

  checks.push_back(domination_check(sf.sys, sf.u, sf.c, 10, ctx.seed));

  bool all = true;
  for (const auto& c : checks)
    if (!c.at("pass").get<bool>()) all = false;
  const nlohmann::json report{{"system", id}, {"pass", all}, {"checks", checks}};
  write_json_file(report, ctx.out_dir + "/oracle.json");
  return all ? 0 : 1;
}

}  // namespace wkam
