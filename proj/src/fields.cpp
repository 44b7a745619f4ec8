#include "wkam/fields.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace wkam {

ScalarField::ScalarField(const PeriodicGrid& grid, std::vector<double> values)
    : grid_(grid), v_(std::move(values)) {
  if (v_.size() != grid_.size())
    throw std::invalid_argument("ScalarField: value count does not match grid size");
}

double ScalarField::interp(const Vec2& xin) const {
  const Vec2 x = grid_.wrap_point(xin);
  const int n = grid_.n();
  const double hx = x[0] * n;
  const int i0 = static_cast<int>(hx);
  const double tx = hx - i0;
  if (grid_.dim() == 1) {
    const double a = v_[grid_.id(i0)];
    const double b = v_[grid_.id(i0 + 1)];
    return a + tx * (b - a);
  }
  const double hy = x[1] * n;
  const int j0 = static_cast<int>(hy);
  const double ty = hy - j0;
  const double v00 = v_[grid_.id(i0, j0)];
  const double v10 = v_[grid_.id(i0 + 1, j0)];
  const double v01 = v_[grid_.id(i0, j0 + 1)];
  const double v11 = v_[grid_.id(i0 + 1, j0 + 1)];
  const double a = v00 + tx * (v10 - v00);
  const double b = v01 + tx * (v11 - v01);
  return a + ty * (b - a);
}

Vec2 ScalarField::gradient_central(std::size_t id) const {
  const auto c = grid_.coords(id);
  const double inv2h = 0.5 / grid_.h();
  Vec2 g{0.0, 0.0};
  g[0] = (at(c[0] + 1, c[1]) - at(c[0] - 1, c[1])) * inv2h;
  if (grid_.dim() == 2) g[1] = (at(c[0], c[1] + 1) - at(c[0], c[1] - 1)) * inv2h;
  return g;
}

void ScalarField::gradient_one_sided(std::size_t id, Vec2& backward, Vec2& forward) const {
  const auto c = grid_.coords(id);
  const double invh = 1.0 / grid_.h();
  const double u0 = v_[id];
  backward = {0.0, 0.0};
  forward = {0.0, 0.0};
  backward[0] = (u0 - at(c[0] - 1, c[1])) * invh;
  forward[0] = (at(c[0] + 1, c[1]) - u0) * invh;
  if (grid_.dim() == 2) {
    backward[1] = (u0 - at(c[0], c[1] - 1)) * invh;
    forward[1] = (at(c[0], c[1] + 1) - u0) * invh;
  }
}

double ScalarField::min_value() const { return *std::min_element(v_.begin(), v_.end()); }
double ScalarField::max_value() const { return *std::max_element(v_.begin(), v_.end()); }
double ScalarField::mean_value() const {
  return std::accumulate(v_.begin(), v_.end(), 0.0) / static_cast<double>(v_.size());
}

Vec2 ComponentField::interp(const Vec2& xin) const {
  const Vec2 x = grid_.wrap_point(xin);
  const int n = grid_.n();
  const double hx = x[0] * n;
  const int i0 = static_cast<int>(hx);
  const double tx = hx - i0;
  if (grid_.dim() == 1) {
    const double a = c0_[grid_.id(i0)];
    const double b = c0_[grid_.id(i0 + 1)];
    return {a + tx * (b - a), 0.0};
  }
  const double hy = x[1] * n;
  const int j0 = static_cast<int>(hy);
  const double ty = hy - j0;
  Vec2 out{0.0, 0.0};
  for (int axis = 0; axis < 2; ++axis) {
    const auto& c = (axis == 0) ? c0_ : c1_;
    const double v00 = c[grid_.id(i0, j0)];
    const double v10 = c[grid_.id(i0 + 1, j0)];
    const double v01 = c[grid_.id(i0, j0 + 1)];
    const double v11 = c[grid_.id(i0 + 1, j0 + 1)];
    const double a = v00 + tx * (v10 - v00);
    const double b = v01 + tx * (v11 - v01);
    out[axis] = a + ty * (b - a);
  }
  return out;
}

OneFormField OneFormField::constant(const PeriodicGrid& grid, const Vec2& w) {
  OneFormField f(grid);
  for (std::size_t id = 0; id < grid.size(); ++id) {
    f.set(0, id, w[0]);
    if (grid.dim() == 2) f.set(1, id, w[1]);
  }
  if (grid.dim() == 1 && w[1] != 0.0)
    throw std::invalid_argument("OneFormField: nonzero second component on a 1D grid");
  return f;
}

MetricField::MetricField(const PeriodicGrid& grid, MetricKind kind)
    : grid_(grid),
      kind_(kind),
      c11_(grid.size(), 1.0),
      c12_(grid.dim() == 2 ? grid.size() : 0, 0.0),
      c22_(grid.dim() == 2 ? grid.size() : 0, 1.0) {}

MetricField MetricField::flat(const PeriodicGrid& grid) { return MetricField(grid, MetricKind::Flat); }

MetricField MetricField::flat(const PeriodicGrid& grid, const Mat2& g0) {
  MetricField m(grid, MetricKind::Flat);
  if (!g0.spd()) throw std::invalid_argument("MetricField: constant metric is not SPD");
  std::fill(m.c11_.begin(), m.c11_.end(), g0.a11);
  if (grid.dim() == 2) {
    std::fill(m.c12_.begin(), m.c12_.end(), g0.a12);
    std::fill(m.c22_.begin(), m.c22_.end(), g0.a22);
  } else if (g0.a12 != 0.0) {
    throw std::invalid_argument("MetricField: off-diagonal metric on a 1D grid");
  }
  return m;
}

void MetricField::check_spd() const {
  for (std::size_t id = 0; id < grid_.size(); ++id) {
    if (!valid_at(id)) continue;
    if (!at(id).spd())
      throw std::invalid_argument("MetricField: non-SPD metric at node " + node_name(grid_, id));
  }
}

void MetricField::throw_invalid(std::size_t id) const {
  throw std::runtime_error("MetricField: conformal factor at or below eps_f at node " +
                           node_name(grid_, id) + " (outside W; " +
                           std::to_string(invalid_count_) + " such nodes)");
}

Mat2 MetricField::at(std::size_t id) const {
  if (!valid_at(id)) throw_invalid(id);
  if (grid_.dim() == 1) return {c11_[id], 0.0, 1.0};
  return {c11_[id], c12_[id], c22_[id]};
}

Mat2 MetricField::interp(const Vec2& xin) const {
  const Vec2 x = grid_.wrap_point(xin);
  const int n = grid_.n();
  const double hx = x[0] * n;
  const int i0 = static_cast<int>(hx);
  const double tx = hx - i0;
  if (grid_.dim() == 1) {
    const std::size_t a = grid_.id(i0), b = grid_.id(i0 + 1);
    if (!valid_at(a)) throw_invalid(a);
    if (!valid_at(b)) throw_invalid(b);
    return {c11_[a] + tx * (c11_[b] - c11_[a]), 0.0, 1.0};
  }
  const double hy = x[1] * n;
  const int j0 = static_cast<int>(hy);
  const double ty = hy - j0;
  const std::size_t q00 = grid_.id(i0, j0), q10 = grid_.id(i0 + 1, j0);
  const std::size_t q01 = grid_.id(i0, j0 + 1), q11 = grid_.id(i0 + 1, j0 + 1);
  for (std::size_t q : {q00, q10, q01, q11})
    if (!valid_at(q)) throw_invalid(q);
  auto bil = [&](const std::vector<double>& c) {
    const double a = c[q00] + tx * (c[q10] - c[q00]);
    const double b = c[q01] + tx * (c[q11] - c[q01]);
    return a + ty * (b - a);
  };
  return {bil(c11_), bil(c12_), bil(c22_)};
}

MetricField conformal_rescale(const MetricField& g, const ScalarField& f, double eps_f) {
  if (!g.grid().same_shape(f.grid()))
    throw std::invalid_argument("conformal_rescale: factor grid does not match metric grid");
  MetricField out(g.grid(), MetricKind::Conformal);
  const std::size_t nn = g.grid().size();
  out.valid_.assign(nn, 1);
  for (std::size_t id = 0; id < nn; ++id) {
    const double fac = f.at(id);
    if (!(fac > eps_f) || !g.valid_at(id)) {
      out.valid_[id] = 0;
      ++out.invalid_count_;
      continue;
    }
    const Mat2 base = g.at(id);
    out.c11_[id] = fac * base.a11;
    if (g.grid().dim() == 2) {
      out.c12_[id] = fac * base.a12;
      out.c22_[id] = fac * base.a22;
    }
  }
  if (out.invalid_count_ == 0) out.valid_.clear();
  out.factor_ = f;
  out.check_spd();
  return out;
}

PotentialField::PotentialField(ScalarField raw) : f_(raw.grid()), shift_(raw.max_value()) {
  f_ = std::move(raw);
  for (auto& v : f_.data()) v -= shift_;
}

// --- serialization ---------------------------------------------------------

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_header(const std::string& stem, const PeriodicGrid& g, const std::string& kind,
                  int columns) {
  nlohmann::json j;
  j["dim"] = g.dim();
  j["n"] = g.n();
  j["kind"] = kind;
  j["columns"] = columns;
  std::ofstream out(stem + ".json");
  if (!out) throw std::runtime_error("cannot write " + stem + ".json");
  out << j.dump(2) << "\n";
}

nlohmann::json read_header(const std::string& stem) {
  std::ifstream in(stem + ".json");
  if (!in) throw std::runtime_error("cannot read " + stem + ".json");
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace

void save_scalar_field(const ScalarField& f, const std::string& stem, const std::string& kind) {
  write_header(stem, f.grid(), kind, 1);
  std::ofstream out(stem + ".csv");
  if (!out) throw std::runtime_error("cannot write " + stem + ".csv");
  out << "node,value\n";
  for (std::size_t id = 0; id < f.size(); ++id)
    out << id << "," << fmt17(f.at(id)) << "\n";
}

ScalarField load_scalar_field(const std::string& stem, const std::string& expect_kind) {
  const auto j = read_header(stem);
  const PeriodicGrid grid(j.at("dim").get<int>(), j.at("n").get<int>());
  if (!expect_kind.empty() && j.at("kind").get<std::string>() != expect_kind)
    throw std::runtime_error(stem + ": field kind mismatch, expected " + expect_kind);
  ScalarField f(grid);
  std::ifstream in(stem + ".csv");
  if (!in) throw std::runtime_error("cannot read " + stem + ".csv");
  std::string line;
  std::getline(in, line);  // header
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t id;
    double v;
    if (std::sscanf(line.c_str(), "%zu,%lf", &id, &v) != 2 || id >= grid.size())
      throw std::runtime_error(stem + ": malformed row '" + line + "'");
    f.at(id) = v;
    ++rows;
  }
  if (rows != grid.size())
    throw std::runtime_error(stem + ": expected " + std::to_string(grid.size()) + " rows, got " +
                             std::to_string(rows));
  return f;
}

void save_component_field(const ComponentField& f, const std::string& stem,
                          const std::string& kind) {
  const auto& g = f.grid();
  write_header(stem, g, kind, g.dim());
  std::ofstream out(stem + ".csv");
  if (!out) throw std::runtime_error("cannot write " + stem + ".csv");
  out << (g.dim() == 1 ? "node,c0\n" : "node,c0,c1\n");
  for (std::size_t id = 0; id < g.size(); ++id) {
    out << id << "," << fmt17(f.comp(0, id));
    if (g.dim() == 2) out << "," << fmt17(f.comp(1, id));
    out << "\n";
  }
}

OneFormField load_one_form(const std::string& stem) {
  const auto j = read_header(stem);
  const PeriodicGrid grid(j.at("dim").get<int>(), j.at("n").get<int>());
  OneFormField f(grid);
  std::ifstream in(stem + ".csv");
  if (!in) throw std::runtime_error("cannot read " + stem + ".csv");
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t id;
    double a, b = 0.0;
    const int want = grid.dim() == 1 ? 2 : 3;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf", &id, &a, &b) != want || id >= grid.size())
      throw std::runtime_error(stem + ": malformed row '" + line + "'");
    f.set(0, id, a);
    if (grid.dim() == 2) f.set(1, id, b);
    ++rows;
  }
  if (rows != grid.size())
    throw std::runtime_error(stem + ": expected " + std::to_string(grid.size()) + " rows, got " +
                             std::to_string(rows));
  return f;
}

}  // namespace wkam
