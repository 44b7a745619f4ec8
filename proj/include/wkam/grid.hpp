#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace wkam {

// Covectors, vectors and points share one representation; 1D data lives in
// component 0 with component 1 pinned to zero.
using Vec2 = std::array<double, 2>;

inline Vec2 operator+(const Vec2& a, const Vec2& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Vec2 operator-(const Vec2& a, const Vec2& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Vec2 operator*(double s, const Vec2& a) { return {s * a[0], s * a[1]}; }
inline Vec2 operator*(const Vec2& a, double s) { return {s * a[0], s * a[1]}; }
inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm(const Vec2& a) { return std::sqrt(dot(a, a)); }

// Symmetric 2x2 matrix; 1D metrics use a11 with a12 = 0, a22 = 1 so the
// quadratic-form algebra is dimension-agnostic.
struct Mat2 {
  double a11 = 1.0, a12 = 0.0, a22 = 1.0;

  double det() const { return a11 * a22 - a12 * a12; }
  bool spd() const { return a11 > 0.0 && det() > 0.0; }
  Mat2 inverse() const {
    const double d = det();
    return {a22 / d, -a12 / d, a11 / d};
  }
  Vec2 apply(const Vec2& v) const {
    return {a11 * v[0] + a12 * v[1], a12 * v[0] + a22 * v[1]};
  }
  double quad(const Vec2& v) const { return dot(v, apply(v)); }
};

// Uniform periodic grid on the unit torus [0,1)^dim, dim in {1,2}.
// Nodes sit at integer multiples of h = 1/n; all indices wrap modulo n.
class PeriodicGrid {
 public:
  PeriodicGrid(int dim, int n) : dim_(dim), n_(n), h_(1.0 / n) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("PeriodicGrid: dim must be 1 or 2");
    if (n < 8) throw std::invalid_argument("PeriodicGrid: n must be >= 8");
    size_ = (dim == 1) ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n;
  }

  int dim() const { return dim_; }
  int n() const { return n_; }
  double h() const { return h_; }
  std::size_t size() const { return size_; }

  int wrap(int i) const {
    int r = i % n_;
    return r < 0 ? r + n_ : r;
  }

  std::size_t id(int i, int j = 0) const {
    if (dim_ == 1) return static_cast<std::size_t>(wrap(i));
    return static_cast<std::size_t>(wrap(i)) * n_ + wrap(j);
  }

  std::array<int, 2> coords(std::size_t id) const {
    if (dim_ == 1) return {static_cast<int>(id), 0};
    return {static_cast<int>(id / n_), static_cast<int>(id % n_)};
  }

  Vec2 point(std::size_t id) const {
    auto c = coords(id);
    return {c[0] * h_, c[1] * h_};
  }

  static double wrap_unit(double x) {
    double r = x - std::floor(x);
    return (r >= 1.0) ? 0.0 : r;
  }

  Vec2 wrap_point(const Vec2& x) const { return wrap_point(x, dim_); }

  static Vec2 wrap_point(const Vec2& x, int dim) {
    if (dim == 1) return {wrap_unit(x[0]), 0.0};
    return {wrap_unit(x[0]), wrap_unit(x[1])};
  }

  // Signed displacement a -> b along the torus, in [-1/2, 1/2).
  static double torus_delta(double a, double b) {
    double d = b - a;
    d -= std::round(d);
    return d;
  }

  Vec2 torus_displacement(const Vec2& a, const Vec2& b) const {
    if (dim_ == 1) return {torus_delta(a[0], b[0]), 0.0};
    return {torus_delta(a[0], b[0]), torus_delta(a[1], b[1])};
  }

  double torus_dist(const Vec2& a, const Vec2& b) const {
    return norm(torus_displacement(a, b));
  }

  bool same_shape(const PeriodicGrid& o) const { return dim_ == o.dim_ && n_ == o.n_; }

 private:
  int dim_;
  int n_;
  double h_;
  std::size_t size_;
};

inline std::string node_name(const PeriodicGrid& g, std::size_t id) {
  auto c = g.coords(id);
  if (g.dim() == 1) return "(" + std::to_string(c[0]) + ")";
  return "(" + std::to_string(c[0]) + "," + std::to_string(c[1]) + ")";
}

}  // namespace wkam
