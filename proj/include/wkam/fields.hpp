#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wkam/grid.hpp"

namespace wkam {

// Periodic scalar samples on a grid, with multilinear interpolation.
class ScalarField {
 public:
  explicit ScalarField(const PeriodicGrid& grid, double init = 0.0)
      : grid_(grid), v_(grid.size(), init) {}
  ScalarField(const PeriodicGrid& grid, std::vector<double> values);

  const PeriodicGrid& grid() const { return grid_; }
  std::size_t size() const { return v_.size(); }

  double at(std::size_t id) const { return v_[id]; }
  double& at(std::size_t id) { return v_[id]; }
  double at(int i, int j) const { return v_[grid_.id(i, j)]; }
  double& at(int i, int j) { return v_[grid_.id(i, j)]; }

  const std::vector<double>& data() const { return v_; }
  std::vector<double>& data() { return v_; }

  double interp(const Vec2& x) const;

  // Central difference gradient at a node (2nd order).
  Vec2 gradient_central(std::size_t id) const;
  // Backward/forward one-sided gradients per axis.
  void gradient_one_sided(std::size_t id, Vec2& backward, Vec2& forward) const;

  double min_value() const;
  double max_value() const;
  double mean_value() const;

 private:
  PeriodicGrid grid_;
  std::vector<double> v_;
};

// Shared storage for per-node covector/vector components.
class ComponentField {
 public:
  explicit ComponentField(const PeriodicGrid& grid)
      : grid_(grid), c0_(grid.size(), 0.0), c1_(grid.dim() == 2 ? grid.size() : 0, 0.0) {}

  const PeriodicGrid& grid() const { return grid_; }

  double comp(int axis, std::size_t id) const {
    return axis == 0 ? c0_[id] : (grid_.dim() == 2 ? c1_[id] : 0.0);
  }
  void set(int axis, std::size_t id, double value) {
    if (axis == 0)
      c0_[id] = value;
    else if (grid_.dim() == 2)
      c1_[id] = value;
    else if (value != 0.0)
      throw std::invalid_argument("ComponentField: axis 1 write on a 1D grid");
  }

  Vec2 value(std::size_t id) const {
    return {c0_[id], grid_.dim() == 2 ? c1_[id] : 0.0};
  }
  Vec2 interp(const Vec2& x) const;

  const std::vector<double>& component_data(int axis) const { return axis == 0 ? c0_ : c1_; }

 private:
  PeriodicGrid grid_;
  std::vector<double> c0_, c1_;
};

// 1-form omega_i per node.
class OneFormField : public ComponentField {
 public:
  explicit OneFormField(const PeriodicGrid& grid) : ComponentField(grid) {}
  static OneFormField constant(const PeriodicGrid& grid, const Vec2& w);
};

// Vector field X^i per node.
class VectorFieldGrid : public ComponentField {
 public:
  explicit VectorFieldGrid(const PeriodicGrid& grid) : ComponentField(grid) {}
};

enum class MetricKind { Flat, Conformal };

// Symmetric positive-definite g_ij per node. Conformal metrics carry the
// rescaling factor and a validity mask: nodes where the factor fell at or
// below eps_f are outside W and may not be evaluated.
class MetricField {
 public:
  static MetricField flat(const PeriodicGrid& grid);
  static MetricField flat(const PeriodicGrid& grid, const Mat2& g0);

  const PeriodicGrid& grid() const { return grid_; }
  MetricKind kind() const { return kind_; }

  bool valid_at(std::size_t id) const { return valid_.empty() || valid_[id]; }
  std::size_t invalid_count() const { return invalid_count_; }

  Mat2 at(std::size_t id) const;
  Mat2 dual_at(std::size_t id) const { return at(id).inverse(); }
  Mat2 interp(const Vec2& x) const;
  Mat2 dual_interp(const Vec2& x) const { return interp(x).inverse(); }

  // g*-operations on covectors.
  double norm2_dual(std::size_t id, const Vec2& p) const { return dual_at(id).quad(p); }
  Vec2 sharp_at(std::size_t id, const Vec2& p) const { return dual_at(id).apply(p); }

  const ScalarField* factor() const { return factor_ ? &*factor_ : nullptr; }

  friend MetricField conformal_rescale(const MetricField& g, const ScalarField& f, double eps_f);

 private:
  MetricField(const PeriodicGrid& grid, MetricKind kind);
  void check_spd() const;
  [[noreturn]] void throw_invalid(std::size_t id) const;

  PeriodicGrid grid_;
  MetricKind kind_;
  std::vector<double> c11_, c12_, c22_;  // c12/c22 unused in 1D
  std::optional<ScalarField> factor_;
  std::vector<std::uint8_t> valid_;  // empty means all valid
  std::size_t invalid_count_ = 0;
};

// Potential with the normalization max V = 0 applied at construction.
class PotentialField {
 public:
  explicit PotentialField(ScalarField raw);

  const PeriodicGrid& grid() const { return f_.grid(); }
  const ScalarField& field() const { return f_; }
  double at(std::size_t id) const { return f_.at(id); }
  double interp(const Vec2& x) const { return f_.interp(x); }
  double shift() const { return shift_; }
  double min_value() const { return f_.min_value(); }

 private:
  ScalarField f_;
  double shift_;
};

// --- serialization ---------------------------------------------------------
// A field is stored as <stem>.csv (row-major, node index first) plus
// <stem>.json carrying dim, n and the field kind. Round-trip accuracy 1e-12.

void save_scalar_field(const ScalarField& f, const std::string& stem, const std::string& kind = "scalar");
ScalarField load_scalar_field(const std::string& stem, const std::string& expect_kind = "");

void save_component_field(const ComponentField& f, const std::string& stem, const std::string& kind);
OneFormField load_one_form(const std::string& stem);

}  // namespace wkam
