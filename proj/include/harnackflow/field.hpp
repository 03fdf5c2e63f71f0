#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "harnackflow/errors.hpp"

namespace harnackflow {

enum class SurfaceKind { Torus, RotSphere };

inline std::string_view to_string(SurfaceKind kind) {
  return kind == SurfaceKind::Torus ? "torus" : "sphere";
}

/// Discretization of the background surface.
///
/// Torus: n x n periodic nodes x_i = i h, y_j = j h with h = L / n, stored
/// row-major with the x index outermost.
///
/// RotSphere: n staggered colatitude nodes theta_j = (j + 1/2) pi / n on the
/// unit sphere. Fields are functions of theta only and are extended evenly
/// across both poles.
struct Grid {
  SurfaceKind kind = SurfaceKind::Torus;
  int n = 0;
  double length = 1.0;  // torus side; ignored on the sphere

  static Grid torus(int n, double length) {
    if (n < 4) throw Error(ErrorKind::InvalidArgument, "torus grid needs n >= 4");
    if (!(length > 0.0) || !std::isfinite(length)) {
      throw Error(ErrorKind::InvalidArgument, "torus side length must be positive");
    }
    return Grid{SurfaceKind::Torus, n, length};
  }

  static Grid sphere(int n) {
    if (n < 4) throw Error(ErrorKind::InvalidArgument, "sphere grid needs n >= 4");
    return Grid{SurfaceKind::RotSphere, n, std::numbers::pi};
  }

  std::size_t size() const {
    return kind == SurfaceKind::Torus ? static_cast<std::size_t>(n) * n
                                      : static_cast<std::size_t>(n);
  }

  double spacing() const {
    return kind == SurfaceKind::Torus ? length / n : std::numbers::pi / n;
  }

  /// Colatitude of sphere node j.
  double theta(int j) const { return (j + 0.5) * spacing(); }

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j);
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.kind == b.kind && a.n == b.n &&
           (a.kind == SurfaceKind::RotSphere || a.length == b.length);
  }
};

/// Real-valued samples on a grid.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const Grid& grid, double value = 0.0)
      : grid_(grid), values_(grid.size(), value) {}
  ScalarField(const Grid& grid, std::vector<double> values)
      : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
      throw Error(ErrorKind::ShapeMismatch,
                  "field has " + std::to_string(values_.size()) +
                      " values, grid expects " + std::to_string(grid_.size()));
    }
  }

  /// Samples fn(x, y) on a torus grid or fn(theta) on a sphere grid.
  template <typename Fn>
  static ScalarField sample(const Grid& grid, Fn&& fn) {
    ScalarField out(grid);
    const double h = grid.spacing();
    if constexpr (std::is_invocable_r_v<double, Fn, double, double>) {
      if (grid.kind != SurfaceKind::Torus) {
        throw Error(ErrorKind::InvalidArgument, "fn(x, y) sampler needs a torus grid");
      }
      for (int i = 0; i < grid.n; ++i) {
        for (int j = 0; j < grid.n; ++j) out.values_[grid.index(i, j)] = fn(i * h, j * h);
      }
    } else {
      if (grid.kind != SurfaceKind::RotSphere) {
        throw Error(ErrorKind::InvalidArgument, "fn(theta) sampler needs a sphere grid");
      }
      for (int j = 0; j < grid.n; ++j) out.values_[j] = fn(grid.theta(j));
    }
    return out;
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }

  double max() const { return *std::max_element(values_.begin(), values_.end()); }
  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }
  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  template <typename Fn>
  ScalarField map(Fn&& fn) const {
    ScalarField out(grid_);
    for (std::size_t k = 0; k < values_.size(); ++k) out.values_[k] = fn(values_[k]);
    return out;
  }

  ScalarField& operator+=(const ScalarField& o) { return combine(o, [](double& a, double b) { a += b; }); }
  ScalarField& operator-=(const ScalarField& o) { return combine(o, [](double& a, double b) { a -= b; }); }
  ScalarField& operator*=(const ScalarField& o) { return combine(o, [](double& a, double b) { a *= b; }); }
  ScalarField& operator+=(double s) {
    for (double& v : values_) v += s;
    return *this;
  }
  ScalarField& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }

  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(ScalarField a, const ScalarField& b) { return a *= b; }
  friend ScalarField operator+(ScalarField a, double s) { return a += s; }
  friend ScalarField operator-(ScalarField a, double s) { return a += -s; }
  friend ScalarField operator*(ScalarField a, double s) { return a *= s; }
  friend ScalarField operator*(double s, ScalarField a) { return a *= s; }
  friend ScalarField operator-(ScalarField a) { return a *= -1.0; }

 private:
  template <typename Op>
  ScalarField& combine(const ScalarField& o, Op op) {
    require_same_grid(grid_, o.grid_);
    for (std::size_t k = 0; k < values_.size(); ++k) op(values_[k], o.values_[k]);
    return *this;
  }

  static void require_same_grid(const Grid& a, const Grid& b) {
    if (!(a == b)) throw Error(ErrorKind::ShapeMismatch, "fields live on different grids");
  }

  Grid grid_;
  std::vector<double> values_;

  friend void require_same_grid(const ScalarField&, const ScalarField&);
};

inline void require_same_grid(const ScalarField& a, const ScalarField& b) {
  ScalarField::require_same_grid(a.grid_, b.grid_);
}

inline ScalarField log(const ScalarField& w) {
  return w.map([](double v) { return std::log(v); });
}

inline ScalarField exp(const ScalarField& w) {
  return w.map([](double v) { return std::exp(v); });
}

inline ScalarField square(const ScalarField& w) {
  return w.map([](double v) { return v * v; });
}

}  // namespace harnackflow
