#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include "harnackflow/errors.hpp"
#include "harnackflow/field.hpp"

namespace harnackflow {

/// Symmetric 2x2 tensor, components in a g-orthonormal frame.
struct Sym2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;
};

class TensorField {
 public:
  explicit TensorField(const Grid& grid) : grid_(grid), values_(grid.size()) {}
  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  const Sym2& operator[](std::size_t k) const { return values_[k]; }
  Sym2& operator[](std::size_t k) { return values_[k]; }

 private:
  Grid grid_;
  std::vector<Sym2> values_;
};

/// Live metric g = exp(2 phi) * background, where the background is the flat
/// torus or the unit round sphere.
class SurfaceGeometry {
 public:
  explicit SurfaceGeometry(ScalarField phi) : phi_(std::move(phi)) {
    if (!phi_.all_finite()) throw Error(ErrorKind::NonFinite, "conformal exponent is not finite");
    conformal_ = phi_.map([](double p) { return std::exp(2.0 * p); });
    inverse_conformal_ = conformal_.map([](double c) { return 1.0 / c; });
  }

  static SurfaceGeometry flat_torus(int n, double length) {
    return SurfaceGeometry(ScalarField(Grid::torus(n, length), 0.0));
  }

  static SurfaceGeometry round_sphere(int n, double radius = 1.0) {
    return SurfaceGeometry(ScalarField(Grid::sphere(n), std::log(radius)));
  }

  const Grid& grid() const { return phi_.grid(); }
  SurfaceKind kind() const { return grid().kind; }
  const ScalarField& phi() const { return phi_; }
  /// exp(2 phi)
  const ScalarField& conformal() const { return conformal_; }
  /// exp(-2 phi)
  const ScalarField& inverse_conformal() const { return inverse_conformal_; }

  /// Scalar curvature of the background metric.
  double background_curvature() const { return kind() == SurfaceKind::RotSphere ? 2.0 : 0.0; }

 private:
  ScalarField phi_;
  ScalarField conformal_;
  ScalarField inverse_conformal_;
};

namespace background {

/// Trigonometric stencil coefficients of the staggered sphere grid.
struct SphereStencil {
  std::vector<double> face_sine;  // sin(theta_{j+1/2}) for j = -1..n-1, zero at the poles
  std::vector<double> cell_area;  // unit-sphere cell area / (2 pi) = 2 sin(theta_j) sin(h/2)
  std::vector<double> cot;        // cot(theta_j)

  explicit SphereStencil(int n) : face_sine(n + 1, 0.0), cell_area(n), cot(n) {
    const Grid g = Grid::sphere(n);
    const double h = g.spacing();
    for (int j = 0; j + 1 < n; ++j) face_sine[j + 1] = std::sin((j + 1) * h);
    for (int j = 0; j < n; ++j) {
      cell_area[j] = 2.0 * std::sin(g.theta(j)) * std::sin(0.5 * h);
      cot[j] = 1.0 / std::tan(g.theta(j));
    }
  }

  double face_above(int j) const { return face_sine[j + 1]; }
  double face_below(int j) const { return face_sine[j]; }
};

/// Per-thread cache, so concurrent callers never share mutable state.
inline const SphereStencil& sphere_stencil(int n) {
  thread_local std::map<int, SphereStencil> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, SphereStencil(n)).first;
  return it->second;
}

/// Sphere value with even reflection across the poles.
inline double sphere_at(std::span<const double> w, int j) {
  const int n = static_cast<int>(w.size());
  if (j < 0) return w[-j - 1];
  if (j >= n) return w[2 * n - j - 1];
  return w[j];
}

inline int wrap(int i, int n) { return i < 0 ? i + n : (i >= n ? i - n : i); }

/// Background Laplacian: periodic 5-point stencil on the torus, finite-volume
/// (1 / sin) d(sin d/dtheta) on the sphere with zero flux through the poles.
/// Writes into out, which must live on the same grid.
inline void laplacian_into(const ScalarField& w, ScalarField& out) {
  const Grid& g = w.grid();
  const auto v = w.values();
  auto o = out.values();
  const double h = g.spacing();
  if (g.kind == SurfaceKind::Torus) {
    const double inv_h2 = 1.0 / (h * h);
    const int n = g.n;
    for (int i = 0; i < n; ++i) {
      const double* row = v.data() + g.index(i, 0);
      const double* up = v.data() + g.index(wrap(i + 1, n), 0);
      const double* down = v.data() + g.index(wrap(i - 1, n), 0);
      double* dst = o.data() + g.index(i, 0);
      dst[0] = (up[0] + down[0] + row[1] + row[n - 1] - 4.0 * row[0]) * inv_h2;
      for (int j = 1; j < n - 1; ++j) {
        dst[j] = (up[j] + down[j] + row[j + 1] + row[j - 1] - 4.0 * row[j]) * inv_h2;
      }
      dst[n - 1] = (up[n - 1] + down[n - 1] + row[0] + row[n - 2] - 4.0 * row[n - 1]) * inv_h2;
    }
  } else {
    const SphereStencil& st = sphere_stencil(g.n);
    for (int j = 0; j < g.n; ++j) {
      const double above = st.face_above(j) * (sphere_at(v, j + 1) - v[j]);
      const double below = st.face_below(j) * (v[j] - sphere_at(v, j - 1));
      o[j] = (above - below) / (h * st.cell_area[j]);
    }
  }
}

inline ScalarField laplacian(const ScalarField& w) {
  ScalarField out(w.grid());
  laplacian_into(w, out);
  return out;
}

struct Gradient {
  ScalarField d1;  // d/dx or d/dtheta
  ScalarField d2;  // d/dy, zero on the sphere
};

/// Centered first differences in background coordinates.
inline Gradient gradient(const ScalarField& w) {
  const Grid& g = w.grid();
  Gradient out{ScalarField(g), ScalarField(g)};
  const auto v = w.values();
  const double inv_2h = 0.5 / g.spacing();
  if (g.kind == SurfaceKind::Torus) {
    const int n = g.n;
    for (int i = 0; i < n; ++i) {
      const int ip = wrap(i + 1, n), im = wrap(i - 1, n);
      for (int j = 0; j < n; ++j) {
        const int jp = wrap(j + 1, n), jm = wrap(j - 1, n);
        out.d1[g.index(i, j)] = (v[g.index(ip, j)] - v[g.index(im, j)]) * inv_2h;
        out.d2[g.index(i, j)] = (v[g.index(i, jp)] - v[g.index(i, jm)]) * inv_2h;
      }
    }
  } else {
    for (int j = 0; j < g.n; ++j) out.d1[j] = (sphere_at(v, j + 1) - sphere_at(v, j - 1)) * inv_2h;
  }
  return out;
}

}  // namespace background

/// R = exp(-2 phi) (R_background - 2 Lap_background phi).
inline ScalarField scalar_curvature(const SurfaceGeometry& geom) {
  ScalarField lap = background::laplacian(geom.phi());
  ScalarField out(geom.grid());
  const double r0 = geom.background_curvature();
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = geom.inverse_conformal()[k] * (r0 - 2.0 * lap[k]);
  }
  return out;
}

inline ScalarField laplace_beltrami(const SurfaceGeometry& geom, const ScalarField& w) {
  if (!(w.grid() == geom.grid())) throw Error(ErrorKind::ShapeMismatch, "field does not match geometry");
  return geom.inverse_conformal() * background::laplacian(w);
}

/// g(grad w1, grad w2).
inline ScalarField grad_inner(const SurfaceGeometry& geom, const ScalarField& w1,
                              const ScalarField& w2) {
  if (!(w1.grid() == geom.grid()) || !(w2.grid() == geom.grid())) {
    throw Error(ErrorKind::ShapeMismatch, "field does not match geometry");
  }
  const auto a = background::gradient(w1);
  const auto b = background::gradient(w2);
  ScalarField out(geom.grid());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = geom.inverse_conformal()[k] * (a.d1[k] * b.d1[k] + a.d2[k] * b.d2[k]);
  }
  return out;
}

inline ScalarField grad_norm_sq(const SurfaceGeometry& geom, const ScalarField& w) {
  return grad_inner(geom, w, w);
}

/// Covariant Hessian of the live metric, in the orthonormal frame
/// e^{-phi} (d_x, d_y) on the torus and e^{-phi} (d_theta, d_psi / sin theta)
/// on the sphere. For g = e^{2 phi} g_bg:
///   Hess w = Hess_bg w - (dphi (x) dw + dw (x) dphi) + <dphi, dw>_bg g_bg.
inline TensorField covariant_hessian(const SurfaceGeometry& geom, const ScalarField& w) {
  if (!(w.grid() == geom.grid())) throw Error(ErrorKind::ShapeMismatch, "field does not match geometry");
  const Grid& g = geom.grid();
  TensorField out(g);
  const auto v = w.values();
  const auto dw = background::gradient(w);
  const auto dphi = background::gradient(geom.phi());
  const double h = g.spacing();
  const double inv_h2 = 1.0 / (h * h);
  if (g.kind == SurfaceKind::Torus) {
    const int n = g.n;
    using background::wrap;
    for (int i = 0; i < n; ++i) {
      const int ip = wrap(i + 1, n), im = wrap(i - 1, n);
      for (int j = 0; j < n; ++j) {
        const int jp = wrap(j + 1, n), jm = wrap(j - 1, n);
        const std::size_t k = g.index(i, j);
        const double wxx = (v[g.index(ip, j)] - 2.0 * v[k] + v[g.index(im, j)]) * inv_h2;
        const double wyy = (v[g.index(i, jp)] - 2.0 * v[k] + v[g.index(i, jm)]) * inv_h2;
        const double wxy = (v[g.index(ip, jp)] - v[g.index(ip, jm)] - v[g.index(im, jp)] +
                            v[g.index(im, jm)]) *
                           0.25 * inv_h2;
        const double px = dphi.d1[k], py = dphi.d2[k];
        const double wx = dw.d1[k], wy = dw.d2[k];
        const double c = geom.inverse_conformal()[k];
        out[k] = Sym2{c * (wxx - px * wx + py * wy), c * (wxy - px * wy - py * wx),
                      c * (wyy - py * wy + px * wx)};
      }
    }
  } else {
    const background::SphereStencil& st = background::sphere_stencil(g.n);
    for (int j = 0; j < g.n; ++j) {
      const double wtt = (background::sphere_at(v, j + 1) - 2.0 * v[j] +
                          background::sphere_at(v, j - 1)) *
                         inv_h2;
      const double cot = st.cot[j];
      const double c = geom.inverse_conformal()[j];
      const double cross = dphi.d1[j] * dw.d1[j];
      out[j] = Sym2{c * (wtt - cross), 0.0, c * (cot * dw.d1[j] + cross)};
    }
  }
  return out;
}

/// g-trace of a frame tensor field.
inline ScalarField trace(const TensorField& t) {
  ScalarField out(t.grid());
  for (std::size_t k = 0; k < t.size(); ++k) out[k] = t[k].xx + t[k].yy;
  return out;
}

/// |T - s g|^2 pointwise, s a scalar field.
inline ScalarField deviation_norm_sq(const TensorField& t, const ScalarField& shift) {
  ScalarField out(t.grid());
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double a = t[k].xx - shift[k], b = t[k].yy - shift[k];
    out[k] = a * a + 2.0 * t[k].xy * t[k].xy + b * b;
  }
  return out;
}

inline ScalarField norm_sq(const TensorField& t) {
  return deviation_norm_sq(t, ScalarField(t.grid(), 0.0));
}

/// Quadrature weights of the live area element: h^2 e^{2 phi} on the torus,
/// the exact unit-sphere cell area times e^{2 phi} on the sphere.
inline ScalarField area_weights(const SurfaceGeometry& geom) {
  const Grid& g = geom.grid();
  ScalarField out = geom.conformal();
  if (g.kind == SurfaceKind::Torus) {
    out *= g.spacing() * g.spacing();
  } else {
    const background::SphereStencil& st = background::sphere_stencil(g.n);
    for (int j = 0; j < g.n; ++j) out[j] *= 2.0 * std::numbers::pi * st.cell_area[j];
  }
  return out;
}

inline double integrate(const SurfaceGeometry& geom, const ScalarField& w) {
  if (!(w.grid() == geom.grid())) throw Error(ErrorKind::ShapeMismatch, "field does not match geometry");
  const ScalarField weights = area_weights(geom);
  double sum = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) sum += w[k] * weights[k];
  return sum;
}

inline double area(const SurfaceGeometry& geom) {
  return integrate(geom, ScalarField(geom.grid(), 1.0));
}

}  // namespace harnackflow
