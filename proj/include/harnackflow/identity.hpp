#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>

#include "harnackflow/errors.hpp"
#include "harnackflow/field.hpp"
#include "harnackflow/flow.hpp"
#include "harnackflow/geometry.hpp"
#include "harnackflow/harnack.hpp"

namespace harnackflow {

/// Constants of the general Harnack-type quantities
///   H = alpha Lap u - beta |grad u|^2 + a R - b u/t - d n/t
///   P = alpha Lap v - |grad v|^2 + a R - b v/t - d n/t
/// where u (resp. v) evolves with potential coefficient c. lambda only enters
/// the completed-square form of the evolution equations.
struct HarnackParams {
  double alpha = 0.0;
  double beta = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
  double lambda = 0.0;

  /// Reduces the general H identity to the evolution of 2 Lap u - |grad u|^2 - 3R - 2n/t.
  static constexpr HarnackParams harnack_H() { return {2.0, 1.0, -3.0, 0.0, -1.0, 2.0, 2.0}; }
  /// Reduces the general P identity to the evolution of 2 Lap v - |grad v|^2 - 3R + v/t - dn/t.
  static constexpr HarnackParams harnack_P(double d = 1.0) { return {2.0, 1.0, -3.0, -1.0, -1.0, d, 1.0}; }
  /// H = Lap u - R on surfaces.
  static constexpr HarnackParams surface() { return {1.0, 0.0, -1.0, 0.0, -1.0, 0.0, 0.0}; }
  /// H = |grad u|^2 - u/t for the plain heat equation.
  static constexpr HarnackParams gradient() { return {0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0}; }
};

struct ResidualReport {
  std::string identity;
  HarnackParams params;
  double t = 0.0;
  int n = 0;
  double max_residual = 0.0;
  double l2_residual = 0.0;
  double lhs_scale = 0.0;  // max |LHS|, for relative comparisons
};

namespace detail {

inline void require_c(const Trajectory& traj, double c) {
  if (traj.model.c != c) {
    throw Error(ErrorKind::VariantMismatch,
                "identity assumes potential coefficient c=" + std::to_string(c) +
                    " but the trajectory was generated with c=" + std::to_string(traj.model.c));
  }
}

inline void require_interior(const Trajectory& traj, std::size_t k) {
  if (k == 0 || k + 1 >= traj.size()) {
    throw Error(ErrorKind::IndexAtBoundary, "identity residuals need an interior snapshot");
  }
}

inline ResidualReport make_report(std::string id, const HarnackParams& p, const FlowState& s,
                                  const ScalarField& lhs, const ScalarField& rhs) {
  const ScalarField r = lhs - rhs;
  ResidualReport rep{std::move(id), p, s.t, s.geom.grid().n, r.max_abs(), 0.0, lhs.max_abs()};
  rep.l2_residual = std::sqrt(integrate(s.geom, square(r)));
  return rep;
}

/// Shared pieces of a snapshot used by every right-hand side.
struct Pieces {
  const SurfaceGeometry& geom;
  double t;
  ScalarField r;
  ScalarField lap_r;
  ScalarField w;  // u or v
  ScalarField lap_w;
  ScalarField grad_w_sq;
  ScalarField grad_r_w;
  TensorField hess_w;

  Pieces(const FlowState& s, ScalarField potential)
      : geom(s.geom),
        t(s.t),
        r(scalar_curvature(s.geom)),
        lap_r(laplace_beltrami(s.geom, r)),
        w(std::move(potential)),
        lap_w(laplace_beltrami(s.geom, w)),
        grad_w_sq(grad_norm_sq(s.geom, w)),
        grad_r_w(grad_inner(s.geom, r, w)),
        hess_w(covariant_hessian(s.geom, w)) {}
};

}  // namespace detail

/// alpha Lap u - beta |grad u|^2 + a R - b u/t - d n/t
inline ScalarField general_H(const FlowState& s, const HarnackParams& p) {
  detail::require_positive_time(s);
  const ScalarField u = log_potential_u(s);
  ScalarField h = p.alpha * laplace_beltrami(s.geom, u) - p.beta * grad_norm_sq(s.geom, u) +
                  p.a * scalar_curvature(s.geom) - (p.b / s.t) * u;
  h += -p.d * kDim / s.t;
  return h;
}

/// alpha Lap v - |grad v|^2 + a R - b v/t - d n/t
inline ScalarField general_P(const FlowState& s, const HarnackParams& p) {
  const ScalarField v = log_potential_v(s);
  ScalarField q = p.alpha * laplace_beltrami(s.geom, v) - grad_norm_sq(s.geom, v) +
                  p.a * scalar_curvature(s.geom) - (p.b / s.t) * v;
  q += -p.d * kDim / s.t;
  return q;
}

/// Right-hand side of the general H evolution on a surface (R_ij = R g_ij / 2,
/// |Rc|^2 = R^2 / 2). For alpha != 0 this is the completed-square form; for
/// alpha = 0 the square cannot be completed against H and the expanded form
/// (before completing the square) is used.
inline ScalarField general_H_rhs(const FlowState& s, const HarnackParams& p) {
  if (p.alpha == p.beta) throw Error(ErrorKind::DegenerateParams, "alpha == beta");
  const detail::Pieces x(s, log_potential_u(s));
  const double t = s.t, n = kDim;
  const ScalarField hq = general_H(s, p);
  ScalarField rhs = laplace_beltrami(x.geom, hq) - 2.0 * grad_inner(x.geom, hq, x.w);
  const double k2 = 2.0 * p.alpha - 2.0 * p.beta;
  if (p.alpha != 0.0) {
    const double q = k2 / p.alpha;
    const ScalarField shift = (p.alpha / (2.0 * k2)) * x.r + p.lambda / (2.0 * t);
    rhs += -k2 * deviation_norm_sq(x.hess_w, shift);
    rhs += (-q * p.lambda / t) * hq;
    rhs += k2 * n * p.lambda * p.lambda / (4.0 * t * t);
    rhs += (-(p.b + q * p.lambda * p.beta) / t) * x.grad_w_sq;
    rhs += ((1.0 - q * p.lambda) * p.b / (t * t)) * x.w;
    rhs += (1.0 - q * p.lambda) * p.d * n / (t * t);
    rhs += (p.alpha * p.c) * x.lap_r;
    rhs += (2.0 * p.a + p.alpha * p.alpha / k2) * 0.5 * square(x.r);
    rhs += ((p.alpha * p.lambda + p.a * q * p.lambda - p.b * p.c) / t) * x.r;
    rhs += -p.alpha * (x.r * x.grad_w_sq);
    rhs += 2.0 * (p.a - p.beta * p.c) * x.grad_r_w;
  } else {
    rhs += 2.0 * (p.a - p.beta * p.c) * x.grad_r_w;
    rhs += (-p.b / t) * x.grad_w_sq;
    rhs += -p.alpha * (x.r * x.grad_w_sq);
    rhs += -k2 * norm_sq(x.hess_w);
    rhs += p.alpha * (x.r * trace(x.hess_w));
    rhs += p.a * square(x.r);
    rhs += (p.b / (t * t)) * x.w;
    rhs += p.d * n / (t * t);
    rhs += (p.alpha * p.c) * x.lap_r;
    rhs += (-p.b * p.c / t) * x.r;
  }
  return rhs;
}

/// Right-hand side of the general P evolution on a surface; alpha = 1 is
/// degenerate, alpha = 0 uses the expanded form.
inline ScalarField general_P_rhs(const FlowState& s, const HarnackParams& p) {
  if (p.alpha == 1.0) throw Error(ErrorKind::DegenerateParams, "alpha == 1");
  const detail::Pieces x(s, log_potential_v(s));
  const double t = s.t, n = kDim;
  const ScalarField pq = general_P(s, p);
  ScalarField rhs = laplace_beltrami(x.geom, pq) - 2.0 * grad_inner(x.geom, pq, x.w);
  rhs += 2.0 * (p.a - p.c) * x.grad_r_w;
  const double k2 = 2.0 * p.alpha - 2.0;
  if (p.alpha != 0.0) {
    const double q = k2 / p.alpha;
    const ScalarField shift = (p.alpha / (2.0 * k2)) * x.r + p.lambda / (2.0 * t);
    rhs += -k2 * deviation_norm_sq(x.hess_w, shift);
    rhs += (-q * p.lambda / t) * pq;
    rhs += ((p.alpha * p.lambda + p.a * q * p.lambda - p.b * p.c) / t) * x.r;
    rhs += (p.alpha - 1.0) * n * p.lambda * p.lambda / (2.0 * t * t);
    rhs += (2.0 * p.a + p.alpha * p.alpha / k2) * 0.5 * square(x.r);
    rhs += (-(p.b + q * p.lambda) / t) * x.grad_w_sq;
    rhs += -p.alpha * (x.r * x.grad_w_sq);
    rhs += ((1.0 - q * p.lambda) * p.b / (t * t)) * x.w;
    rhs += p.b * n / (2.0 * t * t);
    rhs += (1.0 - q * p.lambda) * p.d * n / (t * t);
    rhs += (p.alpha * p.c) * x.lap_r;
  } else {
    rhs += (-p.b / t) * x.grad_w_sq;
    rhs += -p.alpha * (x.r * x.grad_w_sq);
    rhs += -k2 * norm_sq(x.hess_w);
    rhs += p.alpha * (x.r * trace(x.hess_w));
    rhs += p.a * square(x.r);
    rhs += (p.b / (t * t)) * x.w;
    rhs += p.b * n / (2.0 * t * t);
    rhs += p.d * n / (t * t);
    rhs += (p.alpha * p.c) * x.lap_r;
    rhs += (-p.b * p.c / t) * x.r;
  }
  return rhs;
}

/// Dedicated assembly of the evolution of H:
///   Lap H - 2 grad H . grad u - 2|u_ij - R_ij - g_ij/t|^2 - (2/t) H - (2/t)|grad u|^2
///   - 2 (dR/dt + R/t + 2 grad R . grad u + 2 R_ij u_i u_j)
/// with dR/dt = Lap R + 2|Rc|^2.
inline ScalarField harnack_H_rhs(const FlowState& s) {
  const detail::Pieces x(s, log_potential_u(s));
  const double t = s.t;
  const ScalarField hq = quantity_H(s);
  const ScalarField dr_dt = x.lap_r + square(x.r);
  ScalarField rhs = laplace_beltrami(x.geom, hq) - 2.0 * grad_inner(x.geom, hq, x.w);
  rhs += -2.0 * deviation_norm_sq(x.hess_w, 0.5 * x.r + 1.0 / t);
  rhs += (-2.0 / t) * hq;
  rhs += (-2.0 / t) * x.grad_w_sq;
  rhs += -2.0 * (dr_dt + (1.0 / t) * x.r + 2.0 * x.grad_r_w + x.r * x.grad_w_sq);
  return rhs;
}

/// Dedicated assembly of the evolution of P:
///   Lap P - 2 grad P . grad v - 2|v_ij - R_ij - g_ij/(2t)|^2 - P/t
///   - 2 (Lap R + 2|Rc|^2 + R/t + 2 grad R . grad v + 2 R_ij v_i v_j)
inline ScalarField harnack_P_rhs(const FlowState& s, double d) {
  const detail::Pieces x(s, log_potential_v(s));
  const double t = s.t;
  const ScalarField pq = quantity_P(s, d);
  ScalarField rhs = laplace_beltrami(x.geom, pq) - 2.0 * grad_inner(x.geom, pq, x.w);
  rhs += -2.0 * deviation_norm_sq(x.hess_w, 0.5 * x.r + 1.0 / (2.0 * t));
  rhs += (-1.0 / t) * pq;
  rhs += -2.0 * (x.lap_r + square(x.r) + (1.0 / t) * x.r + 2.0 * x.grad_r_w + x.r * x.grad_w_sq);
  return rhs;
}

/// Right-hand side of the evolution of tP:
///   Lap(tP) - 2 grad(tP) . grad v - 2t|v_ij - R_ij - g_ij/(2t)|^2
///   - 2t (Lap R + 2|Rc|^2 + R/t + 2 grad R . grad v + 2 R_ij v_i v_j)
inline ScalarField harnack_tP_rhs(const FlowState& s, double d) {
  const detail::Pieces x(s, log_potential_v(s));
  const double t = s.t;
  const ScalarField tp = quantity_tP(s, d);
  ScalarField rhs = laplace_beltrami(x.geom, tp) - 2.0 * grad_inner(x.geom, tp, x.w);
  rhs += (-2.0 * t) * deviation_norm_sq(x.hess_w, 0.5 * x.r + 1.0 / (2.0 * t));
  rhs += (-2.0 * t) * (x.lap_r + square(x.r) + (1.0 / t) * x.r + 2.0 * x.grad_r_w + x.r * x.grad_w_sq);
  return rhs;
}

/// Surface identity for H = Lap u - R, first form:
///   Lap H - 2 grad H . grad u - 2 grad R . grad u - 2|u_ij - R_ij/2|^2
///   - (3/2)|Rc|^2 - 2 R_ij u_i u_j - Lap R
inline ScalarField surface_rhs_expanded(const FlowState& s) {
  const detail::Pieces x(s, log_potential_u(s));
  const ScalarField hq = x.lap_w - x.r;
  ScalarField rhs = laplace_beltrami(x.geom, hq) - 2.0 * grad_inner(x.geom, hq, x.w);
  rhs += -2.0 * x.grad_r_w;
  rhs += -2.0 * deviation_norm_sq(x.hess_w, 0.25 * x.r);
  rhs += -0.75 * square(x.r);
  rhs += -1.0 * (x.r * x.grad_w_sq);
  rhs += -1.0 * x.lap_r;
  return rhs;
}

/// Surface identity for H = Lap u - R, final form with H_ij = u_ij - R g_ij / 2:
///   Lap H - 2|H_ij|^2 - 2 grad H . grad u - R H - R|grad u + grad ln R|^2
///   - R (d ln R/dt - |grad ln R|^2),   d ln R/dt = (Lap R + R^2) / R.
inline ScalarField surface_rhs_chain(const FlowState& s) {
  const detail::Pieces x(s, log_potential_u(s));
  if (x.r.min() <= 0.0) {
    throw Error(ErrorKind::NonPositiveCurvature, "min R = " + std::to_string(x.r.min()), s.t);
  }
  const ScalarField log_r = log(x.r);
  const ScalarField hq = x.lap_w - x.r;
  const ScalarField dlogr_dt = (x.lap_r + square(x.r)) * x.r.map([](double v) { return 1.0 / v; });
  ScalarField rhs = laplace_beltrami(x.geom, hq);
  rhs += -2.0 * deviation_norm_sq(x.hess_w, 0.5 * x.r);
  rhs += -2.0 * grad_inner(x.geom, hq, x.w);
  rhs += -1.0 * (x.r * hq);
  rhs += -1.0 * (x.r * grad_norm_sq(x.geom, x.w + log_r));
  rhs += -1.0 * (x.r * (dlogr_dt - grad_norm_sq(x.geom, log_r)));
  return rhs;
}

/// f slaved to R (u = -ln R): Lap H - 2|H_ij|^2 + 2 grad H . grad ln R.
inline ScalarField surface_slaved_H(const FlowState& s) {
  const ScalarField r = scalar_curvature(s.geom);
  if (r.min() <= 0.0) {
    throw Error(ErrorKind::NonPositiveCurvature, "min R = " + std::to_string(r.min()), s.t);
  }
  return laplace_beltrami(s.geom, -log(r)) - r;
}

inline ScalarField surface_slaved_rhs(const FlowState& s) {
  const ScalarField r = scalar_curvature(s.geom);
  const ScalarField hq = surface_slaved_H(s);
  const ScalarField log_r = log(r);
  ScalarField rhs = laplace_beltrami(s.geom, hq);
  rhs += -2.0 * deviation_norm_sq(covariant_hessian(s.geom, -log_r), 0.5 * r);
  rhs += 2.0 * grad_inner(s.geom, hq, log_r);
  return rhs;
}

/// H = |grad u|^2 - u/t
inline ScalarField gradient_H(const FlowState& s) {
  detail::require_positive_time(s);
  const ScalarField u = log_potential_u(s);
  return grad_norm_sq(s.geom, u) - (1.0 / s.t) * u;
}

/// Lap H - 2 grad H . grad u - H/t - 2|grad grad u|^2
inline ScalarField gradient_rhs(const FlowState& s) {
  const ScalarField u = log_potential_u(s);
  const ScalarField hq = gradient_H(s);
  ScalarField rhs = laplace_beltrami(s.geom, hq) - 2.0 * grad_inner(s.geom, hq, u);
  rhs += (-1.0 / s.t) * hq;
  rhs += -2.0 * norm_sq(covariant_hessian(s.geom, u));
  return rhs;
}

inline ResidualReport residual_general_H(const Trajectory& traj, std::size_t k, const HarnackParams& p) {
  if (p.alpha == p.beta) throw Error(ErrorKind::DegenerateParams, "alpha == beta");
  detail::require_c(traj, p.c);
  detail::require_interior(traj, k);
  const ScalarField lhs = time_derivative(traj, k, [&](const FlowState& s) { return general_H(s, p); });
  return detail::make_report("general_H", p, traj[k], lhs, general_H_rhs(traj[k], p));
}

inline ResidualReport residual_cor_H(const Trajectory& traj, std::size_t k) {
  const HarnackParams p = HarnackParams::harnack_H();
  detail::require_c(traj, p.c);
  detail::require_interior(traj, k);
  const ScalarField lhs = time_derivative(traj, k, Monitored::H);
  return detail::make_report("harnack_H", p, traj[k], lhs, harnack_H_rhs(traj[k]));
}

inline ResidualReport residual_general_P(const Trajectory& traj, std::size_t k, const HarnackParams& p) {
  if (p.alpha == 1.0) throw Error(ErrorKind::DegenerateParams, "alpha == 1");
  detail::require_c(traj, p.c);
  detail::require_interior(traj, k);
  const ScalarField lhs = time_derivative(traj, k, [&](const FlowState& s) { return general_P(s, p); });
  return detail::make_report("general_P", p, traj[k], lhs, general_P_rhs(traj[k], p));
}

inline ResidualReport residual_cor_P(const Trajectory& traj, std::size_t k, double d = 1.0) {
  const HarnackParams p = HarnackParams::harnack_P(d);
  detail::require_c(traj, p.c);
  detail::require_interior(traj, k);
  const ScalarField lhs =
      time_derivative(traj, k, [&](const FlowState& s) { return quantity_P(s, d); });
  return detail::make_report("harnack_P", p, traj[k], lhs, harnack_P_rhs(traj[k], d));
}

inline ResidualReport residual_tP(const Trajectory& traj, std::size_t k, double d = 1.0) {
  const HarnackParams p = HarnackParams::harnack_P(d);
  detail::require_c(traj, p.c);
  detail::require_interior(traj, k);
  const ScalarField lhs = time_derivative(traj, k, Monitored::TP, d);
  return detail::make_report("harnack_tP", p, traj[k], lhs, harnack_tP_rhs(traj[k], d));
}

struct SurfaceResidual {
  ResidualReport expanded;  // general f, first form
  std::optional<ResidualReport> chain;   // general f, final form; needs R > 0
  std::optional<ResidualReport> slaved;  // f = R; needs R > 0
};

inline SurfaceResidual residual_surface(const Trajectory& traj, std::size_t k) {
  const HarnackParams p = HarnackParams::surface();
  detail::require_c(traj, p.c);
  detail::require_interior(traj, k);
  const FlowState& s = traj[k];
  const ScalarField lhs = time_derivative(traj, k, [](const FlowState& st) {
    return laplace_beltrami(st.geom, log_potential_u(st)) - scalar_curvature(st.geom);
  });
  SurfaceResidual out{detail::make_report("surface", p, s, lhs, surface_rhs_expanded(s)), std::nullopt,
                      std::nullopt};
  const bool positive = std::all_of(traj.states.begin() + (k - 1), traj.states.begin() + (k + 2),
                                    [](const FlowState& st) { return scalar_curvature(st.geom).min() > 0.0; });
  if (positive) {
    const ScalarField lhs_slaved =
        time_derivative(traj, k, [](const FlowState& st) { return surface_slaved_H(st); });
    out.chain = detail::make_report("surface_chain", p, s, lhs, surface_rhs_chain(s));
    out.slaved = detail::make_report("surface_f_eq_R", p, s, lhs_slaved, surface_slaved_rhs(s));
  }
  return out;
}

inline ResidualReport residual_grad(const Trajectory& traj, std::size_t k) {
  const HarnackParams p = HarnackParams::gradient();
  detail::require_c(traj, p.c);
  detail::require_interior(traj, k);
  const ScalarField lhs = time_derivative(traj, k, [](const FlowState& s) { return gradient_H(s); });
  return detail::make_report("gradient", p, traj[k], lhs, gradient_rhs(traj[k]));
}

/// max |a - b| / max(1, max |a|): agreement of two assemblies of one identity.
inline double relative_gap(const ScalarField& a, const ScalarField& b) {
  return (a - b).max_abs() / std::max(1.0, a.max_abs());
}

inline constexpr const char* kIdentityCsvHeader =
    "identity_id,alpha,beta,a,b,c,d,lambda,t,N,max_residual,l2_residual";

inline void write_identity_row(std::ostream& os, const ResidualReport& r) {
  const auto& p = r.params;
  os << r.identity << ',' << format_number(p.alpha) << ',' << format_number(p.beta) << ','
     << format_number(p.a) << ',' << format_number(p.b) << ',' << format_number(p.c) << ','
     << format_number(p.d) << ',' << format_number(p.lambda) << ',' << format_number(r.t) << ','
     << r.n << ',' << format_number(r.max_residual) << ',' << format_number(r.l2_residual) << '\n';
}

}  // namespace harnackflow
