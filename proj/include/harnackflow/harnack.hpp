#pragma once

#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "harnackflow/errors.hpp"
#include "harnackflow/field.hpp"
#include "harnackflow/flow.hpp"
#include "harnackflow/geometry.hpp"

namespace harnackflow {

/// Surface dimension; every formula below is evaluated with n = 2.
inline constexpr double kDim = 2.0;

namespace detail {

inline void require_positive_time(const FlowState& s) {
  if (!(s.t > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "monitored quantities need t > 0", s.t);
  }
}

inline void require_positive_f(const FlowState& s) {
  if (s.f.min() <= 0.0) {
    throw Error(ErrorKind::NonPositiveF, "f must be positive, min f = " + std::to_string(s.f.min()), s.t);
  }
}

}  // namespace detail

/// u = -ln f
inline ScalarField log_potential_u(const FlowState& s) {
  detail::require_positive_f(s);
  return -log(s.f);
}

/// v = -ln f - (n/2) ln(4 pi t)
inline ScalarField log_potential_v(const FlowState& s) {
  detail::require_positive_f(s);
  detail::require_positive_time(s);
  return -log(s.f) - 0.5 * kDim * std::log(4.0 * std::numbers::pi * s.t);
}

/// H = 2 Lap u - |grad u|^2 - 3R - 2n/t
inline ScalarField quantity_H(const FlowState& s) {
  detail::require_positive_time(s);
  const ScalarField u = log_potential_u(s);
  ScalarField h = 2.0 * laplace_beltrami(s.geom, u) - grad_norm_sq(s.geom, u) -
                  3.0 * scalar_curvature(s.geom);
  h += -2.0 * kDim / s.t;
  return h;
}

/// P = 2 Lap v - |grad v|^2 - 3R + v/t - d n/t
inline ScalarField quantity_P(const FlowState& s, double d) {
  const ScalarField v = log_potential_v(s);
  ScalarField p = 2.0 * laplace_beltrami(s.geom, v) - grad_norm_sq(s.geom, v) -
                  3.0 * scalar_curvature(s.geom) + (1.0 / s.t) * v;
  p += -d * kDim / s.t;
  return p;
}

inline ScalarField quantity_tP(const FlowState& s, double d) { return s.t * quantity_P(s, d); }

enum class VectorChoice { Zero, GradU, GradV };

/// dR/dt + R/t + 2 grad R . V + 2 Rc(V, V), with Rc(V, V) = (R/2)|V|^2 and
/// dR/dt from the centered difference of stored snapshots.
inline ScalarField trace_harnack(const Trajectory& traj, std::size_t k, VectorChoice v) {
  const ScalarField dr_dt =
      time_derivative(traj, k, [](const FlowState& s) { return scalar_curvature(s.geom); });
  const FlowState& s = traj[k];
  detail::require_positive_time(s);
  const ScalarField r = scalar_curvature(s.geom);
  ScalarField out = dr_dt + (1.0 / s.t) * r;
  if (v == VectorChoice::Zero) return out;
  const ScalarField pot = v == VectorChoice::GradU ? log_potential_u(s) : log_potential_v(s);
  // V = grad(pot); 2 grad R . V + R |V|^2
  out += 2.0 * grad_inner(s.geom, r, pot) + r * grad_norm_sq(s.geom, pot);
  return out;
}

enum class LyhVariant { Curvature, Heat };

/// Lap ln R + R + 1/t (curvature) or Lap ln f + R + 1/t (heat).
inline ScalarField surface_LYH(const FlowState& s, LyhVariant which) {
  detail::require_positive_time(s);
  const ScalarField r = scalar_curvature(s.geom);
  ScalarField logw(s.geom.grid());
  if (which == LyhVariant::Curvature) {
    if (r.min() <= 0.0) {
      throw Error(ErrorKind::NonPositiveCurvature, "min R = " + std::to_string(r.min()), s.t);
    }
    logw = log(r);
  } else {
    detail::require_positive_f(s);
    logw = log(s.f);
  }
  ScalarField out = laplace_beltrami(s.geom, logw) + r;
  out += 1.0 / s.t;
  return out;
}

/// F = int t^2 H e^{-u} dmu
inline double entropy_F(const FlowState& s) {
  return integrate(s.geom, (s.t * s.t) * (quantity_H(s) * s.f));
}

/// W = int t P (4 pi t)^{-n/2} e^{-v} dmu; the weight (4 pi t)^{-n/2} e^{-v} is f.
inline double entropy_W(const FlowState& s, double d) {
  return integrate(s.geom, s.t * (quantity_P(s, d) * s.f));
}

struct GradientQuantity {
  ScalarField log_form;  // |grad u|^2 - u/t
  ScalarField f_form;    // |grad f|^2 + f^2 ln f / t
};

/// Gradient-estimate quantity for the plain heat equation with 0 < f < 1.
inline GradientQuantity gradient_quantity(const FlowState& s) {
  detail::require_positive_time(s);
  if (s.f.min() <= 0.0 || s.f.max() >= 1.0) {
    throw Error(ErrorKind::FOutOfRange,
                "gradient estimate needs 0 < f < 1, got range [" + std::to_string(s.f.min()) + ", " +
                    std::to_string(s.f.max()) + "]",
                s.t);
  }
  const ScalarField u = -log(s.f);
  ScalarField log_form = grad_norm_sq(s.geom, u) - (1.0 / s.t) * u;
  ScalarField f_form = grad_norm_sq(s.geom, s.f) + (1.0 / s.t) * (square(s.f) * log(s.f));
  return GradientQuantity{std::move(log_form), std::move(f_form)};
}

inline double mass(const FlowState& s) { return integrate(s.geom, s.f); }

enum class Monitored { H, TP, R, U, V };

/// Centered time derivative of a monitored field; d is used for tP only.
inline ScalarField time_derivative(const Trajectory& traj, std::size_t k, Monitored which,
                                   double d = 1.0) {
  return time_derivative(traj, k, [&](const FlowState& s) -> ScalarField {
    switch (which) {
      case Monitored::H: return quantity_H(s);
      case Monitored::TP: return quantity_tP(s, d);
      case Monitored::R: return scalar_curvature(s.geom);
      case Monitored::U: return log_potential_u(s);
      case Monitored::V: return log_potential_v(s);
    }
    return ScalarField(s.geom.grid());
  });
}

struct MonitorRecord {
  double time = 0.0;
  std::optional<double> sup_H;
  std::optional<double> sup_tP;
  std::optional<double> F;
  std::optional<double> W;
  double mass = 0.0;
  std::optional<double> sup_grad;
  std::optional<double> min_trace_V0;
  std::optional<double> min_trace_Vu;
  std::optional<double> min_lyh_curv;
  std::optional<double> min_lyh_heat;
};

struct MonitorSeries {
  double d = 1.0;
  double t0 = 0.0;
  std::vector<MonitorRecord> records;
};

/// Evaluates the monitors at every stored time t >= t0 > 0. Harnack and
/// entropy quantities are only reported for the equation with potential, the
/// gradient quantity only for the plain heat equation with 0 < f < 1, and
/// trace Harnack values only at interior snapshots.
inline MonitorSeries monitor_series(const Trajectory& traj, double t0, double d) {
  if (!(t0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "monitors start at t0 > 0");
  MonitorSeries series{d, t0, {}};
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const FlowState& s = traj[k];
    if (s.t < t0 * (1.0 - 1e-12)) continue;
    MonitorRecord rec;
    rec.time = s.t;
    rec.mass = mass(s);
    const ScalarField r = scalar_curvature(s.geom);
    const bool positive_curvature = r.min() > 0.0;
    if (traj.model.is_with_potential()) {
      rec.sup_H = quantity_H(s).max();
      rec.sup_tP = quantity_tP(s, d).max();
      rec.F = entropy_F(s);
      rec.W = entropy_W(s, d);
      if (positive_curvature) rec.min_lyh_heat = surface_LYH(s, LyhVariant::Heat).min();
    }
    if (traj.model.is_plain_heat() && s.f.min() > 0.0 && s.f.max() < 1.0) {
      rec.sup_grad = gradient_quantity(s).f_form.max();
    }
    if (positive_curvature) rec.min_lyh_curv = surface_LYH(s, LyhVariant::Curvature).min();
    if (k > 0 && k + 1 < traj.size()) {
      rec.min_trace_V0 = trace_harnack(traj, k, VectorChoice::Zero).min();
      rec.min_trace_Vu = trace_harnack(traj, k, VectorChoice::GradU).min();
    }
    series.records.push_back(rec);
  }
  return series;
}

/// Round-trip decimal representation of a double.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string();
}

inline constexpr const char* kMonitorCsvHeader =
    "time,sup_H,sup_tP,F,W,mass,sup_grad,min_traceH_V0,min_traceH_Vu,min_LYH_curv,min_LYH_heat";

inline void write_monitor_csv(std::ostream& os, const MonitorSeries& series) {
  os << kMonitorCsvHeader << '\n';
  for (const auto& r : series.records) {
    os << format_number(r.time) << ',' << format_optional(r.sup_H) << ','
       << format_optional(r.sup_tP) << ',' << format_optional(r.F) << ','
       << format_optional(r.W) << ',' << format_number(r.mass) << ','
       << format_optional(r.sup_grad) << ',' << format_optional(r.min_trace_V0) << ','
       << format_optional(r.min_trace_Vu) << ',' << format_optional(r.min_lyh_curv) << ','
       << format_optional(r.min_lyh_heat) << '\n';
  }
}

}  // namespace harnackflow
