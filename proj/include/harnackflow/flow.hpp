#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "harnackflow/errors.hpp"
#include "harnackflow/field.hpp"
#include "harnackflow/geometry.hpp"

namespace harnackflow {

/// Heat equation coupled to the flow: df/dt = Lap_g f - c R f.
/// c = -1 is the equation with potential (df/dt = Lap f + R f),
/// c = 0 the plain heat equation.
struct HeatModel {
  double c = -1.0;

  static constexpr HeatModel with_potential() { return HeatModel{-1.0}; }
  static constexpr HeatModel plain_heat() { return HeatModel{0.0}; }
  bool is_with_potential() const { return c == -1.0; }
  bool is_plain_heat() const { return c == 0.0; }
  std::string name() const {
    if (is_with_potential()) return "with-potential";
    if (is_plain_heat()) return "plain-heat";
    return "c=" + std::to_string(c);
  }
};

struct FlowState {
  double t = 0.0;
  SurfaceGeometry geom;
  ScalarField f;
};

inline constexpr double kCflFactor = 0.2;
inline constexpr double kOverflowGuard = 1e12;

/// Largest admissible explicit step: 0.2 h^2 min(e^{2 phi}).
inline double cfl_bound(const SurfaceGeometry& geom) {
  const double h = geom.grid().spacing();
  return kCflFactor * h * h * geom.conformal().min();
}

/// Checks the FlowState invariants; throws with the state's time attached.
inline void validate_state(const FlowState& s) {
  if (!(s.f.grid() == s.geom.grid())) {
    throw Error(ErrorKind::ShapeMismatch, "f and geometry live on different grids", s.t);
  }
  if (!(s.t >= 0.0) || !std::isfinite(s.t)) {
    throw Error(ErrorKind::InvalidArgument, "state time must be finite and >= 0", s.t);
  }
  if (!s.f.all_finite() || s.f.max_abs() > kOverflowGuard || s.geom.phi().max_abs() > kOverflowGuard) {
    throw Error(ErrorKind::Blowup, "field exceeds overflow guard", s.t);
  }
  if (s.f.min() <= 0.0) {
    throw Error(ErrorKind::PositivityLost, "min f = " + std::to_string(s.f.min()), s.t);
  }
}

namespace detail {

/// Scratch buffers for one RK4 step.
struct StepWork {
  ScalarField lap_phi, phi_stage, f_stage;
  ScalarField dphi[4], df[4];

  explicit StepWork(const Grid& g)
      : lap_phi(g), phi_stage(g), f_stage(g),
        dphi{ScalarField(g), ScalarField(g), ScalarField(g), ScalarField(g)},
        df{ScalarField(g), ScalarField(g), ScalarField(g), ScalarField(g)} {}
};

/// dphi = -R/2 and df = Lap_g f - c R f, with R and Lap_g evaluated exactly as
/// scalar_curvature and laplace_beltrami do.
inline void flow_rates(const ScalarField& phi, const ScalarField& f, const HeatModel& model,
                       StepWork& work, int stage) {
  if (!phi.all_finite()) throw Error(ErrorKind::NonFinite, "conformal exponent is not finite");
  background::laplacian_into(phi, work.lap_phi);
  ScalarField& df = work.df[stage];
  ScalarField& dphi = work.dphi[stage];
  background::laplacian_into(f, df);
  const double r0 = phi.grid().kind == SurfaceKind::RotSphere ? 2.0 : 0.0;
  const double c = model.c;
  for (std::size_t k = 0; k < phi.size(); ++k) {
    const double inv = 1.0 / std::exp(2.0 * phi[k]);
    const double r = inv * (r0 - 2.0 * work.lap_phi[k]);
    dphi[k] = -0.5 * r;
    df[k] = inv * df[k] - c * (r * f[k]);
  }
}

}  // namespace detail

/// One classical RK4 step of dphi/dt = -R/2, df/dt = Lap_g f - c R f.
inline FlowState step(const FlowState& state, double dt, const HeatModel& model) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive", state.t);
  const double bound = cfl_bound(state.geom);
  if (dt > bound * (1.0 + 1e-12)) {
    throw Error(ErrorKind::StepTooLarge,
                "dt=" + std::to_string(dt) + " exceeds CFL bound 0.2*h^2*min(e^{2phi})=" +
                    std::to_string(bound),
                state.t);
  }
  const ScalarField& phi = state.geom.phi();
  const ScalarField& f = state.f;
  const std::size_t size = phi.size();
  detail::StepWork work(phi.grid());

  detail::flow_rates(phi, f, model, work, 0);
  constexpr double kStageWeight[3] = {0.5, 0.5, 1.0};
  for (int stage = 1; stage < 4; ++stage) {
    const double w = kStageWeight[stage - 1] * dt;
    for (std::size_t k = 0; k < size; ++k) {
      work.phi_stage[k] = phi[k] + w * work.dphi[stage - 1][k];
      work.f_stage[k] = f[k] + w * work.df[stage - 1][k];
    }
    detail::flow_rates(work.phi_stage, work.f_stage, model, work, stage);
  }

  ScalarField phi_next(phi.grid()), f_next(f.grid());
  const double w = dt / 6.0;
  const auto& kp = work.dphi;
  const auto& kf = work.df;
  for (std::size_t k = 0; k < size; ++k) {
    phi_next[k] = phi[k] + w * (kp[0][k] + 2.0 * kp[1][k] + 2.0 * kp[2][k] + kp[3][k]);
    f_next[k] = f[k] + w * (kf[0][k] + 2.0 * kf[1][k] + 2.0 * kf[2][k] + kf[3][k]);
  }
  const double t_next = state.t + dt;
  if (!phi_next.all_finite() || phi_next.max_abs() > kOverflowGuard) {
    throw Error(ErrorKind::Blowup, "metric blew up", t_next);
  }
  FlowState next{t_next, SurfaceGeometry(std::move(phi_next)), std::move(f_next)};
  validate_state(next);
  return next;
}

struct Trajectory {
  double dt = 0.0;
  double dt_out = 0.0;
  HeatModel model;
  std::string initial_id;
  std::vector<FlowState> states;

  std::size_t size() const { return states.size(); }
  const FlowState& operator[](std::size_t k) const { return states[k]; }
  const Grid& grid() const { return states.front().geom.grid(); }
};

/// Number of fixed steps of size dt making up one output interval.
inline std::int64_t steps_per_output(double dt, double dt_out) {
  if (!(dt > 0.0) || !(dt_out > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt and dt_out must be positive");
  const auto m = static_cast<std::int64_t>(std::llround(dt_out / dt));
  if (m < 1 || std::abs(static_cast<double>(m) * dt - dt_out) > 1e-9 * dt_out) {
    throw Error(ErrorKind::InvalidArgument, "dt_out must be an integer multiple of dt");
  }
  return m;
}

/// Advances with fixed steps until t_end (must be a multiple of dt past the
/// start), without recording.
inline FlowState advance(FlowState state, double t_end, double dt, const HeatModel& model) {
  const double t_start = state.t;
  const auto steps = static_cast<std::int64_t>(std::llround((t_end - t_start) / dt));
  if (steps < 0 || std::abs(t_start + static_cast<double>(steps) * dt - t_end) > 1e-9 * std::max(1.0, t_end)) {
    throw Error(ErrorKind::InvalidArgument, "advance target is not a multiple of dt", t_start);
  }
  for (std::int64_t s = 1; s <= steps; ++s) {
    state = step(state, dt, model);
    state.t = t_start + static_cast<double>(s) * dt;
  }
  if (steps > 0) state.t = t_end;
  return state;
}

/// Fixed-step integration recording every dt_out. Deterministic: identical
/// inputs give bit-identical trajectories.
inline Trajectory run(const FlowState& initial, double t_end, double dt, double dt_out,
                      const HeatModel& model, std::string initial_id = {}) {
  validate_state(initial);
  const std::int64_t m = steps_per_output(dt, dt_out);
  const double t_start = initial.t;
  if (t_end < t_start) throw Error(ErrorKind::InvalidArgument, "t_end precedes the initial time", t_start);
  const auto outputs = static_cast<std::int64_t>(std::floor((t_end - t_start) / dt_out + 1e-9));

  Trajectory traj{dt, dt_out, model, std::move(initial_id), {}};
  traj.states.reserve(static_cast<std::size_t>(outputs) + 1);
  traj.states.push_back(initial);
  FlowState state = initial;
  std::int64_t total = 0;
  for (std::int64_t k = 1; k <= outputs; ++k) {
    for (std::int64_t s = 0; s < m; ++s) {
      state = step(state, dt, model);
      ++total;
      state.t = t_start + static_cast<double>(total) * dt;
    }
    state.t = t_start + static_cast<double>(k) * dt_out;
    traj.states.push_back(state);
  }
  return traj;
}

/// Centered difference (X_{k+1} - X_{k-1}) / (2 dt_out) of a derived field.
/// Coordinates are flow-invariant, so the difference is taken pointwise.
template <typename Quantity>
ScalarField time_derivative(const Trajectory& traj, std::size_t k, Quantity&& quantity) {
  if (k == 0 || k + 1 >= traj.size()) {
    throw Error(ErrorKind::IndexAtBoundary,
                "centered time difference needs an interior snapshot, got k=" + std::to_string(k));
  }
  ScalarField out = quantity(traj[k + 1]) - quantity(traj[k - 1]);
  out *= 1.0 / (2.0 * traj.dt_out);
  return out;
}

}  // namespace harnackflow
