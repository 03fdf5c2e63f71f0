#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "harnackflow/flow.hpp"
#include "harnackflow/harnack.hpp"
#include "harnackflow/initial_data.hpp"

using namespace harnackflow;

namespace {

constexpr double kPi = std::numbers::pi;

// Exact constant-f shrinking sphere at time t (no integration involved).
struct ShrinkingSphere {
  double r0 = 1.0, f0 = 1.0, t = 0.1;
  double radius_sq() const { return r0 * r0 - 2.0 * t; }
  double R() const { return 2.0 / radius_sq(); }
  double f() const { return f0 * r0 * r0 / radius_sq(); }
  FlowState state(int n = 32) const {
    const SurfaceGeometry geom = SurfaceGeometry::round_sphere(n, std::sqrt(radius_sq()));
    return FlowState{t, geom, ScalarField(geom.grid(), f())};
  }
};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

Trajectory flat_torus_heat(int n, double t_end, double dt_out) {
  const SurfaceGeometry geom = SurfaceGeometry::flat_torus(n, 1.0);
  const FlowState s0{0.0, geom, initial_profile(geom.grid(), InitialProfile::TorusSineXY, 0.5, 0.25)};
  const double dt = dt_out / std::ceil(dt_out / (0.9 * cfl_bound(geom)));
  return run(s0, t_end, dt, dt_out, HeatModel::plain_heat());
}

}  // namespace

TEST(QuantityH, ShrinkingSphereClosedForm) {
  for (double t : {0.02, 0.1, 0.3}) {
    const ShrinkingSphere ex{1.0, 1.3, t};
    const ScalarField h = quantity_H(ex.state());
    const double expected = -6.0 / ex.radius_sq() - 4.0 / t;
    for (double v : h.values()) EXPECT_LE(rel(v, expected), 1e-6);
  }
}

TEST(QuantityP, ShrinkingSphereClosedForm) {
  const ShrinkingSphere ex{1.0, 0.7, 0.15};
  for (double d : {0.0, 1.0, 2.5}) {
    const double v = -std::log(ex.f()) - std::log(4 * kPi * ex.t);
    const double expected = -3.0 * ex.R() + v / ex.t - 2.0 * d / ex.t;
    const ScalarField p_field = quantity_P(ex.state(), d);
    for (double p : p_field.values()) EXPECT_LE(rel(p, expected), 1e-6);
    const ScalarField tp_field = quantity_tP(ex.state(), d);
    for (double p : tp_field.values()) EXPECT_LE(rel(p, ex.t * expected), 1e-6);
  }
}

TEST(QuantityP, ShiftInDIsExact) {
  const FlowState s = ShrinkingSphere{1.0, 1.0, 0.2}.state();
  const ScalarField diff = quantity_P(s, 0.5) - quantity_P(s, 2.0);
  for (double v : diff.values()) EXPECT_NEAR(v, (2.0 - 0.5) * 2.0 / s.t, 1e-12);
}

TEST(QuantityH, InvariantUnderConstantRescalingOfF) {
  const SurfaceGeometry geom = sphere_geometry(48, 1.0, 0.1);
  const FlowState s{0.3, geom, initial_profile(geom.grid(), InitialProfile::SphereCosine, 1.0, 0.4)};
  const double c = 3.7;
  const FlowState scaled{s.t, s.geom, c * s.f};
  EXPECT_LT((quantity_H(scaled) - quantity_H(s)).max_abs(), 1e-10);
  const ScalarField shift = quantity_P(scaled, 1.0) - quantity_P(s, 1.0);
  for (double v : shift.values()) EXPECT_NEAR(v, -std::log(c) / s.t, 1e-10);
}

TEST(QuantityH, RejectsNonPositiveF) {
  FlowState s = ShrinkingSphere{}.state();
  s.f[3] = 0.0;
  EXPECT_EQ(kind_of([&] { quantity_H(s); }), ErrorKind::NonPositiveF);
  EXPECT_EQ(kind_of([&] { quantity_P(s, 1.0); }), ErrorKind::NonPositiveF);
  EXPECT_EQ(kind_of([&] { entropy_F(s); }), ErrorKind::NonPositiveF);
}

TEST(QuantityH, FlatTorusPlainHeatStaysNonPositive) {
  const Trajectory traj = flat_torus_heat(48, 0.05, 0.001);
  for (std::size_t k = 3; k < traj.size(); ++k) EXPECT_LE(quantity_H(traj[k]).max(), 1e-3);
}

TEST(TraceHarnack, RoundSphereWithoutVectorField) {
  const SurfaceGeometry geom = SurfaceGeometry::round_sphere(32);
  const FlowState s0{0.0, geom, ScalarField(geom.grid(), 1.0)};
  const double dt_out = 0.002;
  const Trajectory traj = run(s0, 0.2, dt_out / 10, dt_out, HeatModel::with_potential());
  for (std::size_t k : {10ul, 60ul}) {
    const double t = traj[k].t, r = 2.0 / (1.0 - 2.0 * t);
    const ScalarField z = trace_harnack(traj, k, VectorChoice::Zero);
    for (double v : z.values()) EXPECT_LE(rel(v, r * r + r / t), 1e-3);
    // Spatially constant u: the vector-field terms vanish.
    EXPECT_LT((trace_harnack(traj, k, VectorChoice::GradU) - z).max_abs(), 1e-9);
  }
  EXPECT_EQ(kind_of([&] { trace_harnack(traj, 0, VectorChoice::Zero); }), ErrorKind::IndexAtBoundary);
}

TEST(TraceHarnack, FlatTorusIsZero) {
  const Trajectory traj = flat_torus_heat(16, 0.01, 0.001);
  EXPECT_EQ(trace_harnack(traj, 4, VectorChoice::Zero).max_abs(), 0.0);
}

TEST(SurfaceLYH, RoundSphereBothVariants) {
  const ShrinkingSphere ex{1.0, 2.0, 0.2};
  const FlowState s = ex.state();
  const ScalarField curv = surface_LYH(s, LyhVariant::Curvature);
  for (double v : curv.values()) EXPECT_LE(rel(v, ex.R() + 1.0 / ex.t), 1e-6);
  const ScalarField heat = surface_LYH(s, LyhVariant::Heat);
  for (double v : heat.values()) EXPECT_LE(rel(v, ex.R() + 1.0 / ex.t), 1e-6);
}

TEST(SurfaceLYH, CurvatureVariantNeedsPositiveCurvature) {
  const SurfaceGeometry geom = torus_geometry(16, 1.0, 0.1);
  const FlowState s{0.1, geom, ScalarField(geom.grid(), 0.5)};
  EXPECT_EQ(kind_of([&] { surface_LYH(s, LyhVariant::Curvature); }), ErrorKind::NonPositiveCurvature);
  EXPECT_NO_THROW(surface_LYH(s, LyhVariant::Heat));
}

TEST(Entropy, ShrinkingSphereClosedForms) {
  const ShrinkingSphere ex{1.0, 1.5, 0.12};
  const FlowState s = ex.state(64);
  const double mass0 = 4 * kPi * ex.f0 * ex.r0 * ex.r0;
  const double t = ex.t;
  EXPECT_LE(rel(entropy_F(s), mass0 * (-6.0 * t * t / ex.radius_sq() - 4.0 * t)), 1e-6);
  const double d = 1.0;
  const double v = -std::log(ex.f()) - std::log(4 * kPi * t);
  const double p = -3.0 * ex.R() + v / t - 2.0 * d / t;
  EXPECT_LE(rel(entropy_W(s, d), mass0 * t * p), 1e-6);
  EXPECT_LE(rel(mass(s), mass0), 1e-12);
}

TEST(GradientQuantity, ConstantProfileOnStaticTorus) {
  const SurfaceGeometry geom = SurfaceGeometry::flat_torus(8, 1.0);
  const double c = 0.3, t = 0.25;
  const GradientQuantity q = gradient_quantity(FlowState{t, geom, ScalarField(geom.grid(), c)});
  for (double v : q.log_form.values()) EXPECT_NEAR(v, std::log(c) / t, 1e-14);
  for (double v : q.f_form.values()) EXPECT_NEAR(v, c * c * std::log(c) / t, 1e-14);
}

TEST(GradientQuantity, FormsAgreeUnderRefinement) {
  // f^2 |grad ln f|^2 = |grad f|^2 holds for the discrete gradient only up to O(h^2).
  double prev = 0.0;
  for (int n : {32, 64, 128}) {
    const SurfaceGeometry geom = torus_geometry(n, 1.0, 0.1);
    const FlowState s{0.05, geom, initial_profile(geom.grid(), InitialProfile::TorusSineXY, 0.5, 0.25)};
    const GradientQuantity q = gradient_quantity(s);
    const double gap = (q.f_form - square(s.f) * q.log_form).max_abs();
    if (prev > 0.0) {
      EXPECT_GE(prev / gap, 3.3);
    }
    prev = gap;
  }
}

TEST(GradientQuantity, RangeEnforced) {
  const SurfaceGeometry geom = SurfaceGeometry::flat_torus(8, 1.0);
  EXPECT_EQ(kind_of([&] { gradient_quantity(FlowState{0.1, geom, ScalarField(geom.grid(), 1.0)}); }),
            ErrorKind::FOutOfRange);
  EXPECT_EQ(kind_of([&] { gradient_quantity(FlowState{0.1, geom, ScalarField(geom.grid(), -0.1)}); }),
            ErrorKind::FOutOfRange);
}

TEST(GradientQuantity, SineProfileStaysBelowZero) {
  const Trajectory traj = flat_torus_heat(48, 0.05, 0.001);
  for (std::size_t k = 3; k < traj.size(); ++k) EXPECT_LE(gradient_quantity(traj[k]).f_form.max(), 1e-3);
}

TEST(Mass, TorusMeanTimesArea) {
  const double length = 2.0;
  const SurfaceGeometry geom = SurfaceGeometry::flat_torus(32, length);
  const FlowState s{0.0, geom, initial_profile(geom.grid(), InitialProfile::TorusSineXY, 0.5, 0.25)};
  EXPECT_NEAR(mass(s), 0.5 * length * length, 1e-12);
}

TEST(MonitorSeries, GatesColumnsByEquation) {
  const Trajectory heat = flat_torus_heat(16, 0.01, 0.001);
  const MonitorSeries hs = monitor_series(heat, 0.002, 1.0);
  ASSERT_FALSE(hs.records.empty());
  EXPECT_DOUBLE_EQ(hs.records.front().time, 0.002);
  for (const auto& r : hs.records) {
    EXPECT_FALSE(r.sup_H.has_value());
    EXPECT_FALSE(r.F.has_value());
    EXPECT_TRUE(r.sup_grad.has_value());
    EXPECT_FALSE(r.min_lyh_curv.has_value());
  }
  EXPECT_FALSE(hs.records.back().min_trace_V0.has_value());

  const SurfaceGeometry geom = SurfaceGeometry::round_sphere(16);
  const Trajectory pot = run(FlowState{0.0, geom, ScalarField(geom.grid(), 1.0)}, 0.01, 1e-4, 1e-3,
                             HeatModel::with_potential());
  for (const auto& r : monitor_series(pot, 0.001, 1.0).records) {
    EXPECT_TRUE(r.sup_H.has_value());
    EXPECT_TRUE(r.W.has_value());
    EXPECT_FALSE(r.sup_grad.has_value());
    EXPECT_TRUE(r.min_lyh_curv.has_value());
    EXPECT_TRUE(r.min_lyh_heat.has_value());
  }
  EXPECT_THROW(monitor_series(pot, 0.0, 1.0), Error);
}

TEST(MonitorSeries, CsvHeaderAndEmptyCells) {
  const Trajectory heat = flat_torus_heat(16, 0.004, 0.001);
  std::ostringstream os;
  write_monitor_csv(os, monitor_series(heat, 0.001, 1.0));
  std::istringstream in(os.str());
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header,
            "time,sup_H,sup_tP,F,W,mass,sup_grad,min_traceH_V0,min_traceH_Vu,min_LYH_curv,min_LYH_heat");
  std::getline(in, row);
  EXPECT_EQ(row.rfind("0.001,,,,,", 0), 0u) << row;
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 10);
}

TEST(FormatNumber, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.123456789}) {
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
}
