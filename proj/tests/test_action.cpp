#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "harnackflow/action.hpp"
#include "harnackflow/initial_data.hpp"
#include "harnackflow/random.hpp"

using namespace harnackflow;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

Trajectory perturbed_sphere(int n, double t_end, double dt_out) {
  const SurfaceGeometry geom = sphere_geometry(n, 1.0, 0.15);
  const FlowState s0{0.0, geom, initial_profile(geom.grid(), InitialProfile::SphereCosine, 1.0, 0.5)};
  return run(s0, t_end, dt_out / std::ceil(dt_out / (0.5 * cfl_bound(geom))), dt_out, HeatModel::with_potential());
}

Trajectory round_sphere(int n, double t_end, double dt_out) {
  const SurfaceGeometry geom = SurfaceGeometry::round_sphere(n);
  const FlowState s0{0.0, geom, ScalarField(geom.grid(), 1.0)};
  return run(s0, t_end, dt_out / std::ceil(dt_out / (0.5 * cfl_bound(geom))), dt_out, HeatModel::with_potential());
}

Trajectory torus(int n, double amp, double t_end, double dt_out) {
  const SurfaceGeometry geom = torus_geometry(n, 1.0, amp);
  const FlowState s0{0.0, geom, initial_profile(geom.grid(), InitialProfile::TorusSineXY, 0.5, 0.25)};
  return run(s0, t_end, dt_out / std::ceil(dt_out / (0.5 * cfl_bound(geom))), dt_out,
             amp == 0.0 ? HeatModel::plain_heat() : HeatModel::with_potential());
}

// Minimum over every admissible node sequence, each summed left to right.
double exhaustive_min(const Trajectory& traj, SpaceTimePoint from, SpaceTimePoint to, int window) {
  std::vector<ActionStep> steps;
  for (std::size_t k = from.k; k < to.k; ++k) steps.emplace_back(traj, k, window);
  const std::size_t size = traj.grid().size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> nodes(steps.size() + 1);
  nodes.front() = from.node;
  nodes.back() = to.node;
  auto recurse = [&](auto&& self, std::size_t layer) -> void {
    if (layer + 1 == nodes.size()) {
      if (!steps.back().admissible(nodes[layer - 1], to.node)) return;
      double total = 0.0;
      for (std::size_t i = 0; i < steps.size(); ++i) total += steps[i].cost(nodes[i], nodes[i + 1]);
      best = std::min(best, total);
      return;
    }
    for (std::size_t p = 0; p < size; ++p) {
      if (!steps[layer - 1].admissible(nodes[layer - 1], p)) continue;
      nodes[layer] = p;
      self(self, layer + 1);
    }
  };
  recurse(recurse, 1);
  return best;
}

}  // namespace

TEST(MinAction, MatchesExhaustiveSearchOnSphere) {
  const Trajectory traj = perturbed_sphere(32, 0.1, 0.01);
  Rng rng(5);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t k1 = 2 + rng.index(4);
    const std::size_t k2 = k1 + 1 + rng.index(4);
    const std::size_t j1 = rng.index(32);
    const std::size_t j2 = std::min<std::size_t>(31, j1 + rng.index(3));
    const SpaceTimePath path = min_action(traj, {j1, k1}, {j2, k2}, 5);
    const double oracle = exhaustive_min(traj, {j1, k1}, {j2, k2}, 5);
    EXPECT_NEAR(path.action, oracle, 1e-12 * std::abs(oracle));
    EXPECT_NEAR(path_action(traj, path, 5), path.action, 1e-12 * std::abs(oracle));
    EXPECT_EQ(path.nodes.front(), j1);
    EXPECT_EQ(path.nodes.back(), j2);
  }
}

TEST(MinAction, MatchesExhaustiveSearchOnTorus) {
  const Trajectory traj = torus(5, 0.1, 0.002, 0.0002);
  Rng rng(9);
  for (int trial = 0; trial < 4; ++trial) {
    const std::size_t k1 = 1 + rng.index(3);
    const std::size_t k2 = k1 + 2 + rng.index(2);
    const std::size_t a = rng.index(25), b = rng.index(25);
    const double dp = min_action(traj, {a, k1}, {b, k2}, 3).action;
    const double oracle = exhaustive_min(traj, {a, k1}, {b, k2}, 3);
    EXPECT_NEAR(dp, oracle, 1e-12 * std::abs(oracle));
  }
}

TEST(MinAction, ShrinkingSphereStaysPut) {
  // Uniform curvature: the cheapest path does not move and collects int R dt.
  const Trajectory traj = round_sphere(64, 0.25, 0.005);
  const double t1 = 0.05, t2 = 0.2;
  const SpaceTimePath path = min_action(traj, 20, t1, 20, t2);
  for (std::size_t node : path.nodes) EXPECT_EQ(node, 20u);
  const double exact = std::log((1.0 - 2.0 * t1) / (1.0 - 2.0 * t2));
  EXPECT_NEAR(path.action, exact, 1e-2 * exact);
}

TEST(IntegratedHarnack, ShrinkingSphereMarginClosedForm) {
  const Trajectory traj = round_sphere(64, 0.25, 0.005);
  const std::size_t k1 = snapshot_index(traj, 0.05), k2 = snapshot_index(traj, 0.2);
  const HarnackCertificate c = check_integrated_harnack(traj, {10, k1}, {10, k2});
  // f = 1/(1 - 2t), so ln f2 - ln f1 matches the curvature integral.
  const double ln_f = std::log((1.0 - 2.0 * c.t1) / (1.0 - 2.0 * c.t2));
  EXPECT_NEAR(c.margin, 2.0 * std::log(c.t2 / c.t1) + 0.5 * c.gamma + ln_f, 1e-9);
  EXPECT_GT(c.margin, 0.0);
  EXPECT_EQ(kind_of([&] { check_integrated_harnack(traj, {10, 0}, {10, 3}); }), ErrorKind::InvalidArgument);
}

TEST(MinAction, FlatTorusStraightLine) {
  // R = 0 and a static metric: K unit moves over K steps cost K h^2 / dt_out.
  const int n = 16;
  const double dt_out = 0.001;
  const Trajectory traj = torus(n, 0.0, 0.01, dt_out);
  const Grid& g = traj.grid();
  const double h = g.spacing();
  for (int K : {1, 3, 6}) {
    const double gamma = min_action(traj, {g.index(2, 4), 1}, {g.index(2 + K, 4), 1 + static_cast<std::size_t>(K)}, 3).action;
    EXPECT_NEAR(gamma, K * h * h / dt_out, 1e-12 * K * h * h / dt_out);
  }
  // Diagonal moves use the Euclidean chord.
  const double diag = min_action(traj, {g.index(0, 0), 1}, {g.index(2, 2), 3}, 3).action;
  EXPECT_NEAR(diag, 4 * h * h / dt_out, 1e-12 * diag);
  // The minimal periodic image is used across the seam.
  const double wrap = min_action(traj, {g.index(0, 0), 1}, {g.index(n - 1, 0), 2}, 3).action;
  EXPECT_NEAR(wrap, h * h / dt_out, 1e-12 * wrap);
}

TEST(MinAction, WiderWindowNeverIncreasesAction) {
  const Trajectory traj = perturbed_sphere(32, 0.1, 0.01);
  double prev = std::numeric_limits<double>::infinity();
  for (int w : {3, 5, 7, 9}) {
    const double gamma = min_action(traj, {8, 2}, {14, 8}, w).action;
    EXPECT_LE(gamma, prev);
    prev = gamma;
  }
}

TEST(MinAction, Errors) {
  const Trajectory traj = perturbed_sphere(16, 0.05, 0.01);
  EXPECT_EQ(kind_of([&] { min_action(traj, 3, 0.015, 3, 0.03); }), ErrorKind::TimesNotStored);
  EXPECT_EQ(kind_of([&] { min_action(traj, {3, 4}, {3, 2}); }), ErrorKind::TimesNotStored);
  EXPECT_EQ(kind_of([&] { min_action(traj, {3, 1}, {3, 99}); }), ErrorKind::TimesNotStored);
  EXPECT_EQ(kind_of([&] { min_action(traj, {16, 1}, {3, 3}); }), ErrorKind::NodesOutOfRange);
  EXPECT_EQ(kind_of([&] { min_action(traj, {0, 1}, {15, 2}); }), ErrorKind::Unreachable);
  EXPECT_EQ(kind_of([&] { min_action(traj, {0, 1}, {1, 2}, 1); }), ErrorKind::Unreachable);
  const Trajectory small = torus(4, 0.0, 0.001, 0.0001);
  EXPECT_EQ(kind_of([&] { min_action(small, {0, 1}, {1, 2}, 5); }), ErrorKind::InvalidArgument);
}

TEST(RandomPairs, TargetsAreReachable) {
  const Trajectory traj = perturbed_sphere(32, 0.1, 0.01);
  Rng rng(1);
  for (const auto& [a, b] : random_pairs(traj, 0.02, 20, rng)) {
    EXPECT_GE(traj[a.k].t, 0.02 - 1e-12);
    EXPECT_LT(a.k, b.k);
    EXPECT_NO_THROW(min_action(traj, a, b));
  }
  const Trajectory tor = torus(8, 0.1, 0.002, 0.0002);
  for (const auto& [a, b] : random_pairs(tor, 0.0002, 20, rng, 3)) EXPECT_NO_THROW(min_action(tor, a, b, 3));
}

TEST(ActionCsv, HeaderAndRow) {
  EXPECT_STREQ(kActionCsvHeader, "x1,t1,x2,t2,gamma,margin");
  HarnackCertificate c;
  c.from = {3, 1};
  c.to = {5, 4};
  c.t1 = 0.25;
  c.t2 = 1.0;
  c.gamma = 0.5;
  c.margin = 2.0;
  std::ostringstream os;
  write_action_row(os, c);
  EXPECT_EQ(os.str(), "3,0.25,5,1,0.5,2\n");
}
