#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "harnackflow/errors.hpp"
#include "harnackflow/field.hpp"
#include "harnackflow/flow.hpp"
#include "harnackflow/geometry.hpp"
#include "harnackflow/harnack.hpp"
#include "harnackflow/random.hpp"

namespace harnackflow {

inline constexpr int kDefaultWindow = 5;

/// A grid node at a stored snapshot.
struct SpaceTimePoint {
  std::size_t node = 0;
  std::size_t k = 0;
};

/// Piecewise-linear grid path: nodes[i] is visited at snapshot k_start + i.
struct SpaceTimePath {
  std::size_t k_start = 0;
  std::vector<std::size_t> nodes;
  double action = 0.0;
};

/// Index of the snapshot stored at time t.
inline std::size_t snapshot_index(const Trajectory& traj, double t) {
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (std::abs(traj[k].t - t) <= 1e-9 * std::max(1.0, std::abs(t))) return k;
  }
  throw Error(ErrorKind::TimesNotStored, "no snapshot stored at t=" + format_number(t));
}

/// Transition costs between snapshots k and k+1:
///   d(p, q)^2 / dt + (R(p, t_k) + R(q, t_{k+1})) dt / 2
/// with d measured in the mid-step metric. Moves are limited to window / 2
/// nodes per coordinate.
class ActionStep {
 public:
  ActionStep(const Trajectory& traj, std::size_t k, int window)
      : grid_(traj.grid()), half_(window / 2), dt_(traj[k + 1].t - traj[k].t),
        r_now_(scalar_curvature(traj[k].geom)), r_next_(scalar_curvature(traj[k + 1].geom)),
        scale_(grid_) {
    if (window < 1) throw Error(ErrorKind::InvalidArgument, "transition window must be >= 1");
    if (grid_.kind == SurfaceKind::Torus && grid_.n < 2 * half_ + 1) {
      throw Error(ErrorKind::InvalidArgument, "transition window wider than the torus grid");
    }
    const ScalarField& p0 = traj[k].geom.phi();
    const ScalarField& p1 = traj[k + 1].geom.phi();
    for (std::size_t m = 0; m < scale_.size(); ++m) scale_[m] = 0.5 * (p0[m] + p1[m]);
    const double h = grid_.spacing();
    if (grid_.kind == SurfaceKind::RotSphere) {
      edge_.resize(static_cast<std::size_t>(grid_.n - 1));
      for (int m = 0; m + 1 < grid_.n; ++m) {
        edge_[m] = h * std::exp(0.5 * (scale_[m] + scale_[m + 1]));
      }
    } else {
      scale_ = exp(scale_);
    }
  }

  int half_window() const { return half_; }
  const Grid& grid() const { return grid_; }

  /// Calls fn(p) for every node p from which q is reachable in one step.
  template <typename Fn>
  void for_each_source(std::size_t q, Fn&& fn) const {
    if (grid_.kind == SurfaceKind::RotSphere) {
      const int j = static_cast<int>(q);
      for (int p = std::max(0, j - half_); p <= std::min(grid_.n - 1, j + half_); ++p) {
        fn(static_cast<std::size_t>(p));
      }
      return;
    }
    const int n = grid_.n;
    const int qi = static_cast<int>(q) / n, qj = static_cast<int>(q) % n;
    for (int di = -half_; di <= half_; ++di) {
      for (int dj = -half_; dj <= half_; ++dj) {
        fn(grid_.index((qi + di + n) % n, (qj + dj + n) % n));
      }
    }
  }

  bool admissible(std::size_t p, std::size_t q) const {
    if (grid_.kind == SurfaceKind::RotSphere) {
      return std::abs(static_cast<long>(p) - static_cast<long>(q)) <= half_;
    }
    const auto [di, dj] = torus_offset(p, q);
    return std::abs(di) <= half_ && std::abs(dj) <= half_;
  }

  /// Distance from p to q in the mid-step metric.
  double distance(std::size_t p, std::size_t q) const {
    if (grid_.kind == SurfaceKind::RotSphere) {
      double d = 0.0;
      for (std::size_t m = std::min(p, q); m < std::max(p, q); ++m) d += edge_[m];
      return d;
    }
    const auto [di, dj] = torus_offset(p, q);
    const double h = grid_.spacing();
    return std::hypot(di * h, dj * h) * 0.5 * (scale_[p] + scale_[q]);
  }

  double cost(std::size_t p, std::size_t q) const {
    const double d = distance(p, q);
    return d * d / dt_ + 0.5 * (r_now_[p] + r_next_[q]) * dt_;
  }

 private:
  std::pair<int, int> torus_offset(std::size_t p, std::size_t q) const {
    const int n = grid_.n;
    auto minimal = [n](int d) {
      d = ((d % n) + n) % n;
      return d > n / 2 ? d - n : d;
    };
    const int pi = static_cast<int>(p) / n, pj = static_cast<int>(p) % n;
    const int qi = static_cast<int>(q) / n, qj = static_cast<int>(q) % n;
    return {minimal(qi - pi), minimal(qj - pj)};
  }

  Grid grid_;
  int half_;
  double dt_;
  ScalarField r_now_, r_next_;
  ScalarField scale_;  // mid-step phi on the sphere, mid-step e^phi on the torus
  std::vector<double> edge_;
};

namespace detail {

inline void check_endpoints(const Trajectory& traj, const SpaceTimePoint& a, const SpaceTimePoint& b) {
  if (a.k >= traj.size() || b.k >= traj.size()) {
    throw Error(ErrorKind::TimesNotStored, "snapshot index beyond the stored trajectory");
  }
  if (!(a.k < b.k)) throw Error(ErrorKind::TimesNotStored, "path endpoints need t1 < t2 at distinct snapshots");
  const std::size_t size = traj.grid().size();
  if (a.node >= size || b.node >= size) {
    throw Error(ErrorKind::NodesOutOfRange, "node index outside the grid of " + std::to_string(size) + " nodes");
  }
}

}  // namespace detail

/// Minimal discrete action between two space-time grid points by dynamic
/// programming over snapshot layers. The result bounds the continuous
/// infimum from above.
inline SpaceTimePath min_action(const Trajectory& traj, const SpaceTimePoint& from,
                                const SpaceTimePoint& to, int window = kDefaultWindow) {
  detail::check_endpoints(traj, from, to);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const std::size_t size = traj.grid().size();
  std::vector<double> value(size, kInf), next(size);
  value[from.node] = 0.0;
  std::vector<std::vector<std::uint32_t>> parent;
  parent.reserve(to.k - from.k);

  for (std::size_t k = from.k; k < to.k; ++k) {
    const ActionStep step(traj, k, window);
    std::vector<std::uint32_t> arg(size, 0);
    for (std::size_t q = 0; q < size; ++q) {
      double best = kInf;
      step.for_each_source(q, [&](std::size_t p) {
        if (value[p] == kInf) return;
        const double candidate = value[p] + step.cost(p, q);
        if (candidate < best) {
          best = candidate;
          arg[q] = static_cast<std::uint32_t>(p);
        }
      });
      next[q] = best;
    }
    value.swap(next);
    parent.push_back(std::move(arg));
  }

  if (value[to.node] == kInf) {
    throw Error(ErrorKind::Unreachable, "target node cannot be reached with window " + std::to_string(window));
  }
  SpaceTimePath path{from.k, std::vector<std::size_t>(to.k - from.k + 1), value[to.node]};
  std::size_t node = to.node;
  for (std::size_t layer = parent.size(); layer > 0; --layer) {
    path.nodes[layer] = node;
    node = parent[layer - 1][node];
  }
  path.nodes[0] = node;
  return path;
}

/// Same, with endpoints given by stored snapshot times.
inline SpaceTimePath min_action(const Trajectory& traj, std::size_t node1, double t1, std::size_t node2,
                                double t2, int window = kDefaultWindow) {
  return min_action(traj, {node1, snapshot_index(traj, t1)}, {node2, snapshot_index(traj, t2)}, window);
}

/// Action of a given grid path, summed in path order.
inline double path_action(const Trajectory& traj, const SpaceTimePath& path, int window = kDefaultWindow) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < path.nodes.size(); ++i) {
    const ActionStep step(traj, path.k_start + i, window);
    if (!step.admissible(path.nodes[i], path.nodes[i + 1])) {
      throw Error(ErrorKind::InvalidArgument, "path leaves the transition window");
    }
    total += step.cost(path.nodes[i], path.nodes[i + 1]);
  }
  return total;
}

struct HarnackCertificate {
  SpaceTimePoint from, to;
  double t1 = 0.0, t2 = 0.0;
  double gamma = 0.0;
  double margin = 0.0;
  SpaceTimePath path;
};

/// ln of the integrated Harnack ratio:
///   ln f(x2, t2) + n ln(t2 / t1) + gamma / 2 - ln f(x1, t1)
/// computed with the discrete action, which is never below the true infimum.
inline HarnackCertificate check_integrated_harnack(const Trajectory& traj, const SpaceTimePoint& from,
                                                   const SpaceTimePoint& to, int window = kDefaultWindow) {
  detail::check_endpoints(traj, from, to);
  const FlowState& s1 = traj[from.k];
  const FlowState& s2 = traj[to.k];
  if (!(s1.t > 0.0)) throw Error(ErrorKind::InvalidArgument, "integrated Harnack needs t1 > 0", s1.t);
  HarnackCertificate c{from, to, s1.t, s2.t, 0.0, 0.0, min_action(traj, from, to, window)};
  c.gamma = c.path.action;
  c.margin = std::log(s2.f[to.node]) + kDim * std::log(s2.t / s1.t) + 0.5 * c.gamma - std::log(s1.f[from.node]);
  return c;
}

/// Random endpoint pairs with t0 <= t1 < t2, the target drawn inside the
/// region reachable under the transition window.
inline std::vector<std::pair<SpaceTimePoint, SpaceTimePoint>> random_pairs(const Trajectory& traj, double t0,
                                                                           std::size_t count, Rng& rng,
                                                                           int window = kDefaultWindow) {
  std::size_t first = 0;
  while (first < traj.size() && (traj[first].t <= 0.0 || traj[first].t < t0 * (1.0 - 1e-12))) ++first;
  if (first + 1 >= traj.size()) {
    throw Error(ErrorKind::TimesNotStored, "fewer than two stored snapshots after t0");
  }
  const Grid& g = traj.grid();
  const auto last = static_cast<std::int64_t>(traj.size() - 1);
  const std::int64_t half = window / 2;
  std::vector<std::pair<SpaceTimePoint, SpaceTimePoint>> pairs;
  pairs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::int64_t k1 = rng.between(static_cast<std::int64_t>(first), last - 1);
    const std::int64_t k2 = rng.between(k1 + 1, last);
    const std::int64_t reach = half * (k2 - k1);
    SpaceTimePoint a{0, static_cast<std::size_t>(k1)}, b{0, static_cast<std::size_t>(k2)};
    if (g.kind == SurfaceKind::RotSphere) {
      const std::int64_t j1 = rng.between(0, g.n - 1);
      const std::int64_t j2 = rng.between(std::max<std::int64_t>(0, j1 - reach), std::min<std::int64_t>(g.n - 1, j1 + reach));
      a.node = static_cast<std::size_t>(j1);
      b.node = static_cast<std::size_t>(j2);
    } else {
      const std::int64_t r = std::min<std::int64_t>(reach, g.n / 2);
      const std::int64_t i1 = rng.between(0, g.n - 1), j1 = rng.between(0, g.n - 1);
      const std::int64_t i2 = (i1 + rng.between(-r, r) + g.n) % g.n;
      const std::int64_t j2 = (j1 + rng.between(-r, r) + g.n) % g.n;
      a.node = g.index(static_cast<int>(i1), static_cast<int>(j1));
      b.node = g.index(static_cast<int>(i2), static_cast<int>(j2));
    }
    pairs.emplace_back(a, b);
  }
  return pairs;
}

inline constexpr const char* kActionCsvHeader = "x1,t1,x2,t2,gamma,margin";

inline void write_action_row(std::ostream& os, const HarnackCertificate& c) {
  os << c.from.node << ',' << format_number(c.t1) << ',' << c.to.node << ',' << format_number(c.t2) << ','
     << format_number(c.gamma) << ',' << format_number(c.margin) << '\n';
}

}  // namespace harnackflow
