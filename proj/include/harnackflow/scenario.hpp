#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "harnackflow/action.hpp"
#include "harnackflow/config.hpp"
#include "harnackflow/errors.hpp"
#include "harnackflow/flow.hpp"
#include "harnackflow/harnack.hpp"
#include "harnackflow/identity.hpp"
#include "harnackflow/initial_data.hpp"
#include "harnackflow/random.hpp"
#include "harnackflow/snapshot_io.hpp"

namespace harnackflow {

namespace tol {
inline constexpr double kPointwise = 1e-3;
inline constexpr double kClosedForm = 1e-3;
inline constexpr double kMassDrift = 1e-8;
inline constexpr double kAreaRate = 1e-3;
inline constexpr double kEntropySign = 1e-6;
inline constexpr double kMargin = 1e-2;
inline constexpr double kPresetAgreement = 1e-12;
inline constexpr double kRefinementRatio = 3.0;
inline constexpr double kFuzzFactor = 5.0;
}  // namespace tol

/// One checked property. The check passes when observed <= bound (or
/// observed >= bound for lower bounds).
struct Assertion {
  std::string reference;
  std::string detail;
  double observed = 0.0;
  double bound = 0.0;
  bool lower_bound = false;
  bool passed = false;
};

inline Assertion upper(std::string reference, std::string detail, double observed, double bound) {
  return Assertion{std::move(reference), std::move(detail), observed, bound, false, observed <= bound};
}

inline Assertion lower(std::string reference, std::string detail, double observed, double bound) {
  return Assertion{std::move(reference), std::move(detail), observed, bound, true, observed >= bound};
}

struct ScenarioReport {
  std::string name;
  std::vector<Assertion> assertions;
  std::optional<std::string> error;

  bool passed() const {
    return !error && std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.passed; });
  }
  int exit_code() const { return passed() ? 0 : 1; }
};

inline void write_summary(std::ostream& os, const ScenarioReport& rep) {
  os << "scenario " << rep.name << '\n';
  for (const Assertion& a : rep.assertions) {
    os << (a.passed ? "PASS" : "FAIL") << "  " << a.reference << "  [" << a.detail << "]  observed "
       << format_number(a.observed) << (a.lower_bound ? " >= " : " <= ") << format_number(a.bound) << '\n';
  }
  if (rep.error) os << "ERROR  " << *rep.error << '\n';
  const auto passed = std::count_if(rep.assertions.begin(), rep.assertions.end(), [](const Assertion& a) { return a.passed; });
  os << "result " << (rep.passed() ? "PASS" : "FAIL") << " (" << passed << "/" << rep.assertions.size()
     << " assertions)\n";
}

inline constexpr const char* kPlotScript = R"(#!/usr/bin/env python3
"""Plots every monitor column of monitors.csv against time into monitors.png."""
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent
with open(here / "monitors.csv", newline="") as fh:
    rows = list(csv.DictReader(fh))
columns = [c for c in rows[0].keys() if c != "time"] if rows else []
columns = [c for c in columns if any(r[c] for r in rows)]
fig, axes = plt.subplots(len(columns), 1, figsize=(7, 2.2 * max(1, len(columns))), sharex=True, squeeze=False)
for ax, col in zip(axes[:, 0], columns):
    pts = [(float(r["time"]), float(r[col])) for r in rows if r[col]]
    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker=".")
    ax.set_ylabel(col)
    ax.axhline(0.0, color="grey", linewidth=0.5)
axes[-1, 0].set_xlabel("t")
fig.tight_layout()
fig.savefig(here / "monitors.png", dpi=120)
)";

inline FlowState initial_state(const ScenarioConfig& c) {
  SurfaceGeometry geom = c.kind == SurfaceKind::RotSphere ? sphere_geometry(c.n, c.radius, c.phi_amplitude)
                                                          : torus_geometry(c.n, c.length, c.phi_amplitude);
  ScalarField f = initial_profile(geom.grid(), c.profile, c.c1, c.c2);
  return FlowState{0.0, std::move(geom), std::move(f)};
}

inline Trajectory simulate(const ScenarioConfig& c) {
  return run(initial_state(c), c.t_end, c.dt, c.dt_out, c.model, std::string(to_string(c.profile)));
}

namespace detail {

/// Largest increase between consecutive values.
inline double max_increase(const std::vector<double>& xs) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < xs.size(); ++i) worst = std::max(worst, xs[i] - xs[i - 1]);
  return xs.size() < 2 ? 0.0 : worst;
}

struct CurvatureSign {
  double min_r = std::numeric_limits<double>::infinity();
  bool nonnegative() const { return min_r >= 0.0; }
  bool positive() const { return min_r > 0.0; }
};

inline CurvatureSign curvature_sign(const Trajectory& traj) {
  CurvatureSign s;
  for (const FlowState& st : traj.states) s.min_r = std::min(s.min_r, scalar_curvature(st.geom).min());
  return s;
}

}  // namespace detail

/// Random parameter tuple near the presets, with the given potential
/// coefficient. alpha >= 1.5 keeps the P identity defined.
inline HarnackParams fuzz_params(Rng& rng, double c) {
  HarnackParams p;
  do {
    p.alpha = rng.uniform(1.5, 2.5);
    p.beta = rng.uniform(0.5, 1.5);
  } while (std::abs(p.alpha - p.beta) < 0.25);
  p.a = rng.uniform(-4.0, -2.0);
  p.b = rng.uniform(-1.5, 0.5);
  p.c = c;
  p.d = rng.uniform(0.0, 3.0);
  p.lambda = rng.uniform(0.5, 2.5);
  return p;
}

struct PresetAgreement {
  std::string preset;
  double gap = 0.0;  // relative gap of both sides between the two assemblies
};

/// Compares the general-parameter assemblies at a preset with the dedicated
/// assemblies, on both sides of the identity.
inline std::vector<PresetAgreement> preset_agreement(const FlowState& s, const HeatModel& model) {
  std::vector<PresetAgreement> out;
  auto both = [](const ScalarField& a1, const ScalarField& b1, const ScalarField& a2, const ScalarField& b2) {
    return std::max(relative_gap(a1, b1), relative_gap(a2, b2));
  };
  if (model.is_with_potential()) {
    const HarnackParams ph = HarnackParams::harnack_H();
    out.push_back({"harnack_H", both(general_H(s, ph), quantity_H(s), general_H_rhs(s, ph), harnack_H_rhs(s))});
    for (double d : {0.0, 1.0, 2.0}) {
      const HarnackParams pp = HarnackParams::harnack_P(d);
      out.push_back({"harnack_P d=" + format_number(d),
                     both(general_P(s, pp), quantity_P(s, d), general_P_rhs(s, pp), harnack_P_rhs(s, d))});
    }
    const HarnackParams ps = HarnackParams::surface();
    const ScalarField h_surface = laplace_beltrami(s.geom, log_potential_u(s)) - scalar_curvature(s.geom);
    out.push_back({"surface", both(general_H(s, ps), h_surface, general_H_rhs(s, ps), surface_rhs_expanded(s))});
  }
  if (model.is_plain_heat()) {
    const HarnackParams pg = HarnackParams::gradient();
    out.push_back({"gradient", both(general_H(s, pg), gradient_H(s), general_H_rhs(s, pg), gradient_rhs(s))});
  }
  return out;
}

/// Identity residual rows at snapshot k: every preset that matches the
/// trajectory's equation, then `fuzz` random general tuples.
inline std::vector<ResidualReport> identity_rows(const Trajectory& traj, std::size_t k, double d, std::size_t fuzz,
                                                 Rng& rng) {
  std::vector<ResidualReport> rows;
  if (traj.model.is_with_potential()) {
    rows.push_back(residual_general_H(traj, k, HarnackParams::harnack_H()));
    rows.push_back(residual_cor_H(traj, k));
    rows.push_back(residual_general_P(traj, k, HarnackParams::harnack_P(d)));
    rows.push_back(residual_cor_P(traj, k, d));
    rows.push_back(residual_tP(traj, k, d));
    rows.push_back(residual_general_H(traj, k, HarnackParams::surface()));
    const SurfaceResidual sr = residual_surface(traj, k);
    rows.push_back(sr.expanded);
    if (sr.chain) rows.push_back(*sr.chain);
    if (sr.slaved) rows.push_back(*sr.slaved);
  }
  if (traj.model.is_plain_heat()) {
    rows.push_back(residual_general_H(traj, k, HarnackParams::gradient()));
    rows.push_back(residual_grad(traj, k));
  }
  for (std::size_t i = 0; i < fuzz; ++i) {
    HarnackParams p = fuzz_params(rng, traj.model.c);
    rows.push_back(residual_general_H(traj, k, p));
    rows.push_back(residual_general_P(traj, k, p));
  }
  return rows;
}

struct ScenarioOutputs {
  std::string trajectory = "trajectory.bin";
  std::string monitors = "monitors.csv";
  std::string identities = "identities.csv";
  std::string action = "action.csv";
  std::string summary = "summary.txt";
  std::string plot = "plot_monitors.py";
};

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << text;
}

inline void check_properties(const ScenarioConfig& c, const Trajectory& traj, const MonitorSeries& series,
                             ScenarioReport& rep) {
  const double T = c.extinction_time();
  const double t_hi = c.kind == SurfaceKind::RotSphere ? 0.8 * T * (1.0 + 1e-12) : c.t_end * (1.0 + 1e-12);
  std::vector<const FlowState*> window;
  for (const FlowState& s : traj.states) {
    if (s.t >= c.t0 * (1.0 - 1e-12) && s.t <= t_hi) window.push_back(&s);
  }
  const CurvatureSign sign = curvature_sign(traj);
  const bool potential = c.model.is_with_potential();
  const bool sphere = c.kind == SurfaceKind::RotSphere;

  if (c.closed_form && sphere && potential && c.profile == InitialProfile::Constant && c.phi_amplitude == 0.0) {
    double err_r = 0.0, err_f = 0.0;
    const double r0sq = c.radius * c.radius;
    for (const FlowState& s : traj.states) {
      if (s.t > t_hi) break;
      const double r_exact = 2.0 / (r0sq - 2.0 * s.t);
      const double f_exact = c.c1 * r0sq / (r0sq - 2.0 * s.t);
      const ScalarField r = scalar_curvature(s.geom);
      for (std::size_t m = 0; m < r.size(); ++m) {
        err_r = std::max(err_r, std::abs(r[m] - r_exact) / r_exact);
        err_f = std::max(err_f, std::abs(s.f[m] - f_exact) / f_exact);
      }
    }
    rep.assertions.push_back(upper("round sphere R(t)=2/(r0^2-2t)", "max relative error, t<=0.8T", err_r, tol::kClosedForm));
    rep.assertions.push_back(upper("round sphere f(t)=f0 r0^2/(r0^2-2t)", "max relative error, t<=0.8T", err_f, tol::kClosedForm));
  }

  if (sphere && c.mass) {
    const double a0 = area(traj[0].geom);
    double worst = 0.0;
    for (const FlowState& s : traj.states) {
      worst = std::max(worst, std::abs(area(s.geom) - (a0 - 8.0 * std::numbers::pi * s.t)) / a0);
    }
    rep.assertions.push_back(upper("area A(t)=A(0)-8 pi t", "max relative deviation", worst, tol::kAreaRate));
  }

  if (potential && c.mass) {
    const double m0 = mass(traj[0]);
    double drift = 0.0;
    for (std::size_t k = 1; k < traj.size(); ++k) {
      drift = std::max(drift, std::abs(mass(traj[k]) - m0) / (std::abs(m0) * traj[k].t));
    }
    rep.assertions.push_back(upper("mass int f dmu conserved", "max relative drift per unit time", drift, tol::kMassDrift));
  }

  if (potential && sign.nonnegative() && c.harnack) {
    double sup_h = -std::numeric_limits<double>::infinity();
    for (const FlowState* s : window) sup_h = std::max(sup_h, quantity_H(*s).max());
    rep.assertions.push_back(upper("Harnack H<=0", "max over t of sup_x H", sup_h, tol::kPointwise));
    for (double d : {0.0, 1.0, 2.0}) {
      std::vector<double> sup_tp;
      for (const FlowState* s : window) sup_tp.push_back(quantity_tP(*s, d).max());
      rep.assertions.push_back(upper("max tP non-increasing", "d=" + format_number(d) + ", largest increase per output step",
                                     max_increase(sup_tp), tol::kPointwise));
    }
  }

  if (sign.nonnegative() && c.trace) {
    const std::pair<VectorChoice, const char*> choices[] = {
        {VectorChoice::Zero, "V=0"}, {VectorChoice::GradU, "V=grad u"}, {VectorChoice::GradV, "V=grad v"}};
    for (const auto& [v, label] : choices) {
      if (v != VectorChoice::Zero && !potential) continue;
      double lo = std::numeric_limits<double>::infinity();
      for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
        if (traj[k].t < c.t0 * (1.0 - 1e-12) || traj[k].t > t_hi) continue;
        lo = std::min(lo, trace_harnack(traj, k, v).min());
      }
      if (std::isfinite(lo)) rep.assertions.push_back(lower("trace Harnack >= 0", label, lo, -tol::kPointwise));
    }
  }

  if (sphere && sign.positive() && c.lyh) {
    double lo_curv = std::numeric_limits<double>::infinity(), lo_heat = lo_curv;
    for (const FlowState* s : window) {
      lo_curv = std::min(lo_curv, surface_LYH(*s, LyhVariant::Curvature).min());
      if (potential) lo_heat = std::min(lo_heat, surface_LYH(*s, LyhVariant::Heat).min());
    }
    rep.assertions.push_back(lower("Lap ln R + R + 1/t >= 0", "min over grid and t", lo_curv, -tol::kPointwise));
    if (potential) rep.assertions.push_back(lower("Lap ln f + R + 1/t >= 0", "min over grid and t", lo_heat, -tol::kPointwise));
  }

  if (potential && sign.nonnegative() && c.entropy) {
    std::vector<double> fs, ws;
    double worst_sign = -std::numeric_limits<double>::infinity();
    for (const FlowState* s : window) {
      fs.push_back(entropy_F(*s));
      ws.push_back(entropy_W(*s, c.d));
      worst_sign = std::max(worst_sign, fs.back() - tol::kEntropySign * std::abs(fs.back()));
    }
    auto slope = [&](const std::vector<double>& xs) { return max_increase(xs) / c.dt_out; };
    rep.assertions.push_back(upper("entropy F<=0", "max of F - 1e-6|F|", worst_sign, 0.0));
    rep.assertions.push_back(upper("entropy F non-increasing", "largest discrete slope", slope(fs), tol::kPointwise));
    rep.assertions.push_back(upper("entropy W non-increasing", "d=" + format_number(c.d) + ", largest discrete slope",
                                   slope(ws), tol::kPointwise));
  }

  if (c.gradient) {
    double sup = -std::numeric_limits<double>::infinity();
    for (const auto& r : series.records) {
      if (!r.sup_grad) throw Error(ErrorKind::ConstraintViolation, "gradient monitor left 0 < f < 1", r.time);
      sup = std::max(sup, *r.sup_grad);
    }
    rep.assertions.push_back(upper("gradient estimate |grad f|^2 + f^2 ln f/t <= 0", "max over grid and t", sup, tol::kPointwise));
  }
}

}  // namespace detail

/// Certifies the integrated Harnack inequality for the configured pairs and,
/// when the curvature hypothesis holds, for random pairs; writes action CSV rows.
inline void certify_pairs(const ScenarioConfig& c, const Trajectory& traj, Rng& rng, std::ostream& os,
                          ScenarioReport& rep) {
  os << kActionCsvHeader << '\n';
  const bool hypothesis = traj.model.is_with_potential() && detail::curvature_sign(traj).nonnegative();
  std::vector<std::pair<SpaceTimePoint, SpaceTimePoint>> pairs;
  for (const ActionPair& p : c.pairs) {
    pairs.push_back({{p.node1, snapshot_index(traj, p.t1)}, {p.node2, snapshot_index(traj, p.t2)}});
  }
  if (hypothesis && c.random_pairs > 0) {
    for (auto& p : random_pairs(traj, c.t0, c.random_pairs, rng, c.window)) pairs.push_back(p);
  }
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& [a, b] : pairs) {
    const HarnackCertificate cert = check_integrated_harnack(traj, a, b, c.window);
    write_action_row(os, cert);
    worst = std::min(worst, cert.margin);
  }
  if (hypothesis && !pairs.empty()) {
    rep.assertions.push_back(lower("integrated Harnack f(x1,t1) <= f(x2,t2)(t2/t1)^n e^(Gamma/2)",
                                   std::to_string(pairs.size()) + " pairs, min log margin", worst, -tol::kMargin));
  }
}

/// Runs one scenario end to end and writes its artifacts into out_dir.
/// Module errors are caught and reported as a failed run with their time.
inline ScenarioReport run_scenario(const ScenarioConfig& c, const std::filesystem::path& out_dir,
                                   std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  const ScenarioOutputs files;
  ScenarioReport rep{c.name, {}, std::nullopt};
  fs::create_directories(out_dir);
  detail::write_text(out_dir / files.plot, kPlotScript);
  try {
    if (log) *log << c.name << ": integrating to t=" << c.t_end << " with dt=" << c.dt << '\n';
    const Trajectory traj = simulate(c);
    save_trajectory((out_dir / files.trajectory).string(), traj);

    const MonitorSeries series = monitor_series(traj, c.t0, c.d);
    {
      std::ofstream os(out_dir / files.monitors, std::ios::binary | std::ios::trunc);
      write_monitor_csv(os, series);
    }

    Rng rng(c.seed);
    {
      std::ofstream os(out_dir / files.identities, std::ios::binary | std::ios::trunc);
      os << kIdentityCsvHeader << '\n';
      if (c.identities && traj.size() >= 3) {
        std::size_t k = traj.size() / 2;
        while (k + 1 < traj.size() && traj[k].t < c.t0) ++k;
        if (k + 1 < traj.size()) {
          for (const ResidualReport& r : identity_rows(traj, k, c.d, c.fuzz, rng)) write_identity_row(os, r);
          double gap = 0.0;
          for (const PresetAgreement& a : preset_agreement(traj[k], c.model)) gap = std::max(gap, a.gap);
          rep.assertions.push_back(
              upper("preset and general identity assemblies agree", "max relative gap", gap, tol::kPresetAgreement));
        }
      }
    }

    detail::check_properties(c, traj, series, rep);

    {
      std::ofstream os(out_dir / files.action, std::ios::binary | std::ios::trunc);
      certify_pairs(c, traj, rng, os, rep);
    }
  } catch (const Error& e) {
    std::string msg = e.what();
    if (e.time()) msg += " (t=" + format_number(*e.time()) + ")";
    rep.error = msg;
  }
  std::ostringstream summary;
  write_summary(summary, rep);
  detail::write_text(out_dir / files.summary, summary.str());
  if (log) *log << summary.str();
  return rep;
}

/// Integrated Harnack certification alone, over a given trajectory.
inline ScenarioReport run_action(const ScenarioConfig& c, const Trajectory& traj, const std::filesystem::path& out_dir,
                                 std::ostream* log = nullptr) {
  const ScenarioOutputs files;
  ScenarioReport rep{c.name, {}, std::nullopt};
  std::filesystem::create_directories(out_dir);
  try {
    Rng rng(c.seed);
    std::ofstream os(out_dir / files.action, std::ios::binary | std::ios::trunc);
    certify_pairs(c, traj, rng, os, rep);
  } catch (const Error& e) {
    rep.error = e.what();
  }
  std::ostringstream summary;
  write_summary(summary, rep);
  detail::write_text(out_dir / files.summary, summary.str());
  if (log) *log << summary.str();
  return rep;
}

// ---------------------------------------------------------------------------
// Refinement study of the evolution identities.

struct RefinementCase {
  std::string label;
  double value = 0.0;  // max-norm residual
};

struct RefinementLevel {
  int n = 0;
  std::vector<RefinementCase> cases;
  std::vector<ResidualReport> rows;
  double preset_gap = 0.0;
};

struct IdentityStudy {
  std::vector<RefinementLevel> levels;
  double worst_ratio = std::numeric_limits<double>::infinity();  // smallest refinement ratio seen
  double preset_gap = 0.0;
  double fuzz_worst_factor = 0.0;  // largest fuzz residual / matching preset residual
  std::size_t fuzz_count = 0;

  bool converges() const { return worst_ratio >= tol::kRefinementRatio; }
  bool presets_agree() const { return preset_gap <= tol::kPresetAgreement; }
  bool fuzz_bounded() const { return fuzz_worst_factor <= tol::kFuzzFactor; }
  bool passed() const { return converges() && presets_agree() && fuzz_bounded(); }
};

inline std::string case_label(const ResidualReport& r) {
  if (r.identity != "general_H" && r.identity != "general_P") return r.identity;
  const HarnackParams& p = r.params;
  if (p.alpha == 2.0 && p.beta == 1.0) return r.identity + "[harnack]";
  if (p.alpha == 1.0 && p.beta == 0.0) return r.identity + "[surface]";
  if (p.alpha == 0.0) return r.identity + "[gradient]";
  return r.identity;
}

/// Perturbed sphere with the potential equation, evaluated at t = 0.1 with
/// dt proportional to h^2 and snapshot spacing 2 dt.
inline Trajectory identity_sphere_trajectory(int n) {
  const double dt = 0.1 / 400.0 * (64.0 / n) * (64.0 / n);
  const double dt_out = 2.0 * dt;
  const double t_eval = 0.1;
  const SurfaceGeometry geom = sphere_geometry(n, 1.0, 0.15);
  FlowState s{0.0, geom, initial_profile(geom.grid(), InitialProfile::SphereCosine, 1.0, 0.5)};
  const HeatModel m = HeatModel::with_potential();
  s = advance(std::move(s), t_eval - dt_out, dt, m);
  return run(s, t_eval + dt_out, dt, dt_out, m, "cosine");
}

/// Perturbed torus with the plain heat equation, evaluated at t = 0.004.
inline Trajectory identity_torus_trajectory(int n) {
  const double dt = 0.004 / 125.0 * (64.0 / n) * (64.0 / n);
  const double dt_out = 2.0 * dt;
  const double t_eval = 0.004;
  const SurfaceGeometry geom = torus_geometry(n, 1.0, 0.1);
  FlowState s{0.0, geom, initial_profile(geom.grid(), InitialProfile::TorusSineXY, 0.5, 0.25)};
  const HeatModel m = HeatModel::plain_heat();
  s = advance(std::move(s), t_eval - dt_out, dt, m);
  return run(s, t_eval + dt_out, dt, dt_out, m, "sine-xy");
}

/// Runs the identity residuals on `levels` refinements starting at N = base_n
/// and the random-parameter fuzz on the coarsest sphere.
inline IdentityStudy verify_identities(int levels, std::size_t fuzz, std::uint64_t seed, int base_n = 64,
                                       std::ostream* log = nullptr) {
  if (levels < 1) throw Error(ErrorKind::InvalidArgument, "need at least one refinement level");
  IdentityStudy study;
  study.fuzz_count = fuzz;
  for (int l = 0; l < levels; ++l) {
    const int n = base_n << l;
    RefinementLevel level{n, {}, {}, 0.0};
    const Trajectory sphere = identity_sphere_trajectory(n);
    const SurfaceResidual surface = residual_surface(sphere, 1);
    const std::vector<ResidualReport> sphere_rows = {
        residual_general_H(sphere, 1, HarnackParams::harnack_H()), residual_cor_H(sphere, 1),
        residual_general_P(sphere, 1, HarnackParams::harnack_P()), residual_cor_P(sphere, 1),
        residual_tP(sphere, 1), residual_general_H(sphere, 1, HarnackParams::surface()),
        surface.expanded, surface.chain.value(), surface.slaved.value()};
    const Trajectory torus = identity_torus_trajectory(n);
    const std::vector<ResidualReport> torus_rows = {residual_general_H(torus, 1, HarnackParams::gradient()),
                                                    residual_grad(torus, 1)};
    for (const auto& r : sphere_rows) level.cases.push_back({"sphere " + case_label(r), r.max_residual});
    for (const auto& r : torus_rows) level.cases.push_back({"torus " + case_label(r), r.max_residual});
    level.rows = sphere_rows;
    level.rows.insert(level.rows.end(), torus_rows.begin(), torus_rows.end());
    for (const auto& a : preset_agreement(sphere[1], sphere.model)) level.preset_gap = std::max(level.preset_gap, a.gap);
    for (const auto& a : preset_agreement(torus[1], torus.model)) level.preset_gap = std::max(level.preset_gap, a.gap);
    study.preset_gap = std::max(study.preset_gap, level.preset_gap);

    if (l == 0 && fuzz > 0) {
      const double ref_h = sphere_rows[0].max_residual;
      const double ref_p = sphere_rows[2].max_residual;
      Rng rng(seed);
      for (std::size_t i = 0; i < fuzz; ++i) {
        const HarnackParams p = fuzz_params(rng, sphere.model.c);
        const ResidualReport h = residual_general_H(sphere, 1, p);
        study.fuzz_worst_factor = std::max(study.fuzz_worst_factor, h.max_residual / ref_h);
        level.rows.push_back(h);
        const ResidualReport q = residual_general_P(sphere, 1, p);
        study.fuzz_worst_factor = std::max(study.fuzz_worst_factor, q.max_residual / ref_p);
        level.rows.push_back(q);
      }
    }
    if (!study.levels.empty()) {
      const auto& prev = study.levels.back().cases;
      for (std::size_t i = 0; i < prev.size(); ++i) {
        study.worst_ratio = std::min(study.worst_ratio, prev[i].value / level.cases[i].value);
      }
    }
    if (log) *log << "level N=" << n << " done\n";
    study.levels.push_back(std::move(level));
  }
  return study;
}

inline void write_convergence_table(std::ostream& os, const IdentityStudy& study) {
  if (study.levels.empty()) return;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-26s", "identity");
  os << buf;
  for (const auto& lv : study.levels) {
    std::snprintf(buf, sizeof buf, " %12s", ("N=" + std::to_string(lv.n)).c_str());
    os << buf;
  }
  for (std::size_t l = 1; l < study.levels.size(); ++l) {
    std::snprintf(buf, sizeof buf, " %8s", ("ratio" + std::to_string(l)).c_str());
    os << buf;
  }
  os << '\n';
  const auto& first = study.levels.front().cases;
  for (std::size_t i = 0; i < first.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-26s", first[i].label.c_str());
    os << buf;
    for (const auto& lv : study.levels) {
      std::snprintf(buf, sizeof buf, " %12.4e", lv.cases[i].value);
      os << buf;
    }
    for (std::size_t l = 1; l < study.levels.size(); ++l) {
      std::snprintf(buf, sizeof buf, " %8.2f", study.levels[l - 1].cases[i].value / study.levels[l].cases[i].value);
      os << buf;
    }
    os << '\n';
  }
  os << "preset agreement (max relative gap): " << format_number(study.preset_gap)
     << (study.presets_agree() ? "  PASS" : "  FAIL") << '\n';
  if (study.levels.size() > 1) {
    os << "smallest refinement ratio: " << format_number(study.worst_ratio) << (study.converges() ? "  PASS" : "  FAIL")
       << '\n';
  }
  os << "random fuzz (" << study.fuzz_count << " tuples), worst residual / preset residual: "
     << format_number(study.fuzz_worst_factor) << (study.fuzz_bounded() ? "  PASS" : "  FAIL") << '\n';
}

inline void write_identity_csv(std::ostream& os, const IdentityStudy& study) {
  os << kIdentityCsvHeader << '\n';
  for (const auto& lv : study.levels) {
    for (const auto& r : lv.rows) write_identity_row(os, r);
  }
}

// ---------------------------------------------------------------------------
// Sweeps: one worker per scenario, each writing its own directory.

struct SweepResult {
  std::vector<ScenarioReport> reports;
  bool passed() const {
    return std::all_of(reports.begin(), reports.end(), [](const ScenarioReport& r) { return r.passed(); });
  }
};

inline SweepResult run_sweep(const std::vector<ScenarioConfig>& configs, const std::filesystem::path& out_root,
                             unsigned jobs, std::ostream* log = nullptr) {
  SweepResult result;
  result.reports.resize(configs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      std::ostringstream local;
      result.reports[i] = run_scenario(configs[i], out_root / configs[i].name, log ? &local : nullptr);
      if (log) {
        std::lock_guard<std::mutex> lock(log_mutex);
        *log << local.str();
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(configs.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < count; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return result;
}

}  // namespace harnackflow
