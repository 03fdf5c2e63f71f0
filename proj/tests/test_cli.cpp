#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "harnackflow/config.hpp"
#include "harnackflow/scenario.hpp"
#include "harnackflow/snapshot_io.hpp"

using namespace harnackflow;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = HARNACKFLOW_SOURCE_DIR;

ScenarioConfig load(const fs::path& path) {
  std::ifstream in(path);
  return parse_config(in);
}

Error error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e;
  }
  return Error(ErrorKind::Io, "no error");
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("harnackflow-test-" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Config, MinimalSphereGetsDefaults) {
  const ScenarioConfig c = parse_config("[flow]\nt_end = 0.1\n");
  EXPECT_EQ(c.kind, SurfaceKind::RotSphere);
  EXPECT_EQ(c.n, 128);
  EXPECT_TRUE(c.model.is_with_potential());
  EXPECT_DOUBLE_EQ(c.dt_out, 0.001);
  EXPECT_GT(c.dt, 0.0);
  EXPECT_LE(c.dt, cfl_bound_over_run(c));
  EXPECT_NO_THROW(steps_per_output(c.dt, c.dt_out));
  EXPECT_NEAR(c.t0, 0.005, 1e-15);
  EXPECT_EQ(c.random_pairs, 20u);
  EXPECT_EQ(c.window, 5);
  EXPECT_NEAR(c.extinction_time(), 0.5, 1e-6);
}

TEST(Config, FullGrammar) {
  const ScenarioConfig c = parse_config(
      "# comment\n"
      "[scenario]\nname = demo  # trailing\n"
      "[geometry]\nkind = torus\nn = 32\nlength = 2\nphi_amplitude = 0.1\n"
      "[initial]\nprofile = sine-xy\nc1 = 0.5\nc2 = 0.25\n"
      "[flow]\nequation = plain-heat\nt_end = 0.02\ndt_out = 0.002\n"
      "[monitors]\nd = 2\ngradient = yes\nentropy = off\n"
      "[identities]\nenabled = false\nfuzz = 7\n"
      "[action]\nrandom_pairs = 3\nwindow = 3\npair = 5, 0.004, 6, 0.01\n"
      "[output]\ndir = somewhere\nseed = 42\n");
  EXPECT_EQ(c.name, "demo");
  EXPECT_EQ(c.kind, SurfaceKind::Torus);
  EXPECT_EQ(c.n, 32);
  EXPECT_EQ(c.length, 2.0);
  EXPECT_EQ(c.profile, InitialProfile::TorusSineXY);
  EXPECT_TRUE(c.model.is_plain_heat());
  EXPECT_EQ(c.d, 2.0);
  EXPECT_TRUE(c.gradient);
  EXPECT_FALSE(c.entropy);
  EXPECT_FALSE(c.identities);
  EXPECT_EQ(c.fuzz, 7u);
  ASSERT_EQ(c.pairs.size(), 1u);
  EXPECT_EQ(c.pairs[0].node2, 6u);
  EXPECT_EQ(c.pairs[0].t1, 0.004);
  EXPECT_EQ(c.out_dir, "somewhere");
  EXPECT_EQ(c.seed, 42u);
}

TEST(Config, CflViolationNamesTheBound) {
  const Error e = error_of("[flow]\nt_end = 0.1\ndt = 0.01\n");
  EXPECT_EQ(e.kind(), ErrorKind::ConstraintViolation);
  EXPECT_NE(std::string(e.what()).find("CFL bound 0.2*h^2*min(e^{2phi})"), std::string::npos) << e.what();
}

TEST(Config, UnknownKeyIsNamed) {
  const Error e = error_of("[flow]\nt_end = 0.2\ndtt = 0.001\n");
  EXPECT_EQ(e.kind(), ErrorKind::UnknownKey);
  EXPECT_NE(std::string(e.what()).find("flow.dtt"), std::string::npos);
  EXPECT_EQ(error_of("[geometry]\nt_end = 0.2\n").kind(), ErrorKind::UnknownKey);
  EXPECT_EQ(error_of("t_end = 0.2\n").kind(), ErrorKind::UnknownKey);
}

TEST(Config, SyntaxErrorsCarryLineNumbers) {
  const Error e = error_of("[flow]\nt_end 0.1\n");
  EXPECT_EQ(e.kind(), ErrorKind::SyntaxError);
  EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  EXPECT_EQ(error_of("[flow\n").kind(), ErrorKind::SyntaxError);
  EXPECT_EQ(error_of("[flow]\nt_end = abc\n").kind(), ErrorKind::SyntaxError);
  EXPECT_EQ(error_of("[flow]\nt_end = 0.1x\n").kind(), ErrorKind::SyntaxError);
  EXPECT_EQ(error_of("[monitors]\nmass = maybe\n").kind(), ErrorKind::SyntaxError);
  EXPECT_EQ(error_of("[action]\npair = 1, 2\n").kind(), ErrorKind::SyntaxError);
  EXPECT_EQ(error_of("[initial]\nprofile = wobbly\n").kind(), ErrorKind::SyntaxError);
}

TEST(Config, CrossFieldConstraints) {
  EXPECT_EQ(error_of("[flow]\nt_end = 0.5\n").kind(), ErrorKind::ConstraintViolation);
  EXPECT_EQ(error_of("[geometry]\nn = 3\n[flow]\nt_end = 0.1\n").kind(), ErrorKind::ConstraintViolation);
  EXPECT_EQ(error_of("[monitors]\ngradient = on\n[flow]\nt_end = 0.1\n").kind(), ErrorKind::ConstraintViolation);
  EXPECT_EQ(error_of("[geometry]\nkind = torus\nn = 16\n[flow]\nequation = plain-heat\nt_end = 0.01\n"
                     "[monitors]\ngradient = on\n")
                .kind(),
            ErrorKind::ConstraintViolation);  // constant profile f = 1 is not below 1
  EXPECT_EQ(error_of("[flow]\nt_end = 0.1\n[action]\npair = 500, 0.01, 3, 0.02\n").kind(),
            ErrorKind::ConstraintViolation);
  EXPECT_EQ(error_of("[flow]\nt_end = 0.1\n[action]\npair = 5, 0.02, 3, 0.01\n").kind(),
            ErrorKind::ConstraintViolation);
  EXPECT_EQ(error_of("[flow]\nt_end = 0.1\ndt_out = 0.0003\ndt = 0.0002\n[geometry]\nn = 16\n").kind(),
            ErrorKind::ConstraintViolation);
  EXPECT_EQ(error_of("").kind(), ErrorKind::ConstraintViolation);
}

TEST(Config, ShippedScenariosParse) {
  for (const auto& entry : fs::directory_iterator(kSource / "scenarios")) {
    EXPECT_NO_THROW(load(entry.path())) << entry.path();
  }
}

TEST(Trajectory, BinaryRoundTrip) {
  const ScenarioConfig c = parse_config("[geometry]\nkind = torus\nn = 8\nphi_amplitude = 0.1\n"
                                        "[initial]\nprofile = sine-xy\nc1 = 0.5\nc2 = 0.25\n"
                                        "[flow]\nt_end = 0.001\n");
  const Trajectory traj = simulate(c);
  std::stringstream buf;
  write_trajectory(buf, traj);
  const Trajectory back = read_trajectory(buf);
  EXPECT_EQ(back.dt, traj.dt);
  EXPECT_EQ(back.dt_out, traj.dt_out);
  EXPECT_EQ(back.model.c, traj.model.c);
  EXPECT_EQ(back.initial_id, traj.initial_id);
  EXPECT_EQ(back.grid().kind, SurfaceKind::Torus);
  EXPECT_EQ(back.grid().n, 8);
  ASSERT_EQ(back.size(), traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    EXPECT_EQ(back[k].t, traj[k].t);
    EXPECT_EQ(std::memcmp(back[k].f.values().data(), traj[k].f.values().data(), 64 * sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(back[k].geom.phi().values().data(), traj[k].geom.phi().values().data(),
                          64 * sizeof(double)),
              0);
  }
}

TEST(Trajectory, CorruptInputRejected) {
  std::stringstream bad("NOTATRAJ........");
  try {
    read_trajectory(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
  const ScenarioConfig c = parse_config("[geometry]\nn = 8\n[flow]\nt_end = 0.01\n");
  std::stringstream full;
  write_trajectory(full, simulate(c));
  const std::string bytes = full.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(read_trajectory(truncated), Error);
  EXPECT_THROW(load_trajectory("/nonexistent/trajectory.bin"), Error);
}

TEST(RunScenario, SphereConstantPassesAndWritesArtifacts) {
  const ScenarioConfig c = load(kSource / "scenarios" / "sphere-constant.cfg");
  const fs::path dir = scratch_dir("sphere-constant");
  const ScenarioReport rep = run_scenario(c, dir);
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(rep.exit_code(), 0);
  EXPECT_FALSE(rep.error.has_value());
  const ScenarioOutputs files;
  for (const std::string& f : {files.trajectory, files.monitors, files.identities, files.action, files.summary,
                               files.plot}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  std::istringstream monitors(slurp(dir / files.monitors));
  std::string header;
  std::getline(monitors, header);
  EXPECT_EQ(header, kMonitorCsvHeader);
  std::istringstream action(slurp(dir / files.action));
  std::getline(action, header);
  EXPECT_EQ(header, kActionCsvHeader);
  std::size_t rows = 0;
  for (std::string line; std::getline(action, line);) ++rows;
  EXPECT_EQ(rows, 21u);
  const std::string summary = slurp(dir / files.summary);
  EXPECT_EQ(summary.rfind("scenario sphere-constant\n", 0), 0u);
  EXPECT_NE(summary.find("result PASS"), std::string::npos);
  EXPECT_EQ(load_trajectory((dir / files.trajectory).string()).size(), 101u);
}

TEST(RunScenario, RerunIsByteIdentical) {
  ScenarioConfig c = load(kSource / "scenarios" / "sphere-cosine.cfg");
  c.n = 32;
  finalize(c);
  const fs::path a = scratch_dir("rerun-a"), b = scratch_dir("rerun-b");
  run_scenario(c, a);
  run_scenario(c, b);
  for (const auto& entry : fs::directory_iterator(a)) {
    EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path().filename();
  }
}

TEST(RunScenario, PositivityFailureIsReportedWithTime) {
  const ScenarioConfig c = load(kSource / "tests" / "data" / "positivity-failure.cfg");
  const ScenarioReport rep = run_scenario(c, scratch_dir("positivity"));
  ASSERT_TRUE(rep.error.has_value());
  EXPECT_NE(rep.error->find("PositivityLost"), std::string::npos) << *rep.error;
  EXPECT_NE(rep.error->find("(t="), std::string::npos) << *rep.error;
  EXPECT_FALSE(rep.passed());
  EXPECT_EQ(rep.exit_code(), 1);
}

TEST(RunAction, ReadsStoredTrajectory) {
  const ScenarioConfig c = load(kSource / "scenarios" / "sphere-constant.cfg");
  const fs::path dir = scratch_dir("action");
  const ScenarioReport rep = run_action(c, simulate(c), dir);
  EXPECT_TRUE(rep.passed());
  EXPECT_TRUE(fs::exists(dir / "action.csv"));
}

TEST(Sweep, RunsScenariosConcurrently) {
  std::vector<ScenarioConfig> configs;
  for (const char* name : {"torus-flat-heat.cfg", "sphere-cosine.cfg"}) {
    ScenarioConfig c = load(kSource / "scenarios" / name);
    c.n = c.kind == SurfaceKind::Torus ? 32 : 64;
    c.dt = 0.0;
    finalize(c);
    configs.push_back(c);
  }
  const fs::path root = scratch_dir("sweep");
  const SweepResult res = run_sweep(configs, root, 2);
  ASSERT_EQ(res.reports.size(), 2u);
  EXPECT_EQ(res.reports[0].name, "torus-flat-heat");
  EXPECT_EQ(res.reports[1].name, "sphere-cosine");
  EXPECT_TRUE(res.passed());
  EXPECT_TRUE(fs::exists(root / "torus-flat-heat" / "summary.txt"));
  EXPECT_TRUE(fs::exists(root / "sphere-cosine" / "summary.txt"));
}

TEST(Summary, LineFormat) {
  ScenarioReport rep{"demo", {upper("ref a", "x", 0.5, 1.0), lower("ref b", "y", 0.5, 1.0)}, std::nullopt};
  std::ostringstream os;
  write_summary(os, rep);
  EXPECT_EQ(os.str(),
            "scenario demo\n"
            "PASS  ref a  [x]  observed 0.5 <= 1\n"
            "FAIL  ref b  [y]  observed 0.5 >= 1\n"
            "result FAIL (1/2 assertions)\n");
}
