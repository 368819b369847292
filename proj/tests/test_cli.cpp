#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "bdsde/cli/commands.hpp"

namespace fs = std::filesystem;
using namespace bdsde;
using namespace bdsde::cli;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static const fs::path dir = fs::temp_directory_path() / ("bdsde_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result run(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const auto err_path = scratch() / ("stderr_" + std::to_string(counter++));
  const std::string cmd = env + " " + BDSDE_CLI_PATH + " " + args + " 2>" + err_path.string();
  FILE* pipe = ::popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out, slurp(err_path)};
}

std::string config(const std::string& name) { return std::string(BDSDE_CONFIG_DIR) + "/" + name; }

fs::path write_config(const std::string& name, const std::string& text) {
  const auto p = scratch() / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

const std::string kModel =
    "model:\n  a1: 2\n  b1: 1\n  c1: 1\n  a2: 0.1\n  b2: 1\n  c2: 2\n  m1: 1\n  m2: 1\n  m3: 0\n  alpha: 1\n  beta: 0.5\n";

// Every output file except the manifest, plus the manifest without its runtime block.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name == "manifest.json") {
      auto m = json::parse(slurp(e.path()));
      m.erase("runtime");
      files[name] = m.dump();
    } else {
      files[name] = slurp(e.path());
    }
  }
  return files;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Format, SeventeenSignificantDigits) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(0.3), "0.29999999999999999");
  EXPECT_EQ(format_double(-2.5e-300), "-2.5e-300");
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
}

TEST(Digest, Sha256KnownAnswer) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Config, UnknownKeyNamesLine) {
  try {
    parse_config("seed: 1\n" + kModel + "simulation:\n  dt: 0.01\n  horizn: 5\n", "x.yaml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    EXPECT_NE(std::string(e.what()).find("x.yaml:16:"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("horizn"), std::string::npos);
  }
}

TEST(Config, MissingCoefficientAndDefaults) {
  EXPECT_THROW(parse_config("model:\n  a1: 2\n"), Error);
  const auto c = parse_config(kModel);
  EXPECT_EQ(c.seed, 0u);
  EXPECT_EQ(c.simulation.trajectories, 1);
  EXPECT_EQ(c.model.c2, 2.0);
  EXPECT_FALSE(c.sweep);
}

TEST(Config, InvalidCoefficientReportsItsLine) {
  auto c = parse_config("seed: 3\n" + kModel, "m.yaml");
  c.model.b1 = -1;
  try {
    model_params(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    EXPECT_NE(std::string(e.what()).find("m.yaml:4:"), std::string::npos) << e.what();
  }
}

TEST(Config, BadValues) {
  EXPECT_THROW(parse_config(kModel + "simulation:\n  mode: both\n"), Error);
  EXPECT_THROW(parse_config(kModel + "simulation:\n  dt: -1\n"), Error);
  EXPECT_THROW(parse_config(kModel + "simulation:\n  dt: abc\n"), Error);
  EXPECT_THROW(parse_config(kModel + "sweep:\n  axes:\n    - {coefficient: b9, lo: 1, hi: 2}\n"), Error);
  EXPECT_THROW(parse_config(kModel + "lie_rank:\n  depth: 7\n"), Error);
  EXPECT_THROW(parse_config("model: [1, 2\n"), Error);
}

TEST(Workers, FlagBeatsEnvironment) {
  ::setenv("BDSDE_WORKERS", "3", 1);
  EXPECT_EQ(resolve_workers(std::nullopt), 3u);
  EXPECT_EQ(resolve_workers(2u), 2u);
  ::setenv("BDSDE_WORKERS", "zero", 1);
  EXPECT_THROW(resolve_workers(std::nullopt), Error);
  EXPECT_EQ(resolve_workers(1u), 1u);
  ::unsetenv("BDSDE_WORKERS");
  EXPECT_GE(resolve_workers(std::nullopt), 1u);
}

TEST(Cli, ClassifyReference) {
  const auto out = scratch() / "classify_ref";
  const auto r = run("classify --config " + config("reference.yaml") + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "lambda=0.884371 regime=Coexistence\n");
  const auto j = json::parse(slurp(out / "classify.json"));
  EXPECT_NEAR(j["lambda"].get<double>(), 0.884371064894219, 1e-9);
  EXPECT_EQ(j["regime"], "Coexistence");
}

TEST(Cli, ClassifyBothExtinctOmitsLambda) {
  const auto out = scratch() / "classify_both";
  const auto r = run("classify --config " + config("both_extinct.yaml") + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "regime=BothExtinct\n");
  EXPECT_FALSE(json::parse(slurp(out / "classify.json")).contains("lambda"));
}

TEST(Cli, ClassifyExtinction) {
  const auto r = run("classify --config " + config("extinction.yaml") + " --out " + (scratch() / "ext").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "lambda=-0.114063 regime=PredatorExtinct\n");
}

TEST(Cli, CriticalBandExitsThree) {
  const auto r = run("classify --config " + config("reference.yaml") + " --eps-critical 1 --out " +
                     (scratch() / "crit").string());
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.out, "lambda=0.884371 regime=Critical\n");
}

TEST(Cli, NegativeCoefficientExitsTwo) {
  std::string text = "seed: 1\n" + kModel;
  text.replace(text.find("b1: 1"), 5, "b1: -1");
  const auto p = write_config("neg_b1.yaml", text);
  const auto r = run("classify --config " + p.string() + " --out " + (scratch() / "neg").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("neg_b1.yaml:4:"), std::string::npos) << r.err;
}

TEST(Cli, UnknownKeyExitsTwo) {
  const auto p = write_config("typo.yaml", "seed: 1\n" + kModel + "  gamma: 3\n");
  const auto r = run("classify --config " + p.string() + " --out " + (scratch() / "typo").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("typo.yaml:14:"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("gamma"), std::string::npos);
}

TEST(Cli, MissingConfigAndBadUsageExitTwo) {
  EXPECT_EQ(run("classify --config /nonexistent.yaml --out " + (scratch() / "none").string()).code, 2);
  EXPECT_EQ(run("classify").code, 2);
  EXPECT_EQ(run("frobnicate --config x").code, 2);
}

TEST(Cli, EnvironmentWorkersHonoredOnlyWithoutFlag) {
  const std::string base = "classify --config " + config("reference.yaml") + " --out " + (scratch() / "env").string();
  EXPECT_EQ(run(base, "BDSDE_WORKERS=bogus").code, 2);
  EXPECT_EQ(run(base + " --workers 1", "BDSDE_WORKERS=bogus").code, 0);
}

TEST(Cli, SweepSchema) {
  const auto out = scratch() / "sweep";
  const auto r = run("sweep --config " + config("sweep_b2.yaml") + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(out / "sweep.csv"));
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[0], "b2,lambda,regime,ji,lw_applicable,lw_extinct,lw_persist");
  EXPECT_EQ(rows[1].substr(0, rows[1].find(',')), "0.0001");
  EXPECT_EQ(rows[9].substr(0, rows[9].find(',')), "10");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_NE(rows[i].find(",Coexistence,"), std::string::npos) << rows[i];
    EXPECT_EQ(std::count(rows[i].begin(), rows[i].end(), ','), 6);
  }
  EXPECT_EQ(slurp(out / "sweep.csv").find('\r'), std::string::npos);
}

TEST(Cli, SweepCellCapExitsFive) {
  const auto p = write_config("cap.yaml", "seed: 1\n" + kModel +
                                              "sweep:\n  cell_cap: 5\n  axes:\n"
                                              "    - {coefficient: b2, lo: 0.1, hi: 1, steps: 9}\n");
  EXPECT_EQ(run("sweep --config " + p.string() + " --out " + (scratch() / "cap").string()).code, 5);
}

TEST(Cli, TrajectoryCapExitsFive) {
  const auto p = write_config("tcap.yaml", "seed: 1\n" + kModel +
                                               "simulation:\n  horizon: 1\n  trajectories: 3\n"
                                               "limits:\n  max_trajectories: 2\n");
  EXPECT_EQ(run("simulate --config " + p.string() + " --out " + (scratch() / "tcap").string()).code, 5);
}

TEST(Cli, StepOverflowExitsFour) {
  std::string text = "seed: 1\n" + kModel + "simulation:\n  dt: 1\n  horizon: 50\n";
  text.replace(text.find("a1: 2"), 5, "a1: 800");
  text.replace(text.find("b1: 1"), 5, "b1: 1.0e-300");
  const auto p = write_config("overflow.yaml", text);
  const auto r = run("simulate --config " + p.string() + " --out " + (scratch() / "overflow").string());
  EXPECT_EQ(r.code, 4) << r.err;
}

TEST(Cli, SimulateWritesTrajectoriesAndManifest) {
  const auto p = write_config("sim.yaml", "seed: 5\n" + kModel +
                                              "simulation:\n  dt: 0.01\n  horizon: 1\n  trajectories: 2\n");
  const auto out = scratch() / "sim";
  ASSERT_EQ(run("simulate --config " + p.string() + " --out " + out.string()).code, 0);
  const auto rows = lines(slurp(out / "trajectory_0001.csv"));
  ASSERT_EQ(rows.size(), 102u);
  EXPECT_EQ(rows[0], "t,u,v,x,y");
  EXPECT_EQ(rows[1], "0,0,0,1,1");
  const auto m = json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(m["seed"], 5);
  EXPECT_EQ(m["command"], "simulate");
  ASSERT_EQ(m["outputs"].size(), 2u);
  for (const auto& f : m["outputs"])
    EXPECT_EQ(f["sha256"].get<std::string>(), sha256_hex(slurp(out / f["path"].get<std::string>())));
  EXPECT_TRUE(m["runtime"].contains("wall_clock_seconds"));
}

TEST(Cli, SeedFlagOverridesConfig) {
  const auto p = write_config("seed.yaml", "seed: 5\n" + kModel + "simulation:\n  dt: 0.01\n  horizon: 1\n");
  const auto a = scratch() / "seed_a", b = scratch() / "seed_b";
  ASSERT_EQ(run("simulate --config " + p.string() + " --out " + a.string()).code, 0);
  ASSERT_EQ(run("simulate --config " + p.string() + " --seed 6 --out " + b.string()).code, 0);
  EXPECT_NE(slurp(a / "trajectory_0000.csv"), slurp(b / "trajectory_0000.csv"));
  EXPECT_EQ(json::parse(slurp(b / "manifest.json"))["seed"], 6);
}

TEST(Cli, SupportFullPlaneFractionsAreZero) {
  const auto p = write_config("full.yaml", "seed: 2\n" + kModel +
                                               "simulation:\n  dt: 0.01\n  horizon: 20\n  trajectories: 3\n");
  const auto out = scratch() / "full";
  const auto r = run("support --config " + p.string() + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(out / "support.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "trajectory,fraction");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i], std::to_string(i - 1) + ",0");
  EXPECT_EQ(json::parse(slurp(out / "support.json"))["control_set"]["kind"], "FullPlane");
}

TEST(Cli, ErgodicIdenticalAcrossWorkerCounts) {
  const auto p = write_config("erg.yaml", "seed: 9\n" + kModel +
                                              "simulation:\n  dt: 0.01\n  horizon: 200\n  thinning: 2\n"
                                              "  trajectories: 6\n"
                                              "ergodic:\n  functionals: [\"x^1\", \"y^1\", \"response\"]\n"
                                              "  tv: {x0: 5, y0: 5, windows: 2}\n");
  const auto a = scratch() / "erg_1", b = scratch() / "erg_4";
  ASSERT_EQ(run("ergodic --config " + p.string() + " --workers 1 --out " + a.string()).code, 0);
  ASSERT_EQ(run("ergodic --config " + p.string() + " --workers 4 --out " + b.string()).code, 0);
  const auto sa = snapshot(a), sb = snapshot(b);
  EXPECT_EQ(sa.size(), 5u);
  EXPECT_EQ(sa, sb);
}

TEST(Cli, ErgodicUnknownFunctionalExitsTwo) {
  const auto p = write_config("badf.yaml", "seed: 9\n" + kModel +
                                               "simulation:\n  horizon: 1\nergodic:\n  functionals: [\"z^2\"]\n");
  const auto r = run("ergodic --config " + p.string() + " --out " + (scratch() / "badf").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("badf.yaml:17:"), std::string::npos) << r.err;
}

TEST(Cli, LieRankSmallGrid) {
  const auto p = write_config("lie.yaml", "seed: 1\n" + kModel +
                                              "lie_rank:\n  depth: 2\n  variant: ideal\n"
                                              "  grid: {u_min: -1, u_max: 1, u_points: 3, v_min: -1, v_max: 1, v_points: 2}\n");
  const auto out = scratch() / "lie";
  const auto r = run("lie-rank --config " + p.string() + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "variant=ideal points=6 deficient=0\n");
  const auto rows = lines(slurp(out / "lie_rank.csv"));
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0], "variant,u,v,rank");
  EXPECT_EQ(rows[1], "ideal,-1,-1,2");
}

namespace {

class ScratchCleanup : public ::testing::Environment {
 public:
  void TearDown() override {
    std::error_code ec;
    fs::remove_all(scratch(), ec);
  }
};

const auto* const kCleanup = ::testing::AddGlobalTestEnvironment(new ScratchCleanup);

}  // namespace
