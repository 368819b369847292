#ifndef BDSDE_CLI_CONFIG_HPP
#define BDSDE_CLI_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "bdsde/error.hpp"
#include "bdsde/geometry.hpp"
#include "bdsde/lie.hpp"
#include "bdsde/model.hpp"
#include "bdsde/simulate.hpp"
#include "bdsde/threshold.hpp"

namespace bdsde::cli {

/// Uniform bin edges lo, lo + (hi - lo)/bins, ..., hi.
struct HistogramAxis {
  double lo = 0.0;
  double hi = 1.0;
  int bins = 10;

  std::vector<double> edges() const {
    std::vector<double> e(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) e[static_cast<std::size_t>(i)] = i == bins ? hi : lo + (hi - lo) * i / bins;
    return e;
  }
};

struct SimulationSection {
  double dt = 1e-3;
  double horizon = 1e4;
  double x0 = 1.0;
  double y0 = 1.0;
  NoiseMode mode = NoiseMode::Independent;
  int thinning = 1;
  int trajectories = 1;
  double burn_in = 0.5;
};

struct ClassifySection {
  double eps_critical = kDefaultEpsCritical;
  double tolerance = 1e-10;
};

struct TvSection {
  double x0 = 5.0;  // second initial condition
  double y0 = 5.0;
  int windows = 2;
};

struct ErgodicSection {
  std::vector<std::string> functionals{"x^1", "y^1"};
  HistogramAxis x_hist{0.0, 8.0, 40};
  HistogramAxis y_hist{0.0, 5.0, 25};
  bool lyapunov = true;
  bool occupation = true;
  std::optional<TvSection> tv;
  int functionals_line = 0;
};

struct SupportSection {
  double margin = 0.05;
  double tolerance = 1e-6;
  double z_lo = kCStarScanLo;
  double z_hi = kCStarScanHi;
};

struct LieSection {
  int depth = 3;
  std::vector<lie::Variant> variants{lie::Variant::Full, lie::Variant::Ideal};
  lie::Grid grid;
};

struct SweepSection {
  std::vector<SweepAxis> axes;
  std::size_t cell_cap = kDefaultCellCap;
};

struct Limits {
  int max_trajectories = 1024;
  std::int64_t max_csv_rows = 2'000'000;
};

struct ScenarioConfig {
  std::uint64_t seed = 0;
  Coefficients model;
  SimulationSection simulation;
  ClassifySection classify;
  ErgodicSection ergodic;
  SupportSection support;
  LieSection lie_rank;
  std::optional<SweepSection> sweep;
  Limits limits;

  std::string path;
  int model_line = 0;                         // 1-based line of the model section
  std::vector<std::pair<std::string, int>> coefficient_lines;  // 1-based line of each coefficient

  int line_of(const std::string& coefficient) const {
    for (const auto& [name, line] : coefficient_lines)
      if (name == coefficient) return line;
    return model_line;
  }
};

namespace detail {

inline std::string where(const std::string& path, const YAML::Node& n) {
  const auto m = n.Mark();
  return path + ":" + std::to_string(m.line + 1) + ": ";
}

[[noreturn]] inline void config_error(const std::string& path, const YAML::Node& n, const std::string& msg) {
  throw Error(ErrorCode::ConfigError, where(path, n) + msg);
}

class Section {
 public:
  Section(std::string path, std::string name, YAML::Node node, std::set<std::string> allowed)
      : path_(std::move(path)), name_(std::move(name)), node_(std::move(node)) {
    if (!node_.IsMap()) config_error(path_, node_, "section '" + name_ + "' must be a mapping");
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) config_error(path_, kv.first, "unknown key '" + key + "' in section '" + name_ + "'");
    }
  }

  bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }
  YAML::Node node(const std::string& key) const { return node_[key]; }
  const YAML::Node& self() const { return node_; }
  int line(const std::string& key) const {
    for (const auto& kv : node_)
      if (kv.first.as<std::string>() == key) return kv.first.Mark().line + 1;
    return node_.Mark().line + 1;
  }

  template <class T>
  void read(const std::string& key, T& out) const {
    const auto n = node_[key];
    if (!n) return;
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      config_error(path_, n, "bad value for '" + name_ + "." + key + "'");
    }
  }

  void read_finite(const std::string& key, double& out) const {
    read(key, out);
    if (has(key) && !std::isfinite(out)) config_error(path_, node_[key], "'" + name_ + "." + key + "' must be finite");
  }

  void require(const std::string& key) const {
    if (!has(key)) config_error(path_, node_, "section '" + name_ + "' is missing '" + key + "'");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    config_error(path_, has(key) ? node_[key] : node_, "'" + name_ + "." + key + "': " + msg);
  }

 private:
  std::string path_;
  std::string name_;
  YAML::Node node_;
};

inline HistogramAxis read_axis(const std::string& path, const std::string& name, const YAML::Node& n) {
  Section s(path, name, n, {"lo", "hi", "bins"});
  HistogramAxis a;
  s.read_finite("lo", a.lo);
  s.read_finite("hi", a.hi);
  s.read("bins", a.bins);
  if (!(a.lo < a.hi)) s.fail("hi", "must exceed lo");
  if (a.bins < 1) s.fail("bins", "must be >= 1");
  return a;
}

}  // namespace detail

/// Parses a scenario from YAML text. Every section is optional except
/// `model`; unknown keys anywhere are errors that name the offending line.
inline ScenarioConfig parse_config(const std::string& text, const std::string& path = "<config>") {
  using detail::Section;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorCode::ConfigError, path + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  ScenarioConfig cfg;
  cfg.path = path;
  if (!root || root.IsNull()) throw Error(ErrorCode::ConfigError, path + ":1: empty configuration");
  Section top(path, "<top>", root,
              {"seed", "model", "simulation", "classify", "ergodic", "support", "lie_rank", "sweep", "limits"});
  top.read("seed", cfg.seed);

  top.require("model");
  {
    std::set<std::string> names(kCoefficientNames.begin(), kCoefficientNames.end());
    Section m(path, "model", top.node("model"), names);
    cfg.model_line = top.line("model");
    for (const auto& name : kCoefficientNames) {
      m.require(std::string(name));
      m.read_finite(std::string(name), *coefficient_slot(cfg.model, name));
      cfg.coefficient_lines.emplace_back(std::string(name), m.line(std::string(name)));
    }
  }

  if (top.has("simulation")) {
    Section s(path, "simulation", top.node("simulation"),
              {"dt", "horizon", "x0", "y0", "mode", "thinning", "trajectories", "burn_in"});
    auto& sim = cfg.simulation;
    s.read_finite("dt", sim.dt);
    s.read_finite("horizon", sim.horizon);
    s.read_finite("x0", sim.x0);
    s.read_finite("y0", sim.y0);
    s.read("thinning", sim.thinning);
    s.read("trajectories", sim.trajectories);
    s.read_finite("burn_in", sim.burn_in);
    std::string mode = "independent";
    s.read("mode", mode);
    if (mode == "independent") sim.mode = NoiseMode::Independent;
    else if (mode == "shared") sim.mode = NoiseMode::Shared;
    else s.fail("mode", "expected 'independent' or 'shared'");
    if (!(sim.dt > 0.0)) s.fail("dt", "must be positive");
    if (!(sim.horizon >= sim.dt)) s.fail("horizon", "must be at least dt");
    if (!(sim.x0 > 0.0)) s.fail("x0", "must be positive");
    if (!(sim.y0 > 0.0)) s.fail("y0", "must be positive");
    if (sim.thinning < 1) s.fail("thinning", "must be >= 1");
    if (sim.trajectories < 1) s.fail("trajectories", "must be >= 1");
    if (!(sim.burn_in >= 0.0 && sim.burn_in < 1.0)) s.fail("burn_in", "must lie in [0, 1)");
  }

  if (top.has("classify")) {
    Section s(path, "classify", top.node("classify"), {"eps_critical", "tolerance"});
    s.read_finite("eps_critical", cfg.classify.eps_critical);
    s.read_finite("tolerance", cfg.classify.tolerance);
    if (!(cfg.classify.eps_critical > 0.0)) s.fail("eps_critical", "must be positive");
    if (!(cfg.classify.tolerance > 0.0)) s.fail("tolerance", "must be positive");
  }

  if (top.has("ergodic")) {
    Section s(path, "ergodic", top.node("ergodic"),
              {"functionals", "x_histogram", "y_histogram", "lyapunov", "occupation", "tv"});
    auto& e = cfg.ergodic;
    s.read("functionals", e.functionals);
    e.functionals_line = s.line("functionals");
    s.read("lyapunov", e.lyapunov);
    s.read("occupation", e.occupation);
    if (s.has("x_histogram")) e.x_hist = detail::read_axis(path, "ergodic.x_histogram", s.node("x_histogram"));
    if (s.has("y_histogram")) e.y_hist = detail::read_axis(path, "ergodic.y_histogram", s.node("y_histogram"));
    if (s.has("tv")) {
      Section t(path, "ergodic.tv", s.node("tv"), {"x0", "y0", "windows"});
      TvSection tv;
      t.read_finite("x0", tv.x0);
      t.read_finite("y0", tv.y0);
      t.read("windows", tv.windows);
      if (!(tv.x0 > 0.0)) t.fail("x0", "must be positive");
      if (!(tv.y0 > 0.0)) t.fail("y0", "must be positive");
      if (tv.windows < 1) t.fail("windows", "must be >= 1");
      e.tv = tv;
    }
  }

  if (top.has("support")) {
    Section s(path, "support", top.node("support"), {"margin", "tolerance", "z_lo", "z_hi"});
    auto& sp = cfg.support;
    s.read_finite("margin", sp.margin);
    s.read_finite("tolerance", sp.tolerance);
    s.read_finite("z_lo", sp.z_lo);
    s.read_finite("z_hi", sp.z_hi);
    if (!(sp.tolerance > 0.0)) s.fail("tolerance", "must be positive");
    if (!(sp.z_lo < sp.z_hi)) s.fail("z_hi", "must exceed z_lo");
  }

  if (top.has("lie_rank")) {
    Section s(path, "lie_rank", top.node("lie_rank"), {"depth", "variant", "grid"});
    auto& l = cfg.lie_rank;
    s.read("depth", l.depth);
    if (l.depth < 0 || l.depth > lie::kMaxDepth) s.fail("depth", "must lie in [0, 4]");
    if (s.has("variant")) {
      std::string v;
      s.read("variant", v);
      if (v == "full") l.variants = {lie::Variant::Full};
      else if (v == "ideal") l.variants = {lie::Variant::Ideal};
      else if (v == "both") l.variants = {lie::Variant::Full, lie::Variant::Ideal};
      else s.fail("variant", "expected 'full', 'ideal' or 'both'");
    }
    if (s.has("grid")) {
      Section g(path, "lie_rank.grid", s.node("grid"), {"u_min", "u_max", "u_points", "v_min", "v_max", "v_points"});
      g.read_finite("u_min", l.grid.u_min);
      g.read_finite("u_max", l.grid.u_max);
      g.read("u_points", l.grid.u_points);
      g.read_finite("v_min", l.grid.v_min);
      g.read_finite("v_max", l.grid.v_max);
      g.read("v_points", l.grid.v_points);
      if (l.grid.u_points < 0) g.fail("u_points", "must be >= 0");
      if (l.grid.v_points < 0) g.fail("v_points", "must be >= 0");
      if (l.grid.u_min > l.grid.u_max) g.fail("u_max", "must be >= u_min");
      if (l.grid.v_min > l.grid.v_max) g.fail("v_max", "must be >= v_min");
    }
  }

  if (top.has("sweep")) {
    Section s(path, "sweep", top.node("sweep"), {"axes", "cell_cap"});
    SweepSection sw;
    s.read("cell_cap", sw.cell_cap);
    s.require("axes");
    const auto axes = s.node("axes");
    if (!axes.IsSequence() || axes.size() == 0) s.fail("axes", "must be a non-empty list");
    for (const auto& a : axes) {
      Section ax(path, "sweep.axes[]", a, {"coefficient", "lo", "hi", "steps", "log"});
      SweepAxis axis{"", 0.0, 0.0, 1, false};
      ax.require("coefficient");
      ax.require("lo");
      ax.require("hi");
      ax.read("coefficient", axis.coefficient);
      ax.read_finite("lo", axis.lo);
      ax.read_finite("hi", axis.hi);
      ax.read("steps", axis.steps);
      ax.read("log", axis.log_scale);
      Coefficients probe;
      if (!coefficient_slot(probe, axis.coefficient)) ax.fail("coefficient", "unknown coefficient '" + axis.coefficient + "'");
      if (axis.steps < 1) ax.fail("steps", "must be >= 1");
      if (axis.log_scale && !(axis.lo > 0.0 && axis.hi > 0.0)) ax.fail("lo", "log axes need positive bounds");
      sw.axes.push_back(axis);
    }
    cfg.sweep = sw;
  }

  if (top.has("limits")) {
    Section s(path, "limits", top.node("limits"), {"max_trajectories", "max_csv_rows"});
    s.read("max_trajectories", cfg.limits.max_trajectories);
    s.read("max_csv_rows", cfg.limits.max_csv_rows);
  }
  return cfg;
}

/// Validated model parameters; a violation is reported at the line of the
/// first offending coefficient.
inline ModelParams model_params(const ScenarioConfig& cfg) {
  try {
    return validate(cfg.model);
  } catch (const ValidationError& e) {
    std::string msg;
    for (const auto& v : e.violations()) {
      if (!msg.empty()) msg += "; ";
      msg += v.coefficient + ": " + std::string(to_string(v.code));
    }
    const int line = cfg.line_of(e.violations().front().coefficient);
    throw Error(ErrorCode::ConfigError, cfg.path + ":" + std::to_string(line) + ": invalid model coefficients (" + msg + ")");
  }
}

inline SimConfig sim_config(const ScenarioConfig& cfg, std::uint64_t stream) {
  SimConfig s;
  s.dt = cfg.simulation.dt;
  s.horizon = cfg.simulation.horizon;
  s.x0 = cfg.simulation.x0;
  s.y0 = cfg.simulation.y0;
  s.mode = cfg.simulation.mode;
  s.thinning = cfg.simulation.thinning;
  s.seed = cfg.seed;
  s.stream = stream;
  return s;
}

}  // namespace bdsde::cli

#endif  // BDSDE_CLI_CONFIG_HPP
