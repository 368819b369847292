#ifndef BDSDE_CLI_COMMANDS_HPP
#define BDSDE_CLI_COMMANDS_HPP

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "bdsde/cli/config.hpp"
#include "bdsde/cli/output.hpp"
#include "bdsde/ergodic.hpp"
#include "bdsde/geometry.hpp"
#include "bdsde/lie.hpp"
#include "bdsde/parallel.hpp"
#include "bdsde/simulate.hpp"
#include "bdsde/threshold.hpp"

namespace bdsde::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitCritical = 3;
inline constexpr int kExitNumerical = 4;
inline constexpr int kExitCap = 5;

inline constexpr std::string_view kWorkersEnv = "BDSDE_WORKERS";

/// A trajectory-count, output-size or grid cap was hit.
class CapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir = "bdsde-out";
  std::optional<unsigned> workers;
  std::optional<double> eps_critical;
};

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"classify", "simulate", "ergodic", "support", "lie-rank", "sweep"};
  return names;
}

/// The flag wins; the environment variable is read only without it.
inline unsigned resolve_workers(std::optional<unsigned> flag) {
  if (flag) {
    if (*flag == 0) throw Error(ErrorCode::ConfigError, "--workers: must be >= 1");
    return *flag;
  }
  if (const char* env = std::getenv(std::string(kWorkersEnv).c_str()); env && *env) {
    char* end = nullptr;
    const unsigned long n = std::strtoul(env, &end, 10);
    if (*end != '\0' || n == 0 || n > 4096)
      throw Error(ErrorCode::ConfigError, std::string(kWorkersEnv) + ": expected a positive integer, got '" + env + "'");
    return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Fixed-point rendering for the human summary line.
inline std::string fixed6(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(6) << v;
  return ss.str();
}

inline json config_json(const ScenarioConfig& c) {
  json j;
  j["seed"] = c.seed;
  json model;
  for (const auto& name : kCoefficientNames) model[std::string(name)] = json_number(coefficient_value(c.model, name));
  j["model"] = model;
  const auto& s = c.simulation;
  j["simulation"] = {{"dt", s.dt},           {"horizon", s.horizon},           {"x0", s.x0},
                     {"y0", s.y0},           {"mode", std::string(to_string(s.mode))}, {"thinning", s.thinning},
                     {"trajectories", s.trajectories}, {"burn_in", s.burn_in}};
  j["classify"] = {{"eps_critical", c.classify.eps_critical}, {"tolerance", c.classify.tolerance}};
  const auto& e = c.ergodic;
  auto axis = [](const HistogramAxis& a) { return json{{"lo", a.lo}, {"hi", a.hi}, {"bins", a.bins}}; };
  j["ergodic"] = {{"functionals", e.functionals},
                  {"x_histogram", axis(e.x_hist)},
                  {"y_histogram", axis(e.y_hist)},
                  {"lyapunov", e.lyapunov},
                  {"occupation", e.occupation},
                  {"tv", e.tv ? json{{"x0", e.tv->x0}, {"y0", e.tv->y0}, {"windows", e.tv->windows}} : json(nullptr)}};
  j["support"] = {{"margin", c.support.margin},
                  {"tolerance", c.support.tolerance},
                  {"z_lo", c.support.z_lo},
                  {"z_hi", c.support.z_hi}};
  json variants = json::array();
  for (auto v : c.lie_rank.variants) variants.push_back(std::string(lie::to_string(v)));
  const auto& g = c.lie_rank.grid;
  j["lie_rank"] = {{"depth", c.lie_rank.depth},
                   {"variants", variants},
                   {"grid",
                    {{"u_min", g.u_min},
                     {"u_max", g.u_max},
                     {"u_points", g.u_points},
                     {"v_min", g.v_min},
                     {"v_max", g.v_max},
                     {"v_points", g.v_points}}}};
  if (c.sweep) {
    json axes = json::array();
    for (const auto& a : c.sweep->axes)
      axes.push_back({{"coefficient", a.coefficient}, {"lo", a.lo}, {"hi", a.hi}, {"steps", a.steps}, {"log", a.log_scale}});
    j["sweep"] = {{"axes", axes}, {"cell_cap", c.sweep->cell_cap}};
  } else {
    j["sweep"] = nullptr;
  }
  j["limits"] = {{"max_trajectories", c.limits.max_trajectories}, {"max_csv_rows", c.limits.max_csv_rows}};
  return j;
}

struct Context {
  ScenarioConfig cfg;
  ModelParams params;
  unsigned workers;
  OutputSet& out;
  std::ostream& log;
};

namespace detail {

inline std::string flag(bool b) { return b ? "true" : "false"; }
inline std::string flag(const std::optional<bool>& b) { return b ? flag(*b) : ""; }

inline json lw_json(const LwFlags& f) {
  auto opt = [](const std::optional<bool>& b) { return b ? json(*b) : json(nullptr); };
  return {{"applicable", f.applicable},
          {"extinction", opt(f.extinction)},
          {"persistence", opt(f.persistence)},
          {"extinction_alt", opt(f.extinction_alt)}};
}

inline json report_json(const ThresholdReport& r) {
  json j;
  j["regime"] = std::string(to_string(r.regime));
  if (r.lambda) j["lambda"] = json_number(*r.lambda);
  j["quadrature_error"] = json_optional(r.quadrature_error);
  j["response_integral"] = json_optional(r.response_integral);
  j["jensen_bound"] = json_optional(r.jensen_bound);
  j["permanence_floor"] = json_optional(r.permanence_floor);
  j["ji"] = std::string(to_string(r.ji));
  j["lw"] = lw_json(r.lw);
  return j;
}

inline void check_trajectory_caps(const ScenarioConfig& cfg, int trajectories) {
  if (trajectories > cfg.limits.max_trajectories)
    throw CapExceeded("trajectory count " + std::to_string(trajectories) + " exceeds cap " +
                      std::to_string(cfg.limits.max_trajectories));
}

inline std::int64_t record_count(const ScenarioConfig& cfg) {
  const auto steps = std::llround(cfg.simulation.horizon / cfg.simulation.dt);
  return steps / cfg.simulation.thinning + 1;
}

inline std::vector<Functional> parse_functionals(const ScenarioConfig& cfg, const ModelParams& p) {
  std::vector<Functional> out;
  for (const auto& spec : cfg.ergodic.functionals) {
    try {
      out.push_back(Functional::parse(spec, p));
    } catch (const Error&) {
      throw Error(ErrorCode::ConfigError, cfg.path + ":" + std::to_string(cfg.ergodic.functionals_line) +
                                              ": unknown functional '" + spec + "'");
    }
  }
  return out;
}

}  // namespace detail

inline int run_classify(Context& ctx) {
  const auto r = threshold_report(ctx.params, ctx.cfg.classify.eps_critical, ctx.cfg.classify.tolerance);
  json j = detail::report_json(r);
  j["eps_critical"] = ctx.cfg.classify.eps_critical;
  ctx.out.write_json("classify.json", j);
  if (r.lambda)
    ctx.log << "lambda=" << fixed6(*r.lambda) << " regime=" << to_string(r.regime) << '\n';
  else
    ctx.log << "regime=" << to_string(r.regime) << '\n';
  return r.regime == Regime::Critical ? kExitCritical : kExitOk;
}

inline int run_simulate(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const int n = cfg.simulation.trajectories;
  detail::check_trajectory_caps(cfg, n);
  if (detail::record_count(cfg) > cfg.limits.max_csv_rows)
    throw CapExceeded("trajectory would have " + std::to_string(detail::record_count(cfg)) + " rows, cap is " +
                      std::to_string(cfg.limits.max_csv_rows));
  const auto files = parallel_map(static_cast<std::size_t>(n), ctx.workers, [&](std::size_t k) {
    const auto t = simulate_system(ctx.params, sim_config(cfg, k));
    CsvWriter csv({"t", "u", "v", "x", "y"});
    for (std::size_t i = 0; i < t.size(); ++i)
      csv.row({format_double(t.times[i]), format_double(t.u[i]), format_double(t.v[i]), format_double(t.x(i)),
               format_double(t.y(i))});
    return csv.str();
  });
  char name[64];
  for (int k = 0; k < n; ++k) {
    std::snprintf(name, sizeof name, "trajectory_%04d.csv", k);
    ctx.out.write(name, files[static_cast<std::size_t>(k)]);
  }
  ctx.log << "trajectories=" << n << " records=" << detail::record_count(cfg) << '\n';
  return kExitOk;
}

inline int run_ergodic(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& ec = cfg.ergodic;
  const int n = cfg.simulation.trajectories;
  detail::check_trajectory_caps(cfg, n);
  const auto functionals = detail::parse_functionals(cfg, ctx.params);
  const auto x_edges = ec.x_hist.edges(), y_edges = ec.y_hist.edges();
  const TimeWindow window = TimeWindow::after_burn_in(cfg.simulation.burn_in);

  std::optional<double> lambda;
  std::optional<PermanenceConstants> perm;
  if (boundary_law(ctx.params)) {
    lambda = lambda_quadrature(ctx.params, cfg.classify.tolerance).lambda;
    if (*lambda > 0.0) perm = permanence_constants(ctx.params, *lambda);
  }
  const bool box = ec.occupation && perm && perm->big_h;

  struct Item {
    ErgodicReport report;
    std::vector<double> x_weights;
  };
  auto items = parallel_map(static_cast<std::size_t>(n), ctx.workers, [&](std::size_t k) {
    const auto sc = sim_config(cfg, k);
    const auto t = simulate_system(ctx.params, sc);
    Item it;
    for (std::size_t f = 0; f < functionals.size(); ++f)
      it.report.time_averages.push_back({ec.functionals[f], time_average(t, functionals[f], window)});
    if (ec.lyapunov && cfg.simulation.horizon >= kLyapunovHorizonFloor)
      it.report.lyapunov_y = lyapunov_exponent(t, Component::V, cfg.simulation.burn_in);
    if (box) {
      it.report.box_occupation = box_occupation(t, perm->hbar, *perm->big_h, window);
      it.report.occupation = occupation_bound_check(t, perm->hbar, *perm->big_h, *perm, window);
    }
    if (ec.tv) {
      auto sc2 = sc;
      sc2.x0 = ec.tv->x0;
      sc2.y0 = ec.tv->y0;
      const auto t2 = simulate_system(ctx.params, sc2);
      it.report.tv_series = tv_series(t, t2, x_edges, y_edges, ec.tv->windows);
    }
    it.x_weights = occupation_histogram(t, x_edges, {}, window).weights;
    return it;
  });

  std::vector<ErgodicReport> reports;
  std::vector<double> x_weights(x_edges.size() - 1, 0.0);
  for (const auto& it : items) {
    reports.push_back(it.report);
    for (std::size_t i = 0; i < x_weights.size(); ++i) x_weights[i] += it.x_weights[i];
  }
  for (double& w : x_weights) w /= static_cast<double>(n);
  const auto summary = merge_reports(std::move(reports));

  std::vector<std::string> header{"trajectory"};
  for (const auto& f : ec.functionals) header.push_back(f);
  header.insert(header.end(), {"lyapunov_y", "box_occupation"});
  CsvWriter csv(header);
  json per = json::array();
  for (std::size_t k = 0; k < summary.trajectories.size(); ++k) {
    const auto& r = summary.trajectories[k];
    std::vector<std::string> row{std::to_string(k)};
    json avg = json::object();
    for (const auto& nv : r.time_averages) {
      row.push_back(format_double(nv.value));
      avg[nv.name] = json_number(nv.value);
    }
    row.push_back(r.lyapunov_y ? format_double(*r.lyapunov_y) : "");
    row.push_back(r.box_occupation ? format_double(*r.box_occupation) : "");
    csv.row(row);
    json jr{{"trajectory", k}, {"stream", k}, {"time_averages", avg}, {"lyapunov_y", json_optional(r.lyapunov_y)},
            {"box_occupation", json_optional(r.box_occupation)}};
    if (r.occupation) {
      const auto& d = *r.occupation;
      jr["occupation"] = {{"frac_y_above_hbar", d.frac_y_above_hbar},
                          {"bound_y_above_hbar", json_optional(d.bound_y_above_hbar)},
                          {"frac_y_above_h", d.frac_y_above_h},
                          {"bound_y_above_h", json_optional(d.bound_y_above_h)},
                          {"frac_x_above_h", d.frac_x_above_h},
                          {"bound_x_above_h", json_number(d.bound_x_above_h)}};
    }
    if (!r.tv_series.empty()) {
      json tv = json::array();
      for (const auto& w : r.tv_series) tv.push_back({{"from", w.from}, {"to", w.to}, {"tv", w.tv}});
      jr["tv_series"] = tv;
    }
    per.push_back(jr);
  }
  ctx.out.write("ergodic.csv", csv.str());

  CsvWriter hist({"x_lo", "x_hi", "weight"});
  for (std::size_t i = 0; i < x_weights.size(); ++i)
    hist.row({format_double(x_edges[i]), format_double(x_edges[i + 1]), format_double(x_weights[i])});
  ctx.out.write("histogram_x.csv", hist.str());

  if (ec.tv) {
    CsvWriter tv({"trajectory", "from", "to", "tv"});
    for (std::size_t k = 0; k < summary.trajectories.size(); ++k)
      for (const auto& w : summary.trajectories[k].tv_series)
        tv.row({std::to_string(k), format_double(w.from), format_double(w.to), format_double(w.tv)});
    ctx.out.write("tv.csv", tv.str());
  }

  json means = json::object();
  for (const auto& nv : summary.mean_time_averages) means[nv.name] = json_number(nv.value);
  json j;
  j["trajectories"] = n;
  j["lambda"] = json_optional(lambda);
  if (perm) {
    j["permanence"] = {{"m_bar", perm->m_bar},
                       {"hbar", perm->hbar},
                       {"big_h", json_optional(perm->big_h)},
                       {"k1", perm->k1},
                       {"k2", perm->k2},
                       {"k1_hat", json_optional(perm->k1_hat)},
                       {"k2_hat", json_optional(perm->k2_hat)},
                       {"box_occupation_bound", json_optional(perm->box_occupation_bound())}};
  }
  j["mean_time_averages"] = means;
  j["mean_lyapunov_y"] = json_optional(summary.mean_lyapunov_y);
  j["mean_box_occupation"] = json_optional(summary.mean_box_occupation);
  j["per_trajectory"] = per;
  ctx.out.write_json("ergodic.json", j);

  ctx.log << "trajectories=" << n;
  for (const auto& nv : summary.mean_time_averages) ctx.log << " mean[" << nv.name << "]=" << fixed6(nv.value);
  if (summary.mean_lyapunov_y) ctx.log << " lyapunov_y=" << fixed6(*summary.mean_lyapunov_y);
  ctx.log << '\n';
  return kExitOk;
}

/// Support runs always use a single shared noise source: the invariant
/// control set describes the degenerate system.
inline int run_support(Context& ctx) {
  auto cfg = ctx.cfg;
  cfg.simulation.mode = NoiseMode::Shared;
  const int n = cfg.simulation.trajectories;
  detail::check_trajectory_caps(cfg, n);
  const auto& p = ctx.params;
  if (!boundary_law(p) || !(lambda_quadrature(p, cfg.classify.tolerance).lambda > 0.0))
    throw Error(ErrorCode::RegimePrecondition, "support analysis needs lambda > 0");

  ControlSetDescriptor d = FullPlane{};
  json desc;
  if (half_plane_case(p)) {
    const auto cs = c_star(p, cfg.support.z_lo, cfg.support.z_hi, cfg.support.tolerance);
    d = HalfPlane{p.beta() / p.alpha(), cs.value, cs.sign_oscillation};
    desc = {{"kind", "HalfPlane"},
            {"slope", p.beta() / p.alpha()},
            {"c_star", json_number(cs.value)},
            {"bracket_lo", json_number(cs.bracket_lo)},
            {"bracket_hi", json_number(cs.bracket_hi)},
            {"sign_oscillation", cs.sign_oscillation}};
    if (cs.finite()) {
      desc["sup_h_at_bracket_lo"] = json_number(sup_h(p, cs.bracket_lo).value);
      desc["sup_h_at_bracket_hi"] = json_number(sup_h(p, cs.bracket_hi).value);
    }
  } else {
    desc = {{"kind", "FullPlane"}};
  }

  const TimeWindow window = TimeWindow::after_burn_in(cfg.simulation.burn_in);
  const auto fractions = parallel_map(static_cast<std::size_t>(n), ctx.workers, [&](std::size_t k) {
    const auto t = simulate_system(p, sim_config(cfg, k));
    return support_membership(t, d, cfg.support.margin, window);
  });

  CsvWriter csv({"trajectory", "fraction"});
  json fr = json::array();
  double worst = 0.0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    csv.row({std::to_string(k), format_double(fractions[k])});
    fr.push_back(fractions[k]);
    worst = std::max(worst, fractions[k]);
  }
  ctx.out.write("support.csv", csv.str());
  ctx.out.write_json("support.json", {{"control_set", desc},
                                      {"mode", "shared"},
                                      {"margin", cfg.support.margin},
                                      {"fractions", fr},
                                      {"max_fraction", worst}});
  ctx.log << "control_set=" << desc["kind"].get<std::string>();
  if (const auto* h = std::get_if<HalfPlane>(&d)) ctx.log << " c_star=" << fixed6(h->c_star);
  ctx.log << " max_fraction=" << fixed6(worst) << '\n';
  return kExitOk;
}

inline int run_lie_rank(Context& ctx) {
  const auto& lc = ctx.cfg.lie_rank;
  if (lc.grid.size() > kDefaultCellCap) throw CapExceeded("lie-rank grid exceeds cell cap");
  CsvWriter csv({"variant", "u", "v", "rank"});
  json variants = json::array();
  for (auto variant : lc.variants) {
    const auto rep = lie::verify_hormander(ctx.params, lc.grid, lc.depth, variant, ctx.workers);
    const std::string name(lie::to_string(variant));
    for (std::size_t i = 0; i < rep.points.size(); ++i)
      csv.row({name, format_double(rep.points[i].first), format_double(rep.points[i].second),
               std::to_string(rep.ranks[i])});
    json deficient = json::array();
    for (const auto& pt : rep.deficient) deficient.push_back({pt.first, pt.second});
    variants.push_back({{"variant", name},
                        {"depth", rep.depth},
                        {"family", rep.family},
                        {"points", rep.points.size()},
                        {"deficient", deficient},
                        {"scope", std::string(lie::LieRankReport::kScope)}});
    ctx.log << "variant=" << name << " points=" << rep.points.size() << " deficient=" << rep.deficient.size() << '\n';
  }
  ctx.out.write("lie_rank.csv", csv.str());
  ctx.out.write_json("lie_rank.json", {{"variants", variants}});
  return kExitOk;
}

inline int run_sweep(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (!cfg.sweep) throw Error(ErrorCode::ConfigError, cfg.path + ":1: sweep needs a 'sweep' section");
  SweepResult res;
  try {
    res = sweep(ctx.params, cfg.sweep->axes, cfg.classify.eps_critical, cfg.sweep->cell_cap, ctx.workers);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::GridTooLarge) throw CapExceeded(e.what());
    throw;
  }
  std::vector<std::string> header;
  for (const auto& a : res.axes) header.push_back(a.coefficient);
  header.insert(header.end(), {"lambda", "regime", "ji", "lw_applicable", "lw_extinct", "lw_persist"});
  CsvWriter csv(header);
  for (const auto& row : res.rows) {
    std::vector<std::string> cells;
    for (double v : row.point) cells.push_back(format_double(v));
    const auto& r = row.report;
    cells.push_back(r.lambda ? format_double(*r.lambda) : "");
    cells.push_back(std::string(to_string(r.regime)));
    cells.push_back(std::string(to_string(r.ji)));
    cells.push_back(detail::flag(r.lw.applicable));
    cells.push_back(detail::flag(r.lw.extinction));
    cells.push_back(detail::flag(r.lw.persistence));
    csv.row(cells);
  }
  ctx.out.write("sweep.csv", csv.str());
  const auto& s = res.summary;
  json summary{{"cells", res.rows.size()},
               {"coexistence_in_j", s.coexistence_in_j},
               {"coexistence_not_j", s.coexistence_not_j},
               {"predator_extinct", s.predator_extinct},
               {"critical", s.critical},
               {"both_extinct", s.both_extinct}};
  json rows = json::array();
  for (const auto& row : res.rows) {
    json jr = detail::report_json(row.report);
    jr["point"] = row.point;
    rows.push_back(jr);
  }
  ctx.out.write_json("sweep.json", {{"summary", summary}, {"rows", rows}});
  ctx.log << "cells=" << res.rows.size() << " coexistence_in_j=" << s.coexistence_in_j
          << " coexistence_not_j=" << s.coexistence_not_j << " predator_extinct=" << s.predator_extinct
          << " critical=" << s.critical << " both_extinct=" << s.both_extinct << '\n';
  return kExitOk;
}

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::GridTooLarge: return kExitCap;
    case ErrorCode::StepOverflow:
    case ErrorCode::Overflow:
    case ErrorCode::ToleranceNotMet:
    case ErrorCode::BracketFailure:
    case ErrorCode::ScanInconclusive: return kExitNumerical;
    default: return kExitConfig;
  }
}

/// Loads the config, runs one subcommand and writes the manifest. Returns
/// the process exit code; diagnostics go to `err`.
inline int run_command(const std::string& command, const RunOptions& opt, std::ostream& log, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  try {
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), command) == names.end())
      throw Error(ErrorCode::ConfigError, "unknown command '" + command + "'");
    const std::string text = read_file(opt.config_path);
    auto cfg = parse_config(text, opt.config_path);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.eps_critical) {
      if (!(*opt.eps_critical > 0.0)) throw Error(ErrorCode::ConfigError, "--eps-critical: must be positive");
      cfg.classify.eps_critical = *opt.eps_critical;
    }
    const auto params = model_params(cfg);
    const unsigned workers = resolve_workers(opt.workers);

    OutputSet out(opt.out_dir);
    std::filesystem::create_directories(opt.out_dir);
    Context ctx{cfg, params, workers, out, log};
    int code = kExitOk;
    if (command == "classify") code = run_classify(ctx);
    else if (command == "simulate") code = run_simulate(ctx);
    else if (command == "ergodic") code = run_ergodic(ctx);
    else if (command == "support") code = run_support(ctx);
    else if (command == "lie-rank") code = run_lie_rank(ctx);
    else code = run_sweep(ctx);

    ManifestInfo info;
    info.command = command;
    info.seed = cfg.seed;
    info.config = config_json(cfg);
    info.config_path = opt.config_path;
    info.config_digest = sha256_hex(text);
    info.workers = workers;
    info.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_manifest(out, info);
    return code;
  } catch (const CapExceeded& e) {
    err << "error: resource cap: " << e.what() << '\n';
    return kExitCap;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace bdsde::cli

#endif  // BDSDE_CLI_COMMANDS_HPP
