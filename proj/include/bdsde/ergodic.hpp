#ifndef BDSDE_ERGODIC_HPP
#define BDSDE_ERGODIC_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bdsde/error.hpp"
#include "bdsde/model.hpp"
#include "bdsde/simulate.hpp"
#include "bdsde/threshold.hpp"

namespace bdsde {

/// Portion of a trajectory's time span, as fractions of the horizon.
/// Records with from*T <= t - t0 <= to*T are used.
struct TimeWindow {
  double from = 0.0;
  double to = 1.0;

  static TimeWindow all() { return {0.0, 1.0}; }
  static TimeWindow after_burn_in(double fraction) { return {fraction, 1.0}; }
};

inline constexpr double kDefaultBurnIn = 0.5;

namespace detail {

struct IndexRange {
  std::size_t begin;
  std::size_t end;
};

inline IndexRange window_indices(const Trajectory& t, TimeWindow w) {
  require(!t.times.empty(), "trajectory is empty");
  require(0.0 <= w.from && w.from <= w.to && w.to <= 1.0, "time window must satisfy 0 <= from <= to <= 1");
  const double t0 = t.times.front();
  const double span = t.times.back() - t0;
  const double a = t0 + w.from * span, b = t0 + w.to * span;
  const auto first = std::lower_bound(t.times.begin(), t.times.end(), a);
  const auto last = std::upper_bound(first, t.times.end(), b);
  IndexRange r{static_cast<std::size_t>(first - t.times.begin()), static_cast<std::size_t>(last - t.times.begin())};
  require(r.end > r.begin, "time window selects no records");
  return r;
}

// Running mean: reproduces a constant sequence exactly.
class RunningMean {
 public:
  void add(double x) noexcept {
    ++n_;
    mean_ += (x - mean_) / static_cast<double>(n_);
  }
  double mean() const noexcept { return mean_; }
  std::size_t count() const noexcept { return n_; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
};

}  // namespace detail

/// Functionals of the population state (x, y) supported by time_average.
class Functional {
 public:
  enum class Kind { XPower, YPower, Box, Response };

  static Functional x_power(double p) { return Functional(Kind::XPower, p); }
  static Functional y_power(double p) { return Functional(Kind::YPower, p); }
  /// Indicator of x_lo <= x <= x_hi, y_lo <= y <= y_hi.
  static Functional box(double x_lo, double x_hi, double y_lo, double y_hi) {
    Functional f(Kind::Box, 0.0);
    f.box_ = {x_lo, x_hi, y_lo, y_hi};
    return f;
  }
  /// c2 x / (m1 + m2 x + m3 y).
  static Functional response(const ModelParams& p) {
    Functional f(Kind::Response, 0.0);
    f.response_ = {p.c2(), p.m1(), p.m2(), p.m3()};
    return f;
  }

  /// Parses "x^p", "y^p", "box(xlo,xhi,ylo,yhi)" or "response".
  static Functional parse(const std::string& spec, const ModelParams& p) {
    auto fail = [&] { return Error(ErrorCode::UnknownFunctional, "cannot parse functional '" + spec + "'"); };
    auto number = [&](const std::string& s) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(s, &used);
      } catch (const std::exception&) {
        throw fail();
      }
      if (used != s.size()) throw fail();
      return v;
    };
    if (spec == "response") return response(p);
    if (spec.size() > 2 && (spec[0] == 'x' || spec[0] == 'y') && spec[1] == '^') {
      const double e = number(spec.substr(2));
      return spec[0] == 'x' ? x_power(e) : y_power(e);
    }
    if (spec.rfind("box(", 0) == 0 && spec.back() == ')') {
      std::vector<double> vals;
      std::string body = spec.substr(4, spec.size() - 5);
      std::size_t pos = 0;
      while (pos <= body.size()) {
        const auto comma = body.find(',', pos);
        vals.push_back(number(body.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      if (vals.size() != 4) throw fail();
      return box(vals[0], vals[1], vals[2], vals[3]);
    }
    throw fail();
  }

  Kind kind() const noexcept { return kind_; }
  bool needs_predator() const noexcept { return kind_ != Kind::XPower; }

  double operator()(double x, double y) const noexcept {
    switch (kind_) {
      case Kind::XPower: return std::pow(x, power_);
      case Kind::YPower: return std::pow(y, power_);
      case Kind::Box: return (box_[0] <= x && x <= box_[1] && box_[2] <= y && y <= box_[3]) ? 1.0 : 0.0;
      case Kind::Response: return response_[0] * x / (response_[1] + response_[2] * x + response_[3] * y);
    }
    return 0.0;
  }

 private:
  Functional(Kind k, double p) : kind_(k), power_(p) {}

  Kind kind_;
  double power_;
  std::array<double, 4> box_{};
  std::array<double, 4> response_{};
};

/// Time average of f over the recorded points in the window; every record
/// stands for dt * thinning of time.
inline double time_average(const Trajectory& t, const Functional& f, TimeWindow w = TimeWindow::all()) {
  if (f.needs_predator() && !t.two_dimensional())
    throw Error(ErrorCode::UnknownFunctional, "functional needs the predator component");
  const auto r = detail::window_indices(t, w);
  detail::RunningMean m;
  for (std::size_t i = r.begin; i < r.end; ++i) m.add(f(std::exp(t.u[i]), t.two_dimensional() ? std::exp(t.v[i]) : 0.0));
  return m.mean();
}

enum class Component { U, V };

inline constexpr double kLyapunovHorizonFloor = 100.0;

/// Least-squares slope of the log-state against time over the records after
/// burn-in; estimates lim (1/t) ln x(t) or lim (1/t) ln y(t).
inline double lyapunov_exponent(const Trajectory& t, Component c, double burn_in = kDefaultBurnIn,
                                double horizon_floor = kLyapunovHorizonFloor) {
  detail::require(!t.times.empty(), "lyapunov_exponent: empty trajectory");
  if (c == Component::V && !t.two_dimensional())
    throw Error(ErrorCode::InvalidArgument, "lyapunov_exponent: trajectory has no second component");
  const double horizon = t.times.back() - t.times.front();
  if (horizon < horizon_floor)
    throw Error(ErrorCode::HorizonTooShort,
                "horizon " + std::to_string(horizon) + " below floor " + std::to_string(horizon_floor));
  const auto r = detail::window_indices(t, TimeWindow::after_burn_in(burn_in));
  const auto& s = c == Component::U ? t.u : t.v;
  detail::require(r.end - r.begin >= 2, "lyapunov_exponent: need two records after burn-in");

  detail::RunningMean tm, sm;
  for (std::size_t i = r.begin; i < r.end; ++i) {
    tm.add(t.times[i]);
    sm.add(s[i]);
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = r.begin; i < r.end; ++i) {
    const double dt = t.times[i] - tm.mean();
    sxy += dt * (s[i] - sm.mean());
    sxx += dt * dt;
  }
  return sxy / sxx;
}

/// Time-weighted occupation histogram of x (1-D) or (x, y) (2-D). The outer
/// cells are open-ended: points beyond the first/last edge are counted in
/// the first/last cell, so the weights always sum to one.
struct OccupationHistogram {
  std::vector<double> x_edges;
  std::vector<double> y_edges;  // empty for 1-D
  std::vector<double> counts;   // recorded time per cell, row-major in x then y
  double total_time = 0;
  std::vector<double> weights;

  std::size_t x_cells() const noexcept { return x_edges.size() - 1; }
  std::size_t y_cells() const noexcept { return y_edges.empty() ? 1 : y_edges.size() - 1; }
  double weight(std::size_t ix, std::size_t iy = 0) const { return weights[ix * y_cells() + iy]; }
};

namespace detail {

inline void check_edges(const std::vector<double>& e) {
  require(e.size() >= 2, "histogram edges need at least two entries");
  for (std::size_t i = 1; i < e.size(); ++i) require(e[i - 1] < e[i], "histogram edges must be strictly increasing");
}

inline std::size_t cell_of(const std::vector<double>& e, double value) {
  const auto it = std::upper_bound(e.begin(), e.end(), value);
  const auto idx = static_cast<std::ptrdiff_t>(it - e.begin()) - 1;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(e.size()) - 2));
}

}  // namespace detail

inline OccupationHistogram occupation_histogram(const Trajectory& t, std::vector<double> x_edges,
                                                std::vector<double> y_edges = {},
                                                TimeWindow w = TimeWindow::all()) {
  detail::check_edges(x_edges);
  if (!y_edges.empty()) {
    detail::check_edges(y_edges);
    detail::require(t.two_dimensional(), "2-D histogram needs a two-dimensional trajectory");
  }
  OccupationHistogram h;
  h.x_edges = std::move(x_edges);
  h.y_edges = std::move(y_edges);
  h.counts.assign(h.x_cells() * h.y_cells(), 0.0);

  const auto r = detail::window_indices(t, w);
  const double cell_time = t.record_dt > 0.0 ? t.record_dt : 1.0;
  for (std::size_t i = r.begin; i < r.end; ++i) {
    const std::size_t ix = detail::cell_of(h.x_edges, std::exp(t.u[i]));
    const std::size_t iy = h.y_edges.empty() ? 0 : detail::cell_of(h.y_edges, std::exp(t.v[i]));
    h.counts[ix * h.y_cells() + iy] += cell_time;
  }
  h.total_time = cell_time * static_cast<double>(r.end - r.begin);
  h.weights.resize(h.counts.size());
  for (std::size_t k = 0; k < h.counts.size(); ++k) h.weights[k] = h.counts[k] / h.total_time;
  return h;
}

/// Kolmogorov-Smirnov distance between a 1-D histogram and a CDF, evaluated
/// at the interior edges (the outer cells are open-ended).
template <class Cdf>
double ks_distance(const OccupationHistogram& h, const Cdf& cdf) {
  detail::require(h.y_edges.empty(), "ks_distance needs a 1-D histogram");
  double cumulative = 0.0, worst = 0.0;
  for (std::size_t j = 1; j + 1 < h.x_edges.size(); ++j) {
    cumulative += h.weights[j - 1];
    worst = std::max(worst, std::fabs(cumulative - cdf(h.x_edges[j])));
  }
  return worst;
}

/// Half L1 distance between two histograms on identical grids.
inline double tv_proxy(const OccupationHistogram& a, const OccupationHistogram& b) {
  if (a.x_edges != b.x_edges || a.y_edges != b.y_edges)
    throw Error(ErrorCode::GridMismatch, "tv_proxy needs histograms on identical grids");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.weights.size(); ++k) sum += std::fabs(a.weights[k] - b.weights[k]);
  return 0.5 * sum;
}

/// Fraction of time in A = {0 < x <= H, hbar <= y <= H}.
inline double box_occupation(const Trajectory& t, double hbar, double big_h, TimeWindow w = TimeWindow::all()) {
  detail::require(0.0 < hbar && hbar < big_h, "box_occupation: need 0 < hbar < H");
  return time_average(t, Functional::box(0.0, big_h, hbar, big_h), w);
}

/// Empirical counterparts of the occupation bounds of the permanence
/// argument, next to their theoretical values.
struct OccupationDiagnostics {
  double hbar = 0, big_h = 0;
  double frac_y_above_hbar = 0;  // >= (m_bar - hbar)^2 / K2hat in the long run
  double frac_y_above_h = 0;     // <= K1hat / H
  double frac_x_above_h = 0;     // <= K1 / H
  std::optional<double> bound_y_above_hbar;
  std::optional<double> bound_y_above_h;
  double bound_x_above_h = 0;
};

inline OccupationDiagnostics occupation_bound_check(const Trajectory& t, double hbar, double big_h,
                                                    const PermanenceConstants& k,
                                                    TimeWindow w = TimeWindow::all()) {
  detail::require(0.0 < hbar && hbar < big_h, "occupation_bound_check: need 0 < hbar < H");
  detail::require(t.two_dimensional(), "occupation_bound_check: needs a two-dimensional trajectory");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  OccupationDiagnostics d;
  d.hbar = hbar;
  d.big_h = big_h;
  d.frac_y_above_hbar = time_average(t, Functional::box(-kInf, kInf, hbar, kInf), w);
  d.frac_y_above_h = time_average(t, Functional::box(-kInf, kInf, big_h, kInf), w);
  d.frac_x_above_h = time_average(t, Functional::box(big_h, kInf, -kInf, kInf), w);
  if (k.k2_hat) d.bound_y_above_hbar = (k.m_bar - hbar) * (k.m_bar - hbar) / *k.k2_hat;
  if (k.k1_hat) d.bound_y_above_h = *k.k1_hat / big_h;
  d.bound_x_above_h = k.k1 / big_h;
  return d;
}

struct NamedValue {
  std::string name;
  double value;
};

struct TvWindow {
  double from;  // fractions of the horizon
  double to;
  double tv;
};

/// Per-trajectory ergodic summary.
struct ErgodicReport {
  std::vector<NamedValue> time_averages;
  std::optional<double> lyapunov_y;
  std::optional<double> box_occupation;
  std::optional<OccupationDiagnostics> occupation;
  std::vector<TvWindow> tv_series;
};

/// TV proxy between two trajectories on consecutive windows of the horizon.
inline std::vector<TvWindow> tv_series(const Trajectory& a, const Trajectory& b, const std::vector<double>& x_edges,
                                       const std::vector<double>& y_edges, int windows) {
  detail::require(windows >= 1, "tv_series: need at least one window");
  std::vector<TvWindow> out;
  for (int k = 0; k < windows; ++k) {
    const TimeWindow w{static_cast<double>(k) / windows, static_cast<double>(k + 1) / windows};
    const auto ha = occupation_histogram(a, x_edges, y_edges, w);
    const auto hb = occupation_histogram(b, x_edges, y_edges, w);
    out.push_back({w.from, w.to, tv_proxy(ha, hb)});
  }
  return out;
}

/// Merge of per-trajectory reports: arithmetic means taken in trajectory
/// order, so the result does not depend on how the work was distributed.
struct ErgodicSummary {
  std::vector<ErgodicReport> trajectories;
  std::vector<NamedValue> mean_time_averages;
  std::optional<double> mean_lyapunov_y;
  std::optional<double> mean_box_occupation;
};

inline ErgodicSummary merge_reports(std::vector<ErgodicReport> reports) {
  ErgodicSummary s;
  s.trajectories = std::move(reports);
  if (s.trajectories.empty()) return s;
  const auto& first = s.trajectories.front();
  for (std::size_t k = 0; k < first.time_averages.size(); ++k) {
    double sum = 0.0;
    for (const auto& r : s.trajectories) sum += r.time_averages.at(k).value;
    s.mean_time_averages.push_back({first.time_averages[k].name, sum / static_cast<double>(s.trajectories.size())});
  }
  auto mean_of = [&](auto member) -> std::optional<double> {
    double sum = 0.0;
    for (const auto& r : s.trajectories) {
      if (!(r.*member)) return std::nullopt;
      sum += *(r.*member);
    }
    return sum / static_cast<double>(s.trajectories.size());
  };
  s.mean_lyapunov_y = mean_of(&ErgodicReport::lyapunov_y);
  s.mean_box_occupation = mean_of(&ErgodicReport::box_occupation);
  return s;
}

}  // namespace bdsde

#endif  // BDSDE_ERGODIC_HPP
