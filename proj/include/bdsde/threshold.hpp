#ifndef BDSDE_THRESHOLD_HPP
#define BDSDE_THRESHOLD_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bdsde/error.hpp"
#include "bdsde/gamma_law.hpp"
#include "bdsde/model.hpp"
#include "bdsde/parallel.hpp"
#include "bdsde/quadrature.hpp"
#include "bdsde/random.hpp"
#include "bdsde/search.hpp"

namespace bdsde {

/// Stationary law of the prey on the predator-free boundary.
inline LogisticLawResult boundary_law(const ModelParams& p) { return from_logistic(p.a1(), p.b1(), p.alpha()); }

/// Stationary law of psi, the logistic diffusion dominating the predator:
/// growth -a2 + c2/m2, crowding b2, noise beta.
inline LogisticLawResult predator_dominating_law(const ModelParams& p) {
  return from_logistic(-p.a2() + p.c2() / p.m2(), p.b2(), p.beta());
}

namespace detail {

inline GammaLaw require_boundary_law(const ModelParams& p) {
  auto law = boundary_law(p);
  if (!law) throw Error(ErrorCode::RegimePrecondition, "a1 <= alpha^2/2: both species go extinct, lambda undefined");
  return *law;
}

}  // namespace detail

struct LambdaEstimate {
  double lambda;
  double error;              // absolute error bound (quadrature) or standard error (Monte Carlo)
  double response_integral;  // int c2 x / (m1 + m2 x) over the boundary law
};

/// Threshold lambda = -a2 - beta^2/2 + E[c2 X / (m1 + m2 X)], X ~ boundary law.
///
/// Uses x/(m1+m2x) = (1 - m1/(m1+m2x))/m2 so only E[1/(m1+m2X)] is integrated;
/// that integrand is bounded by 1/m1. The expectation is taken over
/// theta = ln X, whose stationary density C exp(q theta - a e^theta) is
/// smooth for every shape q > 0, on a window whose two tails together carry
/// at most a tenth of the error budget.
inline LambdaEstimate lambda_quadrature(const ModelParams& p, double tol = 1e-10) {
  detail::require(tol > 0.0, "lambda_quadrature: tolerance must be positive");
  const GammaLaw law = detail::require_boundary_law(p);
  const double q = law.shape(), a = law.rate(), log_c = law.log_norm_const();

  const double scale = p.c2() * p.m1() / p.m2();  // |d lambda / d E|
  const double tol_e = tol / scale;
  const double tail = tol_e * p.m1() / 20.0;      // mass per discarded tail

  // Lower tail: int_{-inf}^{t} C e^{q s} ds = C e^{q t}/q bounds the mass below t.
  double theta_lo = (std::log(tail * q) - log_c) / q;
  theta_lo = std::fmin(theta_lo, std::log(law.mean()) - 1.0);
  double x_hi = law.mean() + 10.0 * std::sqrt(law.variance());
  while (law.upper_tail(x_hi) > tail) x_hi *= 2.0;
  const double theta_hi = std::log(x_hi);

  auto integrand = [&](double theta) {
    const double e = std::exp(theta);
    return std::exp(log_c + q * theta - a * e) / (p.m1() + p.m2() * e);
  };
  // Split around the mode of theta (spread about 1/sqrt(q)) so a sharply
  // peaked law cannot slip between the nodes of the first pass.
  const double theta_mode = std::log(q / a), spread = 1.0 / std::sqrt(q);
  std::vector<double> breaks{theta_lo};
  for (double k : {-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0}) {
    const double b = theta_mode + k * spread;
    if (b > breaks.back() && b < theta_hi) breaks.push_back(b);
  }
  breaks.push_back(theta_hi);
  const auto res = quadrature::integrate(integrand, breaks, 0.5 * tol_e);
  if (!res.converged)
    throw Error(ErrorCode::ToleranceNotMet, "quadrature error " + std::to_string(res.error) + " above budget");

  const double inv_mean = res.value;
  const double err_e = res.error + 2.0 * tail / p.m1();
  const double response = p.c2() / p.m2() * (1.0 - p.m1() * inv_mean);
  const double lambda = -p.a2() - 0.5 * p.beta() * p.beta() + response;
  return {lambda, scale * err_e, response};
}

/// Monte Carlo estimate of the same threshold over n boundary-law draws.
inline LambdaEstimate lambda_mc(const ModelParams& p, std::size_t n, std::uint64_t seed, std::uint64_t stream = 0) {
  detail::require(n >= 1000, "lambda_mc: need n >= 1000");
  const GammaLaw law = detail::require_boundary_law(p);
  CounterRng rng(seed, stream);
  double mean = 0.0, m2 = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double x = sample_gamma(rng, law);
    const double f = p.c2() * x / (p.m1() + p.m2() * x);
    const double delta = f - mean;
    mean += delta / static_cast<double>(k);
    m2 += delta * (f - mean);
  }
  const double var = m2 / static_cast<double>(n - 1);
  return {mean - p.a2() - 0.5 * p.beta() * p.beta(), std::sqrt(var / static_cast<double>(n)), mean};
}

/// BothExtinct when a1 <= alpha^2/2; otherwise the sign of lambda outside
/// the critical band [-eps, eps].
inline Regime classify_lambda(double lambda, double eps_critical) {
  if (lambda < -eps_critical) return Regime::PredatorExtinct;
  if (lambda > eps_critical) return Regime::Coexistence;
  return Regime::Critical;
}

inline Regime classify(const ModelParams& p, double eps_critical = kDefaultEpsCritical) {
  detail::require(eps_critical > 0.0, "classify: critical band must be positive");
  if (!boundary_law(p)) return Regime::BothExtinct;
  return classify_lambda(lambda_quadrature(p).lambda, eps_critical);
}

/// Jensen upper bound on lambda: -a2 - beta^2/2 + c2 K1 / (m1 + m2 K1).
inline double jensen_bound(const ModelParams& p) {
  const double k1 = detail::require_boundary_law(p).mean();
  return -p.a2() - 0.5 * p.beta() * p.beta() + p.c2() * k1 / (p.m1() + p.m2() * k1);
}

/// Lower bound on the long-run time average of the predator when lambda > 0.
inline double permanence_floor(const ModelParams& p, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::NonPositiveLambda, "permanence floor needs lambda > 0");
  const double num = p.b1() * p.m1() * p.m1() * p.m2() * lambda;
  const double den = p.c1() * p.c2() * p.m2() + p.b1() * p.c2() * p.m1() * p.m3() +
                     p.b1() * p.b2() * p.m1() * p.m1() * p.m2();
  return num / den;
}

/// Constants of the permanence argument: the floor m_bar, boundary moments
/// K1, K2 and dominating-process moments K1hat, K2hat, and the box
/// A = {0 < x <= H, hbar <= y <= H} with hbar = m_bar/2 and
/// H = 8 (K1 + K1hat) K2hat / m_bar^2.
struct PermanenceConstants {
  double m_bar;
  double k1, k2;
  std::optional<double> k1_hat, k2_hat;  // empty when psi degenerates to zero
  double hbar;
  std::optional<double> big_h;

  /// m_bar^2 / (8 K2hat): lower bound on the long-run occupation of A.
  std::optional<double> box_occupation_bound() const {
    if (!k2_hat) return std::nullopt;
    return m_bar * m_bar / (8.0 * *k2_hat);
  }
};

inline PermanenceConstants permanence_constants(const ModelParams& p, double lambda) {
  const GammaLaw law = detail::require_boundary_law(p);
  PermanenceConstants out{};
  out.m_bar = permanence_floor(p, lambda);
  out.k1 = law.moment(1.0);
  out.k2 = law.moment(2.0);
  out.hbar = 0.5 * out.m_bar;
  if (auto psi = predator_dominating_law(p)) {
    out.k1_hat = psi->moment(1.0);
    out.k2_hat = psi->moment(2.0);
    out.big_h = 8.0 * (out.k1 + *out.k1_hat) * *out.k2_hat / (out.m_bar * out.m_bar);
  }
  return out;
}

/// Interior equilibrium of the noise-free system, by damped Newton from 16
/// starts on a 4x4 log grid over [1e-8, 10 max(a1/b1, 1)]^2.
inline std::optional<Vec2> deterministic_equilibrium(const ModelParams& p) {
  auto residual = [&p](double x, double y) {
    const double d = p.m1() + p.m2() * x + p.m3() * y;
    return Vec2{p.a1() - p.b1() * x - p.c1() * y / d, -p.a2() - p.b2() * y + p.c2() * x / d};
  };
  constexpr double kLo = 1e-8;
  const double hi = 10.0 * std::fmax(p.a1() / p.b1(), 1.0);
  constexpr int kSide = 4;
  for (int i = 0; i < kSide; ++i) {
    for (int j = 0; j < kSide; ++j) {
      const double x0 = kLo * std::pow(hi / kLo, (i + 0.5) / kSide);
      const double y0 = kLo * std::pow(hi / kLo, (j + 0.5) / kSide);
      auto root = search::newton2d(residual, {x0, y0}, 1e-10);
      if (root && root->first > 0.0 && root->second > 0.0 && root->first <= hi && root->second <= hi) return root;
    }
  }
  return std::nullopt;
}

enum class JiCondition { Yes, No, NoEquilibrium };

inline constexpr std::string_view to_string(JiCondition j) noexcept {
  switch (j) {
    case JiCondition::Yes: return "yes";
    case JiCondition::No: return "no";
    case JiCondition::NoEquilibrium: return "no-equilibrium";
  }
  return "unknown";
}

/// Sufficient ergodicity condition of Ji et al. for the non-degenerate
/// system, evaluated at the deterministic equilibrium (x*, y*).
inline JiCondition ji_condition(const ModelParams& p) {
  const auto eq = deterministic_equilibrium(p);
  if (!eq) return JiCondition::NoEquilibrium;
  const double xs = eq->first, ys = eq->second;
  const bool c1 = (p.c2() - p.a2() * p.m2()) * p.a1() / p.b1() > p.a2() * p.m1();
  const bool c2 = p.b1() > p.a1() * p.m2() / (p.m1() + p.m2() * xs);
  const double delta = p.c2() * xs * p.alpha() * p.alpha() / 2.0 + p.c1() * ys * p.beta() * p.beta() / 2.0;
  const double t1 = p.c2() * (p.b1() - p.m2() * (p.a1() - p.b1() * xs) / p.m1()) * (p.m1() + p.m3() * ys) * xs * xs;
  const double t2 = p.b2() * p.c1() * (p.m1() + p.m2() * xs) * ys * ys;
  return (c1 && c2 && delta < std::fmin(t1, t2)) ? JiCondition::Yes : JiCondition::No;
}

/// Holling type-II conditions of Liu and Wang, only meaningful for
/// (m1, m2, m3) = (1, 1, 0). `extinction` evaluates the inequality
/// c2 + a2 - beta^2/2 < 0 as published; `extinction_alt` evaluates the
/// c2 - a2 - beta^2/2 < 0 reading.
struct LwFlags {
  bool applicable = false;
  std::optional<bool> extinction;
  std::optional<bool> persistence;
  std::optional<bool> extinction_alt;
};

inline LwFlags lw_condition(const ModelParams& p) {
  LwFlags f;
  f.applicable = p.m1() == 1.0 && p.m2() == 1.0 && p.m3() == 0.0;
  if (!f.applicable) return f;
  const double prey = p.a1() - p.alpha() * p.alpha() / 2.0;
  const double half_b2 = p.beta() * p.beta() / 2.0;
  f.extinction = prey > 0.0 && p.c2() + p.a2() - half_b2 < 0.0;
  f.extinction_alt = prey > 0.0 && p.c2() - p.a2() - half_b2 < 0.0;
  f.persistence = prey > 0.0 && p.a2() - half_b2 > 0.0 && prey / p.c1() > (p.c2() + p.a2() - half_b2) / p.b2();
  return f;
}

struct ThresholdReport {
  Regime regime = Regime::BothExtinct;
  std::optional<double> lambda;
  std::optional<double> quadrature_error;
  std::optional<double> jensen_bound;
  std::optional<double> response_integral;
  std::optional<double> permanence_floor;
  JiCondition ji = JiCondition::NoEquilibrium;
  LwFlags lw;
};

inline ThresholdReport threshold_report(const ModelParams& p, double eps_critical = kDefaultEpsCritical,
                                        double tol = 1e-10) {
  detail::require(eps_critical > 0.0, "threshold_report: critical band must be positive");
  ThresholdReport r;
  r.ji = ji_condition(p);
  r.lw = lw_condition(p);
  if (!boundary_law(p)) {
    r.regime = Regime::BothExtinct;
    return r;
  }
  const auto est = lambda_quadrature(p, tol);
  r.lambda = est.lambda;
  r.quadrature_error = est.error;
  r.response_integral = est.response_integral;
  r.jensen_bound = jensen_bound(p);
  r.regime = classify_lambda(est.lambda, eps_critical);
  if (est.lambda > 0.0) r.permanence_floor = permanence_floor(p, est.lambda);
  return r;
}

// ---------------------------------------------------------------------------
// Parameter sweeps

struct SweepAxis {
  std::string coefficient;
  double lo;
  double hi;
  int steps;
  bool log_scale = false;

  double value(int i) const {
    if (steps == 1) return lo;
    const double t = static_cast<double>(i) / (steps - 1);
    if (i == steps - 1) return hi;
    return log_scale ? lo * std::pow(hi / lo, t) : lo + t * (hi - lo);
  }
};

struct SweepRow {
  std::vector<double> point;  // one value per axis, axis order
  ThresholdReport report;
};

struct SweepSummary {
  std::size_t coexistence_in_j = 0;      // G+ and Ji's condition holds
  std::size_t coexistence_not_j = 0;     // G+ without Ji's condition
  std::size_t predator_extinct = 0;      // G-
  std::size_t critical = 0;
  std::size_t both_extinct = 0;
};

struct SweepResult {
  std::vector<SweepAxis> axes;
  std::vector<SweepRow> rows;  // grid order, last axis fastest
  SweepSummary summary;
};

inline constexpr std::size_t kDefaultCellCap = 10'000'000;

inline SweepResult sweep(const ModelParams& base, const std::vector<SweepAxis>& axes,
                         double eps_critical = kDefaultEpsCritical, std::size_t cell_cap = kDefaultCellCap,
                         unsigned workers = 1) {
  detail::require(!axes.empty(), "sweep: grid must have at least one axis");
  std::size_t cells = 1;
  for (const auto& ax : axes) {
    detail::require(ax.steps >= 1, "sweep: every axis needs at least one step");
    detail::require(std::isfinite(ax.lo) && std::isfinite(ax.hi), "sweep: axis bounds must be finite");
    detail::require(!ax.log_scale || (ax.lo > 0.0 && ax.hi > 0.0), "sweep: log axes need positive bounds");
    Coefficients probe;
    if (!coefficient_slot(probe, ax.coefficient))
      throw Error(ErrorCode::InvalidArgument, "sweep: unknown coefficient '" + ax.coefficient + "'");
    if (cells > cell_cap / static_cast<std::size_t>(ax.steps))
      throw Error(ErrorCode::GridTooLarge, "sweep grid exceeds cell cap " + std::to_string(cell_cap));
    cells *= static_cast<std::size_t>(ax.steps);
  }

  SweepResult out;
  out.axes = axes;
  out.rows = parallel_map(cells, workers, [&](std::size_t cell) {
    SweepRow row;
    row.point.resize(axes.size());
    Coefficients raw = base.coefficients();
    std::size_t rest = cell;
    for (std::size_t k = axes.size(); k-- > 0;) {
      const int idx = static_cast<int>(rest % static_cast<std::size_t>(axes[k].steps));
      rest /= static_cast<std::size_t>(axes[k].steps);
      row.point[k] = axes[k].value(idx);
      *coefficient_slot(raw, axes[k].coefficient) = row.point[k];
    }
    row.report = threshold_report(validate(raw), eps_critical);
    return row;
  });

  for (const auto& row : out.rows) {
    switch (row.report.regime) {
      case Regime::Coexistence:
        (row.report.ji == JiCondition::Yes ? out.summary.coexistence_in_j : out.summary.coexistence_not_j)++;
        break;
      case Regime::PredatorExtinct: out.summary.predator_extinct++; break;
      case Regime::Critical: out.summary.critical++; break;
      case Regime::BothExtinct: out.summary.both_extinct++; break;
    }
  }
  return out;
}

}  // namespace bdsde

#endif  // BDSDE_THRESHOLD_HPP
