#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bdsde/ergodic.hpp"
#include "reference.hpp"

using namespace bdsde;
using bdsde::testing::kLambdaRef;
using bdsde::testing::reference;

namespace {

Trajectory synthetic(std::size_t n, double dt, double (*u)(double), double (*v)(double)) {
  Trajectory t;
  t.record_dt = dt;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) * dt;
    t.times.push_back(s);
    t.u.push_back(u(s));
    if (v) t.v.push_back(v(s));
  }
  return t;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> e;
  for (int i = 0; i < n; ++i) e.push_back(lo + (hi - lo) * i / (n - 1));
  return e;
}

OccupationHistogram random_histogram(std::mt19937_64& gen, const std::vector<double>& edges) {
  OccupationHistogram h;
  h.x_edges = edges;
  std::uniform_real_distribution<double> d(0.0, 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    h.counts.push_back(d(gen));
    total += h.counts.back();
  }
  h.total_time = total;
  for (double c : h.counts) h.weights.push_back(c / total);
  return h;
}

}  // namespace

TEST(TimeAverage, ConstantPath) {
  const auto t = synthetic(1000, 0.01, [](double) { return std::log(2.0); }, [](double) { return 0.0; });
  EXPECT_EQ(time_average(t, Functional::x_power(2.0)), std::pow(2.0, 2.0));
  EXPECT_EQ(time_average(t, Functional::y_power(1.0)), 1.0);
  EXPECT_EQ(time_average(t, Functional::box(1.0, 3.0, 0.5, 1.5)), 1.0);
}

TEST(TimeAverage, ConstantFunctionalIsExact) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> n(0.0, 2.0);
  Trajectory t;
  t.record_dt = 0.1;
  for (int i = 0; i < 12345; ++i) {
    t.times.push_back(0.1 * i);
    t.u.push_back(n(gen));
    t.v.push_back(n(gen));
  }
  EXPECT_EQ(time_average(t, Functional::x_power(0.0)), 1.0);
  EXPECT_EQ(time_average(t, Functional::box(0.0, INFINITY, 0.0, INFINITY)), 1.0);
}

TEST(TimeAverage, Windowing) {
  const auto t = synthetic(101, 1.0, [](double s) { return s < 50.0 ? 0.0 : std::log(3.0); }, nullptr);
  EXPECT_NEAR(time_average(t, Functional::x_power(1.0), TimeWindow::after_burn_in(0.5)), 3.0, 1e-12);
  EXPECT_NEAR(time_average(t, Functional::x_power(1.0), {0.0, 0.49}), 1.0, 1e-12);
  EXPECT_THROW(time_average(t, Functional::x_power(1.0), {0.6, 0.5}), Error);
}

TEST(TimeAverage, PredatorFunctionalOnBoundaryPath) {
  const auto t = synthetic(10, 1.0, [](double) { return 0.0; }, nullptr);
  try {
    time_average(t, Functional::y_power(1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownFunctional);
  }
}

TEST(Functional, Parse) {
  const auto p = reference();
  EXPECT_EQ(Functional::parse("x^2", p)(3.0, 5.0), 9.0);
  EXPECT_EQ(Functional::parse("y^0.5", p)(3.0, 4.0), 2.0);
  EXPECT_EQ(Functional::parse("box(0,1,2,3)", p)(0.5, 2.5), 1.0);
  EXPECT_EQ(Functional::parse("box(0,1,2,3)", p)(1.5, 2.5), 0.0);
  EXPECT_DOUBLE_EQ(Functional::parse("response", p)(1.0, 1.0), 1.0);
  for (const char* bad : {"z^2", "x^", "x^two", "box(1,2,3)", "box(1,2,3,4", "resp"}) {
    try {
      Functional::parse(bad, p);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::UnknownFunctional) << bad;
    }
  }
}

TEST(Lyapunov, LinearLogPath) {
  const auto down = synthetic(2001, 0.1, [](double) { return 0.0; }, [](double s) { return -s; });
  EXPECT_NEAR(lyapunov_exponent(down, Component::V), -1.0, 1e-10);
  const auto flat = synthetic(2001, 0.1, [](double) { return 0.0; }, nullptr);
  EXPECT_NEAR(lyapunov_exponent(flat, Component::U), 0.0, 1e-10);
  const auto up = synthetic(2001, 0.1, [](double s) { return 3.0 * s; }, nullptr);
  EXPECT_NEAR(lyapunov_exponent(up, Component::U), 3.0, 1e-10);
  const auto steep = synthetic(2001, 0.1, [](double s) { return -2.0 * s; }, nullptr);
  EXPECT_NEAR(lyapunov_exponent(steep, Component::U), -2.0, 1e-10);
}

TEST(Lyapunov, HorizonFloor) {
  const auto t = synthetic(500, 0.1, [](double) { return 0.0; }, nullptr);
  try {
    lyapunov_exponent(t, Component::U);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::HorizonTooShort);
  }
  EXPECT_NO_THROW(lyapunov_exponent(t, Component::U, 0.5, 10.0));
}

TEST(Histogram, SinglePoint) {
  const auto t = synthetic(1, 1.0, [](double) { return std::log(1.5); }, nullptr);
  const auto h = occupation_histogram(t, {0.0, 1.0, 2.0, 3.0});
  EXPECT_EQ(h.weights, (std::vector<double>{0.0, 1.0, 0.0}));
}

TEST(Histogram, WeightsSumToOneIncludingOutliers) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> n(0.0, 3.0);
  Trajectory t;
  t.record_dt = 0.01;
  for (int i = 0; i < 5000; ++i) {
    t.times.push_back(0.01 * i);
    t.u.push_back(n(gen));
    t.v.push_back(n(gen));
  }
  const auto h = occupation_histogram(t, linspace(0.5, 4.0, 8), linspace(0.2, 2.0, 5));
  double s = 0.0;
  for (double w : h.weights) s += w;
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_EQ(h.weights.size(), 7u * 4u);
  EXPECT_THROW(occupation_histogram(t, {1.0, 1.0}), Error);
}

TEST(TvProxy, IdenticalAndDisjoint) {
  const auto a = synthetic(10, 1.0, [](double) { return std::log(0.5); }, nullptr);
  const auto b = synthetic(10, 1.0, [](double) { return std::log(2.5); }, nullptr);
  const std::vector<double> e{0.0, 1.0, 2.0, 3.0};
  EXPECT_EQ(tv_proxy(occupation_histogram(a, e), occupation_histogram(a, e)), 0.0);
  EXPECT_EQ(tv_proxy(occupation_histogram(a, e), occupation_histogram(b, e)), 1.0);
  try {
    tv_proxy(occupation_histogram(a, e), occupation_histogram(a, {0.0, 1.0, 2.0}));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::GridMismatch);
  }
}

TEST(TvProxy, MetricProperties) {
  std::mt19937_64 gen(3);
  const auto edges = linspace(0.0, 5.0, 11);
  for (int i = 0; i < 500; ++i) {
    const auto a = random_histogram(gen, edges), b = random_histogram(gen, edges), c = random_histogram(gen, edges);
    EXPECT_EQ(tv_proxy(a, b), tv_proxy(b, a));
    EXPECT_LE(tv_proxy(a, c), tv_proxy(a, b) + tv_proxy(b, c) + 1e-15);
    EXPECT_GE(tv_proxy(a, b), 0.0);
    EXPECT_LE(tv_proxy(a, b), 1.0);
  }
}

TEST(OccupationBound, SyntheticConstantPath) {
  const auto t = synthetic(100, 1.0, [](double) { return 0.0; }, [](double) { return 0.0; });
  const auto k = permanence_constants(reference(), kLambdaRef);
  const auto d = occupation_bound_check(t, 0.5, 2.0, k);
  EXPECT_EQ(d.frac_y_above_hbar, 1.0);
  EXPECT_EQ(d.frac_y_above_h, 0.0);
  EXPECT_EQ(d.frac_x_above_h, 0.0);
  EXPECT_NEAR(d.bound_x_above_h, 1.5 / 2.0, 1e-15);
  EXPECT_THROW(occupation_bound_check(t, 2.0, 2.0, k), Error);
  EXPECT_THROW(box_occupation(t, 3.0, 2.0), Error);
}

TEST(BoundaryRun, KolmogorovSmirnovToGamma) {
  SimConfig cfg;
  cfg.horizon = 1e4;
  cfg.seed = 5;
  cfg.thinning = 10;
  const auto phi = simulate_boundary(reference(), cfg);
  const auto law = *boundary_law(reference());
  const auto h = occupation_histogram(phi, linspace(0.0, 8.0, 161));
  EXPECT_LE(ks_distance(h, [&](double x) { return law.cdf(x); }), 0.02);
  EXPECT_NEAR(time_average(phi, Functional::x_power(1.0)), 1.5, 0.03);
}

TEST(SystemRun, PermanenceDiagnostics) {
  SimConfig cfg;
  cfg.horizon = 1e4;
  cfg.seed = 6;
  cfg.thinning = 10;
  const auto p = reference();
  const auto t = simulate_system(p, cfg);
  const auto k = permanence_constants(p, kLambdaRef);
  const auto w = TimeWindow::after_burn_in(0.5);
  EXPECT_GE(time_average(t, Functional::y_power(1.0), w), k.m_bar);
  EXPECT_GT(box_occupation(t, k.hbar, *k.big_h, w), *k.box_occupation_bound());
  const auto d = occupation_bound_check(t, k.hbar, 20.0, k, w);
  EXPECT_LE(d.frac_x_above_h, d.bound_x_above_h + 0.01);
  EXPECT_NEAR(lyapunov_exponent(t, Component::V), 0.0, 0.02);
}

TEST(SystemRun, ThinningDoesNotMoveBoxOccupation) {
  const auto p = reference();
  const auto k = permanence_constants(p, kLambdaRef);
  SimConfig cfg;
  cfg.horizon = 2000;
  cfg.seed = 9;
  cfg.thinning = 10;
  const auto a = simulate_system(p, cfg);
  cfg.thinning = 20;
  const auto b = simulate_system(p, cfg);
  const double fa = box_occupation(a, k.hbar, *k.big_h), fb = box_occupation(b, k.hbar, *k.big_h);
  // the b records are a subset of the a records; binomial error with a generous
  // effective sample size reduction for autocorrelation
  const double se = std::sqrt(fa * (1 - fa) / (static_cast<double>(b.size()) / 100.0));
  EXPECT_LT(std::fabs(fa - fb), 2.0 * se + 1e-12);
}

TEST(TvSeries, WindowsAndDecrease) {
  const auto p = reference();
  SimConfig cfg;
  cfg.horizon = 1000;
  cfg.seed = 4;
  cfg.thinning = 10;
  cfg.x0 = cfg.y0 = 0.1;
  const auto a = simulate_system(p, cfg);
  cfg.x0 = cfg.y0 = 5.0;
  const auto b = simulate_system(p, cfg);
  const auto series = tv_series(a, b, linspace(0.0, 5.0, 11), linspace(0.0, 3.0, 7), 2);
  ASSERT_EQ(series.size(), 2u);
  EXPECT_EQ(series[0].from, 0.0);
  EXPECT_EQ(series[1].to, 1.0);
  EXPECT_LE(series[1].tv, series[0].tv);
}

TEST(Merge, MeansInOrder) {
  ErgodicReport r1{{{"x^1", 1.0}}, 0.1, 0.5, std::nullopt, {}};
  ErgodicReport r2{{{"x^1", 3.0}}, -0.1, 0.7, std::nullopt, {}};
  const auto s = merge_reports({r1, r2});
  ASSERT_EQ(s.mean_time_averages.size(), 1u);
  EXPECT_EQ(s.mean_time_averages[0].value, 2.0);
  EXPECT_NEAR(*s.mean_lyapunov_y, 0.0, 1e-17);
  EXPECT_NEAR(*s.mean_box_occupation, 0.6, 1e-15);
  const auto swapped = merge_reports({r2, r1});
  EXPECT_EQ(swapped.mean_time_averages[0].value, 2.0);
}
