#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "bdsde/lie.hpp"
#include "reference.hpp"

using namespace bdsde;
using namespace bdsde::lie;
using bdsde::testing::reference;

namespace {

using VecFn = std::function<Vec2(double, double)>;

double norm(Vec2 a) { return std::hypot(a.first, a.second); }

// [X, Y] from central differences of X and Y.
Vec2 fd_bracket(const VecFn& x, const VecFn& y, double u, double v, double h = 1e-6) {
  const Vec2 yu = {(y(u + h, v).first - y(u - h, v).first) / (2 * h), (y(u + h, v).second - y(u - h, v).second) / (2 * h)};
  const Vec2 yv = {(y(u, v + h).first - y(u, v - h).first) / (2 * h), (y(u, v + h).second - y(u, v - h).second) / (2 * h)};
  const Vec2 xu = {(x(u + h, v).first - x(u - h, v).first) / (2 * h), (x(u + h, v).second - x(u - h, v).second) / (2 * h)};
  const Vec2 xv = {(x(u, v + h).first - x(u, v - h).first) / (2 * h), (x(u, v + h).second - x(u, v - h).second) / (2 * h)};
  const Vec2 xp = x(u, v), yp = y(u, v);
  return {xp.first * yu.first + xp.second * yv.first - yp.first * xu.first - yp.second * xv.first,
          xp.first * yu.second + xp.second * yv.second - yp.first * xu.second - yp.second * xv.second};
}

VecFn as_fn(const Field& f) {
  return [f](double u, double v) { return f(u, v); };
}

std::vector<FieldExpr> closed_set(int max_depth) {
  std::vector<FieldExpr> all{FieldExpr::drift(), FieldExpr::noise()};
  std::vector<FieldExpr> frontier = all;
  for (int d = 1; d <= max_depth; ++d) {
    std::vector<FieldExpr> next;
    for (const auto& a : all)
      for (const auto& b : frontier)
        if (std::max(a.depth(), b.depth()) == d - 1 && a.to_string() != b.to_string()) next.push_back(FieldExpr::bracket(a, b));
    all.insert(all.end(), next.begin(), next.end());
    frontier = next;
  }
  return all;
}

}  // namespace

TEST(ExpRational, DriftMatchesModel) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> d(-5.0, 5.0);
  const auto p = reference().with("m3", 0.6);
  const auto a = drift_field(p);
  for (int i = 0; i < 200; ++i) {
    const double u = d(gen), v = d(gen);
    const auto ref = log_drift(p, NoiseMode::Independent, u, v);
    EXPECT_NEAR(a(u, v).first, ref.first, 1e-12 * (1 + std::fabs(ref.first)));
    EXPECT_NEAR(a(u, v).second, ref.second, 1e-12 * (1 + std::fabs(ref.second)));
  }
}

TEST(Bracket, NoiseWithItselfVanishes) {
  const auto r = lie_bracket(reference(), FieldExpr::noise(), FieldExpr::noise(), {0.3, -0.2});
  EXPECT_EQ(r.first, 0.0);
  EXPECT_EQ(r.second, 0.0);
}

TEST(Bracket, DriftNoiseIsMinusJacobianTimesNoise) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (const double m3 : {0.0, 0.8}) {
    const auto p = reference().with("m3", m3);
    const VecFn a = [&](double u, double v) { return log_drift(p, NoiseMode::Independent, u, v); };
    const VecFn b = [&](double, double) { return Vec2{p.alpha(), p.beta()}; };
    for (int i = 0; i < 100; ++i) {
      const double u = d(gen), v = d(gen);
      const auto exact = lie_bracket(p, FieldExpr::drift(), FieldExpr::noise(), {u, v});
      const auto fd = fd_bracket(a, b, u, v);
      const Vec2 diff{exact.first - fd.first, exact.second - fd.second};
      EXPECT_LE(norm(diff), 1e-6 * std::max(norm(fd), 1.0)) << u << " " << v;
    }
  }
}

TEST(Bracket, EveryLevelMatchesFiniteDifferences) {
  // Each depth-d bracket is checked against finite differences of its two
  // closed-form arguments, which were themselves checked one level down.
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  const auto p = reference().with("m3", 0.4);
  const auto family = spanning_family(3, Variant::Full);
  const auto a_expr = FieldExpr::drift(), b_expr = FieldExpr::noise();
  for (const auto& e : family) {
    if (e.depth() == 0) continue;
    const auto parsed = e.to_string();
    // right-nested: [X, rest]
    const std::string inner = parsed.substr(3, parsed.size() - 4);
    const auto x = FieldExpr::parse(parsed.substr(1, 1));
    const auto y = FieldExpr::parse(inner);
    const auto fx = as_fn(x.compile(p)), fy = as_fn(y.compile(p));
    const auto fe = e.compile(p);
    for (int i = 0; i < 100; ++i) {
      const double u = d(gen), v = d(gen);
      const auto exact = fe(u, v);
      const auto fd = fd_bracket(fx, fy, u, v);
      const Vec2 diff{exact.first - fd.first, exact.second - fd.second};
      ASSERT_LE(norm(diff), 1e-6 * std::max(norm(fd), 1.0)) << parsed << " at " << u << ", " << v;
    }
  }
}

TEST(Bracket, Antisymmetry) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  const auto p = reference().with("m3", 0.2);
  const auto set = closed_set(2);
  std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
  for (int i = 0; i < 200; ++i) {
    const auto& x = set[pick(gen)];
    const auto& y = set[pick(gen)];
    if (std::max(x.depth(), y.depth()) >= kMaxDepth) continue;
    const Vec2 pt{d(gen), d(gen)};
    const auto xy = lie_bracket(p, x, y, pt), yx = lie_bracket(p, y, x, pt);
    EXPECT_NEAR(xy.first, -yx.first, 1e-9 * (1 + std::fabs(xy.first)));
    EXPECT_NEAR(xy.second, -yx.second, 1e-9 * (1 + std::fabs(xy.second)));
  }
}

TEST(Bracket, Bilinearity) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> d(-3.0, 3.0), s(-2.0, 2.0);
  const auto p = reference().with("m3", 0.2);
  const auto set = closed_set(2);
  std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
  for (int i = 0; i < 100; ++i) {
    const auto fx = set[pick(gen)].compile(p), fy = set[pick(gen)].compile(p), fz = set[pick(gen)].compile(p);
    const double a = s(gen), b = s(gen);
    auto scale = [&](const Field& f, double c) {
      const std::array<double, 3> m{p.m1(), p.m2(), p.m3()};
      const auto k = ExpRational::term(m, c, 0, 0, 0);
      return Field{k * f.first, k * f.second};
    };
    const Field combo{scale(fx, a).first + scale(fy, b).first, scale(fx, a).second + scale(fy, b).second};
    const double u = d(gen), v = d(gen);
    const auto lhs = bracket(combo, fz)(u, v);
    const auto bx = bracket(fx, fz)(u, v), by = bracket(fy, fz)(u, v);
    const Vec2 rhs{a * bx.first + b * by.first, a * bx.second + b * by.second};
    EXPECT_NEAR(lhs.first, rhs.first, 1e-9 * (1 + std::fabs(rhs.first)));
    EXPECT_NEAR(lhs.second, rhs.second, 1e-9 * (1 + std::fabs(rhs.second)));
  }
}

TEST(Bracket, FiniteOnBoundaryLimit) {
  const auto r = lie_bracket(reference(), FieldExpr::drift(), FieldExpr::noise(), {std::log(1.5), -600.0});
  EXPECT_TRUE(std::isfinite(r.first));
  EXPECT_TRUE(std::isfinite(r.second));
  // -(DA)B with e^v -> 0: dA1/du = -b1 e^u, dA2/du = c2 m1 e^u / (m1 + m2 e^u)^2
  EXPECT_NEAR(r.first, 1.5, 1e-12);
  EXPECT_NEAR(r.second, -2.0 * 1.5 / (2.5 * 2.5), 1e-12);
}

TEST(FieldExpr, ParseAndDepth) {
  const auto e = FieldExpr::parse("[A,[A,B]]");
  EXPECT_EQ(e.depth(), 2);
  EXPECT_EQ(e.to_string(), "[A,[A,B]]");
  EXPECT_THROW(FieldExpr::parse("[A,B"), Error);
  EXPECT_THROW(FieldExpr::parse("C"), Error);
  try {
    FieldExpr::parse("[A,[A,[A,[A,[A,B]]]]]");
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::DepthExceeded);
  }
  EXPECT_NO_THROW(FieldExpr::parse("[A,[A,[A,[A,B]]]]"));
}

TEST(SpanningFamily, Sizes) {
  EXPECT_EQ(spanning_family(0, Variant::Ideal).size(), 1u);
  EXPECT_EQ(spanning_family(0, Variant::Full).size(), 2u);
  EXPECT_EQ(spanning_family(1, Variant::Full).size(), 3u);
  EXPECT_EQ(spanning_family(3, Variant::Ideal).size(), 1u + 1u + 2u + 4u);
  EXPECT_THROW(spanning_family(5, Variant::Full), Error);
}

TEST(Rank, SingleVectorAndZero) {
  EXPECT_EQ(rank_of({{1.0, 1.0}}).rank, 1);
  EXPECT_EQ(rank_of({{0.0, 0.0}}).rank, 0);
  EXPECT_EQ(rank_of({{1.0, 2.0}, {2.0, 4.0}}).rank, 1);
  EXPECT_EQ(rank_of({{1.0, 0.0}, {0.0, 1e-9}}).rank, 2);
  EXPECT_EQ(rank_of({{1.0, 0.0}, {0.0, 1e-12}}).rank, 1);
}

TEST(Rank, NoiseAloneIsRankOne) {
  const auto p = reference().with("beta", 1.0);
  EXPECT_EQ(lie_rank(p, {0.0, 0.0}, 0, Variant::Ideal).rank, 1);
}

TEST(Rank, ReferenceAtOrigin) {
  EXPECT_EQ(lie_rank(reference(), {0.0, 0.0}, 2, Variant::Full).rank, 2);
  EXPECT_EQ(lie_rank(reference(), {0.0, 0.0}, 2, Variant::Ideal).rank, 2);
}

TEST(Hormander, ReferenceGrid) {
  for (auto variant : {Variant::Full, Variant::Ideal}) {
    const auto rep = verify_hormander(reference(), Grid{}, 3, variant);
    EXPECT_EQ(rep.points.size(), 441u);
    EXPECT_TRUE(rep.deficient.empty()) << to_string(variant);
  }
}

TEST(Hormander, EmptyGridAndDeterminism) {
  Grid empty;
  empty.u_points = 0;
  const auto rep = verify_hormander(reference(), empty, 3, Variant::Full);
  EXPECT_TRUE(rep.points.empty());
  EXPECT_TRUE(rep.deficient.empty());
  const auto a = verify_hormander(reference(), Grid{}, 3, Variant::Ideal, 1);
  const auto b = verify_hormander(reference(), Grid{}, 3, Variant::Ideal, 4);
  EXPECT_EQ(a.ranks, b.ranks);
}
