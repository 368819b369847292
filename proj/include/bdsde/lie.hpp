#ifndef BDSDE_LIE_HPP
#define BDSDE_LIE_HPP

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "bdsde/error.hpp"
#include "bdsde/model.hpp"
#include "bdsde/parallel.hpp"

namespace bdsde::lie {

/// Finite sum of terms  coef * e^{a u} e^{b v} / D^k  with
/// D = m1 + m2 e^u + m3 e^v. Every component of the log-coordinate drift and
/// all of its partial derivatives have this form, and the family is closed
/// under products and d/du, d/dv:
///   d/du [e^{au} e^{bv} D^{-k}] = a e^{au} e^{bv} D^{-k} - k m2 e^{(a+1)u} e^{bv} D^{-k-1}
///   d/dv [e^{au} e^{bv} D^{-k}] = b e^{au} e^{bv} D^{-k} - k m3 e^{au} e^{(b+1)v} D^{-k-1}
class ExpRational {
 public:
  using Key = std::tuple<int, int, int>;  // (a, b, k)

  ExpRational() = default;
  ExpRational(double m1, double m2, double m3) : m_{m1, m2, m3} {}

  static ExpRational term(const std::array<double, 3>& m, double coef, int a, int b, int k) {
    ExpRational r(m[0], m[1], m[2]);
    r.add(coef, a, b, k);
    return r;
  }

  void add(double coef, int a, int b, int k) {
    if (coef == 0.0) return;
    auto& slot = terms_[{a, b, k}];
    slot += coef;
    if (slot == 0.0) terms_.erase({a, b, k});
  }

  ExpRational du() const {
    ExpRational out(m_[0], m_[1], m_[2]);
    for (const auto& [key, c] : terms_) {
      const auto [a, b, k] = key;
      out.add(a * c, a, b, k);
      out.add(-k * m_[1] * c, a + 1, b, k + 1);
    }
    return out;
  }

  ExpRational dv() const {
    ExpRational out(m_[0], m_[1], m_[2]);
    for (const auto& [key, c] : terms_) {
      const auto [a, b, k] = key;
      out.add(b * c, a, b, k);
      out.add(-k * m_[2] * c, a, b + 1, k + 1);
    }
    return out;
  }

  friend ExpRational operator*(const ExpRational& x, const ExpRational& y) {
    ExpRational out(x.m_[0], x.m_[1], x.m_[2]);
    for (const auto& [kx, cx] : x.terms_)
      for (const auto& [ky, cy] : y.terms_)
        out.add(cx * cy, std::get<0>(kx) + std::get<0>(ky), std::get<1>(kx) + std::get<1>(ky),
                std::get<2>(kx) + std::get<2>(ky));
    return out;
  }

  friend ExpRational operator+(ExpRational x, const ExpRational& y) {
    for (const auto& [k, c] : y.terms_) x.add(c, std::get<0>(k), std::get<1>(k), std::get<2>(k));
    return x;
  }

  friend ExpRational operator-(ExpRational x, const ExpRational& y) {
    for (const auto& [k, c] : y.terms_) x.add(-c, std::get<0>(k), std::get<1>(k), std::get<2>(k));
    return x;
  }

  double operator()(double u, double v) const {
    const double log_d = std::log(m_[0] + m_[1] * std::exp(u) + m_[2] * std::exp(v));
    double sum = 0.0;
    for (const auto& [key, c] : terms_) {
      const auto [a, b, k] = key;
      sum += c * std::exp(a * u + b * v - k * log_d);
    }
    return sum;
  }

  std::size_t size() const noexcept { return terms_.size(); }

 private:
  std::array<double, 3> m_{1.0, 0.0, 0.0};
  std::map<Key, double> terms_;
};

struct Field {
  ExpRational first;
  ExpRational second;

  Vec2 operator()(double u, double v) const { return {first(u, v), second(u, v)}; }
};

/// [X, Y]_i = sum_j X_j dY_i/dx_j - Y_j dX_i/dx_j.
inline Field bracket(const Field& x, const Field& y) {
  auto comp = [&](const ExpRational& xi, const ExpRational& yi) {
    return x.first * yi.du() + x.second * yi.dv() - (y.first * xi.du() + y.second * xi.dv());
  };
  return {comp(x.first, y.first), comp(x.second, y.second)};
}

/// The log-coordinate drift A(u, v) in closed form.
inline Field drift_field(const ModelParams& p) {
  const std::array<double, 3> m{p.m1(), p.m2(), p.m3()};
  ExpRational a1(m[0], m[1], m[2]), a2(m[0], m[1], m[2]);
  a1.add(p.a1() - 0.5 * p.alpha() * p.alpha(), 0, 0, 0);
  a1.add(-p.b1(), 1, 0, 0);
  a1.add(-p.c1(), 0, 1, 1);
  a2.add(-p.a2() - 0.5 * p.beta() * p.beta(), 0, 0, 0);
  a2.add(-p.b2(), 0, 1, 0);
  a2.add(p.c2(), 1, 0, 1);
  return {a1, a2};
}

/// The constant noise direction B = (alpha, beta).
inline Field noise_field(const ModelParams& p) {
  const std::array<double, 3> m{p.m1(), p.m2(), p.m3()};
  return {ExpRational::term(m, p.alpha(), 0, 0, 0), ExpRational::term(m, p.beta(), 0, 0, 0)};
}

inline constexpr int kMaxDepth = 4;

/// Element of the closed set {A, B, [X, Y] ...}: a generator or a bracket of
/// two earlier expressions. Depth counts bracket nesting (A, B have depth 0).
class FieldExpr {
 public:
  static FieldExpr drift() { return FieldExpr('A'); }
  static FieldExpr noise() { return FieldExpr('B'); }

  static FieldExpr bracket(const FieldExpr& x, const FieldExpr& y) {
    FieldExpr e('[');
    e.left_ = std::make_shared<const FieldExpr>(x);
    e.right_ = std::make_shared<const FieldExpr>(y);
    e.depth_ = 1 + std::max(x.depth_, y.depth_);
    if (e.depth_ > kMaxDepth)
      throw Error(ErrorCode::DepthExceeded, "bracket depth " + std::to_string(e.depth_) + " exceeds " +
                                                std::to_string(kMaxDepth));
    return e;
  }

  /// Parses "A", "B" or "[X,Y]".
  static FieldExpr parse(const std::string& text) {
    std::size_t pos = 0;
    auto e = parse_at(text, pos);
    if (pos != text.size()) throw Error(ErrorCode::InvalidArgument, "trailing input in field expression '" + text + "'");
    return e;
  }

  int depth() const noexcept { return depth_; }
  bool is_drift() const noexcept { return tag_ == 'A'; }

  std::string to_string() const {
    if (tag_ != '[') return std::string(1, tag_);
    return "[" + left_->to_string() + "," + right_->to_string() + "]";
  }

  Field compile(const ModelParams& p) const {
    if (tag_ == 'A') return drift_field(p);
    if (tag_ == 'B') return noise_field(p);
    return lie::bracket(left_->compile(p), right_->compile(p));
  }

 private:
  explicit FieldExpr(char tag) : tag_(tag) {}

  static FieldExpr parse_at(const std::string& s, std::size_t& pos) {
    auto fail = [&] { return Error(ErrorCode::InvalidArgument, "cannot parse field expression '" + s + "'"); };
    if (pos >= s.size()) throw fail();
    if (s[pos] == 'A' || s[pos] == 'B') return FieldExpr(s[pos++]);
    if (s[pos] != '[') throw fail();
    ++pos;
    auto x = parse_at(s, pos);
    if (pos >= s.size() || s[pos] != ',') throw fail();
    ++pos;
    auto y = parse_at(s, pos);
    if (pos >= s.size() || s[pos] != ']') throw fail();
    ++pos;
    return bracket(x, y);
  }

  char tag_;
  int depth_ = 0;
  std::shared_ptr<const FieldExpr> left_, right_;
};

/// Value of [X, Y] at (u, v).
inline Vec2 lie_bracket(const ModelParams& p, const FieldExpr& x, const FieldExpr& y, Vec2 point) {
  return bracket(x.compile(p), y.compile(p))(point.first, point.second);
}

enum class Variant { Full, Ideal };

inline constexpr std::string_view to_string(Variant v) noexcept { return v == Variant::Full ? "full" : "ideal"; }

/// Spanning family up to the given depth: the ideal generated by B is
/// spanned by B and the right-nested brackets [X1, [X2, ..., [A, B]]],
/// Xi in {A, B}; the full algebra adds A.
inline std::vector<FieldExpr> spanning_family(int depth, Variant variant) {
  if (depth < 0 || depth > kMaxDepth)
    throw Error(ErrorCode::DepthExceeded, "depth must lie in [0, " + std::to_string(kMaxDepth) + "]");
  std::vector<FieldExpr> out;
  if (variant == Variant::Full) out.push_back(FieldExpr::drift());
  out.push_back(FieldExpr::noise());
  if (depth == 0) return out;
  std::vector<FieldExpr> level{FieldExpr::bracket(FieldExpr::drift(), FieldExpr::noise())};
  for (int d = 1; d <= depth; ++d) {
    out.insert(out.end(), level.begin(), level.end());
    if (d == depth) break;
    std::vector<FieldExpr> next;
    for (const auto& e : level) {
      next.push_back(FieldExpr::bracket(FieldExpr::drift(), e));
      next.push_back(FieldExpr::bracket(FieldExpr::noise(), e));
    }
    level = std::move(next);
  }
  return out;
}

struct RankResult {
  int rank = 0;
  double sigma_max = 0;
  double sigma_min = 0;
  std::array<Vec2, 2> witness{};  // the pair of vectors with the largest normalised determinant
  std::array<std::string, 2> witness_names{};
};

inline constexpr double kRankRelTol = 1e-10;

/// Numerical rank of a family of plane vectors. For a 2 x n matrix M the
/// singular values follow from ||M||_F^2 = s1^2 + s2^2 and
/// s1 s2 = sqrt(sum of squared 2x2 minors), which avoids the cancellation of
/// forming M M^T.
inline RankResult rank_of(const std::vector<Vec2>& vs, const std::vector<std::string>& names = {}) {
  RankResult r;
  double fro2 = 0.0, minors2 = 0.0, best = -1.0;
  for (const auto& v : vs) fro2 += v.first * v.first + v.second * v.second;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    for (std::size_t j = i + 1; j < vs.size(); ++j) {
      const double det = vs[i].first * vs[j].second - vs[i].second * vs[j].first;
      minors2 += det * det;
      const double ni = std::hypot(vs[i].first, vs[i].second), nj = std::hypot(vs[j].first, vs[j].second);
      const double score = ni > 0 && nj > 0 ? std::fabs(det) / (ni * nj) : 0.0;
      if (score > best) {
        best = score;
        r.witness = {vs[i], vs[j]};
        if (names.size() == vs.size()) r.witness_names = {names[i], names[j]};
      }
    }
  }
  const double prod = std::sqrt(minors2);
  const double disc = std::sqrt(std::fmax(fro2 * fro2 - 4.0 * minors2, 0.0));
  r.sigma_max = std::sqrt(0.5 * (fro2 + disc));
  r.sigma_min = r.sigma_max > 0.0 ? prod / r.sigma_max : 0.0;
  if (r.sigma_max == 0.0) {
    r.rank = 0;
  } else {
    r.rank = r.sigma_min > kRankRelTol * r.sigma_max ? 2 : 1;
  }
  return r;
}

/// Compiled spanning family, reusable across evaluation points.
class LieFamily {
 public:
  LieFamily(const ModelParams& p, int depth, Variant variant) : depth_(depth), variant_(variant) {
    for (const auto& e : spanning_family(depth, variant)) {
      names_.push_back(e.to_string());
      fields_.push_back(e.compile(p));
    }
  }

  RankResult rank_at(Vec2 point) const {
    std::vector<Vec2> vs;
    vs.reserve(fields_.size());
    for (const auto& f : fields_) vs.push_back(f(point.first, point.second));
    return rank_of(vs, names_);
  }

  int depth() const noexcept { return depth_; }
  Variant variant() const noexcept { return variant_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  int depth_;
  Variant variant_;
  std::vector<std::string> names_;
  std::vector<Field> fields_;
};

inline RankResult lie_rank(const ModelParams& p, Vec2 point, int depth, Variant variant) {
  return LieFamily(p, depth, variant).rank_at(point);
}

struct Grid {
  double u_min = -5, u_max = 5;
  int u_points = 21;
  double v_min = -5, v_max = 5;
  int v_points = 21;

  std::size_t size() const noexcept {
    return u_points > 0 && v_points > 0 ? static_cast<std::size_t>(u_points) * static_cast<std::size_t>(v_points) : 0;
  }

  Vec2 point(std::size_t idx) const {
    const auto iu = static_cast<int>(idx / static_cast<std::size_t>(v_points));
    const auto iv = static_cast<int>(idx % static_cast<std::size_t>(v_points));
    auto coord = [](double lo, double hi, int n, int i) { return n == 1 ? lo : lo + (hi - lo) * i / (n - 1); };
    return {coord(u_min, u_max, u_points, iu), coord(v_min, v_max, v_points, iv)};
  }
};

/// Rank at every grid point. A clean pass is evidence at the sampled points,
/// not a proof that the condition holds everywhere.
struct LieRankReport {
  int depth = 0;
  Variant variant = Variant::Full;
  std::vector<Vec2> points;
  std::vector<int> ranks;
  std::vector<Vec2> deficient;
  std::vector<std::string> family;

  static constexpr std::string_view kScope = "evidence at sampled points";
};

inline LieRankReport verify_hormander(const ModelParams& p, const Grid& grid, int depth, Variant variant,
                                      unsigned workers = 1) {
  LieRankReport rep;
  rep.depth = depth;
  rep.variant = variant;
  const LieFamily family(p, depth, variant);
  rep.family = family.names();
  const std::size_t n = grid.size();
  rep.ranks = parallel_map(n, workers, [&](std::size_t i) { return family.rank_at(grid.point(i)).rank; });
  for (std::size_t i = 0; i < n; ++i) {
    rep.points.push_back(grid.point(i));
    if (rep.ranks[i] < 2) rep.deficient.push_back(grid.point(i));
  }
  return rep;
}

}  // namespace bdsde::lie

#endif  // BDSDE_LIE_HPP
