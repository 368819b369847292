#ifndef BDSDE_SEARCH_HPP
#define BDSDE_SEARCH_HPP

#include <cmath>
#include <optional>

#include "bdsde/error.hpp"
#include "bdsde/model.hpp"

namespace bdsde::search {

struct Extremum {
  double arg;
  double value;
};

/// Golden-section search for the maximum of a unimodal f on [lo, hi].
template <class F>
Extremum golden_max(const F& f, double lo, double hi, double x_tol = 1e-12, int max_iter = 200) {
  constexpr double kInvPhi = 0.6180339887498948482;
  double c = hi - kInvPhi * (hi - lo);
  double d = lo + kInvPhi * (hi - lo);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < max_iter && (hi - lo) > x_tol * (1.0 + std::fabs(c) + std::fabs(d)); ++i) {
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - kInvPhi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + kInvPhi * (hi - lo);
      fd = f(d);
    }
  }
  return fc >= fd ? Extremum{c, fc} : Extremum{d, fd};
}

struct Bracket {
  double lo;
  double hi;
};

/// Bisection for a sign change f(lo) > 0 >= f(hi). The invariant is kept on
/// the returned bracket: f(lo) > 0 and f(hi) <= 0, width <= tol.
template <class F>
Bracket bisect_positive_to_nonpositive(const F& f, double lo, double hi, double tol, int max_iter = 400) {
  bdsde::detail::require(lo < hi && tol > 0.0, "bisect: need lo < hi and tol > 0");
  for (int i = 0; i < max_iter && hi - lo > tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return {lo, hi};
}

/// Damped Newton on a 2-D system F(x, y) = 0 restricted to the open positive
/// quadrant. The Jacobian is formed by central differences. Returns the root
/// if the residual max-norm drops to residual_tol.
template <class F>
std::optional<Vec2> newton2d(const F& residual, Vec2 start, double residual_tol, int max_iter = 100) {
  auto norm = [](Vec2 r) { return std::fmax(std::fabs(r.first), std::fabs(r.second)); };
  Vec2 z = start;
  Vec2 r = residual(z.first, z.second);
  for (int it = 0; it < max_iter; ++it) {
    if (!std::isfinite(norm(r))) return std::nullopt;
    if (norm(r) <= residual_tol) return z;
    const double hx = 1e-7 * std::fmax(std::fabs(z.first), 1e-8);
    const double hy = 1e-7 * std::fmax(std::fabs(z.second), 1e-8);
    const Vec2 rxp = residual(z.first + hx, z.second), rxm = residual(z.first - hx, z.second);
    const Vec2 ryp = residual(z.first, z.second + hy), rym = residual(z.first, z.second - hy);
    const double j11 = (rxp.first - rxm.first) / (2 * hx), j21 = (rxp.second - rxm.second) / (2 * hx);
    const double j12 = (ryp.first - rym.first) / (2 * hy), j22 = (ryp.second - rym.second) / (2 * hy);
    const double det = j11 * j22 - j12 * j21;
    if (!std::isfinite(det) || det == 0.0) return std::nullopt;
    const double dx = (j22 * r.first - j12 * r.second) / det;
    const double dy = (-j21 * r.first + j11 * r.second) / det;

    double step = 1.0;
    bool accepted = false;
    for (int k = 0; k < 40; ++k, step *= 0.5) {
      const Vec2 cand{z.first - step * dx, z.second - step * dy};
      if (!(cand.first > 0.0 && cand.second > 0.0)) continue;
      const Vec2 rc = residual(cand.first, cand.second);
      if (norm(rc) < norm(r) || norm(rc) <= residual_tol) {
        z = cand;
        r = rc;
        accepted = true;
        break;
      }
    }
    if (!accepted) return std::nullopt;
  }
  return norm(r) <= residual_tol ? std::optional<Vec2>(z) : std::nullopt;
}

}  // namespace bdsde::search

#endif  // BDSDE_SEARCH_HPP
