#ifndef BDSDE_GEOMETRY_HPP
#define BDSDE_GEOMETRY_HPP

#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include "bdsde/ergodic.hpp"
#include "bdsde/error.hpp"
#include "bdsde/model.hpp"
#include "bdsde/search.hpp"
#include "bdsde/simulate.hpp"
#include "bdsde/threshold.hpp"

namespace bdsde {

// Degenerate noise (B1 = B2): in the coordinates (u, z) with z = v - (beta/alpha) u
// the noise drops out of the z equation, leaving the control system
//   u' = alpha phi + g(u, z),   z' = h(u, z).

struct GH {
  double g;
  double h;
};

inline GH g_h(const ModelParams& p, double u, double z) {
  const double r = p.beta() / p.alpha();
  const double ev_exp = z + r * u;
  if (!(u <= kLogStateLimit) || !(ev_exp <= kLogStateLimit) || std::isnan(z))
    throw Error(ErrorCode::Overflow, "g_h: exponent outside representable range");
  const double eu = std::exp(u), ev = std::exp(ev_exp);
  const double d = p.m1() + p.m2() * eu + p.m3() * ev;
  const double prey_growth = p.a1() - 0.5 * p.alpha() * p.alpha();
  const double g = prey_growth - p.b1() * eu - p.c1() * ev / d;
  const double h = -(p.a2() + 0.5 * p.beta() * p.beta() + r * prey_growth) - p.b2() * ev + r * p.b1() * eu +
                   (p.c2() * eu + r * p.c1() * ev) / d;
  return {g, h};
}

/// True in the half-plane cases beta < 0 or beta >= alpha.
inline bool half_plane_case(const ModelParams& p) noexcept { return p.beta() < 0.0 || p.beta() >= p.alpha(); }

struct SupH {
  double value;     // +inf when the supremum diverges
  double argmax;    // location of the best point found
  bool diverges = false;
};

inline constexpr double kSupHInitialHalfWidth = 30.0;
inline constexpr double kSupHCap = 200.0;

/// sup over u of h(u, z). The bracket starts at [-30, 30] and doubles on
/// each side whose endpoint is not at least 1 below the best interior
/// value, up to |u| = 200 (further restricted so that e^{z + (beta/alpha) u}
/// stays representable). A grid scan picks the best cell, golden section
/// refines it. A maximum stuck at the cap is accepted as a limit when h is
/// flat there and reported as divergence when h still grows by >= 1 per
/// unit of u; anything in between raises BracketFailure.
inline SupH sup_h(const ModelParams& p, double z) {
  if (!half_plane_case(p)) throw Error(ErrorCode::InvalidArgument, "sup_h: needs beta < 0 or beta >= alpha");
  detail::require(std::isfinite(z), "sup_h: z must be finite");
  const double r = p.beta() / p.alpha();

  // Representable domain of u for this z.
  double dom_lo = -kSupHCap, dom_hi = std::fmin(kSupHCap, kLogStateLimit);
  if (r > 0.0) dom_hi = std::fmin(dom_hi, (kLogStateLimit - z) / r);
  if (r < 0.0) dom_lo = std::fmax(dom_lo, (kLogStateLimit - z) / r);
  if (!(dom_lo < dom_hi)) throw Error(ErrorCode::BracketFailure, "sup_h: empty representable u-domain");

  auto h_at = [&](double u) { return g_h(p, u, z).h; };
  double lo = std::fmax(-kSupHInitialHalfWidth, dom_lo), hi = std::fmin(kSupHInitialHalfWidth, dom_hi);
  constexpr double kStep = 0.05;

  while (true) {
    const int n = static_cast<int>(std::ceil((hi - lo) / kStep));
    const double step = (hi - lo) / n;
    int best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    std::vector<double> vals(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) {
      vals[static_cast<std::size_t>(i)] = h_at(lo + i * step);
      if (vals[static_cast<std::size_t>(i)] > best_val) {
        best_val = vals[static_cast<std::size_t>(i)];
        best = i;
      }
    }

    const bool lo_ok = vals.front() <= best_val - 1.0;
    const bool hi_ok = vals.back() <= best_val - 1.0;
    const bool lo_capped = lo <= dom_lo, hi_capped = hi >= dom_hi;
    if ((lo_ok || lo_capped) && (hi_ok || hi_capped)) {
      if ((best == 0 && lo_capped) || (best == n && hi_capped)) {
        const double edge = best == 0 ? lo : hi;
        const double inward = best == 0 ? lo + 1.0 : hi - 1.0;
        const double growth = best_val - h_at(inward);
        if (growth >= 1.0) return {std::numeric_limits<double>::infinity(), edge, true};
        if (growth <= 1e-6 * (1.0 + std::fabs(best_val))) return {best_val, edge, false};
        throw Error(ErrorCode::BracketFailure,
                    "sup_h: maximum at the bracket cap without a clear limit (z = " + std::to_string(z) + ")");
      }
      const double a = lo + std::max(best - 1, 0) * step;
      const double b = lo + std::min(best + 1, n) * step;
      const auto ext = search::golden_max(h_at, a, b);
      if (ext.value >= best_val) return {ext.value, ext.arg, false};
      return {best_val, lo + best * step, false};
    }
    if (!lo_ok && !lo_capped) lo = std::fmax(2.0 * lo, dom_lo);
    if (!hi_ok && !hi_capped) hi = std::fmin(2.0 * hi, dom_hi);
  }
}

struct CStar {
  double value;                  // +inf when sup_h stays positive up to z_hi
  double bracket_lo;             // sup_h > 0 here
  double bracket_hi;             // sup_h <= 0 here
  bool sign_oscillation = false; // sup_h turns positive again beyond the root

  bool finite() const noexcept { return std::isfinite(value); }
};

inline constexpr double kCStarScanLo = -50.0;
inline constexpr double kCStarScanHi = 50.0;
inline constexpr double kCStarScanStep = 0.5;

/// Smallest root of z -> sup_h(z), located by a scan of step 0.5 on
/// [z_lo, z_hi] followed by bisection to width tol. The returned value is
/// the upper bracket end, where sup_h <= 0 has been verified.
inline CStar c_star(const ModelParams& p, double z_lo = kCStarScanLo, double z_hi = kCStarScanHi, double tol = 1e-6) {
  if (!half_plane_case(p)) throw Error(ErrorCode::InvalidArgument, "c_star: needs beta < 0 or beta >= alpha");
  detail::require(z_lo < z_hi && tol > 0.0, "c_star: need z_lo < z_hi and tol > 0");
  auto sup_value = [&](double z) { return sup_h(p, z).value; };
  auto positive = [&](double z) { return sup_value(z) > 0.0; };
  if (!positive(z_lo))
    throw Error(ErrorCode::ScanInconclusive, "sup_h is not positive at z_lo = " + std::to_string(z_lo));

  const int n = static_cast<int>(std::ceil((z_hi - z_lo) / kCStarScanStep));
  double prev = z_lo;
  for (int i = 1; i <= n; ++i) {
    const double z = std::fmin(z_lo + i * kCStarScanStep, z_hi);
    if (!positive(z)) {
      const auto br = search::bisect_positive_to_nonpositive(sup_value, prev, z, tol);
      CStar out{br.hi, br.lo, br.hi, false};
      for (int j = i + 1; j <= n; ++j) {
        if (positive(std::fmin(z_lo + j * kCStarScanStep, z_hi))) {
          out.sign_oscillation = true;
          break;
        }
      }
      return out;
    }
    prev = z;
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  return {kInf, z_hi, kInf, false};
}

struct FullPlane {};

/// {(u, v) : v - slope * u <= c_star}, slope = beta / alpha.
struct HalfPlane {
  double slope;
  double c_star;
  bool sign_oscillation = false;
};

using ControlSetDescriptor = std::variant<FullPlane, HalfPlane>;

/// The unique invariant control set of the degenerate system: the whole
/// plane when 0 < beta < alpha, otherwise a half-plane bounded by c*.
inline ControlSetDescriptor invariant_control_set(const ModelParams& p, double tol = 1e-6) {
  if (!boundary_law(p) || !(lambda_quadrature(p).lambda > 0.0))
    throw Error(ErrorCode::RegimePrecondition, "invariant control set needs lambda > 0");
  if (!half_plane_case(p)) return FullPlane{};
  const auto cs = c_star(p, kCStarScanLo, kCStarScanHi, tol);
  return HalfPlane{p.beta() / p.alpha(), cs.value, cs.sign_oscillation};
}

/// Fraction of recorded time with v - slope * u > c_star + margin; zero for
/// the full plane. Meant for Shared-mode trajectories.
inline double support_membership(const Trajectory& t, const ControlSetDescriptor& d, double margin,
                                 TimeWindow w = TimeWindow::all()) {
  detail::require(t.two_dimensional(), "support_membership: needs a two-dimensional trajectory");
  const auto* half = std::get_if<HalfPlane>(&d);
  const auto r = detail::window_indices(t, w);
  if (!half || !std::isfinite(half->c_star)) return 0.0;
  std::size_t outside = 0;
  for (std::size_t i = r.begin; i < r.end; ++i)
    if (t.v[i] - half->slope * t.u[i] > half->c_star + margin) ++outside;
  return static_cast<double>(outside) / static_cast<double>(r.end - r.begin);
}

}  // namespace bdsde

#endif  // BDSDE_GEOMETRY_HPP
