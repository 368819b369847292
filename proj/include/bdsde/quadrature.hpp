#ifndef BDSDE_QUADRATURE_HPP
#define BDSDE_QUADRATURE_HPP

#include <array>
#include <cmath>
#include <queue>
#include <vector>

#include "bdsde/error.hpp"

namespace bdsde::quadrature {

struct Result {
  double value = 0;
  double error = 0;
  int intervals = 0;
  bool converged = false;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
inline constexpr std::array<double, 8> kNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double lo, hi, value, error;
  bool operator<(const Segment& other) const noexcept { return error < other.error; }
};

template <class F>
Segment gk15(const F& f, double lo, double hi) {
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const double fc = f(center);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kNodes[j];
    const double pair = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[j] * pair;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * pair;
  }
  return {lo, hi, kronrod * half, std::fabs((kronrod - gauss) * half)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) over the pieces of a partition:
/// the segment with the largest error estimate is bisected until the summed
/// estimate drops below abs_tol or max_intervals is reached. The error
/// estimate is the raw |K15 - G7| difference, conservative for smooth
/// integrands. Features narrower than the initial pieces can be missed
/// entirely, so callers that know where the mass sits should pass
/// breakpoints around it.
template <class F>
Result integrate(const F& f, const std::vector<double>& breaks, double abs_tol, int max_intervals = 4000) {
  bdsde::detail::require(breaks.size() >= 2, "integrate: need at least two breakpoints");
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    bdsde::detail::require(std::isfinite(breaks[i]) && std::isfinite(breaks[i + 1]) && breaks[i] < breaks[i + 1],
                           "integrate: breakpoints must be finite and increasing");
  bdsde::detail::require(abs_tol > 0.0, "integrate: tolerance must be positive");

  std::priority_queue<detail::Segment> heap;
  double error = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const auto seg = detail::gk15(f, breaks[i], breaks[i + 1]);
    error += seg.error;
    heap.push(seg);
  }

  while (error > abs_tol && static_cast<int>(heap.size()) < max_intervals) {
    const auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(worst.lo < mid && mid < worst.hi)) {
      heap.push(worst);  // cannot split further in double precision
      break;
    }
    const auto left = detail::gk15(f, worst.lo, mid);
    const auto right = detail::gk15(f, mid, worst.hi);
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }

  // Re-sum to shed the drift of the incremental updates.
  Result out;
  out.intervals = static_cast<int>(heap.size());
  while (!heap.empty()) {
    out.value += heap.top().value;
    out.error += heap.top().error;
    heap.pop();
  }
  out.converged = out.error <= abs_tol;
  return out;
}

template <class F>
Result integrate(const F& f, double lo, double hi, double abs_tol, int max_intervals = 4000) {
  bdsde::detail::require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "integrate: need finite lo < hi");
  return integrate(f, std::vector<double>{lo, hi}, abs_tol, max_intervals);
}

}  // namespace bdsde::quadrature

#endif  // BDSDE_QUADRATURE_HPP
