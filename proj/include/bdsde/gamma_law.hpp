#ifndef BDSDE_GAMMA_LAW_HPP
#define BDSDE_GAMMA_LAW_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "bdsde/error.hpp"
#include "bdsde/random.hpp"

namespace bdsde {

/// Gamma(shape q, rate a): density C x^{q-1} e^{-a x} with C = a^q / Gamma(q).
/// This is the stationary law of the logistic diffusion
/// d phi = phi (growth - crowding phi) dt + noise phi dB.
class GammaLaw {
 public:
  GammaLaw(double shape, double rate) : q_(shape), a_(rate) {
    detail::require(shape > 0.0 && std::isfinite(shape), "GammaLaw: shape must be positive");
    detail::require(rate > 0.0 && std::isfinite(rate), "GammaLaw: rate must be positive");
    log_norm_ = q_ * std::log(a_) - boost::math::lgamma(q_);
  }

  double shape() const noexcept { return q_; }
  double rate() const noexcept { return a_; }
  double log_norm_const() const noexcept { return log_norm_; }
  double norm_const() const noexcept { return std::exp(log_norm_); }
  double mean() const noexcept { return q_ / a_; }
  double variance() const noexcept { return q_ / (a_ * a_); }
  double mode() const noexcept { return q_ >= 1.0 ? (q_ - 1.0) / a_ : 0.0; }

  double log_density(double x) const {
    if (!(x > 0.0)) throw Error(ErrorCode::NonPositivePoint, "Gamma density needs x > 0");
    return log_norm_ + (q_ - 1.0) * std::log(x) - a_ * x;
  }

  double density(double x) const { return std::exp(log_density(x)); }

  /// K_p = Gamma(p + q) / (a^p Gamma(q)).
  double moment(double p) const {
    detail::require(p > 0.0, "moment: order must be positive");
    return std::exp(boost::math::lgamma(p + q_) - boost::math::lgamma(q_) - p * std::log(a_));
  }

  double cdf(double x) const { return x <= 0.0 ? 0.0 : boost::math::gamma_p(q_, a_ * x); }
  double upper_tail(double x) const { return x <= 0.0 ? 1.0 : boost::math::gamma_q(q_, a_ * x); }

  friend bool operator==(const GammaLaw&, const GammaLaw&) = default;

 private:
  double q_;
  double a_;
  double log_norm_;
};

/// Result of reading off the stationary law of a logistic diffusion; empty
/// when the process degenerates to zero (growth <= noise^2 / 2).
using LogisticLawResult = std::optional<GammaLaw>;

inline LogisticLawResult from_logistic(double growth, double crowding, double noise) {
  if (!(crowding > 0.0)) throw Error(ErrorCode::NonPositiveCrowding, "logistic law needs crowding > 0");
  detail::require(noise != 0.0 && std::isfinite(noise), "logistic law needs a non-zero noise intensity");
  const double s2 = noise * noise;
  if (!(growth > 0.5 * s2)) return std::nullopt;
  return GammaLaw(2.0 * growth / s2 - 1.0, 2.0 * crowding / s2);
}

namespace detail {

// Marsaglia-Tsang squeeze for shape >= 1.
inline double gamma_mt(CounterRng& rng, double shape) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace detail

/// One Gamma(shape, rate) draw. Shapes below one are boosted:
/// G(q) = G(q + 1) U^{1/q}.
inline double sample_gamma(CounterRng& rng, const GammaLaw& law) {
  const double q = law.shape();
  if (q >= 1.0) return detail::gamma_mt(rng, q) / law.rate();
  const double g = detail::gamma_mt(rng, q + 1.0);
  const double u = rng.uniform();
  return g * std::exp(std::log(u) / q) / law.rate();
}

/// n i.i.d. draws, deterministic in (seed, stream).
inline std::vector<double> sample(const GammaLaw& law, std::size_t n, std::uint64_t seed, std::uint64_t stream = 0) {
  detail::require(n >= 1, "sample: need n >= 1");
  CounterRng rng(seed, stream);
  std::vector<double> out(n);
  for (auto& x : out) x = sample_gamma(rng, law);
  return out;
}

}  // namespace bdsde

#endif  // BDSDE_GAMMA_LAW_HPP
