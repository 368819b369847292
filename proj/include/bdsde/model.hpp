#ifndef BDSDE_MODEL_HPP
#define BDSDE_MODEL_HPP

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bdsde/error.hpp"

namespace bdsde {

/// Raw, unchecked coefficients of the stochastic Beddington-DeAngelis
/// predator-prey system
///
///   dx = x (a1 - b1 x - c1 y / (m1 + m2 x + m3 y)) dt + alpha x dB1
///   dy = y (-a2 - b2 y + c2 x / (m1 + m2 x + m3 y)) dt + beta y dB2
struct Coefficients {
  double a1 = 0, b1 = 0, c1 = 0;
  double a2 = 0, b2 = 0, c2 = 0;
  double m1 = 0, m2 = 0, m3 = 0;
  double alpha = 0, beta = 0;

  friend bool operator==(const Coefficients&, const Coefficients&) = default;
};

inline constexpr std::array<std::string_view, 11> kCoefficientNames = {
    "a1", "b1", "c1", "a2", "b2", "c2", "m1", "m2", "m3", "alpha", "beta"};

/// Named access, used by config parsing and parameter sweeps.
inline double* coefficient_slot(Coefficients& c, std::string_view name) {
  if (name == "a1") return &c.a1;
  if (name == "b1") return &c.b1;
  if (name == "c1") return &c.c1;
  if (name == "a2") return &c.a2;
  if (name == "b2") return &c.b2;
  if (name == "c2") return &c.c2;
  if (name == "m1") return &c.m1;
  if (name == "m2") return &c.m2;
  if (name == "m3") return &c.m3;
  if (name == "alpha") return &c.alpha;
  if (name == "beta") return &c.beta;
  return nullptr;
}

inline double coefficient_value(const Coefficients& c, std::string_view name) {
  auto copy = c;
  const double* slot = coefficient_slot(copy, name);
  if (!slot) throw Error(ErrorCode::InvalidArgument, "unknown coefficient '" + std::string(name) + "'");
  return *slot;
}

struct Violation {
  std::string coefficient;
  ErrorCode code;
};

/// Thrown by validate(); lists every violated constraint, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations)
      : Error(violations.front().code, describe(violations)), violations_(std::move(violations)) {}

  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  static std::string describe(const std::vector<Violation>& vs) {
    std::string out;
    for (const auto& v : vs) {
      if (!out.empty()) out += "; ";
      out += v.coefficient + " (" + std::string(to_string(v.code)) + ")";
    }
    return out;
  }

  std::vector<Violation> violations_;
};

class ModelParams;
ModelParams validate(const Coefficients& raw);

/// Validated, canonical model coefficients. Only obtainable through
/// validate(), so every instance satisfies the positivity constraints and
/// carries alpha >= 0.
class ModelParams {
 public:
  double a1() const noexcept { return c_.a1; }
  double b1() const noexcept { return c_.b1; }
  double c1() const noexcept { return c_.c1; }
  double a2() const noexcept { return c_.a2; }
  double b2() const noexcept { return c_.b2; }
  double c2() const noexcept { return c_.c2; }
  double m1() const noexcept { return c_.m1; }
  double m2() const noexcept { return c_.m2; }
  double m3() const noexcept { return c_.m3; }
  double alpha() const noexcept { return c_.alpha; }
  double beta() const noexcept { return c_.beta; }

  const Coefficients& coefficients() const noexcept { return c_; }

  /// Copy with one coefficient replaced, revalidated.
  ModelParams with(std::string_view name, double value) const {
    auto raw = c_;
    double* slot = coefficient_slot(raw, name);
    if (!slot) throw Error(ErrorCode::InvalidArgument, "unknown coefficient '" + std::string(name) + "'");
    *slot = value;
    return validate(raw);
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  explicit ModelParams(const Coefficients& c) : c_(c) {}
  friend ModelParams validate(const Coefficients& raw);

  Coefficients c_;
};

inline ModelParams validate(const Coefficients& raw) {
  std::vector<Violation> bad;
  auto positive = [&](std::string_view name, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) bad.push_back({std::string(name), ErrorCode::NonPositiveCoefficient});
  };
  positive("a1", raw.a1);
  positive("b1", raw.b1);
  positive("c1", raw.c1);
  positive("a2", raw.a2);
  positive("b2", raw.b2);
  positive("c2", raw.c2);
  positive("m1", raw.m1);
  positive("m2", raw.m2);
  if (!(raw.m3 >= 0.0) || !std::isfinite(raw.m3)) bad.push_back({"m3", ErrorCode::NegativeInterference});
  if (raw.alpha == 0.0 || !std::isfinite(raw.alpha)) bad.push_back({"alpha", ErrorCode::ZeroNoise});
  if (raw.beta == 0.0 || !std::isfinite(raw.beta)) bad.push_back({"beta", ErrorCode::ZeroNoise});
  if (!bad.empty()) throw ValidationError(std::move(bad));

  auto canon = raw;
  canon.alpha = std::fabs(raw.alpha);  // beta keeps its sign
  return ModelParams(canon);
}

enum class NoiseMode { Independent, Shared };

enum class Regime { BothExtinct, PredatorExtinct, Coexistence, Critical };

inline constexpr std::string_view to_string(Regime r) noexcept {
  switch (r) {
    case Regime::BothExtinct: return "BothExtinct";
    case Regime::PredatorExtinct: return "PredatorExtinct";
    case Regime::Coexistence: return "Coexistence";
    case Regime::Critical: return "Critical";
  }
  return "Unknown";
}

inline constexpr std::string_view to_string(NoiseMode m) noexcept {
  return m == NoiseMode::Independent ? "independent" : "shared";
}

inline constexpr double kDefaultEpsCritical = 1e-3;

/// Log-states above this bound make exp() overflow double precision.
inline constexpr double kLogStateLimit = 700.0;

struct Vec2 {
  double first = 0;
  double second = 0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Drift of the population-coordinate system at (x, y), both >= 0.
inline Vec2 drift(const ModelParams& p, double x, double y) {
  detail::require(std::isfinite(x) && std::isfinite(y) && x >= 0.0 && y >= 0.0,
                  "drift: densities must be finite and non-negative");
  const double denom = p.m1() + p.m2() * x + p.m3() * y;
  return {x * (p.a1() - p.b1() * x - p.c1() * y / denom),
          y * (-p.a2() - p.b2() * y + p.c2() * x / denom)};
}

namespace detail {

// Unchecked kernel shared by the public operation and the simulator loop.
inline Vec2 log_drift_kernel(const ModelParams& p, double eu, double ev) noexcept {
  const double denom = p.m1() + p.m2() * eu + p.m3() * ev;
  return {p.a1() - 0.5 * p.alpha() * p.alpha() - p.b1() * eu - p.c1() * ev / denom,
          -p.a2() - 0.5 * p.beta() * p.beta() - p.b2() * ev + p.c2() * eu / denom};
}

}  // namespace detail

/// Drift of the log-coordinate system (u, v) = (ln x, ln y). The same formula
/// holds for both noise modes. Throws Overflow when e^u or e^v would not be
/// representable.
inline Vec2 log_drift(const ModelParams& p, [[maybe_unused]] NoiseMode mode, double u, double v) {
  if (std::isnan(u) || std::isnan(v) || u > kLogStateLimit || v > kLogStateLimit)
    throw Error(ErrorCode::Overflow, "log-state outside representable range");
  return detail::log_drift_kernel(p, std::exp(u), std::exp(v));
}

/// Diffusion in log coordinates. Columns are the noise directions: two
/// columns diag(alpha, beta) for independent noise, a single column
/// (alpha, beta) when both equations share one Brownian motion.
struct DiffusionMatrix {
  NoiseMode mode;
  std::array<std::array<double, 2>, 2> entries;  // row-major; second column unused in Shared mode

  int columns() const noexcept { return mode == NoiseMode::Independent ? 2 : 1; }
};

inline DiffusionMatrix diffusion_matrix(const ModelParams& p, NoiseMode mode) {
  if (mode == NoiseMode::Independent) return {mode, {{{p.alpha(), 0.0}, {0.0, p.beta()}}}};
  return {mode, {{{p.alpha(), 0.0}, {p.beta(), 0.0}}}};
}

/// Beddington-DeAngelis response factor x / (m1 + m2 x + m3 y); lies in [0, 1/m2].
inline double response_factor(const ModelParams& p, double x, double y) noexcept {
  return x / (p.m1() + p.m2() * x + p.m3() * y);
}

}  // namespace bdsde

#endif  // BDSDE_MODEL_HPP
