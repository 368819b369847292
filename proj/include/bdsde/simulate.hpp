#ifndef BDSDE_SIMULATE_HPP
#define BDSDE_SIMULATE_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bdsde/error.hpp"
#include "bdsde/model.hpp"
#include "bdsde/random.hpp"

namespace bdsde {

struct SimConfig {
  double dt = 1e-3;
  double horizon = 1e4;
  double x0 = 1.0;
  double y0 = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;  // independent trajectories use distinct stream ids
  NoiseMode mode = NoiseMode::Independent;
  int thinning = 1;          // record every k-th step
  bool drift_only = false;   // zero all noise increments
  bool retain_noise = false;

  std::int64_t steps() const { return std::llround(horizon / dt); }

  void check() const {
    detail::require(dt > 0.0 && std::isfinite(dt), "SimConfig: dt must be positive");
    detail::require(horizon >= dt && std::isfinite(horizon), "SimConfig: horizon must be >= dt");
    detail::require(x0 > 0.0 && std::isfinite(x0), "SimConfig: x0 must be positive");
    detail::require(y0 > 0.0 && std::isfinite(y0), "SimConfig: y0 must be positive");
    detail::require(thinning >= 1, "SimConfig: thinning must be >= 1");
  }
};

/// A recorded path in log coordinates. One-dimensional paths (boundary and
/// dominating processes) leave `v` empty. Populations are exp of the
/// log-states and therefore strictly positive.
struct Trajectory {
  double record_dt = 0;  // dt * thinning
  std::vector<double> times;
  std::vector<double> u;
  std::vector<double> v;
  std::vector<NormalPair> noise;  // per-step increments (dW1, dW2), only when retained

  std::size_t size() const noexcept { return times.size(); }
  bool two_dimensional() const noexcept { return !v.empty(); }
  double x(std::size_t i) const { return std::exp(u[i]); }
  double y(std::size_t i) const { return std::exp(v[i]); }
};

/// Default noise source: per-step Gaussian increments addressed by
/// (seed, stream, step index). Returns (dW1, dW2) already scaled by sqrt(dt).
class CounterNoise {
 public:
  CounterNoise(std::uint64_t seed, std::uint64_t stream, double dt) noexcept
      : seed_(seed), stream_(stream), sqrt_dt_(std::sqrt(dt)) {}

  NormalPair operator()(std::int64_t step) const noexcept {
    const auto z = normal_pair(seed_, stream_, static_cast<std::uint64_t>(step));
    return {sqrt_dt_ * z.first, sqrt_dt_ * z.second};
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  double sqrt_dt_;
};

namespace detail {

inline NormalPair shape_increment(const SimConfig& cfg, NormalPair dw) noexcept {
  if (cfg.drift_only) return {0.0, 0.0};
  if (cfg.mode == NoiseMode::Shared) dw.second = dw.first;
  return dw;
}

[[noreturn]] inline void step_overflow(std::int64_t step) {
  throw Error(ErrorCode::StepOverflow,
              "log-state left the representable range at step " + std::to_string(step) + "; reduce dt");
}

inline bool log_state_ok(double s) noexcept { return s <= kLogStateLimit; }  // false for NaN too

inline void reserve_records(Trajectory& t, const SimConfig& cfg, bool two_d) {
  const auto n = static_cast<std::size_t>(cfg.steps() / cfg.thinning + 1);
  t.record_dt = cfg.dt * cfg.thinning;
  t.times.reserve(n);
  t.u.reserve(n);
  if (two_d) t.v.reserve(n);
  if (cfg.retain_noise) t.noise.reserve(static_cast<std::size_t>(cfg.steps()));
}

}  // namespace detail

/// Euler-Maruyama on the log-coordinate system
///   u' = u + A1(u, v) dt + alpha dW1,  v' = v + A2(u, v) dt + beta dW2
/// with dW1 = dW2 in Shared mode. `noise(step)` supplies (dW1, dW2).
template <class Noise>
Trajectory simulate_system(const ModelParams& p, const SimConfig& cfg, const Noise& noise) {
  cfg.check();
  const std::int64_t n = cfg.steps();
  Trajectory out;
  detail::reserve_records(out, cfg, true);

  double u = std::log(cfg.x0), v = std::log(cfg.y0);
  out.times.push_back(0.0);
  out.u.push_back(u);
  out.v.push_back(v);
  for (std::int64_t k = 0; k < n; ++k) {
    const NormalPair dw = detail::shape_increment(cfg, noise(k));
    if (cfg.retain_noise) out.noise.push_back(dw);
    const Vec2 a = detail::log_drift_kernel(p, std::exp(u), std::exp(v));
    u += a.first * cfg.dt + p.alpha() * dw.first;
    v += a.second * cfg.dt + p.beta() * dw.second;
    if (!detail::log_state_ok(u) || !detail::log_state_ok(v)) detail::step_overflow(k + 1);
    if ((k + 1) % cfg.thinning == 0) {
      out.times.push_back(static_cast<double>(k + 1) * cfg.dt);
      out.u.push_back(u);
      out.v.push_back(v);
    }
  }
  return out;
}

inline Trajectory simulate_system(const ModelParams& p, const SimConfig& cfg) {
  return simulate_system(p, cfg, CounterNoise(cfg.seed, cfg.stream, cfg.dt));
}

/// The prey-only boundary process phi in log coordinates theta = ln phi,
///   theta' = theta + (a1 - alpha^2/2 - b1 e^theta) dt + alpha dW1,
/// driven by the same dW1 as the first component of simulate_system.
template <class Noise>
Trajectory simulate_boundary(const ModelParams& p, const SimConfig& cfg, const Noise& noise) {
  cfg.check();
  const std::int64_t n = cfg.steps();
  Trajectory out;
  detail::reserve_records(out, cfg, false);

  const double growth = p.a1() - 0.5 * p.alpha() * p.alpha();
  double theta = std::log(cfg.x0);
  out.times.push_back(0.0);
  out.u.push_back(theta);
  for (std::int64_t k = 0; k < n; ++k) {
    const NormalPair dw = detail::shape_increment(cfg, noise(k));
    if (cfg.retain_noise) out.noise.push_back(dw);
    theta += (growth - p.b1() * std::exp(theta)) * cfg.dt + p.alpha() * dw.first;
    if (!detail::log_state_ok(theta)) detail::step_overflow(k + 1);
    if ((k + 1) % cfg.thinning == 0) {
      out.times.push_back(static_cast<double>(k + 1) * cfg.dt);
      out.u.push_back(theta);
    }
  }
  return out;
}

inline Trajectory simulate_boundary(const ModelParams& p, const SimConfig& cfg) {
  return simulate_boundary(p, cfg, CounterNoise(cfg.seed, cfg.stream, cfg.dt));
}

/// The system together with the comparison processes of the extinction and
/// permanence arguments, all on one noise realisation:
///   phi  (prey without predator)              dominates x, driven by dW1
///   psi  (logistic, growth -a2 + c2/m2)       dominates y, driven by dW2
///   ybar (predator fed by phi instead of x)   dominates y, driven by dW2
struct CoupledPaths {
  Trajectory system;
  Trajectory phi;
  Trajectory psi;
  Trajectory ybar;
};

template <class Noise>
CoupledPaths simulate_coupled(const ModelParams& p, const SimConfig& cfg, const Noise& noise) {
  cfg.check();
  const std::int64_t n = cfg.steps();
  CoupledPaths out;
  detail::reserve_records(out.system, cfg, true);
  auto no_noise = cfg;
  no_noise.retain_noise = false;
  detail::reserve_records(out.phi, no_noise, false);
  detail::reserve_records(out.psi, no_noise, false);
  detail::reserve_records(out.ybar, no_noise, false);

  const double half_a2 = 0.5 * p.alpha() * p.alpha();
  const double half_b2 = 0.5 * p.beta() * p.beta();
  double u = std::log(cfg.x0), v = std::log(cfg.y0);
  double theta = u, w_psi = v, w_ybar = v;

  auto record = [&](double t) {
    out.system.times.push_back(t);
    out.system.u.push_back(u);
    out.system.v.push_back(v);
    out.phi.times.push_back(t);
    out.phi.u.push_back(theta);
    out.psi.times.push_back(t);
    out.psi.u.push_back(w_psi);
    out.ybar.times.push_back(t);
    out.ybar.u.push_back(w_ybar);
  };
  record(0.0);

  for (std::int64_t k = 0; k < n; ++k) {
    const NormalPair dw = detail::shape_increment(cfg, noise(k));
    if (cfg.retain_noise) out.system.noise.push_back(dw);
    const double eu = std::exp(u), ephi = std::exp(theta);
    const Vec2 a = detail::log_drift_kernel(p, eu, std::exp(v));
    const double d_theta = p.a1() - half_a2 - p.b1() * ephi;
    const double d_psi = -p.a2() + p.c2() / p.m2() - half_b2 - p.b2() * std::exp(w_psi);
    const double d_ybar = -p.a2() - half_b2 - p.b2() * std::exp(w_ybar) + p.c2() * ephi / (p.m1() + p.m2() * ephi);

    u += a.first * cfg.dt + p.alpha() * dw.first;
    v += a.second * cfg.dt + p.beta() * dw.second;
    theta += d_theta * cfg.dt + p.alpha() * dw.first;
    w_psi += d_psi * cfg.dt + p.beta() * dw.second;
    w_ybar += d_ybar * cfg.dt + p.beta() * dw.second;
    if (!detail::log_state_ok(u) || !detail::log_state_ok(v) || !detail::log_state_ok(theta) ||
        !detail::log_state_ok(w_psi) || !detail::log_state_ok(w_ybar))
      detail::step_overflow(k + 1);
    if ((k + 1) % cfg.thinning == 0) record(static_cast<double>(k + 1) * cfg.dt);
  }
  return out;
}

inline CoupledPaths simulate_coupled(const ModelParams& p, const SimConfig& cfg) {
  return simulate_coupled(p, cfg, CounterNoise(cfg.seed, cfg.stream, cfg.dt));
}

}  // namespace bdsde

#endif  // BDSDE_SIMULATE_HPP
