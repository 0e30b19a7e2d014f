#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "zolr/common.hpp"
#include "zolr/fixed_point.hpp"

namespace zolr {

enum class ZoMethod { spsa, zo_sgd, zo_sign };

inline std::string to_string(ZoMethod m) {
  switch (m) {
    case ZoMethod::spsa: return "spsa";
    case ZoMethod::zo_sgd: return "zo-sgd";
    case ZoMethod::zo_sign: return "zo-sign";
  }
  return "?";
}

inline ZoMethod parse_zo_method(const std::string& s) {
  if (s == "spsa") return ZoMethod::spsa;
  if (s == "zo-sgd" || s == "zo_sgd") return ZoMethod::zo_sgd;
  if (s == "zo-sign" || s == "zo_sign") return ZoMethod::zo_sign;
  throw InvalidArgument("unknown optimizer '" + s + "'");
}

// Gain sequences a_k = a / (A + k + 1)^alpha and c_k = c / (k + 1)^gamma.
struct SpsaSchedule {
  double a = 0.02;
  double big_a = 10.0;
  double alpha = 0.602;
  double c = 0.1;
  double gamma = 0.101;

  double gain(std::size_t k) const {
    return a / std::pow(big_a + static_cast<double>(k) + 1.0, alpha);
  }
  double perturbation(std::size_t k) const {
    return c / std::pow(static_cast<double>(k) + 1.0, gamma);
  }
};

// Random-direction smoothing parameters shared by ZO-SGD and ZO-sign.
struct ZoSmoothing {
  double mu = 0.01;
  std::size_t q = 10;
  double step = 0.01;
};

struct ZoConfig {
  ZoMethod method = ZoMethod::spsa;
  std::size_t iterations = 100;
  SpsaSchedule spsa;
  ZoSmoothing zo;
  std::uint64_t seed = 0;

  // Step sizes (a, step) may be zero, which freezes the iterate.
  void validate() const {
    require(iterations >= 1, "zo config: iterations must be >= 1");
    require(spsa.a >= 0.0 && spsa.big_a >= 0.0 && spsa.alpha > 0.0 && spsa.c > 0.0 &&
                spsa.gamma > 0.0,
            "zo config: invalid SPSA schedule");
    require(zo.mu > 0.0 && zo.q >= 1 && zo.step >= 0.0, "zo config: invalid smoothing settings");
  }
};

// Raised when the objective returns a non-finite value. `iteration()` is -1
// for a standalone estimator call and the 0-based iteration inside optimize()
// (or `initial` for the starting point).
class ObjectiveError : public Error {
 public:
  static constexpr long initial = -2;

  ObjectiveError(const std::string& what, long iteration)
      : Error(what + (iteration == initial ? std::string(" (initial evaluation)")
                      : iteration >= 0     ? " (iteration " + std::to_string(iteration) + ")"
                                           : std::string())),
        iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

template <class F>
concept ObjectiveFn = std::invocable<F&, std::span<const double>> &&
                      std::convertible_to<std::invoke_result_t<F&, std::span<const double>>, double>;

namespace detail {

template <ObjectiveFn F>
double probe(F& f, std::span<const double> x, const std::optional<FixedPointFormat>& fixed) {
  const double v = static_cast<double>(f(x));
  if (!std::isfinite(v)) throw ObjectiveError("objective returned a non-finite value", -1);
  return fixed ? snap(v, *fixed) : v;
}

inline Vec rademacher(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Vec delta(d);
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < d; ++i) {
    if (i % 64 == 0) bits = rng();
    delta[i] = (bits & 1u) ? 1.0 : -1.0;
    bits >>= 1;
  }
  return delta;
}

inline std::vector<Vec> unit_directions(std::size_t d, std::size_t q, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<Vec> dirs(q, Vec(d));
  for (auto& u : dirs) {
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (auto& v : u) {
        v = dist(rng);
        norm2 += v * v;
      }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : u) v *= inv;
  }
  return dirs;
}

// One estimator call: the gradient estimate plus every point it evaluated,
// so that the optimizer can track the best point seen.
struct Estimate {
  Vec grad;
  std::vector<Vec> points;
  std::vector<double> values;
};

template <ObjectiveFn F>
Estimate spsa_estimate(F& f, std::span<const double> theta, double c_k, std::uint64_t seed,
                       const std::optional<FixedPointFormat>& fixed) {
  require(c_k > 0.0, "spsa: perturbation c_k must be positive");
  const std::size_t d = theta.size();
  const Vec delta = rademacher(d, seed);
  Vec plus(d), minus(d);
  for (std::size_t i = 0; i < d; ++i) {
    plus[i] = theta[i] + c_k * delta[i];
    minus[i] = theta[i] - c_k * delta[i];
  }
  if (fixed) {
    snap_inplace(plus, *fixed);
    snap_inplace(minus, *fixed);
  }
  const double fp = probe(f, plus, fixed);
  const double fm = probe(f, minus, fixed);
  Estimate e;
  e.grad.resize(d);
  const double diff = (fp - fm) / (2.0 * c_k);
  for (std::size_t i = 0; i < d; ++i) e.grad[i] = diff / delta[i];
  e.points = {std::move(plus), std::move(minus)};
  e.values = {fp, fm};
  return e;
}

template <ObjectiveFn F>
Estimate zo_sgd_estimate(F& f, std::span<const double> theta, double mu, std::size_t q,
                         std::uint64_t seed, const std::optional<FixedPointFormat>& fixed) {
  require(mu > 0.0 && q >= 1, "zo-sgd: mu must be positive and q >= 1");
  const std::size_t d = theta.size();
  Estimate e;
  e.grad.assign(d, 0.0);
  Vec base(theta.begin(), theta.end());
  const double f0 = probe(f, base, fixed);
  e.points.push_back(base);
  e.values.push_back(f0);
  const auto dirs = unit_directions(d, q, seed);
  const double scale = static_cast<double>(d) / static_cast<double>(q);
  for (const auto& u : dirs) {
    Vec x(d);
    for (std::size_t i = 0; i < d; ++i) x[i] = theta[i] + mu * u[i];
    if (fixed) snap_inplace(x, *fixed);
    const double fx = probe(f, x, fixed);
    const double w = scale * (fx - f0) / mu;
    for (std::size_t i = 0; i < d; ++i) e.grad[i] += w * u[i];
    e.points.push_back(std::move(x));
    e.values.push_back(fx);
  }
  return e;
}

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

// Two-sided simultaneous-perturbation gradient estimate with a Rademacher
// direction drawn from `seed`. Exactly two objective evaluations.
template <ObjectiveFn F>
Vec spsa_gradient(F&& f, std::span<const double> theta, double c_k, std::uint64_t seed) {
  return detail::spsa_estimate(f, theta, c_k, seed, std::nullopt).grad;
}

// Forward-difference estimate averaged over q random unit directions,
// scaled by d/q. 1 + q objective evaluations.
template <ObjectiveFn F>
Vec zo_sgd_gradient(F&& f, std::span<const double> theta, double mu, std::size_t q,
                    std::uint64_t seed) {
  return detail::zo_sgd_estimate(f, theta, mu, q, seed, std::nullopt).grad;
}

// theta - step * sign(g) with sign(0) = 0.
template <ObjectiveFn F>
Vec zo_sign_step(F&& f, std::span<const double> theta, double mu, std::size_t q, double step,
                 std::uint64_t seed) {
  const Vec g = zo_sgd_gradient(f, theta, mu, q, seed);
  Vec out(theta.begin(), theta.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= step * detail::sign0(g[i]);
  return out;
}

struct ZoResult {
  Vec theta_best;
  double f_best = 0.0;
  double f_initial = 0.0;
  // Lowest objective value evaluated during each iteration.
  Vec trace;
  std::size_t evaluations = 0;
};

// Minimizes f with the configured zeroth-order method. Every evaluated point
// (the start, SPSA probes, ZO base and direction points) is a candidate, and
// the best one is returned, so f_best <= f_initial always.
//
// With `fixed`, the start point, every probe point and every update are
// snapped to the format, and objective values are snapped before use.
template <ObjectiveFn F>
ZoResult optimize(F&& f, std::span<const double> theta0, const ZoConfig& cfg,
                  const std::optional<FixedPointFormat>& fixed = std::nullopt) {
  cfg.validate();
  if (fixed) fixed->validate();

  Vec theta(theta0.begin(), theta0.end());
  if (fixed) snap_inplace(theta, *fixed);

  ZoResult r;
  std::size_t evals = 0;
  auto eval_counted = [&](std::span<const double> x) {
    ++evals;
    return static_cast<double>(f(x));
  };

  try {
    r.f_initial = detail::probe(eval_counted, theta, fixed);
  } catch (const ObjectiveError&) {
    throw ObjectiveError("optimize: objective returned a non-finite value",
                         ObjectiveError::initial);
  }
  r.f_best = r.f_initial;
  r.theta_best = theta;
  r.trace.reserve(cfg.iterations);

  const std::size_t d = theta.size();
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    const std::uint64_t seed = derive_seed(cfg.seed, k);
    detail::Estimate est;
    try {
      switch (cfg.method) {
        case ZoMethod::spsa:
          est = detail::spsa_estimate(eval_counted, theta, cfg.spsa.perturbation(k), seed, fixed);
          break;
        case ZoMethod::zo_sgd:
        case ZoMethod::zo_sign:
          est = detail::zo_sgd_estimate(eval_counted, theta, cfg.zo.mu, cfg.zo.q, seed, fixed);
          break;
      }
    } catch (const ObjectiveError&) {
      throw ObjectiveError("optimize: objective returned a non-finite value",
                           static_cast<long>(k));
    }

    double iter_min = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < est.values.size(); ++j) {
      iter_min = std::min(iter_min, est.values[j]);
      if (est.values[j] < r.f_best) {
        r.f_best = est.values[j];
        r.theta_best = est.points[j];
      }
    }
    r.trace.push_back(iter_min);

    switch (cfg.method) {
      case ZoMethod::spsa: {
        const double a_k = cfg.spsa.gain(k);
        for (std::size_t i = 0; i < d; ++i) theta[i] -= a_k * est.grad[i];
        break;
      }
      case ZoMethod::zo_sgd:
        for (std::size_t i = 0; i < d; ++i) theta[i] -= cfg.zo.step * est.grad[i];
        break;
      case ZoMethod::zo_sign:
        for (std::size_t i = 0; i < d; ++i) theta[i] -= cfg.zo.step * detail::sign0(est.grad[i]);
        break;
    }
    if (fixed) snap_inplace(theta, *fixed);
  }
  r.evaluations = evals;
  return r;
}

// CSV with columns iteration, objective, best_so_far. Row 0 is the start.
inline void write_trace_csv(std::ostream& os, const ZoResult& r) {
  os << "iteration,objective,best_so_far\n";
  os.precision(17);
  double best = r.f_initial;
  os << 0 << ',' << r.f_initial << ',' << best << '\n';
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    best = std::min(best, r.trace[k]);
    os << k + 1 << ',' << r.trace[k] << ',' << best << '\n';
  }
}

}  // namespace zolr
