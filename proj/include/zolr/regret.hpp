#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zolr/common.hpp"
#include "zolr/fixed_point.hpp"
#include "zolr/vae.hpp"
#include "zolr/zo.hpp"

namespace zolr {

// Likelihood regret of one sample: how much the ELBO improves when the
// encoder is re-optimized for that sample alone.
struct LRScore {
  double l_vae = 0.0;
  double l_opt = 0.0;
  double lr = 0.0;

  bool operator==(const LRScore&) const = default;
};

inline constexpr std::size_t kScoringMcSamples = 8;

class ScoringError : public Error {
 public:
  ScoringError(const std::string& what, std::size_t sample_index)
      : Error("sample " + std::to_string(sample_index) + ": " + what), index_(sample_index) {}
  std::size_t sample_index() const { return index_; }

 private:
  std::size_t index_;
};

inline double score_likelihood(const VaeParams& params, std::span<const double> x,
                               std::size_t mc_samples, std::uint64_t noise_seed) {
  return elbo(params, x, mc_samples, noise_seed).elbo;
}

// Negative ELBO as a function of the flattened encoder, with the decoder and
// the reparameterization noise frozen. Holds a private copy of the params.
class EncoderObjective {
 public:
  EncoderObjective(const VaeParams& params, std::span<const double> x, std::size_t mc_samples,
                   std::uint64_t noise_seed)
      : work_(params),
        x_(x.begin(), x.end()),
        eps_(elbo_noise(params.latent_dim, mc_samples, noise_seed)) {
    require_dim("score_lr", params.input_dim, x.size());
    require(mc_samples >= 1, "score_lr: mc_samples must be >= 1");
  }

  double operator()(std::span<const double> encoder) {
    assign_encoder(work_, encoder);
    return -elbo_with_noise(work_, x_, eps_).elbo;
  }

  // Value and gradient of the negative ELBO w.r.t. the encoder vector.
  double value_and_grad(std::span<const double> encoder, Vec& grad) {
    assign_encoder(work_, encoder);
    auto g = elbo_and_grad(work_, x_, eps_);
    grad = flatten_encoder(g.grad);
    for (auto& v : grad) v = -v;
    return -g.value.elbo;
  }

 private:
  VaeParams work_;
  Vec x_;
  Vec eps_;
};

namespace detail {

inline LRScore make_score(double f_initial, double f_best) {
  LRScore s;
  s.l_vae = -f_initial;
  s.l_opt = -f_best;
  s.lr = s.l_opt - s.l_vae;
  return s;
}

}  // namespace detail

// l_vae is the objective at the trained encoder as seen by the optimizer, so
// in fixed-point mode it carries the same quantization as l_opt. In float
// mode it equals elbo(params, x, mc_samples, noise_seed).elbo exactly.
inline LRScore score_lr(const VaeParams& params, std::span<const double> x, const ZoConfig& cfg,
                        const std::optional<FixedPointFormat>& fixed = std::nullopt,
                        std::size_t mc_samples = kScoringMcSamples, std::uint64_t noise_seed = 0) {
  EncoderObjective objective(params, x, mc_samples, noise_seed);
  const Vec start = flatten_encoder(params);
  const auto r = optimize(objective, start, cfg, fixed);
  return detail::make_score(r.f_initial, r.f_best);
}

// Reference regret computed with exact encoder gradients: `iterations` steps
// of gradient ascent on the ELBO with a fixed step, keeping the best iterate.
struct GradientAscentConfig {
  std::size_t iterations = 100;
  double step = 1e-4;
};

inline LRScore score_lr_gradient(const VaeParams& params, std::span<const double> x,
                                 const GradientAscentConfig& cfg,
                                 std::size_t mc_samples = kScoringMcSamples,
                                 std::uint64_t noise_seed = 0) {
  require(cfg.iterations >= 1 && cfg.step >= 0.0, "score_lr_gradient: invalid config");
  EncoderObjective objective(params, x, mc_samples, noise_seed);
  Vec theta = flatten_encoder(params);
  Vec grad;
  const double f0 = objective.value_and_grad(theta, grad);
  double best = f0;
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= cfg.step * grad[i];
    const double f = objective.value_and_grad(theta, grad);
    if (!std::isfinite(f)) break;
    best = std::min(best, f);
  }
  return detail::make_score(f0, best);
}

struct BatchResult {
  std::optional<LRScore> score;
  std::string error;  // set when score is empty
};

// Seeds attach to the original index: sample i uses optimizer seed
// derive_seed(cfg.seed, base_seed + i) and noise seed base_seed + i.
inline ZoConfig sample_config(const ZoConfig& cfg, std::uint64_t base_seed, std::size_t index) {
  ZoConfig c = cfg;
  c.seed = derive_seed(cfg.seed, base_seed + index);
  return c;
}

inline std::vector<BatchResult> score_batch(const VaeParams& params, std::span<const Vec> xs,
                                            const ZoConfig& cfg,
                                            const std::optional<FixedPointFormat>& fixed,
                                            std::size_t mc_samples, std::uint64_t base_seed) {
  require(!xs.empty(), "score_batch: empty batch");
  std::vector<BatchResult> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    try {
      out[i].score = score_lr(params, xs[i], sample_config(cfg, base_seed, i), fixed, mc_samples,
                              base_seed + i);
    } catch (const Error& e) {
      out[i].error = ScoringError(e.what(), i).what();
    }
  }
  return out;
}

// Percentile of the lr values with linear interpolation between order
// statistics (rank p/100 * (n - 1)).
inline double percentile(std::span<const double> values, double pct) {
  require(!values.empty(), "percentile: empty input");
  require(pct > 0.0 && pct <= 100.0, "percentile: must lie in (0, 100]");
  Vec v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double rank = pct / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

inline double calibrate_threshold(std::span<const LRScore> clean_scores, double pct) {
  require(!clean_scores.empty(), "calibrate_threshold: empty input");
  Vec lr;
  lr.reserve(clean_scores.size());
  for (const auto& s : clean_scores) lr.push_back(s.lr);
  return percentile(lr, pct);
}

}  // namespace zolr
