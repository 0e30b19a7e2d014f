#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "zolr/common.hpp"
#include "zolr/dense.hpp"

namespace zolr {

inline constexpr double kLogvarMin = -8.0;
inline constexpr double kLogvarMax = 8.0;

inline double clamp_logvar(double v) { return std::clamp(v, kLogvarMin, kLogvarMax); }

// Diagonal-Gaussian VAE. The encoder maps x to [mu | logvar] (2 * latent_dim
// outputs); the decoder maps z to the reconstruction mean. The reconstruction
// log-variance is a free per-dimension parameter.
struct VaeParams {
  std::size_t input_dim = 0;
  std::size_t latent_dim = 0;
  std::vector<Dense> encoder;
  std::vector<Dense> decoder;
  Vec decoder_logvar;

  bool operator==(const VaeParams&) const = default;

  std::size_t encoder_size() const { return parameter_count(encoder); }
  std::size_t size() const {
    return encoder_size() + parameter_count(decoder) + decoder_logvar.size();
  }

  // Checks the layer chain and value invariants; throws InvalidArgument.
  void validate() const {
    require(input_dim >= 1 && latent_dim >= 1, "vae: dimensions must be positive");
    require(!encoder.empty() && !decoder.empty(), "vae: encoder and decoder need layers");
    std::size_t prev = input_dim;
    for (const auto& l : encoder) {
      require(l.in == prev, "vae: encoder layer chain mismatch");
      require(l.weight.size() == l.in * l.out && l.bias.size() == l.out,
              "vae: encoder layer storage mismatch");
      prev = l.out;
    }
    require(prev == 2 * latent_dim, "vae: encoder must output 2 * latent_dim values");
    prev = latent_dim;
    for (const auto& l : decoder) {
      require(l.in == prev, "vae: decoder layer chain mismatch");
      require(l.weight.size() == l.in * l.out && l.bias.size() == l.out,
              "vae: decoder layer storage mismatch");
      prev = l.out;
    }
    require(prev == input_dim, "vae: decoder must output input_dim values");
    require(decoder_logvar.size() == input_dim, "vae: decoder_logvar size mismatch");
    Vec flat;
    append_params(encoder, flat);
    append_params(decoder, flat);
    require(all_finite(flat) && all_finite(decoder_logvar), "vae: non-finite parameter");
    for (double v : decoder_logvar)
      require(v >= kLogvarMin && v <= kLogvarMax, "vae: decoder_logvar outside clamp range");
  }
};

struct LatentStats {
  Vec mu;
  Vec logvar;
};

struct ElboValue {
  double recon_logprob = 0.0;
  double kl = 0.0;
  double elbo = 0.0;
  std::size_t mc_samples = 0;

  bool operator==(const ElboValue&) const = default;
};

inline VaeParams init_params(std::size_t input_dim, std::size_t latent_dim,
                             const std::vector<std::size_t>& hidden_dims, std::uint64_t seed) {
  require(input_dim >= 1, "init_params: input_dim must be >= 1");
  require(latent_dim >= 1, "init_params: latent_dim must be >= 1");
  require(!hidden_dims.empty(), "init_params: hidden_dims must be nonempty");
  for (auto h : hidden_dims) require(h >= 1, "init_params: hidden sizes must be >= 1");

  Rng rng(seed);
  VaeParams p;
  p.input_dim = input_dim;
  p.latent_dim = latent_dim;
  std::size_t prev = input_dim;
  for (auto h : hidden_dims) {
    p.encoder.push_back(init_dense(prev, h, rng));
    prev = h;
  }
  p.encoder.push_back(init_dense(prev, 2 * latent_dim, rng));
  prev = latent_dim;
  for (auto it = hidden_dims.rbegin(); it != hidden_dims.rend(); ++it) {
    p.decoder.push_back(init_dense(prev, *it, rng));
    prev = *it;
  }
  p.decoder.push_back(init_dense(prev, input_dim, rng));
  p.decoder_logvar.assign(input_dim, 0.0);
  return p;
}

// Zero-valued parameters with the same layout; used as a gradient buffer.
inline VaeParams zeros_like(const VaeParams& p) {
  VaeParams g;
  g.input_dim = p.input_dim;
  g.latent_dim = p.latent_dim;
  for (const auto& l : p.encoder) g.encoder.push_back(zeros_like(l));
  for (const auto& l : p.decoder) g.decoder.push_back(zeros_like(l));
  g.decoder_logvar.assign(p.decoder_logvar.size(), 0.0);
  return g;
}

// Declaration order: encoder layers (W row-major, then b), decoder layers,
// decoder_logvar.
inline Vec flatten(const VaeParams& p) {
  Vec out;
  out.reserve(p.size());
  append_params(p.encoder, out);
  append_params(p.decoder, out);
  out.insert(out.end(), p.decoder_logvar.begin(), p.decoder_logvar.end());
  return out;
}

inline void unflatten(VaeParams& p, std::span<const double> flat) {
  require_dim("unflatten", p.size(), flat.size());
  std::size_t pos = assign_params(p.encoder, flat);
  pos += assign_params(p.decoder, flat.subspan(pos));
  std::copy(flat.begin() + pos, flat.end(), p.decoder_logvar.begin());
}

inline Vec flatten_encoder(const VaeParams& p) {
  Vec out;
  out.reserve(p.encoder_size());
  append_params(p.encoder, out);
  return out;
}

inline void assign_encoder(VaeParams& p, std::span<const double> flat) {
  require_dim("assign_encoder", p.encoder_size(), flat.size());
  assign_params(p.encoder, flat);
}

inline LatentStats encode(const VaeParams& p, std::span<const double> x) {
  require_dim("encode", p.input_dim, x.size());
  MlpTape tape;
  mlp_forward(p.encoder, x, tape);
  const auto& out = tape.acts.back();
  LatentStats s;
  s.mu.assign(out.begin(), out.begin() + p.latent_dim);
  s.logvar.resize(p.latent_dim);
  for (std::size_t j = 0; j < p.latent_dim; ++j) s.logvar[j] = clamp_logvar(out[p.latent_dim + j]);
  return s;
}

struct Reconstruction {
  Vec mu;
  Vec logvar;
};

inline Reconstruction decode(const VaeParams& p, std::span<const double> z) {
  require_dim("decode", p.latent_dim, z.size());
  MlpTape tape;
  mlp_forward(p.decoder, z, tape);
  Reconstruction r;
  r.mu = std::move(tape.acts.back());
  r.logvar.resize(p.input_dim);
  std::transform(p.decoder_logvar.begin(), p.decoder_logvar.end(), r.logvar.begin(),
                 clamp_logvar);
  return r;
}

// KL(N(mu, diag exp(logvar)) || N(0, I)).
inline double kl_diag_gaussian(const LatentStats& s) {
  require_dim("kl_diag_gaussian", s.mu.size(), s.logvar.size());
  double kl = 0.0;
  for (std::size_t j = 0; j < s.mu.size(); ++j) {
    const double lv = s.logvar[j];
    kl += s.mu[j] * s.mu[j] + std::exp(lv) - 1.0 - lv;
  }
  kl *= 0.5;
  if (!std::isfinite(kl)) throw InvalidArgument("kl_diag_gaussian: non-finite input");
  // exp(lv) >= 1 + lv holds exactly in real arithmetic; guard rounding.
  return std::max(kl, 0.0);
}

inline double gaussian_logpdf(std::span<const double> x, std::span<const double> mean,
                              std::span<const double> logvar) {
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    acc += kLog2Pi + logvar[i] + d * d * std::exp(-logvar[i]);
  }
  return -0.5 * acc;
}

// Reparameterization noise for `mc_samples` draws, laid out sample-major.
inline Vec elbo_noise(std::size_t latent_dim, std::size_t mc_samples, std::uint64_t noise_seed) {
  return standard_normal(latent_dim * mc_samples, noise_seed);
}

namespace detail {

inline void check_elbo_args(const VaeParams& p, std::span<const double> x, std::size_t mc) {
  require_dim("elbo", p.input_dim, x.size());
  require(mc >= 1, "elbo: mc_samples must be >= 1");
}

// Evaluates the ELBO with explicit noise. When `grad` is non-null the
// gradient of the ELBO is accumulated into it (scaled by `grad_scale`).
inline ElboValue elbo_impl(const VaeParams& p, std::span<const double> x,
                           std::span<const double> eps, std::size_t mc, VaeParams* grad,
                           double grad_scale = 1.0) {
  const std::size_t L = p.latent_dim;
  const std::size_t D = p.input_dim;

  MlpTape enc_tape;
  mlp_forward(p.encoder, x, enc_tape);
  const auto& head = enc_tape.acts.back();
  LatentStats s;
  s.mu.assign(head.begin(), head.begin() + L);
  s.logvar.resize(L);
  for (std::size_t j = 0; j < L; ++j) s.logvar[j] = clamp_logvar(head[L + j]);

  Vec dec_logvar(D);
  std::transform(p.decoder_logvar.begin(), p.decoder_logvar.end(), dec_logvar.begin(),
                 clamp_logvar);
  Vec inv_var(D);
  for (std::size_t i = 0; i < D; ++i) inv_var[i] = std::exp(-dec_logvar[i]);

  Vec sd(L);
  for (std::size_t j = 0; j < L; ++j) sd[j] = std::exp(0.5 * s.logvar[j]);

  const double inv_mc = 1.0 / static_cast<double>(mc);
  double recon = 0.0;
  Vec z(L), dmu_sum, dlv_sum, dz, dout(D);
  if (grad) {
    dmu_sum.assign(L, 0.0);
    dlv_sum.assign(L, 0.0);
  }
  MlpTape dec_tape;
  for (std::size_t m = 0; m < mc; ++m) {
    const double* e = eps.data() + m * L;
    for (std::size_t j = 0; j < L; ++j) z[j] = s.mu[j] + sd[j] * e[j];
    mlp_forward(p.decoder, z, dec_tape);
    const auto& mean = dec_tape.acts.back();
    recon += gaussian_logpdf(x, mean, dec_logvar);
    if (grad) {
      const double w = grad_scale * inv_mc;
      for (std::size_t i = 0; i < D; ++i) {
        const double d = x[i] - mean[i];
        dout[i] = w * d * inv_var[i];
        if (p.decoder_logvar[i] >= kLogvarMin && p.decoder_logvar[i] <= kLogvarMax)
          grad->decoder_logvar[i] += w * 0.5 * (d * d * inv_var[i] - 1.0);
      }
      mlp_backward(p.decoder, dec_tape, dout, grad->decoder, &dz);
      for (std::size_t j = 0; j < L; ++j) {
        dmu_sum[j] += dz[j];
        dlv_sum[j] += dz[j] * e[j] * 0.5 * sd[j];
      }
    }
  }
  recon *= inv_mc;

  ElboValue v;
  v.recon_logprob = recon;
  v.kl = kl_diag_gaussian(s);
  v.elbo = v.recon_logprob - v.kl;
  v.mc_samples = mc;

  if (grad) {
    Vec dhead(2 * L);
    for (std::size_t j = 0; j < L; ++j) {
      dhead[j] = dmu_sum[j] - grad_scale * s.mu[j];
      const double raw = head[L + j];
      const bool inside = raw >= kLogvarMin && raw <= kLogvarMax;
      dhead[L + j] =
          inside ? dlv_sum[j] - grad_scale * 0.5 * (std::exp(s.logvar[j]) - 1.0) : 0.0;
    }
    mlp_backward(p.encoder, enc_tape, dhead, grad->encoder, nullptr);
  }
  return v;
}

}  // namespace detail

// ELBO with explicit reparameterization noise (mc_samples * latent_dim values).
inline ElboValue elbo_with_noise(const VaeParams& p, std::span<const double> x,
                                 std::span<const double> eps) {
  require_dim("elbo", p.input_dim, x.size());
  require(!eps.empty() && eps.size() % p.latent_dim == 0, "elbo: malformed noise buffer");
  return detail::elbo_impl(p, x, eps, eps.size() / p.latent_dim, nullptr);
}

inline ElboValue elbo(const VaeParams& p, std::span<const double> x, std::size_t mc_samples,
                      std::uint64_t noise_seed) {
  detail::check_elbo_args(p, x, mc_samples);
  const Vec eps = elbo_noise(p.latent_dim, mc_samples, noise_seed);
  return detail::elbo_impl(p, x, eps, mc_samples, nullptr);
}

struct ElboGradient {
  ElboValue value;
  VaeParams grad;
};

inline ElboGradient elbo_and_grad(const VaeParams& p, std::span<const double> x,
                                  std::span<const double> eps) {
  require_dim("grad_elbo", p.input_dim, x.size());
  require(!eps.empty() && eps.size() % p.latent_dim == 0, "grad_elbo: malformed noise buffer");
  ElboGradient out{{}, zeros_like(p)};
  out.value = detail::elbo_impl(p, x, eps, eps.size() / p.latent_dim, &out.grad);
  return out;
}

// Analytic gradient of elbo(p, x, mc_samples, noise_seed) w.r.t. every
// parameter, using the same noise draws.
inline VaeParams grad_elbo(const VaeParams& p, std::span<const double> x, std::size_t mc_samples,
                           std::uint64_t noise_seed) {
  detail::check_elbo_args(p, x, mc_samples);
  const Vec eps = elbo_noise(p.latent_dim, mc_samples, noise_seed);
  return elbo_and_grad(p, x, eps).grad;
}

class TrainingError : public Error {
 public:
  using Error::Error;
};

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::size_t mc_samples = 1;
  // Rescales a minibatch gradient whose L2 norm exceeds this value; 0 disables.
  double max_grad_norm = 0.0;
};

struct TrainResult {
  VaeParams params;
  Vec loss_curve;  // mean negative ELBO per epoch
};

// Plain minibatch SGD ascent on the ELBO.
inline TrainResult train(VaeParams params, std::span<const Vec> dataset, const TrainOptions& opt) {
  require(!dataset.empty(), "train: empty dataset");
  require(opt.batch_size >= 1 && opt.learning_rate > 0.0 && opt.mc_samples >= 1 &&
              opt.max_grad_norm >= 0.0,
          "train: hyperparameters must be positive");
  for (const auto& x : dataset) require_dim("train", params.input_dim, x.size());

  TrainResult result;
  std::vector<std::size_t> order(dataset.size());
  Vec flat_grad;
  Vec flat = flatten(params);
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(opt.seed, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t stop = std::min(order.size(), start + opt.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      VaeParams grad = zeros_like(params);
      for (std::size_t b = start; b < stop; ++b) {
        const Vec eps = elbo_noise(params.latent_dim, opt.mc_samples,
                                   derive_seed(opt.seed, epoch + 1, b));
        try {
          loss_sum -= detail::elbo_impl(params, dataset[order[b]], eps, opt.mc_samples, &grad,
                                        scale)
                          .elbo;
        } catch (const InvalidArgument&) {
          // Non-finite latent statistics.
          loss_sum = std::numeric_limits<double>::quiet_NaN();
        }
      }
      if (!std::isfinite(loss_sum))
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch starting at " + std::to_string(start));
      flat_grad = flatten(grad);
      if (opt.max_grad_norm > 0.0) {
        double n2 = 0.0;
        for (double g : flat_grad) n2 += g * g;
        const double norm = std::sqrt(n2);
        if (norm > opt.max_grad_norm)
          for (double& g : flat_grad) g *= opt.max_grad_norm / norm;
      }
      for (std::size_t i = 0; i < flat.size(); ++i) flat[i] += opt.learning_rate * flat_grad[i];
      unflatten(params, flat);
      for (auto& v : params.decoder_logvar) v = clamp_logvar(v);
      std::copy(params.decoder_logvar.begin(), params.decoder_logvar.end(),
                flat.end() - static_cast<std::ptrdiff_t>(params.decoder_logvar.size()));
    }
    result.loss_curve.push_back(loss_sum / static_cast<double>(dataset.size()));
  }
  if (!all_finite(flat)) throw TrainingError("train: parameters became non-finite");
  result.params = std::move(params);
  return result;
}

}  // namespace zolr
