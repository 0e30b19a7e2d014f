#pragma once

// Hand-rolled generators for the property tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "zolr/vae.hpp"

namespace zolr::gen {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng_); }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
  }
  std::uint64_t seed() { return rng_(); }

  Vec vec(std::size_t n, double lo, double hi) {
    Vec v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }
  Vec normals(std::size_t n, double sd = 1.0) {
    Vec v(n);
    for (auto& x : v) x = normal(sd);
    return v;
  }

  // Small random VAE with weights scaled by `w` and decoder logvars in
  // [lv_lo, lv_hi].
  VaeParams vae(std::size_t input, std::size_t latent, std::vector<std::size_t> hidden, double w,
                double lv_lo = -1.0, double lv_hi = 1.0) {
    VaeParams p = init_params(input, latent, hidden, seed());
    auto jitter = [&](std::vector<Dense>& layers) {
      for (auto& l : layers) {
        for (auto& v : l.weight) v = normal(w);
        for (auto& v : l.bias) v = normal(w);
      }
    };
    jitter(p.encoder);
    jitter(p.decoder);
    for (auto& v : p.decoder_logvar) v = uniform(lv_lo, lv_hi);
    return p;
  }

 private:
  std::mt19937_64 rng_;
};

// Samples from x = A s + b + noise with a 2-dim latent source s ~ N(0, I).
inline std::vector<Vec> linear_gaussian_source(std::size_t n, std::size_t dim, std::uint64_t seed,
                                               double noise_sd = 0.1) {
  Gen g(seed);
  std::vector<Vec> a(dim, Vec(2));
  Vec b(dim);
  Gen model(12345);
  for (std::size_t i = 0; i < dim; ++i) {
    a[i] = model.normals(2);
    b[i] = model.normal(0.5);
  }
  std::vector<Vec> out(n, Vec(dim));
  for (auto& x : out) {
    const double s0 = g.normal(), s1 = g.normal();
    for (std::size_t i = 0; i < dim; ++i) x[i] = a[i][0] * s0 + a[i][1] * s1 + b[i] + g.normal(noise_sd);
  }
  return out;
}

}  // namespace zolr::gen
