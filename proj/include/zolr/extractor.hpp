#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "zolr/common.hpp"
#include "zolr/dense.hpp"
#include "zolr/lab.hpp"

namespace zolr {

enum class Tap : std::uint8_t { point_level = 0, feature_level = 1, encoder_level = 2 };
enum class Modality : std::uint8_t { lidar = 0, camera = 1, fused = 2 };

inline std::string to_string(Tap t) {
  switch (t) {
    case Tap::point_level: return "point";
    case Tap::feature_level: return "feature";
    case Tap::encoder_level: return "encoder";
  }
  return "?";
}

inline Tap parse_tap(const std::string& s) {
  if (s == "point" || s == "point_level") return Tap::point_level;
  if (s == "feature" || s == "feature_level") return Tap::feature_level;
  if (s == "encoder" || s == "encoder_level") return Tap::encoder_level;
  throw InvalidArgument("unknown tap '" + s + "'");
}

inline std::string to_string(Modality m) {
  switch (m) {
    case Modality::lidar: return "lidar";
    case Modality::camera: return "camera";
    case Modality::fused: return "fused";
  }
  return "?";
}

inline Modality parse_modality(const std::string& s) {
  if (s == "lidar") return Modality::lidar;
  if (s == "camera") return Modality::camera;
  if (s == "fused") return Modality::fused;
  throw InvalidArgument("unknown modality '" + s + "'");
}

struct FeatureVector {
  Vec values;
  Tap tap = Tap::encoder_level;
  Modality modality = Modality::lidar;
};

struct ExtractorTrainOptions {
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

// Mini permutation-invariant point-set network:
//   per point  3 -> 32 -> 32 (tanh, shared weights)
//   max-pool over points
//   head       32 -> 32 -> 32 (tanh)
//   regression 32 -> 6 (linear, used only while fitting)
// Taps: max-pool of the first per-point layer, the pooled 32-vector, and the
// head output.
class PointSetExtractor {
 public:
  static constexpr std::size_t kWidth = 32;
  static constexpr double kInputScale = 0.1;

  PointSetExtractor() : PointSetExtractor(0) {}
  explicit PointSetExtractor(std::uint64_t seed) {
    Rng rng(seed);
    point1_ = init_dense(3, kWidth, rng);
    point2_ = init_dense(kWidth, kWidth, rng);
    head1_ = init_dense(kWidth, kWidth, rng);
    head2_ = init_dense(kWidth, kWidth, rng);
    out_ = init_dense(kWidth, kTargetDim, rng);
    target_mean_.assign(kTargetDim, 0.0);
    target_scale_.assign(kTargetDim, 1.0);
  }

  static std::size_t feature_dim(Tap) { return kWidth; }

  FeatureVector extract(const PointCloud& pc, Tap tap) const {
    if (pc.points.size() < kMinPoints)
      throw InvalidArgument("extract_features: cloud has " + std::to_string(pc.points.size()) +
                            " points, need at least " + std::to_string(kMinPoints));
    Pass pass = forward(pc, tap == Tap::point_level ? Depth::first : Depth::head);
    FeatureVector f;
    f.tap = tap;
    f.modality = Modality::lidar;
    switch (tap) {
      case Tap::point_level: f.values = std::move(pass.pool1); break;
      case Tap::feature_level: f.values = std::move(pass.pool2); break;
      case Tap::encoder_level: f.values = std::move(pass.head2); break;
    }
    return f;
  }

  // Scene-parameter regression through the fitting head (de-standardized).
  Vec predict_params(const PointCloud& pc) const {
    Pass pass = forward(pc, Depth::head);
    Vec y(kTargetDim);
    out_.forward(pass.head2, y);
    for (std::size_t k = 0; k < kTargetDim; ++k) y[k] = y[k] * target_scale_[k] + target_mean_[k];
    return y;
  }

  // Fits all weights by SGD on squared error of the standardized scene
  // parameters. Returns mean loss per epoch.
  Vec fit(std::span<const PointCloud> scenes, const ExtractorTrainOptions& opt) {
    require(!scenes.empty(), "extractor fit: no scenes");
    require(opt.batch_size >= 1 && opt.learning_rate > 0.0, "extractor fit: bad options");
    standardize_targets(scenes);

    std::vector<Dense*> layers{&point1_, &point2_, &head1_, &head2_, &out_};
    std::vector<Dense> grads;
    for (auto* l : layers) grads.push_back(zeros_like(*l));

    Vec curve;
    std::vector<std::size_t> order(scenes.size());
    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), 0);
      Rng rng(derive_seed(opt.seed, epoch));
      std::shuffle(order.begin(), order.end(), rng);
      double loss_sum = 0.0;
      for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
        const std::size_t stop = std::min(order.size(), start + opt.batch_size);
        for (auto& g : grads) {
          std::fill(g.weight.begin(), g.weight.end(), 0.0);
          std::fill(g.bias.begin(), g.bias.end(), 0.0);
        }
        const double scale = 1.0 / static_cast<double>(stop - start);
        for (std::size_t b = start; b < stop; ++b)
          loss_sum += accumulate_grad(scenes[order[b]], grads, scale);
        for (std::size_t l = 0; l < layers.size(); ++l) {
          for (std::size_t i = 0; i < grads[l].weight.size(); ++i)
            layers[l]->weight[i] -= opt.learning_rate * grads[l].weight[i];
          for (std::size_t i = 0; i < grads[l].bias.size(); ++i)
            layers[l]->bias[i] -= opt.learning_rate * grads[l].bias[i];
        }
      }
      curve.push_back(loss_sum / static_cast<double>(scenes.size()));
    }
    return curve;
  }

  // Flat parameter access for persistence.
  Vec parameters() const {
    Vec flat;
    append_params({point1_, point2_, head1_, head2_, out_}, flat);
    flat.insert(flat.end(), target_mean_.begin(), target_mean_.end());
    flat.insert(flat.end(), target_scale_.begin(), target_scale_.end());
    return flat;
  }

  void set_parameters(std::span<const double> flat) {
    std::vector<Dense> layers{point1_, point2_, head1_, head2_, out_};
    const std::size_t need = parameter_count(layers) + 2 * kTargetDim;
    require_dim("extractor parameters", need, flat.size());
    std::size_t pos = assign_params(layers, flat);
    point1_ = layers[0];
    point2_ = layers[1];
    head1_ = layers[2];
    head2_ = layers[3];
    out_ = layers[4];
    std::copy_n(flat.begin() + pos, kTargetDim, target_mean_.begin());
    std::copy_n(flat.begin() + pos + kTargetDim, kTargetDim, target_scale_.begin());
  }

 private:
  enum class Depth { first, head };

  struct Pass {
    std::vector<Vec> h1, h2;  // per point
    Vec pool1, pool2;
    std::vector<std::size_t> argmax2;
    Vec head1, head2;
  };

  Pass forward(const PointCloud& pc, Depth depth) const {
    const std::size_t n = pc.points.size();
    Pass p;
    p.h1.assign(n, Vec(kWidth));
    p.pool1.assign(kWidth, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& q = pc.points[i];
      const std::array<double, 3> in{q[0] * kInputScale, q[1] * kInputScale, q[2] * kInputScale};
      point1_.forward(in, p.h1[i]);
      for (std::size_t c = 0; c < kWidth; ++c) {
        p.h1[i][c] = std::tanh(p.h1[i][c]);
        p.pool1[c] = std::max(p.pool1[c], p.h1[i][c]);
      }
    }
    if (depth == Depth::first) return p;

    p.h2.assign(n, Vec(kWidth));
    p.pool2.assign(kWidth, -std::numeric_limits<double>::infinity());
    p.argmax2.assign(kWidth, 0);
    for (std::size_t i = 0; i < n; ++i) {
      point2_.forward(p.h1[i], p.h2[i]);
      for (std::size_t c = 0; c < kWidth; ++c) {
        const double v = std::tanh(p.h2[i][c]);
        p.h2[i][c] = v;
        if (v > p.pool2[c]) {
          p.pool2[c] = v;
          p.argmax2[c] = i;
        }
      }
    }
    p.head1.resize(kWidth);
    head1_.forward(p.pool2, p.head1);
    for (auto& v : p.head1) v = std::tanh(v);
    p.head2.resize(kWidth);
    head2_.forward(p.head1, p.head2);
    for (auto& v : p.head2) v = std::tanh(v);
    return p;
  }

  double accumulate_grad(const PointCloud& pc, std::vector<Dense>& g, double scale) const {
    Pass p = forward(pc, Depth::head);
    Vec y(kTargetDim);
    out_.forward(p.head2, y);
    const Vec t = pc.scene.target();
    Vec dy(kTargetDim);
    double loss = 0.0;
    for (std::size_t k = 0; k < kTargetDim; ++k) {
      const double r = y[k] - (t[k] - target_mean_[k]) / target_scale_[k];
      loss += 0.5 * r * r;
      dy[k] = scale * r;
    }
    Vec d_head2(kWidth), d_head1(kWidth), d_pool(kWidth);
    out_.backward(p.head2, dy, g[4], d_head2);
    for (std::size_t c = 0; c < kWidth; ++c) d_head2[c] *= 1.0 - p.head2[c] * p.head2[c];
    head2_.backward(p.head1, d_head2, g[3], d_head1);
    for (std::size_t c = 0; c < kWidth; ++c) d_head1[c] *= 1.0 - p.head1[c] * p.head1[c];
    head1_.backward(p.pool2, d_head1, g[2], d_pool);

    // Max-pool routes each channel's gradient to its arg-max point only.
    std::vector<std::size_t> winners(p.argmax2.begin(), p.argmax2.end());
    std::sort(winners.begin(), winners.end());
    winners.erase(std::unique(winners.begin(), winners.end()), winners.end());
    Vec dh2(kWidth), dh1(kWidth);
    for (auto i : winners) {
      for (std::size_t c = 0; c < kWidth; ++c) {
        const double v = p.h2[i][c];
        dh2[c] = p.argmax2[c] == i ? d_pool[c] * (1.0 - v * v) : 0.0;
      }
      point2_.backward(p.h1[i], dh2, g[1], dh1);
      for (std::size_t c = 0; c < kWidth; ++c) dh1[c] *= 1.0 - p.h1[i][c] * p.h1[i][c];
      const auto& q = pc.points[i];
      const std::array<double, 3> in{q[0] * kInputScale, q[1] * kInputScale, q[2] * kInputScale};
      point1_.backward(in, dh1, g[0], {});
    }
    return loss;
  }

  void standardize_targets(std::span<const PointCloud> scenes) {
    target_mean_.assign(kTargetDim, 0.0);
    Vec sq(kTargetDim, 0.0);
    for (const auto& s : scenes) {
      const Vec t = s.scene.target();
      for (std::size_t k = 0; k < kTargetDim; ++k) {
        target_mean_[k] += t[k];
        sq[k] += t[k] * t[k];
      }
    }
    const double n = static_cast<double>(scenes.size());
    for (std::size_t k = 0; k < kTargetDim; ++k) {
      target_mean_[k] /= n;
      const double var = sq[k] / n - target_mean_[k] * target_mean_[k];
      target_scale_[k] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
  }

  Dense point1_, point2_, head1_, head2_, out_;
  Vec target_mean_, target_scale_;
};

// ---------------------------------------------------------------------------
// Second modality: coarse top-down occupancy image of the x-y projection.

struct OccupancyGrid {
  static constexpr std::size_t kBinsX = 4;
  static constexpr std::size_t kBinsY = 4;
  static constexpr double kX0 = 0.0;
  static constexpr double kY0 = -8.0;
  static constexpr double kBinWidth = 4.0;
  static constexpr double kNoiseSigma = 0.005;
  static constexpr std::size_t kDim = kBinsX * kBinsY;
};

// Normalized 4x4 histogram (row-major over x bins, then y bins). Points
// outside the grid fall into the nearest edge bin.
inline Vec occupancy_histogram(const PointCloud& pc) {
  using G = OccupancyGrid;
  Vec h(G::kDim, 0.0);
  if (pc.points.empty()) return h;
  auto bin = [](double v, double origin, std::size_t nbins) {
    const double b = std::floor((v - origin) / G::kBinWidth);
    return static_cast<std::size_t>(std::clamp(b, 0.0, static_cast<double>(nbins - 1)));
  };
  for (const auto& p : pc.points) h[bin(p[0], G::kX0, G::kBinsX) * G::kBinsY + bin(p[1], G::kY0, G::kBinsY)] += 1.0;
  const double inv = 1.0 / static_cast<double>(pc.points.size());
  for (auto& v : h) v *= inv;
  return h;
}

inline FeatureVector second_modality(const PointCloud& pc, std::uint64_t seed) {
  FeatureVector f;
  f.values = occupancy_histogram(pc);
  f.tap = Tap::encoder_level;
  f.modality = Modality::camera;
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, OccupancyGrid::kNoiseSigma);
  for (auto& v : f.values) v += g(rng);
  return f;
}

inline FeatureVector fuse(const FeatureVector& lidar, const FeatureVector& camera) {
  require(lidar.modality == Modality::lidar, "fuse: first input must be lidar features");
  require(camera.modality == Modality::camera, "fuse: second input must be camera features");
  FeatureVector f;
  f.values = lidar.values;
  f.values.insert(f.values.end(), camera.values.begin(), camera.values.end());
  f.tap = lidar.tap;
  f.modality = Modality::fused;
  return f;
}

}  // namespace zolr
