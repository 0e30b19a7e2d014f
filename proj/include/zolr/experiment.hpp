#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zolr/common.hpp"
#include "zolr/extractor.hpp"
#include "zolr/fixed_point.hpp"
#include "zolr/lab.hpp"
#include "zolr/regret.hpp"
#include "zolr/regress.hpp"
#include "zolr/vae.hpp"
#include "zolr/zo.hpp"

namespace zolr {

// End-to-end benchmark on the synthetic laboratory: scenes -> features ->
// VAE -> per-sample scores. Every stage is a pure function of the config, so
// the CLI can run the stages separately through files and get the same
// numbers.

struct LabScene {
  std::string id;
  PointCloud cloud;
  std::uint64_t seed = 0;  // scene seed; camera noise derives from it
  std::optional<CorruptionSpec> corruption;

  std::string label() const { return corruption ? corruption->label() : "clean"; }
};

struct SceneSet {
  std::string name;
  std::vector<LabScene> scenes;
};

struct LabConfig {
  std::uint64_t seed = 1;
  std::size_t n_train = 2000;
  std::size_t n_val = 200;
  std::size_t n_test = 200;
  std::size_t n_corrupt = 200;
  std::size_t n_stream = 400;  // half clean, half heavy corruption
  std::vector<CorruptionKind> kinds{kAllCorruptions.begin(), kAllCorruptions.end()};
  std::vector<Severity> severities{Severity::heavy, Severity::moderate};
};

inline std::string set_name(CorruptionKind k, Severity s) {
  return to_string(k) + "_" + to_string(s);
}

namespace detail {

inline LabScene make_clean(const std::string& prefix, std::uint64_t seed, std::size_t i) {
  LabScene s;
  s.id = prefix + "-" + std::to_string(i);
  s.seed = seed;
  s.cloud = generate_random_scene(seed);
  return s;
}

}  // namespace detail

// Set names: train, val, test_clean, <kind>_<severity>, stream.
// Moderate and heavy variants of a kind share base scenes and corruption
// seeds.
inline std::vector<SceneSet> build_scene_sets(const LabConfig& cfg) {
  std::vector<SceneSet> sets;
  auto clean_set = [&](const std::string& name, std::uint64_t stream, std::size_t n) {
    SceneSet set{name, {}};
    for (std::size_t i = 0; i < n; ++i)
      set.scenes.push_back(detail::make_clean(name, derive_seed(cfg.seed, stream, i), i));
    return set;
  };
  sets.push_back(clean_set("train", 1, cfg.n_train));
  sets.push_back(clean_set("val", 2, cfg.n_val));
  sets.push_back(clean_set("test_clean", 3, cfg.n_test));
  for (auto kind : cfg.kinds) {
    const auto k = static_cast<std::uint64_t>(kind);
    for (auto sev : cfg.severities) {
      SceneSet set{set_name(kind, sev), {}};
      for (std::size_t i = 0; i < cfg.n_corrupt; ++i) {
        const std::uint64_t base = derive_seed(cfg.seed, 10 + k, i);
        LabScene s = detail::make_clean(set.name, base, i);
        CorruptionSpec spec{kind, sev, derive_seed(cfg.seed, 30 + k, i), std::nullopt};
        s.cloud = corrupt(s.cloud, spec);
        s.corruption = spec;
        set.scenes.push_back(std::move(s));
      }
      sets.push_back(std::move(set));
    }
  }
  if (cfg.n_stream > 0) {
    SceneSet set{"stream", {}};
    for (std::size_t i = 0; i < cfg.n_stream; ++i) {
      const std::uint64_t base = derive_seed(cfg.seed, 50, i);
      LabScene s = detail::make_clean("stream", base, i);
      if (i % 2 == 1 && !cfg.kinds.empty()) {
        const auto kind = cfg.kinds[(i / 2) % cfg.kinds.size()];
        CorruptionSpec spec{kind, Severity::heavy, derive_seed(cfg.seed, 51, i), std::nullopt};
        s.cloud = corrupt(s.cloud, spec);
        s.corruption = spec;
      }
      set.scenes.push_back(std::move(s));
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

inline const SceneSet& find_set(const std::vector<SceneSet>& sets, const std::string& name) {
  for (const auto& s : sets)
    if (s.name == name) return s;
  throw InvalidArgument("no scene set named '" + name + "'");
}

struct FeatureOptions {
  Tap tap = Tap::encoder_level;
  bool fusion = false;
};

inline std::uint64_t camera_seed(std::uint64_t scene_seed) { return derive_seed(scene_seed, 0xCA3E7A); }

// Features are stored as 32-bit floats on disk; rounding here keeps in-memory
// runs identical to file-based ones.
inline FeatureVector featurize(const PointSetExtractor& ex, const LabScene& s,
                               const FeatureOptions& opt) {
  FeatureVector f = ex.extract(s.cloud, opt.tap);
  if (opt.fusion) f = fuse(f, second_modality(s.cloud, camera_seed(s.seed)));
  for (auto& v : f.values) v = static_cast<double>(static_cast<float>(v));
  return f;
}

inline std::vector<Vec> featurize_all(const PointSetExtractor& ex, const SceneSet& set,
                                      const FeatureOptions& opt) {
  std::vector<Vec> out;
  out.reserve(set.scenes.size());
  for (const auto& s : set.scenes) out.push_back(featurize(ex, s, opt).values);
  return out;
}

inline std::vector<Vec> targets_of(const SceneSet& set) {
  std::vector<Vec> out;
  for (const auto& s : set.scenes) out.push_back(s.cloud.scene.target());
  return out;
}

struct ModelConfig {
  std::size_t latent_dim = 8;
  std::vector<std::size_t> hidden{64, 64};
  TrainOptions train{.epochs = 300, .batch_size = 32, .learning_rate = 4e-3, .seed = 0, .mc_samples = 1,
                     .max_grad_norm = 20.0};
  std::uint64_t init_seed = 0;
};

inline TrainResult fit_vae(std::span<const Vec> data, const ModelConfig& mc) {
  require(!data.empty(), "fit_vae: empty dataset");
  auto params = init_params(data[0].size(), mc.latent_dim, mc.hidden, mc.init_seed);
  return train(std::move(params), data, mc.train);
}

struct ScoringConfig {
  ZoConfig zo;
  std::optional<FixedPointFormat> fixed;
  std::size_t mc_samples = kScoringMcSamples;
  std::uint64_t base_seed = 0;
};

inline std::vector<BatchResult> score_set(const VaeParams& params, std::span<const Vec> xs,
                                          const ScoringConfig& sc) {
  return score_batch(params, xs, sc.zo, sc.fixed, sc.mc_samples, sc.base_seed);
}

}  // namespace zolr
