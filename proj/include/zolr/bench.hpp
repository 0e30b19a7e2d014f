#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zolr/experiment.hpp"
#include "zolr/monitor.hpp"
#include "zolr/report.hpp"

namespace zolr {

// Stage seeds, all derived from one base seed so that the staged CLI
// pipeline and the in-memory bench agree.
struct StageSeeds {
  std::uint64_t lab, extractor_init, extractor_train, vae_init, vae_train, optimizer;

  static StageSeeds from(std::uint64_t base) {
    return {base,
            derive_seed(base, 100),
            derive_seed(base, 101),
            derive_seed(base, 102),
            derive_seed(base, 103),
            derive_seed(base, 104)};
  }
};

// SPSA gains for the lab's VAE encoders (several thousand parameters). The
// classical defaults move each coordinate by ~0.1 per probe, far outside the
// region where the ELBO can improve.
inline ZoConfig lab_zo_config() {
  ZoConfig c;
  c.spsa.a = 1e-5;
  c.spsa.c = 1e-3;
  return c;
}

struct BenchConfig {
  std::uint64_t seed = 1;
  LabConfig lab;
  ExtractorTrainOptions extractor;
  FeatureOptions features;
  ModelConfig model;
  ZoConfig zo = lab_zo_config();
  std::optional<FixedPointFormat> fixed;
  std::size_t mc_samples = kScoringMcSamples;
  double threshold_percentile = 95.0;
};

inline nlohmann::ordered_json to_json(const BenchConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["n_train"] = c.lab.n_train;
  j["n_val"] = c.lab.n_val;
  j["n_test"] = c.lab.n_test;
  j["n_corrupt"] = c.lab.n_corrupt;
  j["n_stream"] = c.lab.n_stream;
  j["tap"] = to_string(c.features.tap);
  j["fusion"] = c.features.fusion ? "concat" : "off";
  j["extractor_epochs"] = c.extractor.epochs;
  j["latent_dim"] = c.model.latent_dim;
  j["hidden"] = c.model.hidden;
  j["vae_epochs"] = c.model.train.epochs;
  j["vae_batch_size"] = c.model.train.batch_size;
  j["vae_learning_rate"] = c.model.train.learning_rate;
  j["vae_max_grad_norm"] = c.model.train.max_grad_norm;
  j["optimizer"] = to_string(c.zo.method);
  j["iterations"] = c.zo.iterations;
  j["spsa"] = {{"a", c.zo.spsa.a}, {"A", c.zo.spsa.big_a}, {"alpha", c.zo.spsa.alpha},
               {"c", c.zo.spsa.c}, {"gamma", c.zo.spsa.gamma}};
  j["zo"] = {{"mu", c.zo.zo.mu}, {"q", c.zo.zo.q}, {"step", c.zo.zo.step}};
  j["fixed_point"] = c.fixed ? c.fixed->name() : "off";
  j["mc_samples"] = c.mc_samples;
  j["threshold_percentile"] = c.threshold_percentile;
  return j;
}

inline LabConfig lab_config(const BenchConfig& c) {
  LabConfig l = c.lab;
  l.seed = StageSeeds::from(c.seed).lab;
  return l;
}

inline PointSetExtractor fit_extractor(const SceneSet& train, const BenchConfig& c) {
  const auto s = StageSeeds::from(c.seed);
  PointSetExtractor ex(s.extractor_init);
  std::vector<PointCloud> clouds;
  for (const auto& sc : train.scenes) clouds.push_back(sc.cloud);
  auto opt = c.extractor;
  opt.seed = s.extractor_train;
  ex.fit(clouds, opt);
  return ex;
}

inline TrainResult fit_model(std::span<const Vec> train_features, const BenchConfig& c) {
  const auto s = StageSeeds::from(c.seed);
  ModelConfig m = c.model;
  m.init_seed = s.vae_init;
  m.train.seed = s.vae_train;
  return fit_vae(train_features, m);
}

inline ScoringConfig scoring_config(const BenchConfig& c) {
  ScoringConfig sc;
  sc.zo = c.zo;
  sc.zo.seed = StageSeeds::from(c.seed).optimizer;
  sc.fixed = c.fixed;
  sc.mc_samples = c.mc_samples;
  sc.base_seed = 0;
  return sc;
}

// Scores one feature set; failed samples are reported as errors.
inline std::vector<ScoreRow> score_rows(const VaeParams& model, const std::vector<Vec>& xs,
                                        const std::vector<std::string>& ids,
                                        const std::vector<std::string>& labels,
                                        const ScoringConfig& sc) {
  const auto results = score_set(model, xs, sc);
  std::vector<ScoreRow> rows;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].score) throw ScoringError(results[i].error, i);
    rows.push_back({ids[i], *results[i].score, labels[i]});
  }
  return rows;
}

struct BenchResult {
  std::vector<ScoreRow> rows;  // test_clean first, then every corruption set
  std::vector<AucRow> table;
  std::vector<double> loss_curve;
};

inline BenchResult run_bench(const BenchConfig& c) {
  const auto sets = build_scene_sets(lab_config(c));
  const auto ex = fit_extractor(find_set(sets, "train"), c);
  const auto train_x = featurize_all(ex, find_set(sets, "train"), c.features);
  auto model = fit_model(train_x, c);
  BenchResult out;
  out.loss_curve = model.loss_curve;
  const auto sc = scoring_config(c);
  for (const auto& set : sets) {
    if (set.name == "train" || set.name == "val" || set.name == "stream") continue;
    std::vector<std::string> ids, labels;
    for (const auto& s : set.scenes) {
      ids.push_back(s.id);
      labels.push_back(s.label());
    }
    auto rows = score_rows(model.params, featurize_all(ex, set, c.features), ids, labels, sc);
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
  }
  out.table = auc_table(out.rows);
  return out;
}

}  // namespace zolr
