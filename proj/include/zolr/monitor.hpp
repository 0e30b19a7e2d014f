#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "zolr/common.hpp"
#include "zolr/regress.hpp"
#include "zolr/regret.hpp"
#include "zolr/vae.hpp"

namespace zolr {

enum class Verdict { trusted, untrusted };

inline std::string to_string(Verdict v) { return v == Verdict::trusted ? "trusted" : "untrusted"; }

struct MonitorDecision {
  std::string sample_id;
  double lr = 0.0;  // NaN when scoring failed
  double threshold = 0.0;
  Verdict verdict = Verdict::untrusted;
  std::optional<Vec> prediction;
  std::string note;
};

struct MonitorSample {
  std::string id;
  Vec features;
  std::optional<Vec> truth;  // needed only for the R2 summary
};

struct MonitorSummary {
  std::size_t count = 0;
  std::size_t trusted = 0;
  double threshold = 0.0;
  double trusted_fraction = 0.0;
  std::optional<double> r2_with;     // trusted subset; empty if undefined
  std::optional<double> r2_without;  // all samples
};

struct MonitorResult {
  std::vector<MonitorDecision> decisions;
  MonitorSummary summary;
};

struct MonitorConfig {
  ZoConfig zo;
  std::optional<FixedPointFormat> fixed;
  std::size_t mc_samples = kScoringMcSamples;
  std::uint64_t base_seed = 0;
};

// Untrusted iff lr > threshold. Untrusted samples get no prediction. R2
// without filtering uses predictions for every sample that has a truth and
// usable features.
inline MonitorResult run_monitor(std::span<const MonitorSample> stream, const VaeParams& model,
                                 double threshold, const RidgeRegressor& regressor,
                                 const MonitorConfig& cfg) {
  require(!std::isnan(threshold), "run_monitor: threshold is NaN");
  MonitorResult out;
  std::vector<Vec> all_p, all_t, kept_p, kept_t;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto& s = stream[i];
    MonitorDecision d;
    d.sample_id = s.id;
    d.threshold = threshold;
    try {
      d.lr = score_lr(model, s.features, sample_config(cfg.zo, cfg.base_seed, i), cfg.fixed,
                      cfg.mc_samples, cfg.base_seed + i)
                 .lr;
      d.verdict = d.lr > threshold ? Verdict::untrusted : Verdict::trusted;
    } catch (const Error& e) {
      d.lr = std::nan("");
      d.verdict = Verdict::untrusted;
      d.note = e.what();
    }
    std::optional<Vec> p;
    try {
      p = predict_downstream(s.features, regressor);
    } catch (const Error& e) {
      d.verdict = Verdict::untrusted;
      if (d.note.empty()) d.note = e.what();
    }
    if (p && s.truth) {
      all_p.push_back(*p);
      all_t.push_back(*s.truth);
      if (d.verdict == Verdict::trusted) {
        kept_p.push_back(*p);
        kept_t.push_back(*s.truth);
      }
    }
    if (d.verdict == Verdict::trusted) {
      d.prediction = std::move(p);
      ++out.summary.trusted;
    }
    out.decisions.push_back(std::move(d));
  }
  auto& sm = out.summary;
  sm.count = stream.size();
  sm.threshold = threshold;
  sm.trusted_fraction = sm.count ? static_cast<double>(sm.trusted) / static_cast<double>(sm.count) : 0.0;
  sm.r2_without = r2(all_p, all_t);
  // R2 of fewer than two points is meaningless.
  if (kept_t.size() >= 2) sm.r2_with = r2(kept_p, kept_t);
  return out;
}

inline void write_decisions_csv(std::ostream& os, std::span<const MonitorDecision> ds) {
  os << "sample_id,lr,threshold,verdict,prediction,note\n";
  os.precision(17);
  for (const auto& d : ds) {
    os << d.sample_id << ',' << d.lr << ',' << d.threshold << ',' << to_string(d.verdict) << ',';
    if (d.prediction) {
      for (std::size_t j = 0; j < d.prediction->size(); ++j) os << (j ? " " : "") << (*d.prediction)[j];
    }
    std::string note = d.note;
    for (auto& c : note)
      if (c == ',' || c == '\n') c = ';';
    os << ',' << note << '\n';
  }
}

}  // namespace zolr
