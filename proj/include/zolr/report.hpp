#pragma once

#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zolr/common.hpp"
#include "zolr/eval.hpp"
#include "zolr/io.hpp"
#include "zolr/regret.hpp"

namespace zolr {

inline constexpr const char* kVersion = "1.0.0";

// Shortest text that round-trips the double exactly, so values read back
// from a report reproduce every derived number bit for bit.
inline std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ScoreRow {
  std::string sample_id;
  LRScore score;
  std::string label;  // "clean" or "<kind>|<severity>"
};

inline void write_scores_csv(std::ostream& os, const std::vector<ScoreRow>& rows) {
  os << "sample_id,l_vae,l_opt,lr,label\n";
  for (const auto& r : rows)
    os << r.sample_id << ',' << fmt_real(r.score.l_vae) << ',' << fmt_real(r.score.l_opt) << ','
       << fmt_real(r.score.lr) << ',' << r.label << '\n';
}

inline std::vector<ScoreRow> read_scores_csv(std::istream& is, const std::string& name = "scores") {
  std::string line;
  if (!std::getline(is, line) || line != "sample_id,l_vae,l_opt,lr,label")
    throw IoError(name + ": bad score CSV header");
  std::vector<ScoreRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (cells.size() != 5) throw IoError(name + ":" + std::to_string(lineno) + ": expected 5 columns");
    ScoreRow r;
    r.sample_id = cells[0];
    try {
      r.score = {std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3])};
    } catch (const std::exception&) {
      throw IoError(name + ":" + std::to_string(lineno) + ": bad number");
    }
    r.label = cells[4];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_roc_csv(std::ostream& os, const RocCurve& roc) {
  os << "fpr,tpr\n";
  for (const auto& p : roc.points) os << fmt_real(p.fpr) << ',' << fmt_real(p.tpr) << '\n';
}

inline void write_histogram_csv(std::ostream& os, const std::vector<HistogramBin>& bins) {
  os << "low,high,count\n";
  for (const auto& b : bins) os << fmt_real(b.low) << ',' << fmt_real(b.high) << ',' << b.count << '\n';
}

// One row per corruption label. The likelihood baseline is reported in both
// orientations: "neg" scores a sample by -l_vae (low likelihood = OOD), "raw"
// by l_vae. `likelihood_best` is the larger of the two.
struct AucRow {
  std::string label;
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  double lr = 0.0;
  double likelihood_neg = 0.0;
  double likelihood_raw = 0.0;
  double likelihood_best() const { return std::max(likelihood_neg, likelihood_raw); }
};

struct SplitScores {
  Vec lr, neg, raw;
};

inline SplitScores split_scores(const std::vector<LRScore>& s) {
  SplitScores out;
  for (const auto& x : s) {
    out.lr.push_back(x.lr);
    out.neg.push_back(-x.l_vae);
    out.raw.push_back(x.l_vae);
  }
  return out;
}

inline AucRow auc_row(const std::string& label, const std::vector<LRScore>& clean,
                      const std::vector<LRScore>& corrupted) {
  const auto in = split_scores(clean);
  const auto out = split_scores(corrupted);
  return {label, clean.size(), corrupted.size(), roc_auc(in.lr, out.lr).auc,
          roc_auc(in.neg, out.neg).auc, roc_auc(in.raw, out.raw).auc};
}

// Groups rows by label; labels keep first-appearance order.
inline std::vector<AucRow> auc_table(const std::vector<ScoreRow>& rows) {
  std::vector<LRScore> clean;
  std::vector<std::string> order;
  std::map<std::string, std::vector<LRScore>> by_label;
  for (const auto& r : rows) {
    if (r.label == "clean") {
      clean.push_back(r.score);
      continue;
    }
    auto [it, fresh] = by_label.try_emplace(r.label);
    if (fresh) order.push_back(r.label);
    it->second.push_back(r.score);
  }
  require(!clean.empty(), "auc_table: no clean rows");
  std::vector<AucRow> table;
  for (const auto& l : order) table.push_back(auc_row(l, clean, by_label[l]));
  return table;
}

inline void write_auc_table_csv(std::ostream& os, const std::vector<AucRow>& table) {
  os << "label,n_in,n_out,auc_lr,auc_likelihood_neg,auc_likelihood_raw,auc_likelihood_best\n";
  for (const auto& r : table)
    os << r.label << ',' << r.n_in << ',' << r.n_out << ',' << fmt_real(r.lr) << ','
       << fmt_real(r.likelihood_neg) << ',' << fmt_real(r.likelihood_raw) << ','
       << fmt_real(r.likelihood_best()) << '\n';
}

inline nlohmann::ordered_json to_json(const std::vector<AucRow>& table) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : table)
    arr.push_back({{"label", r.label},
                   {"n_in", r.n_in},
                   {"n_out", r.n_out},
                   {"auc_lr", r.lr},
                   {"auc_likelihood_neg", r.likelihood_neg},
                   {"auc_likelihood_raw", r.likelihood_raw},
                   {"auc_likelihood_best", r.likelihood_best()}});
  return arr;
}

// 64-bit FNV-1a over the compact dump of the config object.
inline std::string fingerprint(const nlohmann::ordered_json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline nlohmann::ordered_json make_summary(const nlohmann::ordered_json& config,
                                           const std::vector<AucRow>& table) {
  nlohmann::ordered_json j;
  j["tool"] = "zolr";
  j["version"] = kVersion;
  j["fingerprint"] = fingerprint(config);
  j["config"] = config;
  j["auc"] = to_json(table);
  return j;
}

inline void write_json(const std::string& path, const nlohmann::ordered_json& j) {
  auto os = open_out(path);
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed for '" + path + "'");
}

}  // namespace zolr
