#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "zolr/common.hpp"

namespace zolr {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // sorted by fpr, (0,0) ... (1,1)
  double auc = 0.0;
};

// ROC of "out" (positive, OOD) against "in" (negative) where a higher score
// means more likely OOD. Every distinct score is a threshold; tied in/out
// scores produce a diagonal segment, i.e. half credit.
inline RocCurve roc_auc(std::span<const double> in_scores, std::span<const double> out_scores) {
  require(!in_scores.empty() && !out_scores.empty(), "roc_auc: both score lists must be nonempty");
  std::vector<std::pair<double, bool>> all;  // (score, is_out)
  all.reserve(in_scores.size() + out_scores.size());
  for (double s : in_scores) all.emplace_back(s, false);
  for (double s : out_scores) all.emplace_back(s, true);
  for (const auto& [s, _] : all) require(!std::isnan(s), "roc_auc: NaN score");
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  const auto n_in = static_cast<std::uint64_t>(in_scores.size());
  const auto n_out = static_cast<std::uint64_t>(out_scores.size());
  RocCurve roc;
  roc.points.push_back({0.0, 0.0});
  std::uint64_t fp = 0, tp = 0;
  // Twice the area in units of (1/n_in) x (1/n_out); exact in integers.
  std::uint64_t area2 = 0;
  for (std::size_t i = 0; i < all.size();) {
    const double s = all[i].first;
    const std::uint64_t fp0 = fp, tp0 = tp;
    for (; i < all.size() && all[i].first == s; ++i) (all[i].second ? tp : fp)++;
    area2 += (fp - fp0) * (tp + tp0);
    roc.points.push_back({static_cast<double>(fp) / static_cast<double>(n_in),
                          static_cast<double>(tp) / static_cast<double>(n_out)});
  }
  roc.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(n_in) * static_cast<double>(n_out));
  return roc;
}

// Trapezoidal area under an arbitrary point list (sorted by fpr).
inline double trapezoid_area(std::span<const RocPoint> pts) {
  double a = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    a += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) * 0.5;
  return a;
}

struct HistogramBin {
  double low = 0.0;
  double high = 0.0;
  std::size_t count = 0;
};

// Equal-width bins over [min, max]; the maximum lands in the last bin. A
// constant input gets the range [v, v + 1).
inline std::vector<HistogramBin> histogram(std::span<const double> scores, std::size_t bins) {
  require(!scores.empty(), "histogram: empty input");
  require(bins >= 1, "histogram: bins must be >= 1");
  const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *mn;
  const double hi = *mx > *mn ? *mx : *mn + 1.0;
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<HistogramBin> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].low = lo + width * static_cast<double>(b);
    out[b].high = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (double s : scores) {
    auto b = static_cast<std::size_t>(std::floor((s - lo) / width));
    out[std::min(b, bins - 1)].count++;
  }
  return out;
}

}  // namespace zolr
