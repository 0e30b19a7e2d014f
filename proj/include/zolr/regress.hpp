#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "zolr/common.hpp"

namespace zolr {

// Multi-output ridge regression with an unpenalized intercept.
class RidgeRegressor {
 public:
  RidgeRegressor() = default;

  void fit(std::span<const Vec> features, std::span<const Vec> targets, double lambda = 1e-3) {
    require(!features.empty() && features.size() == targets.size(),
            "ridge: need equally many nonempty features and targets");
    require(lambda >= 0.0, "ridge: lambda must be >= 0");
    const auto n = static_cast<Eigen::Index>(features.size());
    const auto d = static_cast<Eigen::Index>(features[0].size());
    const auto k = static_cast<Eigen::Index>(targets[0].size());
    Eigen::MatrixXd X(n, d), Y(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      require_dim("ridge features", static_cast<std::size_t>(d), features[i].size());
      require_dim("ridge targets", static_cast<std::size_t>(k), targets[i].size());
      for (Eigen::Index j = 0; j < d; ++j) X(i, j) = features[i][j];
      for (Eigen::Index j = 0; j < k; ++j) Y(i, j) = targets[i][j];
    }
    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const Eigen::RowVectorXd y_mean = Y.colwise().mean();
    X.rowwise() -= x_mean;
    Y.rowwise() -= y_mean;
    Eigen::MatrixXd gram = X.transpose() * X;
    gram.diagonal().array() += lambda * static_cast<double>(n);
    coef_ = gram.ldlt().solve(X.transpose() * Y);  // d x k
    intercept_ = y_mean - x_mean * coef_;
  }

  bool fitted() const { return coef_.size() > 0; }
  std::size_t input_dim() const { return static_cast<std::size_t>(coef_.rows()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(coef_.cols()); }

  Vec predict(std::span<const double> x) const {
    require(fitted(), "ridge: predict before fit");
    require_dim("ridge predict", input_dim(), x.size());
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) row(static_cast<Eigen::Index>(j)) = x[j];
    const Eigen::RowVectorXd y = row * coef_ + intercept_;
    return Vec(y.data(), y.data() + y.size());
  }

  // Layout: input_dim, output_dim, coefficients (row-major d x k), intercept.
  Vec serialize() const {
    Vec out{static_cast<double>(input_dim()), static_cast<double>(output_dim())};
    for (Eigen::Index i = 0; i < coef_.rows(); ++i)
      for (Eigen::Index j = 0; j < coef_.cols(); ++j) out.push_back(coef_(i, j));
    for (Eigen::Index j = 0; j < intercept_.size(); ++j) out.push_back(intercept_(j));
    return out;
  }

  static RidgeRegressor deserialize(std::span<const double> flat) {
    require(flat.size() >= 2, "ridge: truncated parameters");
    const auto d = static_cast<Eigen::Index>(flat[0]);
    const auto k = static_cast<Eigen::Index>(flat[1]);
    require(d >= 1 && k >= 1 && flat.size() == static_cast<std::size_t>(2 + d * k + k),
            "ridge: malformed parameters");
    RidgeRegressor r;
    r.coef_.resize(d, k);
    std::size_t pos = 2;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < k; ++j) r.coef_(i, j) = flat[pos++];
    r.intercept_.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) r.intercept_(j) = flat[pos++];
    return r;
  }

 private:
  Eigen::MatrixXd coef_;
  Eigen::RowVectorXd intercept_;
};

inline Vec predict_downstream(std::span<const double> features, const RidgeRegressor& regressor) {
  return regressor.predict(features);
}

// Coefficient of determination pooled over all output dimensions:
// 1 - sum of squared residuals / sum of squared deviations from the
// per-dimension mean of the truths. Empty when the truths are constant.
inline std::optional<double> r2(std::span<const Vec> preds, std::span<const Vec> truths) {
  require(preds.size() == truths.size(), "r2: prediction/truth count mismatch");
  if (truths.empty()) return std::nullopt;
  const std::size_t k = truths[0].size();
  Vec mean(k, 0.0);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    require_dim("r2 truth", k, truths[i].size());
    require_dim("r2 prediction", k, preds[i].size());
    for (std::size_t j = 0; j < k; ++j) mean[j] += truths[i][j];
  }
  for (auto& m : mean) m /= static_cast<double>(truths.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double r = truths[i][j] - preds[i][j];
      const double t = truths[i][j] - mean[j];
      ss_res += r * r;
      ss_tot += t * t;
    }
  if (ss_tot == 0.0) return std::nullopt;
  return 1.0 - ss_res / ss_tot;
}

}  // namespace zolr
