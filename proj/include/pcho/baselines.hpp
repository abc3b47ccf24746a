#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcho/predictor.hpp"

namespace pcho {

// AR(p) on the (optionally once-differenced) sig_quality series, fitted by least
// squares with an intercept; the (p, d, 0) member of the ARIMA family.
class ArModel final : public Predictor {
 public:
  ArModel() = default;

  ModelKind kind() const override { return ModelKind::ArBaseline; }
  int window() const override { return window_; }
  FeatureMode feature_mode() const override { return mode_; }
  int output_dim() const override { return horizon_; }
  bool trained() const override { return trained_; }
  const NormStats& norm() const override { return norm_; }
  Eigen::VectorXd predict_normalized(const Eigen::MatrixXd& window) const override;

  int order() const { return static_cast<int>(coefficients_.size()); }
  int differencing() const { return differencing_; }
  double intercept() const { return intercept_; }
  const std::vector<double>& coefficients() const { return coefficients_; }
  bool used_ridge() const { return used_ridge_; }

  // Forecast `steps` future values of a raw series (dB).
  std::vector<double> forecast(std::span<const double> history, int steps) const;

  // Binds the fitted recursion to a window/normalization so it can score dataset samples.
  void attach(const NormStats& norm, int window, FeatureMode mode, int horizon);

  static ArModel from_parts(int differencing, double intercept, std::vector<double> coefficients, bool used_ridge);

 private:
  friend ArModel fit_ar_baseline(std::span<const std::vector<double>> series, int order, int differencing);
  int differencing_ = 0;
  double intercept_ = 0.0;
  std::vector<double> coefficients_;  // phi_1..phi_p, phi_1 multiplies the newest lag
  bool used_ridge_ = false;
  bool trained_ = false;
  NormStats norm_;
  int window_ = 0;
  int horizon_ = 1;
  FeatureMode mode_ = FeatureMode::Full;
};

// Least squares over every (lags -> next) row of every series. Singular normal
// equations fall back to ridge (lambda = 1e-8) and set used_ridge().
ArModel fit_ar_baseline(std::span<const std::vector<double>> series, int order, int differencing);

// Fits on the training windows of `split` (window sig_quality + targets as short
// series) and attaches the split's normalization. order <= 0 picks W - d.
ArModel fit_ar_baseline(const DatasetSplit& split, int order, int differencing);

struct RegressionTree {
  struct Node {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;
  double predict(std::span<const double> x) const;
};

struct GbtParams {
  int n_trees = 100;
  int max_depth = 4;  // < 0: unlimited
  double learning_rate = 0.1;
  int min_samples_leaf = 1;
  double subsample = 1.0;
  std::uint64_t seed = 1;
};

// Gradient-boosted regression trees on flattened windows, squared-error loss,
// one ensemble per horizon.
class GbtModel final : public Predictor {
 public:
  ModelKind kind() const override { return ModelKind::GbtBaseline; }
  int window() const override { return window_; }
  FeatureMode feature_mode() const override { return mode_; }
  int output_dim() const override { return static_cast<int>(base_.size()); }
  bool trained() const override { return trained_; }
  const NormStats& norm() const override { return norm_; }
  Eigen::VectorXd predict_normalized(const Eigen::MatrixXd& window) const override;

  const GbtParams& params() const { return params_; }
  const std::vector<std::vector<RegressionTree>>& ensembles() const { return trees_; }
  const std::vector<double>& base_scores() const { return base_; }

  static GbtModel from_parts(GbtParams params, int window, FeatureMode mode, NormStats norm, std::vector<double> base,
                             std::vector<std::vector<RegressionTree>> trees);

 private:
  friend GbtModel fit_gbt_baseline(const DatasetSplit& split, const GbtParams& params);
  GbtParams params_;
  int window_ = 0;
  FeatureMode mode_ = FeatureMode::Full;
  NormStats norm_;
  std::vector<double> base_;                       // per horizon: training-target mean
  std::vector<std::vector<RegressionTree>> trees_;  // [horizon][tree]
  bool trained_ = false;
};

GbtModel fit_gbt_baseline(const DatasetSplit& split, const GbtParams& params);

// Single tree by greedy variance reduction; rows are flattened feature vectors.
RegressionTree fit_regression_tree(const std::vector<std::vector<double>>& rows, std::span<const double> targets,
                                   std::span<const std::size_t> subset, int max_depth, int min_samples_leaf);

}  // namespace pcho
