#include "pcho/evaluate.hpp"

#include <cmath>

#include "pcho/error.hpp"

namespace pcho {

namespace {

void require_trained(const Predictor& model) {
  if (!model.trained()) throw ConfigError("model " + to_string(model.kind()) + " has not been trained");
}

RmseReport finish(const Eigen::MatrixXd& sq_err_sum, std::size_t n) {
  RmseReport r;
  r.samples = n;
  double total = 0.0;
  for (Eigen::Index t = 0; t < sq_err_sum.size(); ++t) {
    r.per_tau.push_back(std::sqrt(sq_err_sum(t) / static_cast<double>(n)));
    total += sq_err_sum(t);
  }
  r.overall = std::sqrt(total / static_cast<double>(n * sq_err_sum.size()));
  return r;
}

}  // namespace

ForecastResult predict_direct(const Predictor& model, const Eigen::MatrixXd& normalized_window, NodeId node, int k) {
  require_trained(model);
  const Eigen::VectorXd z = model.predict_normalized(normalized_window);
  ForecastResult r;
  r.node = node;
  r.k = k;
  r.mode = ForecastMode::Direct;
  for (Eigen::Index i = 0; i < z.size(); ++i) r.values_db.push_back(model.norm().denormalize_quality(z[i]));
  return r;
}

ForecastResult predict_recursive(const Predictor& model, const Eigen::MatrixXd& normalized_window, int steps,
                                 NodeId node, int k) {
  require_trained(model);
  if (model.feature_mode() != FeatureMode::SinrOnly) {
    throw ConfigError("recursive forecasting needs a sig_quality-only model (F = 1)");
  }
  if (steps < 1) throw ConfigError("recursive horizon must be >= 1");
  ForecastResult r;
  r.node = node;
  r.k = k;
  r.mode = ForecastMode::Recursive;
  Eigen::MatrixXd window = normalized_window;
  const Eigen::Index rows = window.rows();
  for (int s = 0; s < steps; ++s) {
    const double next = model.predict_normalized(window)[0];
    r.values_db.push_back(model.norm().denormalize_quality(next));
    if (rows > 1) window.topRows(rows - 1) = window.bottomRows(rows - 1).eval();
    window(rows - 1, 0) = next;
  }
  return r;
}

RmseReport evaluate_rmse(const Predictor& model, std::span<const WindowSample> test) {
  require_trained(model);
  if (test.empty()) throw ConfigError("empty test set");
  const int h = model.output_dim();
  const Eigen::MatrixXd pred = model.predict_batch(test);
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(h);
  const auto& norm = model.norm();
  for (std::size_t j = 0; j < test.size(); ++j) {
    if (test[j].targets.size() < h) throw ShapeError("test sample has fewer targets than model outputs");
    for (int t = 0; t < h; ++t) {
      const double e = norm.denormalize_quality(pred(t, static_cast<Eigen::Index>(j))) -
                       norm.denormalize_quality(test[j].targets[t]);
      sums[t] += e * e;
    }
  }
  return finish(sums, test.size());
}

RmseReport evaluate_recursive_rmse(const Predictor& model, std::span<const WindowSample> test, int steps) {
  require_trained(model);
  if (test.empty()) throw ConfigError("empty test set");
  if (model.feature_mode() != FeatureMode::SinrOnly) {
    throw ConfigError("recursive forecasting needs a sig_quality-only model (F = 1)");
  }
  const auto& norm = model.norm();
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(steps);
  // Advance every window one step at a time so each pass is a single batch.
  std::vector<WindowSample> windows(test.begin(), test.end());
  for (int s = 0; s < steps; ++s) {
    const Eigen::MatrixXd pred = model.predict_batch(windows);
    for (std::size_t j = 0; j < windows.size(); ++j) {
      if (test[j].targets.size() < steps) throw ShapeError("test sample has fewer targets than the horizon");
      const double z = pred(0, static_cast<Eigen::Index>(j));
      const double e = norm.denormalize_quality(z) - norm.denormalize_quality(test[j].targets[s]);
      sums[s] += e * e;
      auto& w = windows[j].features;
      const Eigen::Index rows = w.rows();
      if (rows > 1) w.topRows(rows - 1) = w.bottomRows(rows - 1).eval();
      w(rows - 1, 0) = z;
    }
  }
  return finish(sums, test.size());
}

}  // namespace pcho
