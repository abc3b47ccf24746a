#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcho/network.hpp"

namespace pcho {

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 100;
  int batch_size = 32;
  int patience = 10;  // early stop on test loss; <= 0 disables
  std::uint64_t seed = 1;
  bool dropout_enabled = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct TrainResult {
  std::vector<double> train_loss;  // per epoch, normalized MSE
  std::vector<double> test_loss;
  int best_epoch = -1;             // parameters restored from this epoch
};

// Adaptive-moment optimizer over a flat parameter vector.
class Adam {
 public:
  Adam(Eigen::Index size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

// Minibatch training on normalized targets (first output_dim entries of each
// target vector). Sets the model's NormStats from the split and marks it trained.
// Throws TrainingDiverged if the loss becomes non-finite.
TrainResult train(SequenceRegressor& model, const DatasetSplit& split, const TrainConfig& cfg);

double mean_squared_error(const SequenceRegressor& model, std::span<const WindowSample> samples);

struct GradientReport {
  double max_relative_error = 0.0;
  std::size_t worst_parameter = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t parameters_checked = 0;
  double tolerance = 0.0;
  bool passed = false;
  std::string summary() const;
};

// Analytic gradient vs central differences (step 1e-5) on every parameter.
// Relative error is |a - n| / max(|a| + |n|, 1e-7). passed iff max < tolerance.
GradientReport gradient_check(const SequenceRegressor& model, const WindowSample& sample, double tolerance,
                              double step = 1e-5);

struct GridPoint {
  int hidden = 0;
  double learning_rate = 0.0;
  double test_rmse_db = 0.0;
};

struct GridSearchResult {
  std::vector<GridPoint> points;
  GridPoint best;
};

// Trains one model per (hidden, learning rate) pair; the best is the lowest test RMSE.
GridSearchResult grid_search(ModelKind kind, const DatasetSplit& split, const std::vector<int>& hidden_sizes,
                             const std::vector<double>& learning_rates, const TrainConfig& base,
                             std::uint64_t init_seed);

}  // namespace pcho
