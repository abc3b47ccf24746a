#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pcho/predictor.hpp"

namespace pcho {

enum class ForecastMode { Direct, Recursive };

struct ForecastResult {
  NodeId node;
  int k = 0;
  std::vector<double> values_db;  // s_hat[k+1..k+H]
  ForecastMode mode = ForecastMode::Direct;
};

// One forward pass; all output_dim horizons, denormalized to dB.
ForecastResult predict_direct(const Predictor& model, const Eigen::MatrixXd& normalized_window, NodeId node = {},
                              int k = 0);

// Repeated one-step forecasts, each fed back as the newest window row.
// Requires a sig_quality-only model.
ForecastResult predict_recursive(const Predictor& model, const Eigen::MatrixXd& normalized_window, int steps,
                                 NodeId node = {}, int k = 0);

struct RmseReport {
  std::vector<double> per_tau;  // dB
  double overall = 0.0;         // over all horizons jointly
  std::size_t samples = 0;
};

// RMSE in dB of direct forecasts against the denormalized targets.
RmseReport evaluate_rmse(const Predictor& model, std::span<const WindowSample> test);

// Recursive replay of a one-step model over `steps` horizons.
RmseReport evaluate_recursive_rmse(const Predictor& model, std::span<const WindowSample> test, int steps);

}  // namespace pcho
