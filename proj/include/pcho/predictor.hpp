#pragma once

#include <memory>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "pcho/dataset.hpp"

namespace pcho {

enum class ModelKind { BiLstmBs, LiteLstmAp, LinearHead, ArBaseline, GbtBaseline };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

// Common surface of every signal-quality forecaster. Windows and outputs are in
// the normalized space of norm(); evaluation helpers convert to dB.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual ModelKind kind() const = 0;
  virtual int window() const = 0;
  virtual FeatureMode feature_mode() const = 0;
  virtual int output_dim() const = 0;
  virtual bool trained() const = 0;
  virtual const NormStats& norm() const = 0;

  // W x F normalized window -> H normalized sig_quality forecasts.
  virtual Eigen::VectorXd predict_normalized(const Eigen::MatrixXd& window) const = 0;

  // Column j holds the forecasts for samples[j]. Default loops over predict_normalized.
  virtual Eigen::MatrixXd predict_batch(std::span<const WindowSample> samples) const;
};

}  // namespace pcho
