#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pcho/lstm.hpp"
#include "pcho/predictor.hpp"

namespace pcho {

struct Architecture {
  int recurrent_layers = 1;
  bool bidirectional = false;
  int hidden = 16;
  std::vector<int> dense_hidden;  // ReLU layers between the recurrent readout and the output
  double dropout = 0.0;           // after every hidden dense layer, training only
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// Stacked (Bi)LSTM encoder + dense head. BiLstmBs: two bidirectional layers,
// 32 -> 16 ReLU head with dropout. LiteLstmAp: one LSTM layer, one dense output.
// LinearHead: no recurrence, a single affine map of the flattened window.
Architecture default_architecture(ModelKind kind, int hidden = -1);

class SequenceRegressor final : public Predictor {
 public:
  SequenceRegressor(ModelKind kind, Architecture arch, int window, FeatureMode mode, int output_dim,
                    std::uint64_t init_seed);

  ModelKind kind() const override { return kind_; }
  int window() const override { return window_; }
  FeatureMode feature_mode() const override { return mode_; }
  int output_dim() const override { return output_dim_; }
  bool trained() const override { return trained_; }
  const NormStats& norm() const override { return norm_; }
  Eigen::VectorXd predict_normalized(const Eigen::MatrixXd& window) const override;
  Eigen::MatrixXd predict_batch(std::span<const WindowSample> samples) const override;

  const Architecture& architecture() const { return arch_; }
  int input_dim() const { return feature_count(mode_); }

  Eigen::VectorXd& parameters() { return theta_; }
  const Eigen::VectorXd& parameters() const { return theta_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(theta_.size()); }

  void set_norm(const NormStats& norm) { norm_ = norm; }
  void mark_trained(bool trained = true) { trained_ = trained; }

  // Copy of the parameters of recurrent layer `layer`, direction `dir` (1 = reverse).
  LstmLayerParams lstm_layer(int layer, int dir) const;

  // Mean squared error over the batch; fills `grad` (same layout as parameters())
  // when non-null. `dropout_rng` non-null enables dropout.
  double loss_and_gradient(std::span<const WindowSample* const> batch, Eigen::VectorXd* grad,
                           Rng* dropout_rng) const;

 private:
  struct LstmSlot {
    std::size_t w_input, w_recurrent, bias;
    int in, hidden;
  };
  struct DenseSlot {
    std::size_t weight, bias;
    int in, out;
  };
  struct Activations;

  void forward(const std::vector<Eigen::MatrixXd>& inputs, Activations& act, Rng* dropout_rng) const;
  std::vector<Eigen::MatrixXd> batch_inputs(std::span<const WindowSample* const> batch) const;
  detail::LstmView lstm_view(const LstmSlot& s) const;

  ModelKind kind_;
  Architecture arch_;
  int window_;
  FeatureMode mode_;
  int output_dim_;
  bool trained_ = false;
  NormStats norm_;
  Eigen::VectorXd theta_;
  std::vector<std::vector<LstmSlot>> lstm_;  // [layer][direction]
  std::vector<DenseSlot> dense_;
};

}  // namespace pcho
