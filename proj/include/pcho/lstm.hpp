#pragma once

#include <vector>

#include <Eigen/Dense>

#include "pcho/rng.hpp"

namespace pcho {

// Gate rows are stacked in the order input, forget, candidate, output.
struct LstmLayerParams {
  int input_dim = 0;
  int hidden_dim = 0;
  Eigen::MatrixXd w_input;      // 4h x input_dim
  Eigen::MatrixXd w_recurrent;  // 4h x h
  Eigen::VectorXd bias;         // 4h

  LstmLayerParams() = default;
  LstmLayerParams(int input_dim, int hidden_dim);

  // Uniform(-1/sqrt(h), 1/sqrt(h)) weights, zero bias except forget gate = 1.
  static LstmLayerParams initialized(int input_dim, int hidden_dim, Rng& rng);
};

struct LstmOutput {
  Eigen::MatrixXd hidden;  // T x h, row t = h_t
  Eigen::VectorXd final_hidden;
  Eigen::VectorXd final_cell;
};

// Runs the recurrence over `window` (T x input_dim). With `reverse`, time runs
// from the last row to the first; hidden rows stay indexed by original time.
LstmOutput lstm_forward(const LstmLayerParams& params, const Eigen::MatrixXd& window, bool reverse = false);

struct BiLstmOutput {
  LstmOutput forward;
  LstmOutput backward;
  Eigen::MatrixXd concatenated;  // T x 2h, [forward | backward]
};

BiLstmOutput bilstm_forward(const LstmLayerParams& forward, const LstmLayerParams& backward,
                            const Eigen::MatrixXd& window);

namespace detail {

// Views into a flat parameter vector.
using MatMap = Eigen::Map<Eigen::MatrixXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

struct LstmView {
  ConstMatMap w_input;
  ConstMatMap w_recurrent;
  ConstVecMap bias;
};

struct LstmGradView {
  MatMap w_input;
  MatMap w_recurrent;
  VecMap bias;
};

// Activations of one direction over a batch, indexed by original time.
struct LstmCache {
  std::vector<Eigen::MatrixXd> gates;   // 4h x B after nonlinearity
  std::vector<Eigen::MatrixXd> cell;    // h x B
  std::vector<Eigen::MatrixXd> cell_tanh;
  std::vector<Eigen::MatrixXd> hidden;  // h x B
};

void lstm_forward_batch(const LstmView& p, const std::vector<Eigen::MatrixXd>& inputs, bool reverse,
                        LstmCache& cache);

// Accumulates parameter gradients into `g` and input gradients into `d_inputs`
// (which must be sized like `inputs`). `d_hidden[t]` is dLoss/dh_t from above.
void lstm_backward_batch(const LstmView& p, LstmGradView& g, const std::vector<Eigen::MatrixXd>& inputs,
                         bool reverse, const LstmCache& cache, const std::vector<Eigen::MatrixXd>& d_hidden,
                         std::vector<Eigen::MatrixXd>& d_inputs);

}  // namespace detail

}  // namespace pcho
