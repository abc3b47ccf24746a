#include "pcho/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pcho/error.hpp"

namespace pcho {

using detail::ConstMatMap;
using detail::ConstVecMap;
using detail::MatMap;
using detail::VecMap;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::BiLstmBs: return "bilstm_bs";
    case ModelKind::LiteLstmAp: return "lite_lstm_ap";
    case ModelKind::LinearHead: return "linear_head";
    case ModelKind::ArBaseline: return "ar";
    case ModelKind::GbtBaseline: return "gbt";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
  for (auto k : {ModelKind::BiLstmBs, ModelKind::LiteLstmAp, ModelKind::LinearHead, ModelKind::ArBaseline,
                 ModelKind::GbtBaseline}) {
    if (to_string(k) == s) return k;
  }
  throw SchemaError("unknown model kind '" + s + "'");
}

Eigen::MatrixXd Predictor::predict_batch(std::span<const WindowSample> samples) const {
  Eigen::MatrixXd out(output_dim(), static_cast<Eigen::Index>(samples.size()));
  for (std::size_t j = 0; j < samples.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = predict_normalized(samples[j].features);
  return out;
}

Architecture default_architecture(ModelKind kind, int hidden) {
  Architecture a;
  switch (kind) {
    case ModelKind::BiLstmBs:
      a.recurrent_layers = 2;
      a.bidirectional = true;
      a.hidden = hidden > 0 ? hidden : 32;
      a.dense_hidden = {32, 16};
      a.dropout = 0.2;
      break;
    case ModelKind::LiteLstmAp:
      a.recurrent_layers = 1;
      a.bidirectional = false;
      a.hidden = hidden > 0 ? hidden : 16;
      break;
    case ModelKind::LinearHead:
      a.recurrent_layers = 0;
      a.hidden = 0;
      break;
    default:
      throw ConfigError("no neural architecture for " + to_string(kind));
  }
  return a;
}

struct SequenceRegressor::Activations {
  std::vector<std::vector<Eigen::MatrixXd>> layer_inputs;  // [layer][t]
  std::vector<std::vector<detail::LstmCache>> caches;      // [layer][dir]
  std::vector<Eigen::MatrixXd> dense_in;
  std::vector<Eigen::MatrixXd> dense_pre;
  std::vector<Eigen::ArrayXXd> dropout_mask;
  Eigen::MatrixXd output;
};

SequenceRegressor::SequenceRegressor(ModelKind kind, Architecture arch, int window, FeatureMode mode,
                                     int output_dim, std::uint64_t init_seed)
    : kind_(kind), arch_(std::move(arch)), window_(window), mode_(mode), output_dim_(output_dim) {
  if (window_ < 1 || output_dim_ < 1) throw ConfigError("window and output_dim must be >= 1");
  if (arch_.recurrent_layers > 0 && arch_.hidden < 1) throw ConfigError("hidden size must be >= 1");
  if (arch_.dropout < 0.0 || arch_.dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  const int dirs = arch_.bidirectional ? 2 : 1;
  const int f = feature_count(mode_);
  std::size_t offset = 0;
  for (int l = 0; l < arch_.recurrent_layers; ++l) {
    const int in = l == 0 ? f : dirs * arch_.hidden;
    std::vector<LstmSlot> per_dir;
    for (int d = 0; d < dirs; ++d) {
      LstmSlot s{};
      s.in = in;
      s.hidden = arch_.hidden;
      s.w_input = offset;
      offset += static_cast<std::size_t>(4 * arch_.hidden * in);
      s.w_recurrent = offset;
      offset += static_cast<std::size_t>(4 * arch_.hidden * arch_.hidden);
      s.bias = offset;
      offset += static_cast<std::size_t>(4 * arch_.hidden);
      per_dir.push_back(s);
    }
    lstm_.push_back(std::move(per_dir));
  }
  int prev = arch_.recurrent_layers == 0 ? window_ * f : dirs * arch_.hidden;
  std::vector<int> widths = arch_.dense_hidden;
  widths.push_back(output_dim_);
  for (int w : widths) {
    DenseSlot s{};
    s.in = prev;
    s.out = w;
    s.weight = offset;
    offset += static_cast<std::size_t>(w * prev);
    s.bias = offset;
    offset += static_cast<std::size_t>(w);
    dense_.push_back(s);
    prev = w;
  }
  theta_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));

  Rng rng(init_seed);
  for (auto& per_dir : lstm_) {
    for (auto& s : per_dir) {
      const auto p = LstmLayerParams::initialized(s.in, s.hidden, rng);
      std::copy_n(p.w_input.data(), p.w_input.size(), theta_.data() + s.w_input);
      std::copy_n(p.w_recurrent.data(), p.w_recurrent.size(), theta_.data() + s.w_recurrent);
      std::copy_n(p.bias.data(), p.bias.size(), theta_.data() + s.bias);
    }
  }
  for (const auto& s : dense_) {
    const double bound = std::sqrt(6.0 / (s.in + s.out));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (int i = 0; i < s.in * s.out; ++i) theta_[static_cast<Eigen::Index>(s.weight) + i] = u(rng);
  }
}

detail::LstmView SequenceRegressor::lstm_view(const LstmSlot& s) const {
  return {ConstMatMap(theta_.data() + s.w_input, 4 * s.hidden, s.in),
          ConstMatMap(theta_.data() + s.w_recurrent, 4 * s.hidden, s.hidden),
          ConstVecMap(theta_.data() + s.bias, 4 * s.hidden)};
}

LstmLayerParams SequenceRegressor::lstm_layer(int layer, int dir) const {
  const auto& s = lstm_.at(layer).at(dir);
  LstmLayerParams p(s.in, s.hidden);
  const auto v = lstm_view(s);
  p.w_input = v.w_input;
  p.w_recurrent = v.w_recurrent;
  p.bias = v.bias;
  return p;
}

std::vector<Eigen::MatrixXd> SequenceRegressor::batch_inputs(std::span<const WindowSample* const> batch) const {
  const int f = input_dim();
  const auto b = static_cast<Eigen::Index>(batch.size());
  std::vector<Eigen::MatrixXd> inputs(window_, Eigen::MatrixXd(f, b));
  for (Eigen::Index j = 0; j < b; ++j) {
    const auto& x = batch[j]->features;
    if (x.rows() != window_ || x.cols() != f) {
      throw ShapeError("window is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + ", model expects " +
                       std::to_string(window_) + "x" + std::to_string(f));
    }
    for (int t = 0; t < window_; ++t) inputs[t].col(j) = x.row(t).transpose();
  }
  return inputs;
}

void SequenceRegressor::forward(const std::vector<Eigen::MatrixXd>& inputs, Activations& act,
                                Rng* dropout_rng) const {
  const int layers = arch_.recurrent_layers;
  const int dirs = arch_.bidirectional ? 2 : 1;
  const int steps = window_;
  const Eigen::Index batch = inputs.front().cols();

  Eigen::MatrixXd x;
  if (layers == 0) {
    const int f = input_dim();
    x.resize(static_cast<Eigen::Index>(steps) * f, batch);
    for (int t = 0; t < steps; ++t) x.middleRows(static_cast<Eigen::Index>(t) * f, f) = inputs[t];
  } else {
    act.layer_inputs.resize(layers);
    act.caches.assign(layers, std::vector<detail::LstmCache>(dirs));
    act.layer_inputs[0] = inputs;
    for (int l = 0; l < layers; ++l) {
      for (int d = 0; d < dirs; ++d) {
        detail::lstm_forward_batch(lstm_view(lstm_[l][d]), act.layer_inputs[l], d == 1, act.caches[l][d]);
      }
      if (l + 1 < layers) {
        auto& next = act.layer_inputs[l + 1];
        next.resize(steps);
        for (int t = 0; t < steps; ++t) {
          if (dirs == 1) {
            next[t] = act.caches[l][0].hidden[t];
          } else {
            next[t].resize(2 * arch_.hidden, batch);
            next[t] << act.caches[l][0].hidden[t], act.caches[l][1].hidden[t];
          }
        }
      }
    }
    const auto& top = act.caches[layers - 1];
    if (dirs == 1) {
      x = top[0].hidden[steps - 1];
    } else {
      x.resize(2 * arch_.hidden, batch);
      x << top[0].hidden[steps - 1], top[1].hidden[0];
    }
  }

  const auto n_dense = dense_.size();
  act.dense_in.resize(n_dense);
  act.dense_pre.resize(n_dense);
  act.dropout_mask.assign(n_dense, Eigen::ArrayXXd());
  for (std::size_t i = 0; i < n_dense; ++i) {
    const auto& s = dense_[i];
    act.dense_in[i] = x;
    Eigen::MatrixXd pre = ConstMatMap(theta_.data() + s.weight, s.out, s.in) * x;
    pre.colwise() += ConstVecMap(theta_.data() + s.bias, s.out);
    act.dense_pre[i] = pre;
    if (i + 1 == n_dense) {
      x = pre;
      break;
    }
    x = pre.cwiseMax(0.0);
    if (dropout_rng != nullptr && arch_.dropout > 0.0) {
      std::bernoulli_distribution keep(1.0 - arch_.dropout);
      Eigen::ArrayXXd mask(x.rows(), x.cols());
      for (Eigen::Index k = 0; k < mask.size(); ++k) mask.data()[k] = keep(*dropout_rng) ? 1.0 / (1.0 - arch_.dropout) : 0.0;
      x = (x.array() * mask).matrix();
      act.dropout_mask[i] = std::move(mask);
    }
  }
  act.output = std::move(x);
}

double SequenceRegressor::loss_and_gradient(std::span<const WindowSample* const> batch, Eigen::VectorXd* grad,
                                            Rng* dropout_rng) const {
  if (batch.empty()) throw ConfigError("empty batch");
  const auto inputs = batch_inputs(batch);
  const auto b = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd targets(output_dim_, b);
  for (Eigen::Index j = 0; j < b; ++j) {
    if (batch[j]->targets.size() < output_dim_) throw ShapeError("sample has fewer targets than model outputs");
    targets.col(j) = batch[j]->targets.head(output_dim_);
  }
  Activations act;
  forward(inputs, act, dropout_rng);
  const Eigen::MatrixXd diff = act.output - targets;
  const double scale = 1.0 / static_cast<double>(b * output_dim_);
  const double loss = diff.squaredNorm() * scale;
  if (grad == nullptr) return loss;

  grad->setZero(theta_.size());
  Eigen::MatrixXd d = 2.0 * scale * diff;
  for (std::size_t ii = dense_.size(); ii-- > 0;) {
    const auto& s = dense_[ii];
    if (ii + 1 < dense_.size()) {
      if (act.dropout_mask[ii].size() > 0) d = (d.array() * act.dropout_mask[ii]).matrix();
      d = (d.array() * (act.dense_pre[ii].array() > 0.0).cast<double>()).matrix();
    }
    MatMap(grad->data() + s.weight, s.out, s.in).noalias() += d * act.dense_in[ii].transpose();
    VecMap(grad->data() + s.bias, s.out) += d.rowwise().sum();
    d = ConstMatMap(theta_.data() + s.weight, s.out, s.in).transpose() * d;
  }

  const int layers = arch_.recurrent_layers;
  if (layers == 0) return loss;
  const int dirs = arch_.bidirectional ? 2 : 1;
  const int steps = window_;
  const int h = arch_.hidden;

  std::vector<std::vector<Eigen::MatrixXd>> d_hidden(dirs, std::vector<Eigen::MatrixXd>(steps, Eigen::MatrixXd::Zero(h, b)));
  if (dirs == 1) {
    d_hidden[0][steps - 1] = d;
  } else {
    d_hidden[0][steps - 1] = d.topRows(h);
    d_hidden[1][0] = d.bottomRows(h);
  }
  for (int l = layers - 1; l >= 0; --l) {
    const auto& in = act.layer_inputs[l];
    std::vector<Eigen::MatrixXd> d_inputs(steps, Eigen::MatrixXd::Zero(in.front().rows(), b));
    for (int dd = 0; dd < dirs; ++dd) {
      const auto& s = lstm_[l][dd];
      detail::LstmGradView g{MatMap(grad->data() + s.w_input, 4 * s.hidden, s.in),
                             MatMap(grad->data() + s.w_recurrent, 4 * s.hidden, s.hidden),
                             VecMap(grad->data() + s.bias, 4 * s.hidden)};
      detail::lstm_backward_batch(lstm_view(s), g, in, dd == 1, act.caches[l][dd], d_hidden[dd], d_inputs);
    }
    if (l > 0) {
      for (int t = 0; t < steps; ++t) {
        if (dirs == 1) {
          d_hidden[0][t] = d_inputs[t];
        } else {
          d_hidden[0][t] = d_inputs[t].topRows(h);
          d_hidden[1][t] = d_inputs[t].bottomRows(h);
        }
      }
    }
  }
  return loss;
}

Eigen::VectorXd SequenceRegressor::predict_normalized(const Eigen::MatrixXd& window) const {
  WindowSample s;
  s.features = window;
  const WindowSample* ptr = &s;
  Activations act;
  forward(batch_inputs(std::span<const WindowSample* const>(&ptr, 1)), act, nullptr);
  return act.output.col(0);
}

Eigen::MatrixXd SequenceRegressor::predict_batch(std::span<const WindowSample> samples) const {
  Eigen::MatrixXd out(output_dim_, static_cast<Eigen::Index>(samples.size()));
  constexpr std::size_t kChunk = 512;
  std::vector<const WindowSample*> ptrs;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, samples.size() - start);
    ptrs.clear();
    for (std::size_t j = 0; j < n; ++j) ptrs.push_back(&samples[start + j]);
    Activations act;
    forward(batch_inputs(ptrs), act, nullptr);
    out.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(n)) = act.output;
  }
  return out;
}

}  // namespace pcho
