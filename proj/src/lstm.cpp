#include "pcho/lstm.hpp"

#include <cmath>
#include <random>

#include "pcho/error.hpp"

namespace pcho {

namespace {

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& x) { return 1.0 / (1.0 + (-x).exp()); }

}  // namespace

LstmLayerParams::LstmLayerParams(int in, int hidden)
    : input_dim(in),
      hidden_dim(hidden),
      w_input(Eigen::MatrixXd::Zero(4 * hidden, in)),
      w_recurrent(Eigen::MatrixXd::Zero(4 * hidden, hidden)),
      bias(Eigen::VectorXd::Zero(4 * hidden)) {}

LstmLayerParams LstmLayerParams::initialized(int in, int hidden, Rng& rng) {
  LstmLayerParams p(in, hidden);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index i = 0; i < p.w_input.size(); ++i) p.w_input.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < p.w_recurrent.size(); ++i) p.w_recurrent.data()[i] = u(rng);
  p.bias.segment(hidden, hidden).setOnes();
  return p;
}

namespace detail {

void lstm_forward_batch(const LstmView& p, const std::vector<Eigen::MatrixXd>& inputs, bool reverse,
                        LstmCache& cache) {
  const auto steps = static_cast<int>(inputs.size());
  const auto h = p.w_recurrent.cols();
  const auto batch = steps > 0 ? inputs.front().cols() : 0;
  cache.gates.resize(steps);
  cache.cell.resize(steps);
  cache.cell_tanh.resize(steps);
  cache.hidden.resize(steps);

  Eigen::MatrixXd h_prev = Eigen::MatrixXd::Zero(h, batch);
  Eigen::MatrixXd c_prev = Eigen::MatrixXd::Zero(h, batch);
  for (int s = 0; s < steps; ++s) {
    const int t = reverse ? steps - 1 - s : s;
    Eigen::MatrixXd z = p.w_input * inputs[t] + p.w_recurrent * h_prev;
    z.colwise() += p.bias;
    Eigen::MatrixXd& a = cache.gates[t];
    a.resize(4 * h, batch);
    a.topRows(2 * h) = sigmoid(z.topRows(2 * h).array()).matrix();
    a.middleRows(2 * h, h) = z.middleRows(2 * h, h).array().tanh().matrix();
    a.bottomRows(h) = sigmoid(z.bottomRows(h).array()).matrix();

    cache.cell[t] = (a.middleRows(h, h).array() * c_prev.array() +
                     a.topRows(h).array() * a.middleRows(2 * h, h).array())
                        .matrix();
    cache.cell_tanh[t] = cache.cell[t].array().tanh().matrix();
    cache.hidden[t] = (a.bottomRows(h).array() * cache.cell_tanh[t].array()).matrix();
    h_prev = cache.hidden[t];
    c_prev = cache.cell[t];
  }
}

void lstm_backward_batch(const LstmView& p, LstmGradView& g, const std::vector<Eigen::MatrixXd>& inputs,
                         bool reverse, const LstmCache& cache, const std::vector<Eigen::MatrixXd>& d_hidden,
                         std::vector<Eigen::MatrixXd>& d_inputs) {
  const auto steps = static_cast<int>(inputs.size());
  const auto h = p.w_recurrent.cols();
  const auto batch = steps > 0 ? inputs.front().cols() : 0;
  Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(h, batch);
  Eigen::MatrixXd dc_next = Eigen::MatrixXd::Zero(h, batch);
  Eigen::MatrixXd dz(4 * h, batch);
  const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(h, batch);

  // Walk the processing order backwards.
  for (int s = steps - 1; s >= 0; --s) {
    const int t = reverse ? steps - 1 - s : s;
    const int t_prev = reverse ? t + 1 : t - 1;  // previous step in processing order
    const bool has_prev = s > 0;
    const Eigen::MatrixXd& c_prev = has_prev ? cache.cell[t_prev] : zeros;
    const Eigen::MatrixXd& h_prev = has_prev ? cache.hidden[t_prev] : zeros;
    const Eigen::MatrixXd& a = cache.gates[t];
    const auto i = a.topRows(h).array();
    const auto f = a.middleRows(h, h).array();
    const auto gg = a.middleRows(2 * h, h).array();
    const auto o = a.bottomRows(h).array();
    const auto tc = cache.cell_tanh[t].array();

    const Eigen::ArrayXXd dh = d_hidden[t].array() + dh_next.array();
    const Eigen::ArrayXXd dc = dc_next.array() + dh * o * (1.0 - tc.square());
    dz.topRows(h) = (dc * gg * i * (1.0 - i)).matrix();
    dz.middleRows(h, h) = (dc * c_prev.array() * f * (1.0 - f)).matrix();
    dz.middleRows(2 * h, h) = (dc * i * (1.0 - gg.square())).matrix();
    dz.bottomRows(h) = (dh * tc * o * (1.0 - o)).matrix();
    dc_next = (dc * f).matrix();

    g.w_input.noalias() += dz * inputs[t].transpose();
    g.w_recurrent.noalias() += dz * h_prev.transpose();
    g.bias += dz.rowwise().sum();
    d_inputs[t].noalias() += p.w_input.transpose() * dz;
    dh_next.noalias() = p.w_recurrent.transpose() * dz;
  }
}

}  // namespace detail

LstmOutput lstm_forward(const LstmLayerParams& params, const Eigen::MatrixXd& window, bool reverse) {
  if (window.cols() != params.input_dim) {
    throw ShapeError("window has " + std::to_string(window.cols()) + " features, layer expects " +
                     std::to_string(params.input_dim));
  }
  const auto steps = window.rows();
  std::vector<Eigen::MatrixXd> inputs(steps);
  for (Eigen::Index t = 0; t < steps; ++t) inputs[t] = window.row(t).transpose();
  detail::LstmView view{detail::ConstMatMap(params.w_input.data(), params.w_input.rows(), params.w_input.cols()),
                        detail::ConstMatMap(params.w_recurrent.data(), params.w_recurrent.rows(),
                                            params.w_recurrent.cols()),
                        detail::ConstVecMap(params.bias.data(), params.bias.size())};
  detail::LstmCache cache;
  detail::lstm_forward_batch(view, inputs, reverse, cache);

  LstmOutput out;
  out.hidden.resize(steps, params.hidden_dim);
  for (Eigen::Index t = 0; t < steps; ++t) out.hidden.row(t) = cache.hidden[t].col(0).transpose();
  if (steps > 0) {
    const Eigen::Index last = reverse ? 0 : steps - 1;
    out.final_hidden = cache.hidden[last].col(0);
    out.final_cell = cache.cell[last].col(0);
  } else {
    out.final_hidden = Eigen::VectorXd::Zero(params.hidden_dim);
    out.final_cell = Eigen::VectorXd::Zero(params.hidden_dim);
  }
  return out;
}

BiLstmOutput bilstm_forward(const LstmLayerParams& forward, const LstmLayerParams& backward,
                            const Eigen::MatrixXd& window) {
  BiLstmOutput out;
  out.forward = lstm_forward(forward, window, false);
  out.backward = lstm_forward(backward, window, true);
  out.concatenated.resize(window.rows(), forward.hidden_dim + backward.hidden_dim);
  out.concatenated << out.forward.hidden, out.backward.hidden;
  return out;
}

}  // namespace pcho
