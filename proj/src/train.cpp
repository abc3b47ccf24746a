#include "pcho/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pcho/error.hpp"
#include "pcho/evaluate.hpp"

namespace pcho {

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate}, {"epochs", c.epochs},     {"batch_size", c.batch_size},
       {"patience", c.patience},           {"seed", c.seed},         {"dropout_enabled", c.dropout_enabled},
       {"beta1", c.beta1},                 {"beta2", c.beta2},       {"epsilon", c.epsilon}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("learning_rate")) j.at("learning_rate").get_to(c.learning_rate);
  if (j.contains("epochs")) j.at("epochs").get_to(c.epochs);
  if (j.contains("batch_size")) j.at("batch_size").get_to(c.batch_size);
  if (j.contains("patience")) j.at("patience").get_to(c.patience);
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
  if (j.contains("dropout_enabled")) j.at("dropout_enabled").get_to(c.dropout_enabled);
  if (j.contains("beta1")) j.at("beta1").get_to(c.beta1);
  if (j.contains("beta2")) j.at("beta2").get_to(c.beta2);
  if (j.contains("epsilon")) j.at("epsilon").get_to(c.epsilon);
}

Adam::Adam(Eigen::Index size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

double mean_squared_error(const SequenceRegressor& model, std::span<const WindowSample> samples) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  const Eigen::MatrixXd pred = model.predict_batch(samples);
  double sum = 0.0;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    sum += (pred.col(static_cast<Eigen::Index>(j)) - samples[j].targets.head(model.output_dim())).squaredNorm();
  }
  return sum / static_cast<double>(samples.size() * model.output_dim());
}

TrainResult train(SequenceRegressor& model, const DatasetSplit& split, const TrainConfig& cfg) {
  if (split.train.empty()) throw ConfigError("training set is empty");
  if (split.horizon < model.output_dim()) {
    throw ConfigError("dataset horizon " + std::to_string(split.horizon) + " is shorter than model output " +
                      std::to_string(model.output_dim()));
  }
  if (split.window != model.window() || split.mode != model.feature_mode()) {
    throw ShapeError("dataset window/features do not match the model");
  }
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  model.set_norm(split.norm);
  TrainResult result;
  if (cfg.epochs <= 0) {
    model.mark_trained();
    return result;
  }

  Rng rng(derive_seed(cfg.seed, {0x747261696eULL}));
  Adam adam(model.parameters().size(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const WindowSample*> batch;
  Eigen::VectorXd grad;

  const bool has_test = !split.test.empty();
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_params = model.parameters();
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      batch.clear();
      for (std::size_t j = 0; j < n; ++j) batch.push_back(&split.train[order[start + j]]);
      const double loss = model.loss_and_gradient(batch, &grad, cfg.dropout_enabled ? &rng : nullptr);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        throw TrainingDiverged("loss became non-finite at epoch " + std::to_string(epoch));
      }
      adam.step(model.parameters(), grad);
      epoch_loss += loss * static_cast<double>(n);
    }
    result.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    const double monitored = has_test ? mean_squared_error(model, split.test) : result.train_loss.back();
    if (!std::isfinite(monitored)) throw TrainingDiverged("loss became non-finite at epoch " + std::to_string(epoch));
    result.test_loss.push_back(has_test ? monitored : std::numeric_limits<double>::quiet_NaN());
    if (monitored < best) {
      best = monitored;
      best_params = model.parameters();
      result.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  model.parameters() = best_params;
  model.mark_trained();
  return result;
}

std::string GradientReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << ": max relative error " << max_relative_error << " (tolerance " << tolerance
     << ") at parameter " << worst_parameter << " analytic=" << worst_analytic << " numeric=" << worst_numeric
     << " over " << parameters_checked << " parameters";
  return os.str();
}

GradientReport gradient_check(const SequenceRegressor& model, const WindowSample& sample, double tolerance,
                              double step) {
  SequenceRegressor probe = model;
  const WindowSample* ptr = &sample;
  std::span<const WindowSample* const> batch(&ptr, 1);
  Eigen::VectorXd analytic;
  probe.loss_and_gradient(batch, &analytic, nullptr);

  GradientReport report;
  report.tolerance = tolerance;
  auto& theta = probe.parameters();
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + step;
    const double plus = probe.loss_and_gradient(batch, nullptr, nullptr);
    theta[i] = saved - step;
    const double minus = probe.loss_and_gradient(batch, nullptr, nullptr);
    theta[i] = saved;
    const double numeric = (plus - minus) / (2.0 * step);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-7);
    if (i == 0 || rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_parameter = static_cast<std::size_t>(i);
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  report.parameters_checked = static_cast<std::size_t>(theta.size());
  report.passed = report.max_relative_error < tolerance;
  return report;
}

GridSearchResult grid_search(ModelKind kind, const DatasetSplit& split, const std::vector<int>& hidden_sizes,
                             const std::vector<double>& learning_rates, const TrainConfig& base,
                             std::uint64_t init_seed) {
  if (hidden_sizes.empty() || learning_rates.empty()) throw ConfigError("grid must be non-empty");
  GridSearchResult out;
  bool first = true;
  for (int hidden : hidden_sizes) {
    for (double lr : learning_rates) {
      SequenceRegressor model(kind, default_architecture(kind, hidden), split.window, split.mode, split.horizon,
                              init_seed);
      TrainConfig cfg = base;
      cfg.learning_rate = lr;
      train(model, split, cfg);
      GridPoint p{hidden, lr, evaluate_rmse(model, split.test).overall};
      out.points.push_back(p);
      if (first || p.test_rmse_db < out.best.test_rmse_db) out.best = p;
      first = false;
    }
  }
  return out;
}

}  // namespace pcho
