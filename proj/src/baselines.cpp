#include "pcho/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "pcho/error.hpp"
#include "pcho/rng.hpp"

namespace pcho {

namespace {

std::vector<double> difference(std::span<const double> x) {
  std::vector<double> out;
  if (x.size() < 2) return out;
  out.reserve(x.size() - 1);
  for (std::size_t i = 1; i < x.size(); ++i) out.push_back(x[i] - x[i - 1]);
  return out;
}

std::vector<double> flatten(const Eigen::MatrixXd& m) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
  return v;
}

}  // namespace

// ---------------------------------------------------------------- AR

ArModel ArModel::from_parts(int differencing, double intercept, std::vector<double> coefficients, bool used_ridge) {
  if (differencing < 0 || differencing > 1) throw ConfigError("AR differencing must be 0 or 1");
  if (coefficients.empty()) throw ConfigError("AR order must be >= 1");
  ArModel m;
  m.differencing_ = differencing;
  m.intercept_ = intercept;
  m.coefficients_ = std::move(coefficients);
  m.used_ridge_ = used_ridge;
  m.trained_ = true;
  return m;
}

void ArModel::attach(const NormStats& norm, int window, FeatureMode mode, int horizon) {
  if (window < order() + differencing_) {
    throw ConfigError("window " + std::to_string(window) + " too short for AR(" + std::to_string(order()) +
                      ") with d=" + std::to_string(differencing_));
  }
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  norm_ = norm;
  window_ = window;
  mode_ = mode;
  horizon_ = horizon;
}

std::vector<double> ArModel::forecast(std::span<const double> history, int steps) const {
  const int p = order();
  if (static_cast<int>(history.size()) < p + differencing_) {
    throw ConfigError("AR forecast needs at least " + std::to_string(p + differencing_) + " past values");
  }
  std::vector<double> y = differencing_ == 1 ? difference(history) : std::vector<double>(history.begin(), history.end());
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(steps));
  double level = history.back();
  for (int s = 0; s < steps; ++s) {
    double next = intercept_;
    const std::size_t n = y.size();
    for (int i = 0; i < p; ++i) next += coefficients_[static_cast<std::size_t>(i)] * y[n - 1 - static_cast<std::size_t>(i)];
    y.push_back(next);
    if (differencing_ == 1) {
      level += next;
      out.push_back(level);
    } else {
      out.push_back(next);
    }
  }
  return out;
}

Eigen::VectorXd ArModel::predict_normalized(const Eigen::MatrixXd& window) const {
  if (!trained_ || window_ == 0) throw ConfigError("AR model is not attached to a dataset");
  const int q = quality_column(mode_);
  std::vector<double> hist(static_cast<std::size_t>(window.rows()));
  for (Eigen::Index r = 0; r < window.rows(); ++r) hist[static_cast<std::size_t>(r)] = norm_.denormalize_quality(window(r, q));
  const std::vector<double> f = forecast(hist, horizon_);
  Eigen::VectorXd z(horizon_);
  for (int i = 0; i < horizon_; ++i) z[i] = norm_.normalize_quality(f[static_cast<std::size_t>(i)]);
  return z;
}

ArModel fit_ar_baseline(std::span<const std::vector<double>> series, int order, int differencing) {
  if (order < 1) throw ConfigError("AR order must be >= 1");
  if (differencing < 0 || differencing > 1) throw ConfigError("AR differencing must be 0 or 1");
  const int p = order;
  const int dim = p + 1;
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd row(dim);
  std::size_t rows = 0;
  for (const auto& s : series) {
    const std::vector<double> y = differencing == 1 ? difference(s) : s;
    for (std::size_t t = static_cast<std::size_t>(p); t < y.size(); ++t) {
      row[0] = 1.0;
      for (int i = 0; i < p; ++i) row[i + 1] = y[t - 1 - static_cast<std::size_t>(i)];
      xtx.noalias() += row * row.transpose();
      xty.noalias() += row * y[t];
      ++rows;
    }
  }
  if (rows == 0) throw ConfigError("no series long enough for AR(" + std::to_string(p) + ")");

  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
  bool ridge = ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-13) ||
               !(pivots.minCoeff() > 1e-13 * pivots.maxCoeff());
  Eigen::VectorXd beta;
  if (!ridge) {
    beta = ldlt.solve(xty);
    ridge = !beta.allFinite();
  }
  if (ridge) {
    std::cerr << "warning: AR normal equations are singular; using ridge fallback (lambda = 1e-8)\n";
    const Eigen::MatrixXd reg = xtx + 1e-8 * Eigen::MatrixXd::Identity(dim, dim);
    beta = reg.ldlt().solve(xty);
  }
  std::vector<double> phi(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) phi[static_cast<std::size_t>(i)] = beta[i + 1];
  return ArModel::from_parts(differencing, beta[0], std::move(phi), ridge);
}

ArModel fit_ar_baseline(const DatasetSplit& split, int order, int differencing) {
  if (split.train.empty()) throw ConfigError("AR baseline needs training samples");
  if (order <= 0) order = split.window - differencing;
  std::vector<std::vector<double>> series;
  series.reserve(split.train.size());
  for (const auto& s : split.train) {
    std::vector<double> x = raw_quality_window(s, split.norm);
    for (Eigen::Index i = 0; i < s.targets.size(); ++i) x.push_back(split.norm.denormalize_quality(s.targets[i]));
    series.push_back(std::move(x));
  }
  ArModel m = fit_ar_baseline(series, order, differencing);
  m.attach(split.norm, split.window, split.mode, split.horizon);
  return m;
}

// ---------------------------------------------------------------- trees

double RegressionTree::predict(std::span<const double> x) const {
  if (nodes.empty()) return 0.0;
  int i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const Node& n = nodes[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

namespace {

struct TreeBuilder {
  const std::vector<std::vector<double>>& rows;
  std::span<const double> y;
  int max_depth;
  int min_leaf;
  std::size_t n_features;
  RegressionTree tree;
  std::vector<char> goes_left;

  // sorted[f] lists the node's samples ordered by feature f.
  int build(std::vector<std::vector<std::size_t>> sorted, int depth) {
    const auto& idx = sorted[0];
    const std::size_t n = idx.size();
    double sum = 0.0;
    for (std::size_t i : idx) sum += y[i];
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes.back().value = sum / static_cast<double>(n);

    const bool depth_ok = max_depth < 0 || depth < max_depth;
    if (!depth_ok || n < 2 * static_cast<std::size_t>(min_leaf)) return id;

    const double total_sq = sum * sum / static_cast<double>(n);
    double best_gain = 0.0;
    int best_f = -1;
    double best_thr = 0.0;
    for (std::size_t f = 0; f < n_features; ++f) {
      const auto& order = sorted[f];
      double left = 0.0;
      for (std::size_t j = 0; j + 1 < n; ++j) {
        left += y[order[j]];
        const std::size_t nl = j + 1;
        const std::size_t nr = n - nl;
        if (nl < static_cast<std::size_t>(min_leaf) || nr < static_cast<std::size_t>(min_leaf)) continue;
        const double a = rows[order[j]][f];
        const double b = rows[order[j + 1]][f];
        if (!(a < b)) continue;
        const double right = sum - left;
        const double gain = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr) - total_sq;
        if (gain > best_gain * (1.0 + 1e-12) + 1e-300) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_thr = 0.5 * (a + b);
          if (best_thr >= b) best_thr = a;
        }
      }
    }
    if (best_f < 0) return id;

    for (std::size_t i : idx) goes_left[i] = rows[i][static_cast<std::size_t>(best_f)] <= best_thr ? 1 : 0;
    std::vector<std::vector<std::size_t>> ls(n_features), rs(n_features);
    for (std::size_t f = 0; f < n_features; ++f) {
      ls[f].reserve(n);
      rs[f].reserve(n);
      for (std::size_t i : sorted[f]) (goes_left[i] ? ls[f] : rs[f]).push_back(i);
    }
    sorted.clear();
    sorted.shrink_to_fit();
    const int l = build(std::move(ls), depth + 1);
    const int r = build(std::move(rs), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best_f;
    node.threshold = best_thr;
    node.left = l;
    node.right = r;
    return id;
  }
};

}  // namespace

RegressionTree fit_regression_tree(const std::vector<std::vector<double>>& rows, std::span<const double> targets,
                                   std::span<const std::size_t> subset, int max_depth, int min_samples_leaf) {
  if (subset.empty()) throw ConfigError("regression tree needs at least one sample");
  const std::size_t nf = rows[subset[0]].size();
  TreeBuilder b{rows, targets, max_depth, std::max(1, min_samples_leaf), nf, {}, std::vector<char>(rows.size(), 0)};
  std::vector<std::vector<std::size_t>> sorted(std::max<std::size_t>(nf, 1));
  for (std::size_t f = 0; f < sorted.size(); ++f) {
    sorted[f].assign(subset.begin(), subset.end());
    if (f < nf) {
      std::stable_sort(sorted[f].begin(), sorted[f].end(),
                       [&](std::size_t a, std::size_t c) { return rows[a][f] < rows[c][f]; });
    }
  }
  b.build(std::move(sorted), 0);
  return std::move(b.tree);
}

GbtModel GbtModel::from_parts(GbtParams params, int window, FeatureMode mode, NormStats norm, std::vector<double> base,
                              std::vector<std::vector<RegressionTree>> trees) {
  if (base.size() != trees.size()) throw SchemaError("GBT base scores and ensembles disagree in length");
  GbtModel m;
  m.params_ = params;
  m.window_ = window;
  m.mode_ = mode;
  m.norm_ = std::move(norm);
  m.base_ = std::move(base);
  m.trees_ = std::move(trees);
  m.trained_ = true;
  return m;
}

Eigen::VectorXd GbtModel::predict_normalized(const Eigen::MatrixXd& window) const {
  const std::vector<double> x = flatten(window);
  Eigen::VectorXd out(static_cast<Eigen::Index>(base_.size()));
  for (std::size_t h = 0; h < base_.size(); ++h) {
    double v = base_[h];
    for (const auto& t : trees_[h]) v += params_.learning_rate * t.predict(x);
    out[static_cast<Eigen::Index>(h)] = v;
  }
  return out;
}

GbtModel fit_gbt_baseline(const DatasetSplit& split, const GbtParams& params) {
  if (split.train.empty()) throw ConfigError("GBT baseline needs training samples");
  if (params.n_trees < 0) throw ConfigError("n_trees must be >= 0");
  if (!(params.subsample > 0.0 && params.subsample <= 1.0)) throw ConfigError("subsample must be in (0, 1]");
  const std::size_t n = split.train.size();
  const int horizon = static_cast<int>(split.train[0].targets.size());
  std::vector<std::vector<double>> rows;
  rows.reserve(n);
  for (const auto& s : split.train) {
    if (s.features.size() != split.train[0].features.size() || s.targets.size() != horizon || horizon == 0) {
      throw ShapeError("GBT training samples disagree in window or target shape");
    }
    rows.push_back(flatten(s.features));
  }

  std::vector<double> base(static_cast<std::size_t>(horizon));
  std::vector<std::vector<RegressionTree>> ensembles(static_cast<std::size_t>(horizon));
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto n_sub = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(params.subsample * static_cast<double>(n))));

  for (int h = 0; h < horizon; ++h) {
    Rng rng = make_rng(params.seed, {0x676274ULL, static_cast<std::uint64_t>(h)});
    std::vector<double> y(n), pred(n), resid(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = split.train[i].targets[h];
      mean += y[i];
    }
    mean /= static_cast<double>(n);
    base[static_cast<std::size_t>(h)] = mean;
    std::fill(pred.begin(), pred.end(), mean);
    auto& trees = ensembles[static_cast<std::size_t>(h)];
    trees.reserve(static_cast<std::size_t>(params.n_trees));
    std::vector<std::size_t> subset = all;
    for (int m = 0; m < params.n_trees; ++m) {
      for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - pred[i];
      if (n_sub < n) {
        subset = all;
        std::shuffle(subset.begin(), subset.end(), rng);
        subset.resize(n_sub);
        std::sort(subset.begin(), subset.end());
      }
      RegressionTree t = fit_regression_tree(rows, resid, subset, params.max_depth, params.min_samples_leaf);
      for (std::size_t i = 0; i < n; ++i) pred[i] += params.learning_rate * t.predict(rows[i]);
      trees.push_back(std::move(t));
    }
  }
  return GbtModel::from_parts(params, split.window, split.mode, split.norm, std::move(base), std::move(ensembles));
}

}  // namespace pcho
