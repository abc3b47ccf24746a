#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "pcho/baselines.hpp"
#include "pcho/checkpoint.hpp"
#include "pcho/error.hpp"
#include "pcho/evaluate.hpp"
#include "pcho/lstm.hpp"
#include "pcho/network.hpp"
#include "pcho/train.hpp"

using namespace pcho;
namespace fs = std::filesystem;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

NormStats identity_norm(FeatureMode mode) {
  NormStats n;
  n.mode = mode;
  n.mean.assign(static_cast<std::size_t>(feature_count(mode)), 0.0);
  n.stddev.assign(static_cast<std::size_t>(feature_count(mode)), 1.0);
  return n;
}

// Windows over an arbitrary scalar series, sig_quality only, identity normalization.
DatasetSplit series_split(const std::vector<double>& x, int window, int horizon) {
  DatasetSplit d;
  d.mode = FeatureMode::SinrOnly;
  d.window = window;
  d.horizon = horizon;
  d.norm = identity_norm(FeatureMode::SinrOnly);
  for (int k = window - 1; k + horizon < static_cast<int>(x.size()); ++k) {
    WindowSample s;
    s.k = k;
    s.features.resize(window, 1);
    for (int r = 0; r < window; ++r) s.features(r, 0) = x[static_cast<std::size_t>(k - window + 1 + r)];
    s.targets.resize(horizon);
    for (int t = 0; t < horizon; ++t) s.targets[t] = x[static_cast<std::size_t>(k + 1 + t)];
    d.train.push_back(std::move(s));
  }
  d.test.assign(d.train.begin(), d.train.begin() + std::min<std::size_t>(20, d.train.size()));
  return d;
}

DatasetSplit random_full_split(int n, int window, int horizon, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g;
  DatasetSplit d;
  d.mode = FeatureMode::Full;
  d.window = window;
  d.horizon = horizon;
  d.norm = identity_norm(FeatureMode::Full);
  for (int i = 0; i < n; ++i) {
    WindowSample s;
    s.k = i;
    s.features = Eigen::MatrixXd::NullaryExpr(window, 3, [&] { return g(rng); });
    s.targets = Eigen::VectorXd::NullaryExpr(horizon, [&] { return g(rng); });
    (i % 5 == 0 ? d.test : d.train).push_back(std::move(s));
  }
  return d;
}

WindowSample random_sample(int window, int features, int horizon, Rng& rng) {
  std::normal_distribution<double> g;
  WindowSample s;
  s.features = Eigen::MatrixXd::NullaryExpr(window, features, [&] { return g(rng); });
  s.targets = Eigen::VectorXd::NullaryExpr(horizon, [&] { return g(rng); });
  return s;
}

}  // namespace

TEST_CASE("lstm forward: zero parameters give zero hidden state") {
  LstmLayerParams p(3, 5);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(7, 3);
  const auto out = lstm_forward(p, x);
  CHECK(out.hidden.cwiseAbs().maxCoeff() == 0.0);
  CHECK(out.final_cell.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lstm forward: single step matches closed form") {
  Rng rng(4);
  const auto p = LstmLayerParams::initialized(2, 3, rng);
  Eigen::MatrixXd x(1, 2);
  x << 0.4, -1.3;
  const auto out = lstm_forward(p, x);
  for (int j = 0; j < 3; ++j) {
    auto pre = [&](int gate) {
      const int r = gate * 3 + j;
      return p.w_input(r, 0) * x(0, 0) + p.w_input(r, 1) * x(0, 1) + p.bias[r];
    };
    const double i = sigmoid(pre(0));
    const double g = std::tanh(pre(2));
    const double o = sigmoid(pre(3));
    const double c = i * g;  // previous cell is zero, forget gate irrelevant
    CHECK(out.final_cell[j] == doctest::Approx(c).epsilon(1e-14));
    CHECK(out.final_hidden[j] == doctest::Approx(o * std::tanh(c)).epsilon(1e-14));
  }
  CHECK(p.bias.segment(3, 3).isConstant(1.0));
  CHECK(p.bias.segment(0, 3).isZero());
}

TEST_CASE("lstm forward rejects width mismatch") {
  LstmLayerParams p(3, 2);
  CHECK_THROWS_AS(lstm_forward(p, Eigen::MatrixXd::Zero(4, 2)), ShapeError);
}

TEST_CASE("bidirectional symmetry on palindromes") {
  Rng rng(9);
  const auto p = LstmLayerParams::initialized(2, 4, rng);
  Eigen::MatrixXd x(5, 2);
  x << 1, 2, -1, 0.5, 3, 3, -1, 0.5, 1, 2;
  const auto bi = bilstm_forward(p, p, x);
  for (int t = 0; t < 5; ++t) {
    CHECK((bi.forward.hidden.row(t) - bi.backward.hidden.row(4 - t)).cwiseAbs().maxCoeff() < 1e-15);
  }
  CHECK(bi.concatenated.cols() == 8);
}

TEST_CASE("gradient check on random small recurrent models") {
  for (int trial = 0; trial < 10; ++trial) {
    Rng rng(derive_seed(77, {static_cast<std::uint64_t>(trial)}));
    const bool bi = trial % 2 == 0;
    Architecture a = bi ? Architecture{2, true, 4, {6, 5}, 0.2} : Architecture{1, false, 4, {}, 0.0};
    const auto mode = trial % 3 == 0 ? FeatureMode::SinrOnly : FeatureMode::Full;
    SequenceRegressor m(bi ? ModelKind::BiLstmBs : ModelKind::LiteLstmAp, a, 4, mode, 3,
                        derive_seed(5, {static_cast<std::uint64_t>(trial)}));
    const auto s = random_sample(4, feature_count(mode), 3, rng);
    const auto r = gradient_check(m, s, 1e-4);
    INFO(r.summary());
    CHECK(r.passed);
    CHECK(r.parameters_checked == m.parameter_count());
  }
}

TEST_CASE("gradient check on the affine head") {
  SequenceRegressor m(ModelKind::LinearHead, default_architecture(ModelKind::LinearHead), 5, FeatureMode::Full, 2, 3);
  Rng rng(1);
  const auto r = gradient_check(m, random_sample(5, 3, 2, rng), 1e-7);
  INFO(r.summary());
  CHECK(r.passed);
}

TEST_CASE("gradient check with zero tolerance always fails") {
  SequenceRegressor m(ModelKind::LiteLstmAp, Architecture{1, false, 3, {}, 0.0}, 3, FeatureMode::SinrOnly, 1, 3);
  Rng rng(2);
  const auto r = gradient_check(m, random_sample(3, 1, 1, rng), 0.0);
  CHECK_FALSE(r.passed);
  CHECK_FALSE(r.summary().empty());
}

TEST_CASE("architectures") {
  const auto bs = default_architecture(ModelKind::BiLstmBs);
  CHECK(bs.recurrent_layers == 2);
  CHECK(bs.bidirectional);
  CHECK(bs.dense_hidden.size() >= 2);
  CHECK(bs.dropout > 0.0);
  const auto ap = default_architecture(ModelKind::LiteLstmAp);
  CHECK(ap.recurrent_layers == 1);
  CHECK_FALSE(ap.bidirectional);
  CHECK(ap.dense_hidden.empty());
}

TEST_CASE("lite lstm overfits a clean sinusoid") {
  std::vector<double> x;
  for (int i = 0; i < 208; ++i) x.push_back(std::sin(0.3 * i));
  auto d = series_split(x, 8, 1);
  REQUIRE(d.train.size() == 200);
  SequenceRegressor m(ModelKind::LiteLstmAp, default_architecture(ModelKind::LiteLstmAp), 8, FeatureMode::SinrOnly, 1, 3);
  TrainConfig c;
  c.epochs = 200;
  c.patience = 0;
  c.learning_rate = 5e-3;
  train(m, d, c);
  const double rmse = evaluate_rmse(m, d.train).overall;
  MESSAGE("sine train RMSE " << rmse);
  CHECK(rmse < 0.05);
}

TEST_CASE("training contracts") {
  const auto d = random_full_split(120, 4, 2, 3);
  const Architecture a{1, false, 5, {6}, 0.3};
  SUBCASE("zero epochs") {
    SequenceRegressor m(ModelKind::LiteLstmAp, a, 4, FeatureMode::Full, 2, 8);
    const Eigen::VectorXd before = m.parameters();
    TrainConfig c;
    c.epochs = 0;
    const auto r = train(m, d, c);
    CHECK(r.train_loss.empty());
    CHECK(r.test_loss.empty());
    CHECK(m.parameters() == before);
  }
  SUBCASE("same seed, same parameters") {
    SequenceRegressor m1(ModelKind::LiteLstmAp, a, 4, FeatureMode::Full, 2, 8);
    SequenceRegressor m2(ModelKind::LiteLstmAp, a, 4, FeatureMode::Full, 2, 8);
    TrainConfig c;
    c.epochs = 5;
    train(m1, d, c);
    train(m2, d, c);
    CHECK(m1.parameters() == m2.parameters());
  }
  SUBCASE("dropout rate zero equals dropout disabled") {
    Architecture a0 = a;
    a0.dropout = 0.0;
    SequenceRegressor m1(ModelKind::LiteLstmAp, a0, 4, FeatureMode::Full, 2, 8);
    SequenceRegressor m2(ModelKind::LiteLstmAp, a0, 4, FeatureMode::Full, 2, 8);
    TrainConfig c;
    c.epochs = 4;
    train(m1, d, c);
    c.dropout_enabled = false;
    train(m2, d, c);
    CHECK(m1.parameters() == m2.parameters());
  }
  SUBCASE("loss history and early stop") {
    SequenceRegressor m(ModelKind::LiteLstmAp, a, 4, FeatureMode::Full, 2, 8);
    TrainConfig c;
    c.epochs = 200;
    c.patience = 3;
    const auto r = train(m, d, c);
    CHECK(r.train_loss.size() == r.test_loss.size());
    CHECK(r.train_loss.size() < 200);
    CHECK(r.best_epoch >= 0);
    CHECK(mean_squared_error(m, d.test) == doctest::Approx(r.test_loss[static_cast<std::size_t>(r.best_epoch)]));
  }
  SUBCASE("non-finite loss aborts") {
    auto bad = d;
    bad.train[3].targets[0] = std::nan("");
    SequenceRegressor m(ModelKind::LiteLstmAp, a, 4, FeatureMode::Full, 2, 8);
    TrainConfig c;
    c.epochs = 2;
    CHECK_THROWS_AS(train(m, bad, c), TrainingDiverged);
  }
  SUBCASE("horizon mismatch") {
    SequenceRegressor m(ModelKind::LiteLstmAp, a, 4, FeatureMode::Full, 3, 8);
    CHECK_THROWS(train(m, d, TrainConfig{}));
  }
}

TEST_CASE("inference is deterministic") {
  const auto d = random_full_split(60, 4, 5, 4);
  SequenceRegressor m(ModelKind::BiLstmBs, Architecture{2, true, 3, {4, 4}, 0.5}, 4, FeatureMode::Full, 5, 2);
  CHECK_THROWS_AS(predict_direct(m, d.test[0].features), ConfigError);
  TrainConfig c;
  c.epochs = 2;
  train(m, d, c);
  const auto a = predict_direct(m, d.test[0].features);
  const auto b = predict_direct(m, d.test[0].features);
  CHECK(a.values_db.size() == 5);
  CHECK(a.values_db == b.values_db);
  const Eigen::MatrixXd batch = m.predict_batch(d.test);
  for (std::size_t j = 0; j < d.test.size(); ++j) {
    const Eigen::VectorXd one = m.predict_normalized(d.test[j].features);
    CHECK((batch.col(static_cast<Eigen::Index>(j)) - one).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("recursive forecasting") {
  std::vector<double> x;
  for (int i = 0; i < 60; ++i) x.push_back(std::cos(0.2 * i));
  const auto d = series_split(x, 5, 4);
  SUBCASE("perfect persistence model on a constant series") {
    SequenceRegressor m(ModelKind::LinearHead, default_architecture(ModelKind::LinearHead), 5, FeatureMode::SinrOnly, 1, 1);
    m.parameters().setZero();
    m.parameters()[4] = 1.0;  // output = newest window value
    m.set_norm(identity_norm(FeatureMode::SinrOnly));
    m.mark_trained();
    const auto r = predict_recursive(m, Eigen::MatrixXd::Constant(5, 1, 2.5), 6);
    REQUIRE(r.values_db.size() == 6);
    for (double v : r.values_db) CHECK(v == 2.5);
  }
  SUBCASE("tau = 1 equals the direct forecast") {
    SequenceRegressor m(ModelKind::LiteLstmAp, Architecture{1, false, 4, {}, 0.0}, 5, FeatureMode::SinrOnly, 1, 6);
    TrainConfig c;
    c.epochs = 3;
    train(m, d, c);
    for (const auto& s : d.test) {
      CHECK(predict_recursive(m, s.features, 1).values_db[0] == predict_direct(m, s.features).values_db[0]);
    }
    const auto rec = evaluate_recursive_rmse(m, d.test, 4);
    CHECK(std::abs(rec.per_tau[0] - evaluate_rmse(m, d.test).per_tau[0]) < 1e-12);
  }
  SUBCASE("full-feature models are rejected") {
    const auto f = random_full_split(30, 5, 1, 1);
    SequenceRegressor m(ModelKind::LiteLstmAp, Architecture{1, false, 2, {}, 0.0}, 5, FeatureMode::Full, 1, 6);
    TrainConfig c;
    c.epochs = 1;
    train(m, f, c);
    CHECK_THROWS_AS(predict_recursive(m, f.test[0].features, 2), ConfigError);
  }
}

namespace {

// Reports the newest sig_quality value as every horizon: exact when targets repeat it.
struct Persistence final : Predictor {
  NormStats n = identity_norm(FeatureMode::SinrOnly);
  int h = 1;
  double constant = std::nan("");
  ModelKind kind() const override { return ModelKind::LinearHead; }
  int window() const override { return 3; }
  FeatureMode feature_mode() const override { return FeatureMode::SinrOnly; }
  int output_dim() const override { return h; }
  bool trained() const override { return true; }
  const NormStats& norm() const override { return n; }
  Eigen::VectorXd predict_normalized(const Eigen::MatrixXd& w) const override {
    return Eigen::VectorXd::Constant(h, std::isnan(constant) ? w(w.rows() - 1, 0) : constant);
  }
};

}  // namespace

TEST_CASE("rmse identities") {
  Rng rng(12);
  std::normal_distribution<double> g(3.0, 2.0);
  std::vector<WindowSample> test;
  for (int i = 0; i < 500; ++i) {
    WindowSample s;
    s.features = Eigen::MatrixXd::Constant(3, 1, g(rng));
    s.targets = Eigen::VectorXd::Constant(2, s.features(2, 0));
    test.push_back(s);
  }
  Persistence p;
  p.h = 2;
  const auto perfect = evaluate_rmse(p, test);
  CHECK(perfect.overall == 0.0);
  CHECK(perfect.per_tau.size() == 2);
  double mean = 0.0;
  for (const auto& s : test) mean += s.targets[0];
  mean /= static_cast<double>(test.size());
  double var = 0.0;
  for (const auto& s : test) var += (s.targets[0] - mean) * (s.targets[0] - mean);
  const double sd = std::sqrt(var / static_cast<double>(test.size()));
  p.constant = mean;
  CHECK(evaluate_rmse(p, test).overall == doctest::Approx(sd).epsilon(1e-12));
}

TEST_CASE("AR identifies an exact AR(2) process") {
  std::vector<std::vector<double>> series;
  Rng rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int s = 0; s < 20; ++s) {
    std::vector<double> x{u(rng), u(rng)};
    for (int t = 2; t < 60; ++t) x.push_back(0.4 + 1.2 * x[static_cast<std::size_t>(t - 1)] - 0.5 * x[static_cast<std::size_t>(t - 2)]);
    series.push_back(std::move(x));
  }
  const auto m = fit_ar_baseline(series, 2, 0);
  CHECK(std::abs(m.coefficients()[0] - 1.2) < 1e-3);
  CHECK(std::abs(m.coefficients()[1] + 0.5) < 1e-3);
  CHECK(std::abs(m.intercept() - 0.4) < 1e-3);
  CHECK_FALSE(m.used_ridge());
  // One-step forecast continues the recursion.
  const auto& last = series[0];
  const auto f = m.forecast(last, 2);
  const double n1 = 0.4 + 1.2 * last.back() - 0.5 * last[last.size() - 2];
  CHECK(f[0] == doctest::Approx(n1).epsilon(1e-6));
  CHECK(f[1] == doctest::Approx(0.4 + 1.2 * n1 - 0.5 * last.back()).epsilon(1e-6));
}

TEST_CASE("AR edge cases") {
  SUBCASE("constant series with differencing forecasts the constant") {
    const std::vector<std::vector<double>> s{std::vector<double>(40, -3.25)};
    const auto m = fit_ar_baseline(s, 3, 1);
    CHECK(m.used_ridge());
    for (double v : m.forecast(s[0], 5)) CHECK(v == doctest::Approx(-3.25).epsilon(1e-9));
  }
  SUBCASE("white noise has no AR(1) structure") {
    Rng rng(8);
    std::normal_distribution<double> g;
    std::vector<double> x;
    for (int i = 0; i < 10000; ++i) x.push_back(g(rng));
    const auto m = fit_ar_baseline(std::vector<std::vector<double>>{x}, 1, 0);
    CHECK(std::abs(m.coefficients()[0]) < 0.1);
  }
  SUBCASE("bad arguments") {
    const std::vector<std::vector<double>> s{{1, 2, 3, 4}};
    CHECK_THROWS(fit_ar_baseline(s, 0, 0));
    CHECK_THROWS(fit_ar_baseline(s, 1, 2));
    CHECK_THROWS(fit_ar_baseline(s, 10, 0));
  }
}

TEST_CASE("AR on a dataset split") {
  std::vector<double> x;
  for (int i = 0; i < 80; ++i) x.push_back(0.05 * i * i - 2.0 * i);
  const auto d = series_split(x, 6, 2);
  const auto m = fit_ar_baseline(d, 0, 1);
  CHECK(m.order() == 5);
  CHECK(m.output_dim() == 2);
  // A quadratic has constant second differences, which AR(p) on the first difference captures.
  CHECK(evaluate_rmse(m, d.test).overall < 1e-6);
}

TEST_CASE("boosted trees") {
  SUBCASE("no trees predicts the training mean") {
    const auto d = random_full_split(50, 3, 2, 5);
    GbtParams p;
    p.n_trees = 0;
    const auto m = fit_gbt_baseline(d, p);
    double mean = 0.0;
    for (const auto& s : d.train) mean += s.targets[1];
    mean /= static_cast<double>(d.train.size());
    for (const auto& s : d.test) CHECK(m.predict_normalized(s.features)[1] == doctest::Approx(mean).epsilon(1e-12));
  }
  SUBCASE("one unlimited tree memorizes unique samples") {
    auto d = random_full_split(12, 2, 1, 6);
    REQUIRE(d.train.size() == 9);
    GbtParams p;
    p.n_trees = 1;
    p.max_depth = -1;
    p.learning_rate = 1.0;
    const auto m = fit_gbt_baseline(d, p);
    CHECK(evaluate_rmse(m, d.train).overall < 1e-12);
    d.train.emplace_back();
    CHECK_THROWS_AS(fit_gbt_baseline(d, p), ShapeError);
  }
  SUBCASE("stumps fit a step") {
    DatasetSplit d;
    d.mode = FeatureMode::SinrOnly;
    d.window = 1;
    d.horizon = 1;
    d.norm = identity_norm(FeatureMode::SinrOnly);
    for (int i = 0; i < 100; ++i) {
      WindowSample s;
      s.features = Eigen::MatrixXd::Constant(1, 1, i / 100.0);
      s.targets = Eigen::VectorXd::Constant(1, i < 50 ? 0.0 : 4.0);
      d.train.push_back(s);
    }
    GbtParams p;
    p.n_trees = 50;
    p.max_depth = 1;
    p.learning_rate = 0.1;
    const auto m = fit_gbt_baseline(d, p);
    CHECK(evaluate_rmse(m, d.train).overall < 0.1 * 4.0);
  }
  SUBCASE("deterministic per seed") {
    const auto d = random_full_split(200, 3, 1, 7);
    GbtParams p;
    p.n_trees = 20;
    p.subsample = 0.6;
    p.seed = 11;
    const auto a = fit_gbt_baseline(d, p);
    const auto b = fit_gbt_baseline(d, p);
    p.seed = 12;
    const auto c = fit_gbt_baseline(d, p);
    const Eigen::MatrixXd pa = a.predict_batch(d.test);
    CHECK(pa == b.predict_batch(d.test));
    CHECK_FALSE(pa == c.predict_batch(d.test));
  }
}

TEST_CASE("checkpoints reproduce the stored RMSE") {
  const auto d = random_full_split(80, 4, 3, 9);
  const auto dir = fs::temp_directory_path() / "pcho_ckpt";
  fs::create_directories(dir);
  std::vector<std::unique_ptr<Predictor>> models;
  {
    auto m = std::make_unique<SequenceRegressor>(ModelKind::BiLstmBs, Architecture{2, true, 3, {4, 3}, 0.2}, 4,
                                                 FeatureMode::Full, 3, 1);
    TrainConfig c;
    c.epochs = 2;
    train(*m, d, c);
    models.push_back(std::move(m));
  }
  models.push_back(std::make_unique<ArModel>(fit_ar_baseline(d, 2, 1)));
  {
    GbtParams p;
    p.n_trees = 5;
    models.push_back(std::make_unique<GbtModel>(fit_gbt_baseline(d, p)));
  }
  for (const auto& m : models) {
    const auto rmse = evaluate_rmse(*m, d.test);
    TrainingManifest man;
    man.seed = 0xfeedfacecafebeefULL;
    man.data_hash = dataset_hash(d);
    man.test_rmse_db = rmse.per_tau;
    man.test_rmse_overall_db = rmse.overall;
    const auto path = dir / ("m_" + to_string(m->kind()) + ".json");
    save_checkpoint(*m, man, path);
    const auto loaded = load_checkpoint(path);
    CHECK(loaded.model->kind() == m->kind());
    CHECK(loaded.manifest.seed == man.seed);
    CHECK(loaded.manifest.data_hash == man.data_hash);
    const auto again = evaluate_rmse(*loaded.model, d.test);
    for (std::size_t t = 0; t < again.per_tau.size(); ++t) {
      CHECK(std::abs(again.per_tau[t] - loaded.manifest.test_rmse_db[t]) <= 1e-9);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("grid search picks the lowest test RMSE") {
  const auto d = random_full_split(60, 3, 1, 10);
  TrainConfig c;
  c.epochs = 2;
  const auto g = grid_search(ModelKind::LiteLstmAp, d, {2, 4}, {1e-2, 1e-3}, c, 5);
  REQUIRE(g.points.size() == 4);
  for (const auto& p : g.points) CHECK(g.best.test_rmse_db <= p.test_rmse_db);
}
