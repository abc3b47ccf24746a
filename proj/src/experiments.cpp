#include "pcho/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "pcho/csv.hpp"
#include "pcho/error.hpp"
#include "pcho/rng.hpp"

namespace pcho {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- config

void to_json(json& j, const GbtParams& g) {
  j = {{"n_trees", g.n_trees},         {"max_depth", g.max_depth}, {"learning_rate", g.learning_rate},
       {"min_samples_leaf", g.min_samples_leaf}, {"subsample", g.subsample}, {"seed", g.seed}};
}

void from_json(const json& j, GbtParams& g) {
  if (j.contains("n_trees")) j.at("n_trees").get_to(g.n_trees);
  if (j.contains("max_depth")) j.at("max_depth").get_to(g.max_depth);
  if (j.contains("learning_rate")) j.at("learning_rate").get_to(g.learning_rate);
  if (j.contains("min_samples_leaf")) j.at("min_samples_leaf").get_to(g.min_samples_leaf);
  if (j.contains("subsample")) j.at("subsample").get_to(g.subsample);
  if (j.contains("seed")) j.at("seed").get_to(g.seed);
}

void to_json(json& j, const ModelHyper& m) {
  j = {{"bs_hidden", m.bs_hidden}, {"ap_hidden", m.ap_hidden},         {"train", m.train},
       {"gbt", m.gbt},             {"ar_order", m.ar_order},           {"ar_differencing", m.ar_differencing}};
}

void from_json(const json& j, ModelHyper& m) {
  if (j.contains("bs_hidden")) j.at("bs_hidden").get_to(m.bs_hidden);
  if (j.contains("ap_hidden")) j.at("ap_hidden").get_to(m.ap_hidden);
  if (j.contains("train")) from_json(j.at("train"), m.train);
  if (j.contains("gbt")) from_json(j.at("gbt"), m.gbt);
  if (j.contains("ar_order")) j.at("ar_order").get_to(m.ar_order);
  if (j.contains("ar_differencing")) j.at("ar_differencing").get_to(m.ar_differencing);
}

#define PCHO_EXPERIMENT_FIELDS(X)                                                                              \
  X(experiment_id) X(seed) X(split_ratio) X(w_bs) X(w_ap) X(window_sweep_nt) X(window_sweep) X(traj_sweep)     \
  X(horizon_nt) X(horizon) X(recursive_taus) X(recursive_ratio_floor) X(baseline_nt) X(handover_nt)            \
  X(delta_sweep) X(hysteresis_n) X(timeline_delta) X(timeline_agreement_floor) X(admission_capacity)           \
  X(ping_pong_window) X(full)

void to_json(json& j, const ExperimentConfig& c) {
  j = json::object();
#define X(f) j[#f] = c.f;
  PCHO_EXPERIMENT_FIELDS(X)
#undef X
  j["radio"] = c.radio;
  j["layout"] = c.layout;
  j["trajectory"] = c.trajectory;
  j["model"] = c.model;
}

void from_json(const json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
#define X(f) \
  if (j.contains(#f)) j.at(#f).get_to(c.f);
  PCHO_EXPERIMENT_FIELDS(X)
#undef X
  if (j.contains("radio")) from_json(j.at("radio"), c.radio);
  if (j.contains("layout")) from_json(j.at("layout"), c.layout);
  if (j.contains("trajectory")) from_json(j.at("trajectory"), c.trajectory);
  if (j.contains("model")) from_json(j.at("model"), c.model);
}

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  c.model.bs_hidden = 16;
  c.model.ap_hidden = 16;
  c.model.train.epochs = 30;
  c.model.train.patience = 10;
  c.model.gbt.n_trees = 100;
  c.model.gbt.max_depth = 6;
  c.model.gbt.learning_rate = 0.3;
  return c;
}

ExperimentConfig ExperimentConfig::full_scale() {
  ExperimentConfig c = desk();
  c.full = true;
  c.model.bs_hidden = 32;
  c.model.ap_hidden = 16;
  c.model.train.epochs = 100;
  return c;
}

void ExperimentConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(!window_sweep.empty(), "window_sweep is empty");
  need(!traj_sweep.empty(), "traj_sweep is empty");
  need(!recursive_taus.empty(), "recursive_taus is empty");
  need(!baseline_nt.empty(), "baseline_nt is empty");
  need(!delta_sweep.empty(), "delta_sweep is empty");
  need(!hysteresis_n.empty(), "hysteresis_n is empty");
  for (int w : window_sweep) need(w >= 1 && w <= 15, "window sweep values must lie in [1, 15]");
  need(w_bs >= 1 && w_ap >= 1, "windows must be >= 1");
  need(horizon >= 1 && horizon <= 5, "horizon must lie in [1, 5]");
  for (int t : recursive_taus) need(t >= 1 && t <= horizon, "recursive taus must lie in [1, horizon]");
  for (int n : hysteresis_n) need(n >= 1 && n <= horizon, "hysteresis N must lie in [1, horizon]");
  for (double d : delta_sweep) need(d >= 0.0, "delta sweep values must be >= 0");
  need(split_ratio > 0.0 && split_ratio < 1.0, "split_ratio must lie in (0, 1)");
  need(window_sweep_nt >= 1 && horizon_nt >= 1 && handover_nt >= 1, "trajectory counts must be >= 1");
  for (int n : traj_sweep) need(n >= 1, "traj_sweep values must be >= 1");
  for (int n : baseline_nt) need(n >= 1, "baseline_nt values must be >= 1");
  need(model.bs_hidden >= 1 && model.ap_hidden >= 1, "hidden sizes must be >= 1");
  need(admission_capacity >= 1, "admission capacity must be >= 1");
}

int ExperimentConfig::campaign_size() const {
  int n = std::max({window_sweep_nt, horizon_nt, handover_nt + 1});
  for (int v : traj_sweep) n = std::max(n, v);
  for (int v : baseline_nt) n = std::max(n, v);
  return n;
}

std::uint64_t ExperimentConfig::hash() const {
  const json j = *this;
  return fnv1a(j.dump());
}

ExperimentConfig load_experiment_config(const fs::path& path, bool full) {
  ExperimentConfig c = full ? ExperimentConfig::full_scale() : ExperimentConfig::desk();
  if (!path.empty()) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path.string());
    json j;
    try {
      is >> j;
      from_json(j, c);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("malformed config: ") + e.what());
    }
    if (full) c.full = true;
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------- context

ExperimentContext::ExperimentContext(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  topo_ = build_default_topology(cfg_.seed, cfg_.radio, cfg_.layout);
  trajectories_ = generate_trajectory_set(topo_, cfg_.campaign_size(), cfg_.trajectory, cfg_.seed);
  traces_ = simulate_campaign(topo_, trajectories_, cfg_.radio, cfg_.seed);
}

std::span<const Trace> ExperimentContext::first_traces(int n) const {
  if (n < 1 || n > static_cast<int>(traces_.size())) {
    throw ConfigError("campaign holds " + std::to_string(traces_.size()) + " traces, " + std::to_string(n) +
                      " requested");
  }
  return std::span<const Trace>(traces_).first(static_cast<std::size_t>(n));
}

DatasetSplit ExperimentContext::dataset(NodeKind kind, FeatureMode mode, int window, int horizon, int n_traj) const {
  return build_rat_dataset(first_traces(n_traj), kind, window, horizon, cfg_.split_ratio,
                           derive_seed(cfg_.seed, {0x73706c6974ULL}), mode);
}

namespace {

std::string model_key(const std::string& family, NodeKind kind, FeatureMode mode, int window, int horizon, int n_traj,
                      int output_dim) {
  std::ostringstream k;
  k << family << '/' << to_string(kind) << '/' << (mode == FeatureMode::Full ? "full" : "sinr") << "/W" << window
    << "/H" << horizon << "/N" << n_traj << "/O" << output_dim;
  return k.str();
}

}  // namespace

const TrainedModel& ExperimentContext::lstm(NodeKind kind, FeatureMode mode, int window, int horizon, int n_traj,
                                            int output_dim) {
  if (output_dim <= 0) output_dim = horizon;
  const std::string key = model_key("lstm", kind, mode, window, horizon, n_traj, output_dim);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;

  TrainedModel tm;
  tm.split = dataset(kind, mode, window, horizon, n_traj);
  const ModelKind mk = kind == NodeKind::CellularBS ? ModelKind::BiLstmBs : ModelKind::LiteLstmAp;
  const int hidden = kind == NodeKind::CellularBS ? cfg_.model.bs_hidden : cfg_.model.ap_hidden;
  const std::uint64_t key_hash = fnv1a(key);
  auto net = std::make_shared<SequenceRegressor>(mk, default_architecture(mk, hidden), window, mode, output_dim,
                                                 derive_seed(cfg_.seed, {0x696e6974ULL, key_hash}));
  TrainConfig tc = cfg_.model.train;
  tc.seed = derive_seed(cfg_.seed, {0x747261696eULL, key_hash});
  const TrainResult r = train(*net, tm.split, tc);
  tm.epochs_run = static_cast<int>(r.train_loss.size());
  tm.best_epoch = r.best_epoch;
  tm.test = evaluate_rmse(*net, tm.split.test);
  tm.model = std::move(net);
  return cache_.emplace(key, std::move(tm)).first->second;
}

const TrainedModel& ExperimentContext::ar(NodeKind kind, int window, int n_traj) {
  const std::string key = model_key("ar", kind, FeatureMode::Full, window, 1, n_traj, 1);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  TrainedModel tm;
  tm.split = dataset(kind, FeatureMode::Full, window, 1, n_traj);
  auto m = std::make_shared<ArModel>(fit_ar_baseline(tm.split, cfg_.model.ar_order, cfg_.model.ar_differencing));
  tm.test = evaluate_rmse(*m, tm.split.test);
  tm.model = std::move(m);
  return cache_.emplace(key, std::move(tm)).first->second;
}

const TrainedModel& ExperimentContext::gbt(NodeKind kind, int window, int n_traj) {
  const std::string key = model_key("gbt", kind, FeatureMode::Full, window, 1, n_traj, 1);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  TrainedModel tm;
  tm.split = dataset(kind, FeatureMode::Full, window, 1, n_traj);
  GbtParams gp = cfg_.model.gbt;
  gp.seed = derive_seed(cfg_.seed, {0x676274ULL, fnv1a(key)});
  auto m = std::make_shared<GbtModel>(fit_gbt_baseline(tm.split, gp));
  tm.test = evaluate_rmse(*m, tm.split.test);
  tm.model = std::move(m);
  return cache_.emplace(key, std::move(tm)).first->second;
}

// ---------------------------------------------------------------- helpers

bool ExperimentOutput::all_passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.passed; });
}

namespace {

constexpr NodeKind kKinds[] = {NodeKind::CellularBS, NodeKind::WifiAP};

std::ofstream open_csv(const fs::path& path, ExperimentOutput& out) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  out.files.push_back(path);
  return os;
}

void check(ExperimentOutput& out, const std::string& exp, const std::string& name, bool ok, const std::string& detail) {
  out.assertions.push_back({exp, name, ok, detail});
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << v;
  return os.str();
}

template <typename Map>
typename Map::key_type argmin(const Map& m) {
  auto best = m.begin();
  for (auto it = m.begin(); it != m.end(); ++it) {
    if (it->second < best->second) best = it;
  }
  return best->first;
}

std::string kind_label(NodeKind k) { return k == NodeKind::CellularBS ? "BS" : "AP"; }

bool same_decisions(const std::vector<SteeringDecision>& a, const std::vector<SteeringDecision>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    if (x.step != y.step || x.serving != y.serving || x.target != y.target || x.action != y.action ||
        x.serving_predicted_db != y.serving_predicted_db || x.candidates.size() != y.candidates.size()) {
      return false;
    }
    for (std::size_t c = 0; c < x.candidates.size(); ++c) {
      const auto& p = x.candidates[c];
      const auto& q = y.candidates[c];
      if (p.node != q.node || p.predicted_db != q.predicted_db || p.delta_db != q.delta_db ||
          p.triggered != q.triggered) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------- experiments

ExperimentOutput exp_window_sweep(ExperimentContext& ctx, const fs::path& out_dir) {
  const auto& cfg = ctx.config();
  ExperimentOutput out;
  auto os = open_csv(out_dir / "window_sweep.csv", out);
  os << "rat,window,rmse_db\n";
  std::map<NodeKind, std::map<int, double>> table;
  for (NodeKind kind : kKinds) {
    for (int w : cfg.window_sweep) {
      const auto& tm = ctx.lstm(kind, FeatureMode::Full, w, 1, cfg.window_sweep_nt);
      table[kind][w] = tm.test.overall;
      os << kind_label(kind) << ',' << w << ',' << csv::num(tm.test.overall) << '\n';
    }
  }
  const auto& bs = table[NodeKind::CellularBS];
  const auto& ap = table[NodeKind::WifiAP];
  const int bs_best = argmin(bs);
  const int ap_best = argmin(ap);
  out.notes.push_back("window_argmin_bs=" + std::to_string(bs_best));
  out.notes.push_back("window_argmin_ap=" + std::to_string(ap_best));
  if (bs.count(9) && bs.size() > 1) {
    check(out, "exp-window", "bs_argmin_w9", bs_best == 9, "argmin W=" + std::to_string(bs_best));
  }
  if (ap.count(7) && ap.size() > 1) {
    check(out, "exp-window", "ap_argmin_w7", ap_best == 7, "argmin W=" + std::to_string(ap_best));
  }
  {
    bool mono = true;
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& [w, r] : bs) {
      if (w > bs_best) break;
      mono = mono && r <= prev;
      prev = r;
    }
    check(out, "exp-window", "bs_monotone_to_argmin", mono, "argmin W=" + std::to_string(bs_best));
  }
  {
    const auto last = std::prev(ap.end());
    const bool rises = last->first > ap_best && last->second > ap.at(ap_best);
    check(out, "exp-window", "ap_right_flank_rises", rises,
          "rmse(" + std::to_string(last->first) + ")=" + fmt(last->second) + " rmse(" + std::to_string(ap_best) +
              ")=" + fmt(ap.at(ap_best)));
  }
  if (bs_best != 9 || ap_best != 7) out.notes.push_back("window_argmin_flag=differs_from_expected(9,7)");
  return out;
}

ExperimentOutput exp_traj_sweep(ExperimentContext& ctx, const fs::path& out_dir) {
  const auto& cfg = ctx.config();
  ExperimentOutput out;
  auto os = open_csv(out_dir / "traj_sweep.csv", out);
  os << "rat,n_traj,rmse_db\n";
  std::map<NodeKind, std::map<int, double>> table;
  for (NodeKind kind : kKinds) {
    for (int n : cfg.traj_sweep) {
      const auto& tm = ctx.lstm(kind, FeatureMode::Full, ctx.window_for(kind), 1, n);
      table[kind][n] = tm.test.overall;
      os << kind_label(kind) << ',' << n << ',' << csv::num(tm.test.overall) << '\n';
    }
  }
  const auto& bs = table[NodeKind::CellularBS];
  const auto& ap = table[NodeKind::WifiAP];
  if (bs.count(35) && bs.count(15)) {
    check(out, "exp-traj", "bs_rmse35_gt_rmse15", bs.at(35) > bs.at(15),
          "rmse(35)=" + fmt(bs.at(35)) + " rmse(15)=" + fmt(bs.at(15)));
  }
  if (ap.count(15) && ap.count(5)) {
    check(out, "exp-traj", "ap_rmse15_lt_rmse5", ap.at(15) < ap.at(5),
          "rmse(15)=" + fmt(ap.at(15)) + " rmse(5)=" + fmt(ap.at(5)));
  }
  return out;
}

ExperimentOutput exp_horizon_sweep(ExperimentContext& ctx, const fs::path& out_dir) {
  const auto& cfg = ctx.config();
  ExperimentOutput out;
  auto os = open_csv(out_dir / "horizon_sweep.csv", out);
  os << "rat,tau,mode,rmse_db\n";
  for (NodeKind kind : kKinds) {
    const std::string rat = kind_label(kind);
    const int w = ctx.window_for(kind);
    const auto& direct = ctx.lstm(kind, FeatureMode::Full, w, cfg.horizon, cfg.horizon_nt);
    const auto& one = ctx.lstm(kind, FeatureMode::SinrOnly, w, cfg.horizon, cfg.horizon_nt, 1);
    const RmseReport rec = evaluate_recursive_rmse(*one.model, one.split.test, cfg.horizon);
    for (int t = 0; t < cfg.horizon; ++t) {
      os << rat << ',' << t + 1 << ",direct," << csv::num(direct.test.per_tau[static_cast<std::size_t>(t)]) << '\n';
    }
    for (int t = 0; t < cfg.horizon; ++t) {
      os << rat << ',' << t + 1 << ",recursive," << csv::num(rec.per_tau[static_cast<std::size_t>(t)]) << '\n';
    }

    const double one_step = one.test.per_tau[0];
    check(out, "exp-horizon", rat + "_tau1_recursive_equals_direct", std::abs(rec.per_tau[0] - one_step) <= 1e-9,
          "recursive=" + fmt(rec.per_tau[0]) + " one-step=" + fmt(one_step));
    for (int tau : cfg.recursive_taus) {
      const double d = direct.test.per_tau[static_cast<std::size_t>(tau - 1)];
      const double r = rec.per_tau[static_cast<std::size_t>(tau - 1)];
      check(out, "exp-horizon", rat + "_direct_lt_recursive_tau" + std::to_string(tau), d < r,
            "direct=" + fmt(d) + " recursive=" + fmt(r));
    }
    if (kind == NodeKind::CellularBS && cfg.horizon >= 4) {
      const double ratio = rec.per_tau[3] / direct.test.per_tau[3];
      check(out, "exp-horizon", "BS_recursive_ratio_tau4", ratio > cfg.recursive_ratio_floor,
            "ratio=" + fmt(ratio) + " floor=" + fmt(cfg.recursive_ratio_floor));
    }
    int inversions = 0;
    bool small = true;
    for (int t = 1; t < cfg.horizon; ++t) {
      const double prev = direct.test.per_tau[static_cast<std::size_t>(t - 1)];
      const double cur = direct.test.per_tau[static_cast<std::size_t>(t)];
      if (cur < prev) {
        ++inversions;
        if (cur < 0.95 * prev) small = false;
      }
    }
    check(out, "exp-horizon", rat + "_direct_nondecreasing_trend", inversions <= 1 && small,
          std::to_string(inversions) + " inversion(s)");
  }
  return out;
}

ExperimentOutput exp_baselines(ExperimentContext& ctx, const fs::path& out_dir) {
  const auto& cfg = ctx.config();
  ExperimentOutput out;
  auto os = open_csv(out_dir / "baselines.csv", out);
  os << "rat,model,n_traj,rmse_db\n";
  // [kind][model][n]
  std::map<NodeKind, std::map<std::string, std::map<int, double>>> t;
  for (NodeKind kind : kKinds) {
    const int w = ctx.window_for(kind);
    for (int n : cfg.baseline_nt) {
      const double lstm = ctx.lstm(kind, FeatureMode::Full, w, 1, n).test.overall;
      const double ar = ctx.ar(kind, w, n).test.overall;
      const double gbt = ctx.gbt(kind, w, n).test.overall;
      t[kind]["lstm"][n] = lstm;
      t[kind]["ar"][n] = ar;
      t[kind]["gbt"][n] = gbt;
      for (const auto& [name, v] : {std::pair{"lstm", lstm}, std::pair{"ar", ar}, std::pair{"gbt", gbt}}) {
        os << kind_label(kind) << ',' << name << ',' << n << ',' << csv::num(v) << '\n';
      }
    }
  }
  const int hi = *std::max_element(cfg.baseline_nt.begin(), cfg.baseline_nt.end());
  const int lo = *std::min_element(cfg.baseline_nt.begin(), cfg.baseline_nt.end());
  for (NodeKind kind : kKinds) {
    const std::string rat = kind_label(kind);
    auto& m = t[kind];
    for (int n : cfg.baseline_nt) {
      const double ar = m["ar"][n];
      check(out, "exp-baselines", rat + "_ar_worst_n" + std::to_string(n), ar > m["lstm"][n] && ar > m["gbt"][n],
            "ar=" + fmt(ar) + " lstm=" + fmt(m["lstm"][n]) + " gbt=" + fmt(m["gbt"][n]));
    }
    check(out, "exp-baselines", rat + "_lstm_best_n" + std::to_string(hi),
          m["lstm"][hi] < m["ar"][hi] && m["lstm"][hi] < m["gbt"][hi],
          "lstm=" + fmt(m["lstm"][hi]) + " gbt=" + fmt(m["gbt"][hi]) + " ar=" + fmt(m["ar"][hi]));
    if (hi != lo) {
      for (const char* name : {"lstm", "ar", "gbt"}) {
        check(out, "exp-baselines", rat + "_" + name + "_rmse_rises_with_ntraj", m[name][hi] > m[name][lo],
              "rmse(" + std::to_string(hi) + ")=" + fmt(m[name][hi]) + " rmse(" + std::to_string(lo) +
                  ")=" + fmt(m[name][lo]));
      }
      if (kind == NodeKind::WifiAP) {
        check(out, "exp-baselines", "AP_gbt_lt_lstm_n" + std::to_string(lo), m["gbt"][lo] < m["lstm"][lo],
              "gbt=" + fmt(m["gbt"][lo]) + " lstm=" + fmt(m["lstm"][lo]));
      }
    }
  }
  return out;
}

ExperimentOutput exp_handover(ExperimentContext& ctx, const fs::path& out_dir) {
  const auto& cfg = ctx.config();
  ExperimentOutput out;
  const int max_n = *std::max_element(cfg.hysteresis_n.begin(), cfg.hysteresis_n.end());
  const int h = std::max(cfg.horizon, max_n);
  const auto& bs = ctx.lstm(NodeKind::CellularBS, FeatureMode::Full, cfg.w_bs, h, cfg.handover_nt);
  const auto& ap = ctx.lstm(NodeKind::WifiAP, FeatureMode::Full, cfg.w_ap, h, cfg.handover_nt);
  const PredictorSet predictors{bs.model.get(), ap.model.get()};
  const Trace& trace = ctx.traces().at(static_cast<std::size_t>(cfg.handover_nt));
  EpisodeOptions opts;
  opts.admission_capacity = cfg.admission_capacity;
  opts.ping_pong_window = cfg.ping_pong_window;
  ForecastCache cache;

  struct Variant {
    TriggerMode mode;
    int n;
    std::string label;
  };
  std::vector<Variant> variants{{TriggerMode::Soft, 1, "soft"}};
  for (int n : cfg.hysteresis_n) variants.push_back({TriggerMode::Hysteresis, n, "hysteresis"});

  std::vector<double> deltas = cfg.delta_sweep;
  std::sort(deltas.begin(), deltas.end());
  auto os = open_csv(out_dir / "handover_counts.csv", out);
  os << "delta_db,mode,n,handovers,failed,ping_pongs,mean_dwell,oracle_agreement\n";
  std::map<std::pair<std::string, int>, std::vector<int>> counts;
  bool n1_equal = true;
  for (double d : deltas) {
    EpisodeResult soft_res;
    for (const auto& v : variants) {
      TriggerConfig tc{d, v.mode, v.n};
      EpisodeResult r = run_episode(trace, predictors, tc, opts, &cache);
      const auto& m = r.metrics;
      os << csv::num(d) << ',' << v.label << ',' << v.n << ',' << m.handovers << ',' << m.failed_handovers << ','
         << m.ping_pongs << ',' << csv::num(m.mean_dwell) << ',' << csv::num(m.oracle_agreement) << '\n';
      counts[{v.label, v.n}].push_back(m.handovers);
      if (v.mode == TriggerMode::Soft) soft_res = std::move(r);
    }
    const EpisodeResult h1 = run_episode(trace, predictors, TriggerConfig{d, TriggerMode::Hysteresis, 1}, opts, &cache);
    if (!same_decisions(h1.decisions, soft_res.decisions)) n1_equal = false;
  }

  for (const auto& [key, series] : counts) {
    bool mono = true;
    for (std::size_t i = 1; i < series.size(); ++i) mono = mono && series[i] <= series[i - 1];
    std::ostringstream s;
    for (std::size_t i = 0; i < series.size(); ++i) s << (i ? " " : "") << series[i];
    const std::string label = key.first + (key.first == "soft" ? "" : "_n" + std::to_string(key.second));
    check(out, "exp-handover", label + "_count_nonincreasing_in_delta", mono, "counts " + s.str());
  }
  {
    const auto& soft = counts[{"soft", 1}];
    const auto& hyst = counts[{"hysteresis", max_n}];
    bool dom = true;
    for (std::size_t i = 0; i < soft.size(); ++i) dom = dom && hyst[i] <= soft[i];
    check(out, "exp-handover", "hysteresis_n" + std::to_string(max_n) + "_le_soft", dom, "");
  }
  check(out, "exp-handover", "hysteresis_n1_equals_soft", n1_equal, "decision logs compared bit-exact");

  const EpisodeResult soft = run_episode(trace, predictors, {cfg.timeline_delta, TriggerMode::Soft, 1}, opts, &cache);
  const EpisodeResult hyst =
      run_episode(trace, predictors, {cfg.timeline_delta, TriggerMode::Hysteresis, max_n}, opts, &cache);
  auto tl = open_csv(out_dir / "handover_timeline.csv", out);
  tl << "step,actual_best,soft,hysteresis\n";
  std::size_t agree = 0;
  for (std::size_t i = 0; i < soft.timeline_steps.size(); ++i) {
    tl << soft.timeline_steps[i] << ',' << soft.oracle_timeline[i].str() << ',' << soft.serving_timeline[i].str()
       << ',' << hyst.serving_timeline[i].str() << '\n';
    if (soft.serving_timeline[i] == hyst.serving_timeline[i]) ++agree;
  }
  const double frac = soft.timeline_steps.empty() ? 0.0 : static_cast<double>(agree) / soft.timeline_steps.size();
  check(out, "exp-handover", "timeline_agreement", frac >= cfg.timeline_agreement_floor,
        "soft/hysteresis agree on " + fmt(frac) + " of steps");
  write_decision_csv(out_dir / "decisions_soft.csv", soft.decisions);
  write_decision_csv(out_dir / "decisions_hysteresis.csv", hyst.decisions);
  write_event_csv(out_dir / "events_soft.csv", soft.events);
  write_event_csv(out_dir / "events_hysteresis.csv", hyst.events);
  for (const char* f : {"decisions_soft.csv", "decisions_hysteresis.csv", "events_soft.csv", "events_hysteresis.csv"}) {
    out.files.push_back(out_dir / f);
  }
  out.notes.push_back("handover_test_trajectory=" + std::to_string(cfg.handover_nt));
  return out;
}

// ---------------------------------------------------------------- run-all

void write_assertions_csv(const fs::path& path, std::span<const Assertion> assertions) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << "experiment,assertion,passed,detail\n";
  for (const auto& a : assertions) {
    os << a.experiment << ',' << a.name << ',' << (a.passed ? "pass" : "FAIL") << ',' << a.detail << '\n';
  }
}

std::string format_summary(std::span<const Assertion> assertions) {
  std::ostringstream os;
  std::size_t passed = 0;
  for (const auto& a : assertions) {
    os << (a.passed ? "PASS " : "FAIL ") << a.experiment << ' ' << a.name;
    if (!a.detail.empty()) os << " (" << a.detail << ')';
    os << '\n';
    if (a.passed) ++passed;
  }
  os << passed << '/' << assertions.size() << " assertions passed\n";
  return os.str();
}

void write_manifest(const fs::path& path, const ExperimentConfig& cfg, const std::vector<std::string>& extra) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  std::ostringstream hash;
  hash << std::hex << cfg.hash();
  os << "config_hash=" << hash.str() << '\n';
  os << "seed=" << cfg.seed << '\n';
  os << "scale=" << (cfg.full ? "full" : "desk") << '\n';
  os << "format_versions=scenario:" << kScenarioFormatVersion << ",dataset:" << kDatasetFormatVersion << '\n';
  for (const auto& line : extra) os << line << '\n';
  os << "config=" << json(cfg).dump() << '\n';
}

ExperimentOutput run_all(ExperimentContext& ctx, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const auto& cfg = ctx.config();
  ExperimentOutput all;
  std::vector<std::string> extra;
  const auto t_start = std::chrono::steady_clock::now();

  {
    std::ofstream os(out_dir / "scenario.json");
    os << scenario_to_json(ctx.topology(), ctx.trajectories()).dump(2) << '\n';
    all.files.push_back(out_dir / "scenario.json");
  }
  write_trajectories_csv(out_dir / "trajectories.csv", ctx.trajectories());
  write_trace_csv(out_dir / "traces_bs.csv", out_dir / "traces_ap.csv", ctx.traces());
  for (const char* f : {"trajectories.csv", "traces_bs.csv", "traces_ap.csv"}) all.files.push_back(out_dir / f);

  using Fn = ExperimentOutput (*)(ExperimentContext&, const fs::path&);
  const std::pair<const char*, Fn> steps[] = {{"exp-window", exp_window_sweep},
                                              {"exp-traj", exp_traj_sweep},
                                              {"exp-horizon", exp_horizon_sweep},
                                              {"exp-baselines", exp_baselines},
                                              {"exp-handover", exp_handover}};
  for (const auto& [name, fn] : steps) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentOutput o = fn(ctx, out_dir);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    extra.push_back(std::string("wall_clock_s.") + name + "=" + fmt(secs));
    all.assertions.insert(all.assertions.end(), o.assertions.begin(), o.assertions.end());
    all.files.insert(all.files.end(), o.files.begin(), o.files.end());
    all.notes.insert(all.notes.end(), o.notes.begin(), o.notes.end());
  }
  extra.insert(extra.end(), all.notes.begin(), all.notes.end());
  extra.push_back("models_trained=" + std::to_string(ctx.models_trained()));
  for (const auto& [key, tm] : ctx.cache()) {
    if (tm.epochs_run > 0) {
      extra.push_back("model." + key + "=epochs:" + std::to_string(tm.epochs_run) +
                      ",best_epoch:" + std::to_string(tm.best_epoch) + ",rmse_db:" + csv::num(tm.test.overall));
    } else {
      extra.push_back("model." + key + "=rmse_db:" + csv::num(tm.test.overall));
    }
  }
  extra.push_back("wall_clock_s.total=" +
                  fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count()));

  write_assertions_csv(out_dir / "assertions.csv", all.assertions);
  all.files.push_back(out_dir / "assertions.csv");
  {
    std::ofstream os(out_dir / "summary.txt");
    os << format_summary(all.assertions);
  }
  write_manifest(out_dir / "manifest.txt", cfg, extra);
  return all;
}

}  // namespace pcho
