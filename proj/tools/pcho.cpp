#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "pcho/checkpoint.hpp"
#include "pcho/dataset.hpp"
#include "pcho/error.hpp"
#include "pcho/experiments.hpp"

namespace fs = std::filesystem;
using namespace pcho;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  bool full = false;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "JSON experiment config (overrides the preset)");
  app->add_option("--seed", o.seed, "master seed");
  app->add_option("--out", o.out, "output directory");
  app->add_flag("--full", o.full, "full-scale preset instead of desk scale");
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig c = load_experiment_config(o.config, o.full);
  if (o.seed) c.seed = *o.seed;
  c.validate();
  return c;
}

int report(const ExperimentOutput& out, const fs::path& dir, const ExperimentConfig& cfg) {
  write_assertions_csv(dir / "assertions.csv", out.assertions);
  std::vector<std::string> extra = out.notes;
  write_manifest(dir / "manifest.txt", cfg, extra);
  const std::string summary = format_summary(out.assertions);
  std::ofstream(dir / "summary.txt") << summary;
  std::cout << summary;
  return out.all_passed() ? 0 : 1;
}

NodeKind parse_kind(const std::string& s) {
  if (s == "bs" || s == "BS") return NodeKind::CellularBS;
  if (s == "ap" || s == "AP") return NodeKind::WifiAP;
  throw ConfigError("unknown RAT '" + s + "' (bs or ap)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predictive conditional handover simulator and forecaster"};
  app.require_subcommand(1);
  CommonOptions opt;
  int horizon = -1;
  int n_traj = -1;
  std::vector<std::string> kinds{"bs", "ap"};

  auto* topo_cmd = app.add_subcommand("topology", "build the topology and trajectory set");
  auto* sim_cmd = app.add_subcommand("simulate", "simulate the measurement campaign");
  auto* data_cmd = app.add_subcommand("dataset", "export per-RAT window datasets");
  auto* train_cmd = app.add_subcommand("train", "train the per-RAT LSTM forecasters and save checkpoints");
  auto* eval_cmd = app.add_subcommand("eval", "reload checkpoints and re-score the pinned test sets");
  std::vector<std::pair<CLI::App*, ExperimentOutput (*)(ExperimentContext&, const fs::path&)>> exps{
      {app.add_subcommand("exp-window", "RMSE versus lookback window"), exp_window_sweep},
      {app.add_subcommand("exp-traj", "RMSE versus number of trajectories"), exp_traj_sweep},
      {app.add_subcommand("exp-horizon", "direct versus recursive multi-step RMSE"), exp_horizon_sweep},
      {app.add_subcommand("exp-baselines", "LSTM versus AR and boosted trees"), exp_baselines},
      {app.add_subcommand("exp-handover", "soft versus hysteresis handover sweep"), exp_handover},
  };
  auto* all_cmd = app.add_subcommand("run-all", "every experiment plus manifest and summary");

  for (auto* c : {topo_cmd, sim_cmd, data_cmd, train_cmd, eval_cmd, all_cmd}) add_common(c, opt);
  for (auto& [c, fn] : exps) add_common(c, opt);
  for (auto* c : {data_cmd, train_cmd, eval_cmd}) {
    c->add_option("--horizon", horizon, "forecast horizon H (default: config horizon)");
    c->add_option("--ntraj", n_traj, "trajectories used (default: config horizon_nt)");
  }
  for (auto* c : {train_cmd, eval_cmd}) c->add_option("--rat", kinds, "bs and/or ap");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = resolve(opt);
    const fs::path out = opt.out;
    fs::create_directories(out);
    const int h = horizon > 0 ? horizon : cfg.horizon;
    const int n = n_traj > 0 ? n_traj : cfg.horizon_nt;

    if (topo_cmd->parsed()) {
      const auto topo = build_default_topology(cfg.seed, cfg.radio, cfg.layout);
      validate(topo);
      const auto trajs = generate_trajectory_set(topo, cfg.campaign_size(), cfg.trajectory, cfg.seed);
      std::ofstream(out / "scenario.json") << scenario_to_json(topo, trajs).dump(2) << '\n';
      write_trajectories_csv(out / "trajectories.csv", trajs);
      std::cout << topo.bs_list.size() << " BS, " << topo.ap_list.size() << " AP, " << trajs.size()
                << " trajectories -> " << out.string() << '\n';
      return 0;
    }

    ExperimentContext ctx(cfg);
    if (sim_cmd->parsed()) {
      write_trace_csv(out / "traces_bs.csv", out / "traces_ap.csv", ctx.traces());
      std::cout << ctx.traces().size() << " traces -> " << out.string() << '\n';
      return 0;
    }
    if (data_cmd->parsed()) {
      for (NodeKind kind : {NodeKind::CellularBS, NodeKind::WifiAP}) {
        const auto split = ctx.dataset(kind, FeatureMode::Full, ctx.window_for(kind), h, n);
        const fs::path p = out / (kind == NodeKind::CellularBS ? "dataset_bs.csv" : "dataset_ap.csv");
        export_csv(split, p);
        std::cout << p.string() << ": " << split.train.size() << " train, " << split.test.size() << " test\n";
      }
      return 0;
    }
    if (train_cmd->parsed()) {
      for (const auto& k : kinds) {
        const NodeKind kind = parse_kind(k);
        const auto& tm = ctx.lstm(kind, FeatureMode::Full, ctx.window_for(kind), h, n);
        TrainingManifest m;
        m.seed = cfg.seed;
        m.epochs = tm.epochs_run;
        m.best_epoch = tm.best_epoch;
        m.data_hash = dataset_hash(tm.split);
        m.test_rmse_db = tm.test.per_tau;
        m.test_rmse_overall_db = tm.test.overall;
        m.train_config = cfg.model.train;
        const std::string tag = kind == NodeKind::CellularBS ? "bs" : "ap";
        save_checkpoint(*tm.model, m, out / ("model_" + tag + ".json"));
        export_csv(tm.split, out / ("dataset_" + tag + ".csv"));
        std::cout << "model_" << tag << ".json: " << tm.epochs_run << " epochs, test RMSE " << tm.test.overall
                  << " dB\n";
      }
      return 0;
    }
    if (eval_cmd->parsed()) {
      bool ok = true;
      std::ofstream os(out / "eval.csv");
      os << "rat,tau,stored_rmse_db,rmse_db,abs_diff\n";
      for (const auto& k : kinds) {
        const NodeKind kind = parse_kind(k);
        const std::string tag = kind == NodeKind::CellularBS ? "bs" : "ap";
        const auto loaded = load_checkpoint(out / ("model_" + tag + ".json"));
        const auto split = ctx.dataset(kind, loaded.model->feature_mode(), loaded.model->window(), h, n);
        if (dataset_hash(split) != loaded.manifest.data_hash) {
          std::cerr << tag << ": dataset hash differs from the checkpoint manifest\n";
          ok = false;
          continue;
        }
        const RmseReport r = evaluate_rmse(*loaded.model, split.test);
        for (std::size_t t = 0; t < r.per_tau.size(); ++t) {
          const double diff = std::abs(r.per_tau[t] - loaded.manifest.test_rmse_db.at(t));
          ok = ok && diff <= 1e-9;
          os << tag << ',' << t + 1 << ',' << loaded.manifest.test_rmse_db[t] << ',' << r.per_tau[t] << ',' << diff
             << '\n';
        }
        std::cout << tag << ": RMSE " << r.overall << " dB (stored " << loaded.manifest.test_rmse_overall_db << ")\n";
      }
      return ok ? 0 : 1;
    }
    for (auto& [c, fn] : exps) {
      if (c->parsed()) return report(fn(ctx, out), out, cfg);
    }
    if (all_cmd->parsed()) {
      const auto res = run_all(ctx, out);
      std::cout << format_summary(res.assertions);
      return res.all_passed() ? 0 : 1;
    }
  } catch (const pcho::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
