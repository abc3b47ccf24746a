#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcho/baselines.hpp"
#include "pcho/evaluate.hpp"
#include "pcho/handover.hpp"
#include "pcho/network.hpp"
#include "pcho/sim.hpp"
#include "pcho/topology.hpp"
#include "pcho/train.hpp"
#include "pcho/trajectory.hpp"

namespace pcho {

struct ModelHyper {
  int bs_hidden = 16;
  int ap_hidden = 16;
  TrainConfig train;
  GbtParams gbt;
  int ar_order = 0;  // <= 0: W - d
  int ar_differencing = 1;
  friend bool operator==(const ModelHyper&, const ModelHyper&) = default;
};

struct ExperimentConfig {
  std::string experiment_id = "run-all";
  std::uint64_t seed = 7;
  RadioDefaults radio;
  LayoutParams layout;
  TrajectoryParams trajectory;
  double split_ratio = 0.8;

  int w_bs = 9;
  int w_ap = 7;

  int window_sweep_nt = 35;
  std::vector<int> window_sweep = {3, 5, 7, 9, 11};
  std::vector<int> traj_sweep = {5, 15, 25, 35};
  int horizon_nt = 20;
  int horizon = 5;
  std::vector<int> recursive_taus = {2, 4};
  double recursive_ratio_floor = 1.5;
  std::vector<int> baseline_nt = {17, 35};
  int handover_nt = 20;  // training trajectories; trajectory id handover_nt is held out
  std::vector<double> delta_sweep = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  std::vector<int> hysteresis_n = {2, 3};
  double timeline_delta = 2.5;
  double timeline_agreement_floor = 0.7;
  int admission_capacity = 8;
  int ping_pong_window = 3;

  ModelHyper model;
  bool full = false;

  static ExperimentConfig desk();
  static ExperimentConfig full_scale();

  // Throws ConfigError on empty sweeps or out-of-range values.
  void validate() const;
  // Trajectories the campaign must contain to serve every experiment.
  int campaign_size() const;
  std::uint64_t hash() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
// Fields absent from `j` keep the values already in `c`.
void from_json(const nlohmann::json& j, ExperimentConfig& c);
void to_json(nlohmann::json& j, const ModelHyper& m);
void from_json(const nlohmann::json& j, ModelHyper& m);
void to_json(nlohmann::json& j, const GbtParams& g);
void from_json(const nlohmann::json& j, GbtParams& g);

// Preset (desk or full scale) overlaid with the JSON file at `path`, if any.
ExperimentConfig load_experiment_config(const std::filesystem::path& path, bool full);

struct Assertion {
  std::string experiment;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct TrainedModel {
  std::shared_ptr<Predictor> model;
  RmseReport test;
  DatasetSplit split;  // the dataset it was trained and scored on
  int epochs_run = 0;
  int best_epoch = -1;
};

// Pinned campaign plus the models trained on it; experiments share both so a
// model with identical (kind, features, W, H, N_T) is trained once.
class ExperimentContext {
 public:
  explicit ExperimentContext(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }
  const NetworkTopology& topology() const { return topo_; }
  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  const std::vector<Trace>& traces() const { return traces_; }
  std::span<const Trace> first_traces(int n) const;

  DatasetSplit dataset(NodeKind kind, FeatureMode mode, int window, int horizon, int n_traj) const;

  // LSTM of the kind's default architecture, trained on dataset(...).
  // output_dim < horizon trains on the leading targets only (same windows and split).
  const TrainedModel& lstm(NodeKind kind, FeatureMode mode, int window, int horizon, int n_traj, int output_dim = -1);
  const TrainedModel& ar(NodeKind kind, int window, int n_traj);
  const TrainedModel& gbt(NodeKind kind, int window, int n_traj);

  int window_for(NodeKind kind) const { return kind == NodeKind::CellularBS ? cfg_.w_bs : cfg_.w_ap; }
  std::size_t models_trained() const { return cache_.size(); }
  const std::map<std::string, TrainedModel>& cache() const { return cache_; }

 private:
  ExperimentConfig cfg_;
  NetworkTopology topo_;
  std::vector<Trajectory> trajectories_;
  std::vector<Trace> traces_;
  std::map<std::string, TrainedModel> cache_;
};

struct ExperimentOutput {
  std::vector<Assertion> assertions;
  std::vector<std::filesystem::path> files;
  std::vector<std::string> notes;  // key=value lines for the manifest
  bool all_passed() const;
};

ExperimentOutput exp_window_sweep(ExperimentContext& ctx, const std::filesystem::path& out_dir);
ExperimentOutput exp_traj_sweep(ExperimentContext& ctx, const std::filesystem::path& out_dir);
ExperimentOutput exp_horizon_sweep(ExperimentContext& ctx, const std::filesystem::path& out_dir);
ExperimentOutput exp_baselines(ExperimentContext& ctx, const std::filesystem::path& out_dir);
ExperimentOutput exp_handover(ExperimentContext& ctx, const std::filesystem::path& out_dir);

// Every experiment, then manifest.txt, assertions.csv and summary.txt.
ExperimentOutput run_all(ExperimentContext& ctx, const std::filesystem::path& out_dir);

void write_assertions_csv(const std::filesystem::path& path, std::span<const Assertion> assertions);
std::string format_summary(std::span<const Assertion> assertions);
// Plain-text manifest: config hash, seeds, every configured default, extra lines.
void write_manifest(const std::filesystem::path& path, const ExperimentConfig& cfg,
                    const std::vector<std::string>& extra);

}  // namespace pcho
