#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pcho/sim.hpp"

namespace pcho {

// Per-step input features: (rssi, sig_quality, throughput) or sig_quality alone.
enum class FeatureMode { Full, SinrOnly };

int feature_count(FeatureMode mode);
// Column of sig_quality inside a feature row.
int quality_column(FeatureMode mode);

// One window row built from a measurement tuple.
Eigen::RowVectorXd feature_row(const MeasurementTuple& m, FeatureMode mode);

// Input window ending at step k (rows k-W+1..k) and targets for steps k+1..k+H.
struct WindowSample {
  int traj_id = 0;
  NodeId node;
  int k = 0;
  Eigen::MatrixXd features;  // W x F
  Eigen::VectorXd targets;   // H, sig_quality of steps k+1..k+H
};

// Per-feature z-score statistics. Targets share the sig_quality column's statistics
// so a normalized prediction can be fed back as a normalized input.
struct NormStats {
  FeatureMode mode = FeatureMode::Full;
  std::vector<double> mean;
  std::vector<double> stddev;

  // Fitted on `train` only; throws ConfigError if any feature has zero spread.
  static NormStats fit(std::span<const WindowSample> train, FeatureMode mode);

  void normalize(WindowSample& s) const;
  void denormalize(WindowSample& s) const;
  Eigen::MatrixXd normalize_window(const Eigen::MatrixXd& raw) const;
  double normalize_quality(double db) const;
  double denormalize_quality(double z) const;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

struct DatasetSplit {
  NodeKind kind = NodeKind::CellularBS;
  FeatureMode mode = FeatureMode::Full;
  int window = 0;   // W
  int horizon = 0;  // H
  double split_ratio = 0.8;
  NormStats norm;
  std::vector<WindowSample> train;  // normalized
  std::vector<WindowSample> test;   // normalized
};

// Raw (unnormalized) windows; exactly L - W - H + 1 of them.
// Throws ShortTraceError when L < W + H.
std::vector<WindowSample> make_windows(const Trace& trace, NodeId node, int window, int horizon,
                                       FeatureMode mode = FeatureMode::Full);

// Windows from every node of `kind` in every trace, in (trace, node, k) order.
std::vector<WindowSample> pool_windows(std::span<const Trace> traces, NodeKind kind, int window, int horizon,
                                       FeatureMode mode = FeatureMode::Full);

// Deterministic shuffle, split, then z-score with statistics of the training part.
DatasetSplit split_and_normalize(std::vector<WindowSample> pool, NodeKind kind, FeatureMode mode, int window,
                                 int horizon, double split_ratio, std::uint64_t seed);

DatasetSplit build_rat_dataset(std::span<const Trace> traces, NodeKind kind, int window, int horizon,
                               double split_ratio, std::uint64_t seed, FeatureMode mode = FeatureMode::Full);

// (BS dataset, AP dataset)
std::pair<DatasetSplit, DatasetSplit> build_per_rat_datasets(std::span<const Trace> traces, int window_bs,
                                                             int window_ap, int horizon, double split_ratio,
                                                             std::uint64_t seed,
                                                             FeatureMode mode = FeatureMode::Full);

// Trajectory-held-out variant: every window of `test_traces` goes to the test part.
DatasetSplit build_holdout_dataset(std::span<const Trace> train_traces, std::span<const Trace> test_traces,
                                   NodeKind kind, int window, int horizon, FeatureMode mode = FeatureMode::Full);

// Copy with targets truncated to the first `horizon` entries.
DatasetSplit slice_targets(const DatasetSplit& split, int horizon);

// Only the sig_quality column of each window, in dB.
std::vector<double> raw_quality_window(const WindowSample& normalized, const NormStats& norm);

inline constexpr int kDatasetFormatVersion = 1;

// Rows: train part then test part. Columns:
// traj_id,node_kind,node_index,k,f0_rssi,f0_sq,f0_tp,...,y_1..y_H
// A sidecar `<path>.manifest.json` carries format_version, split sizes and NormStats.
void export_csv(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit import_csv(const std::filesystem::path& path);
std::filesystem::path dataset_manifest_path(const std::filesystem::path& csv_path);

// Hash over every numeric field; recorded in model checkpoints.
std::uint64_t dataset_hash(const DatasetSplit& split);

}  // namespace pcho
