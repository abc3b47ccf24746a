#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pcho/topology.hpp"
#include "pcho/trajectory.hpp"

namespace pcho {

// One measurement report: node `node` seen from trajectory `traj_id` at step `step`.
struct MeasurementTuple {
  int traj_id = 0;
  int step = 0;
  NodeId node;
  double rssi_dbm = 0.0;
  double sig_quality_db = 0.0;  // SINR for BS, SNR for AP
  double throughput_bps = 0.0;
  friend bool operator==(const MeasurementTuple&, const MeasurementTuple&) = default;
};

// Time-aligned per-node series for one trajectory. series[i] belongs to nodes[i];
// all series have the same length and steps run 0..length-1.
struct Trace {
  int traj_id = 0;
  std::vector<NodeId> nodes;
  std::vector<std::vector<MeasurementTuple>> series;

  std::size_t length() const { return series.empty() ? 0 : series.front().size(); }
  const std::vector<MeasurementTuple>& of(NodeId node) const;
  friend bool operator==(const Trace&, const Trace&) = default;
};

Trace simulate_trace(const NetworkTopology& topo, const Trajectory& trajectory, const RadioDefaults& radio,
                     std::uint64_t seed);

// One trace per trajectory; each trajectory draws from its own substream.
std::vector<Trace> simulate_campaign(const NetworkTopology& topo, std::span<const Trajectory> trajectories,
                                     const RadioDefaults& radio, std::uint64_t seed);

// Per-step argmax of sig_quality; ties go to the lower NodeId.
std::vector<NodeId> best_server_timeline(const Trace& trace);

// Two files: BS rows and AP rows, both with columns
// traj_id,step,node_kind,node_index,rssi_dbm,sig_quality_db,throughput_bps
void write_trace_csv(const std::filesystem::path& bs_path, const std::filesystem::path& ap_path,
                     std::span<const Trace> traces);

// Reassembles traces from the two per-RAT files.
std::vector<Trace> read_trace_csv(const std::filesystem::path& bs_path, const std::filesystem::path& ap_path);

}  // namespace pcho
