#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcho/steering.hpp"

namespace pcho {

// Per-node count of attached UEs with atomic check-and-increment admission.
class AdmissionControl {
 public:
  AdmissionControl(std::span<const NodeId> nodes, int capacity);

  int capacity() const { return capacity_; }
  int load(NodeId node) const;
  // True and one slot taken iff the node had a free slot.
  bool try_admit(NodeId node);
  void release(NodeId node);

 private:
  std::size_t slot(NodeId node) const;
  int capacity_;
  std::vector<NodeId> nodes_;
  std::unique_ptr<std::atomic<int>[]> load_;
};

enum class HandoverState {
  Requested,
  AdmissionChecked,
  Acked,
  RrcReconfigured,
  Synced,
  StatusTransferred,
  Complete,
  Failed,
};

enum class FailureReason { None, AdmissionRejected };

std::string to_string(HandoverState s);
std::string to_string(FailureReason r);

struct HandoverEvent {
  int ue = 0;
  int step = 0;
  NodeId source;
  NodeId target;
  struct Entry {
    HandoverState state;
    double time;  // simulated steps; stages of one callflow share the decision step
  };
  std::vector<Entry> log;
  FailureReason reason = FailureReason::None;

  bool complete() const { return !log.empty() && log.back().state == HandoverState::Complete; }
  HandoverState final_state() const { return log.back().state; }
};

// Runs the callflow. On success the UE's slot moves from source to target.
HandoverEvent execute_handover(AdmissionControl& admission, int ue, int step, NodeId source, NodeId target);

struct EpisodeOptions {
  int admission_capacity = 8;
  int ping_pong_window = 3;  // steps; A->B->A within this dwell counts as ping-pong
};

struct EpisodeMetrics {
  int handovers = 0;
  int failed_handovers = 0;
  int ping_pongs = 0;
  double mean_dwell = 0.0;        // steps per serving segment
  double oracle_agreement = 0.0;  // fraction of steps matching the actual best server
};

struct EpisodeResult {
  int first_ready_step = -1;
  std::vector<SteeringDecision> decisions;
  std::vector<HandoverEvent> events;
  std::vector<int> timeline_steps;      // steps covered by the serving timeline
  std::vector<NodeId> serving_timeline; // serving node during each of those steps
  std::vector<NodeId> oracle_timeline;  // actual best server at the same steps
  EpisodeMetrics metrics;
};

// Replays one trace through ingest -> assemble -> decide -> execute. The serving
// node starts as the actual best server at the first step where every node has a
// full window; the decision at step k sets the serving node for step k + 1.
EpisodeResult run_episode(const Trace& trace, const PredictorSet& predictors, const TriggerConfig& cfg,
                          const EpisodeOptions& options = {}, ForecastCache* cache = nullptr,
                          AdmissionControl* admission = nullptr);

// step,serving,target,action,candidate,pred_1..pred_H,delta_1..delta_H,triggered
void write_decision_csv(const std::filesystem::path& path, std::span<const SteeringDecision> decisions);
// ue,step,source,target,final_state,reason,t_<state>...
void write_event_csv(const std::filesystem::path& path, std::span<const HandoverEvent> events);

}  // namespace pcho
