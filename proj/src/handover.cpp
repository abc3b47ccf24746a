#include "pcho/handover.hpp"

#include <algorithm>
#include <fstream>

#include "pcho/csv.hpp"
#include "pcho/error.hpp"

namespace pcho {

AdmissionControl::AdmissionControl(std::span<const NodeId> nodes, int capacity)
    : capacity_(capacity), nodes_(nodes.begin(), nodes.end()), load_(new std::atomic<int>[nodes.size()]) {
  if (capacity < 0) throw ConfigError("admission capacity must be >= 0");
  std::sort(nodes_.begin(), nodes_.end());
  for (std::size_t i = 0; i < nodes_.size(); ++i) load_[i].store(0);
}

std::size_t AdmissionControl::slot(NodeId node) const {
  const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), node);
  if (it == nodes_.end() || *it != node) throw ConfigError("admission control does not know " + node.str());
  return static_cast<std::size_t>(it - nodes_.begin());
}

int AdmissionControl::load(NodeId node) const { return load_[slot(node)].load(); }

bool AdmissionControl::try_admit(NodeId node) {
  auto& counter = load_[slot(node)];
  int current = counter.load();
  while (current < capacity_) {
    if (counter.compare_exchange_weak(current, current + 1)) return true;
  }
  return false;
}

void AdmissionControl::release(NodeId node) {
  auto& counter = load_[slot(node)];
  int current = counter.load();
  while (current > 0 && !counter.compare_exchange_weak(current, current - 1)) {
  }
}

std::string to_string(HandoverState s) {
  switch (s) {
    case HandoverState::Requested: return "Requested";
    case HandoverState::AdmissionChecked: return "AdmissionChecked";
    case HandoverState::Acked: return "Acked";
    case HandoverState::RrcReconfigured: return "RrcReconfigured";
    case HandoverState::Synced: return "Synced";
    case HandoverState::StatusTransferred: return "StatusTransferred";
    case HandoverState::Complete: return "Complete";
    case HandoverState::Failed: return "Failed";
  }
  return "?";
}

std::string to_string(FailureReason r) { return r == FailureReason::AdmissionRejected ? "AdmissionRejected" : ""; }

HandoverEvent execute_handover(AdmissionControl& admission, int ue, int step, NodeId source, NodeId target) {
  if (source == target) throw ConfigError("handover target equals source " + source.str());
  HandoverEvent e;
  e.ue = ue;
  e.step = step;
  e.source = source;
  e.target = target;
  int stage = 0;
  auto log = [&](HandoverState s) { e.log.push_back({s, step + stage++ / 8.0}); };
  log(HandoverState::Requested);
  const bool admitted = admission.try_admit(target);
  log(HandoverState::AdmissionChecked);
  if (!admitted) {
    e.reason = FailureReason::AdmissionRejected;
    log(HandoverState::Failed);
    return e;
  }
  log(HandoverState::Acked);
  log(HandoverState::RrcReconfigured);
  log(HandoverState::Synced);
  log(HandoverState::StatusTransferred);
  admission.release(source);
  log(HandoverState::Complete);
  return e;
}

EpisodeResult run_episode(const Trace& trace, const PredictorSet& predictors, const TriggerConfig& cfg,
                          const EpisodeOptions& options, ForecastCache* cache, AdmissionControl* admission) {
  cfg.validate();
  if (trace.length() == 0 || trace.nodes.empty()) throw ConfigError("episode needs a non-empty trace");
  int max_window = 1;
  for (const NodeId& n : trace.nodes) {
    const Predictor* p = predictors.for_kind(n.kind);
    if (p == nullptr) throw ConfigError("no predictor for " + to_string(n.kind) + " nodes");
    max_window = std::max(max_window, p->window());
  }
  const int length = static_cast<int>(trace.length());
  const auto best = best_server_timeline(trace);

  EpisodeResult res;
  AdmissionControl own(trace.nodes, options.admission_capacity);
  AdmissionControl& adm = admission ? *admission : own;
  SteeringController ctl(predictors, cfg, trace.nodes, static_cast<std::size_t>(max_window));

  const int ready = max_window - 1;
  std::optional<NodeId> serving;
  for (int k = 0; k < length; ++k) {
    for (std::size_t i = 0; i < trace.nodes.size(); ++i) ctl.ingest(trace.series[i][static_cast<std::size_t>(k)]);
    if (k < ready) continue;
    if (!serving) {
      res.first_ready_step = k;
      serving = best[static_cast<std::size_t>(k)];
      if (!adm.try_admit(*serving)) throw SimulationError("initial serving node " + serving->str() + " is full");
      res.timeline_steps.push_back(k);
      res.serving_timeline.push_back(*serving);
      res.oracle_timeline.push_back(best[static_cast<std::size_t>(k)]);
    }
    if (k + 1 >= length) break;
    SteeringDecision d = ctl.step(trace.traj_id, *serving, k, cache);
    if (d.action == SteeringAction::Handover) {
      HandoverEvent e = execute_handover(adm, trace.traj_id, k, *serving, *d.target);
      if (e.complete()) {
        serving = e.target;
        ctl.reset_streaks();
      }
      res.events.push_back(std::move(e));
    }
    res.decisions.push_back(std::move(d));
    res.timeline_steps.push_back(k + 1);
    res.serving_timeline.push_back(*serving);
    res.oracle_timeline.push_back(best[static_cast<std::size_t>(k + 1)]);
  }
  if (serving) adm.release(*serving);

  EpisodeMetrics& m = res.metrics;
  std::vector<const HandoverEvent*> done;
  for (const auto& e : res.events) {
    if (e.complete()) {
      ++m.handovers;
      done.push_back(&e);
    } else {
      ++m.failed_handovers;
    }
  }
  for (std::size_t i = 1; i < done.size(); ++i) {
    const auto* a = done[i - 1];
    const auto* b = done[i];
    if (b->target == a->source && b->step - a->step <= options.ping_pong_window) ++m.ping_pongs;
  }
  if (!res.serving_timeline.empty()) {
    std::size_t segments = 1, agree = 0;
    for (std::size_t i = 0; i < res.serving_timeline.size(); ++i) {
      if (i > 0 && res.serving_timeline[i] != res.serving_timeline[i - 1]) ++segments;
      if (res.serving_timeline[i] == res.oracle_timeline[i]) ++agree;
    }
    m.mean_dwell = static_cast<double>(res.serving_timeline.size()) / static_cast<double>(segments);
    m.oracle_agreement = static_cast<double>(agree) / static_cast<double>(res.serving_timeline.size());
  }
  return res;
}

void write_decision_csv(const std::filesystem::path& path, std::span<const SteeringDecision> decisions) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  std::size_t h = 0;
  for (const auto& d : decisions) h = std::max(h, d.serving_predicted_db.size());
  os << "step,serving,target,action,candidate";
  for (std::size_t i = 1; i <= h; ++i) os << ",pred_" << i;
  for (std::size_t i = 1; i <= h; ++i) os << ",delta_" << i;
  os << ",triggered\n";
  auto row = [&](const SteeringDecision& d, NodeId node, const std::vector<double>& pred,
                 const std::vector<double>& delta, bool triggered) {
    os << d.step << ',' << d.serving.str() << ',' << (d.target ? d.target->str() : "") << ','
       << (d.action == SteeringAction::Handover ? "handover" : "stay") << ',' << node.str();
    for (std::size_t i = 0; i < h; ++i) os << ',' << (i < pred.size() ? csv::num(pred[i]) : "");
    for (std::size_t i = 0; i < h; ++i) os << ',' << (i < delta.size() ? csv::num(delta[i]) : "");
    os << ',' << (triggered ? 1 : 0) << '\n';
  };
  for (const auto& d : decisions) {
    row(d, d.serving, d.serving_predicted_db, std::vector<double>(d.serving_predicted_db.size(), 0.0), false);
    for (const auto& c : d.candidates) row(d, c.node, c.predicted_db, c.delta_db, c.triggered);
  }
}

void write_event_csv(const std::filesystem::path& path, std::span<const HandoverEvent> events) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  constexpr HandoverState kOrder[] = {HandoverState::Requested,       HandoverState::AdmissionChecked,
                                      HandoverState::Acked,           HandoverState::RrcReconfigured,
                                      HandoverState::Synced,          HandoverState::StatusTransferred,
                                      HandoverState::Complete,        HandoverState::Failed};
  os << "ue,step,source,target,final_state,reason";
  for (auto s : kOrder) os << ",t_" << to_string(s);
  os << '\n';
  for (const auto& e : events) {
    os << e.ue << ',' << e.step << ',' << e.source.str() << ',' << e.target.str() << ','
       << to_string(e.final_state()) << ',' << to_string(e.reason);
    for (auto s : kOrder) {
      os << ',';
      for (const auto& entry : e.log) {
        if (entry.state == s) os << csv::num(entry.time);
      }
    }
    os << '\n';
  }
}

}  // namespace pcho
