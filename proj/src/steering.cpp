#include "pcho/steering.hpp"

#include <algorithm>
#include <sstream>

#include "pcho/error.hpp"

namespace pcho {

MeasurementStore::MeasurementStore(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("measurement store capacity must be >= 1");
}

void MeasurementStore::ingest(const MeasurementTuple& m) {
  auto& buf = buffers_[{m.traj_id, m.node}];
  if (!buf.empty() && m.step != buf.back().step + 1) {
    throw StepOrderError("report for UE " + std::to_string(m.traj_id) + " node " + m.node.str() + " has step " +
                         std::to_string(m.step) + ", expected " + std::to_string(buf.back().step + 1));
  }
  buf.push_back(m);
  if (buf.size() > capacity_) buf.pop_front();
}

std::size_t MeasurementStore::size(int ue, NodeId node) const {
  const auto* b = buffer(ue, node);
  return b ? b->size() : 0;
}

std::optional<int> MeasurementStore::last_step(int ue, NodeId node) const {
  const auto* b = buffer(ue, node);
  if (!b || b->empty()) return std::nullopt;
  return b->back().step;
}

const std::deque<MeasurementTuple>* MeasurementStore::buffer(int ue, NodeId node) const {
  const auto it = buffers_.find({ue, node});
  return it == buffers_.end() ? nullptr : &it->second;
}

std::optional<Eigen::MatrixXd> assemble_features(const MeasurementStore& store, int ue, NodeId node, int window,
                                                 const NormStats& norm) {
  if (window < 1) throw ConfigError("window must be >= 1");
  const auto* buf = store.buffer(ue, node);
  if (!buf || buf->size() < static_cast<std::size_t>(window)) return std::nullopt;
  Eigen::MatrixXd raw(window, feature_count(norm.mode));
  const std::size_t first = buf->size() - static_cast<std::size_t>(window);
  for (int r = 0; r < window; ++r) raw.row(r) = feature_row((*buf)[first + static_cast<std::size_t>(r)], norm.mode);
  return norm.normalize_window(raw);
}

std::string to_string(TriggerMode mode) {
  switch (mode) {
    case TriggerMode::Soft: return "soft";
    case TriggerMode::Hysteresis: return "hysteresis";
    case TriggerMode::HysteresisDwell: return "hysteresis_dwell";
  }
  return "?";
}

TriggerMode trigger_mode_from_string(const std::string& s) {
  if (s == "soft") return TriggerMode::Soft;
  if (s == "hysteresis") return TriggerMode::Hysteresis;
  if (s == "hysteresis_dwell") return TriggerMode::HysteresisDwell;
  throw ConfigError("unknown trigger mode '" + s + "'");
}

void TriggerConfig::validate() const {
  if (!(delta_db >= 0.0)) throw ConfigError("delta_QoS must be >= 0 dB");
  if (mode != TriggerMode::Soft && n < 1) throw ConfigError("hysteresis N must be >= 1");
}

namespace {

std::optional<std::vector<double>> forecast_db(const MeasurementStore& store, int ue, NodeId node,
                                               const PredictorSet& predictors, int step, ForecastCache* cache) {
  const Predictor* p = predictors.for_kind(node.kind);
  if (p == nullptr) throw ConfigError("no predictor for " + to_string(node.kind) + " nodes");
  Eigen::VectorXd z;
  const auto key = std::make_tuple(p, ue, node, step);
  if (cache) {
    if (auto it = cache->find(key); it != cache->end()) z = it->second;
  }
  if (z.size() == 0) {
    const auto window = assemble_features(store, ue, node, p->window(), p->norm());
    if (!window) return std::nullopt;
    z = p->predict_normalized(*window);
    if (cache) cache->emplace(key, z);
  }
  std::vector<double> out(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) out[static_cast<std::size_t>(i)] = p->norm().denormalize_quality(z[i]);
  return out;
}

// Fills serving/candidate forecasts. Returns false when the serving node is not ready.
bool gather(SteeringDecision& d, const MeasurementStore& store, int ue, std::span<const NodeId> nodes,
            const PredictorSet& predictors, int need, ForecastCache* cache) {
  auto serving = forecast_db(store, ue, d.serving, predictors, d.step, cache);
  if (!serving) {
    d.reason = "serving " + d.serving.str() + " not ready";
    return false;
  }
  if (static_cast<int>(serving->size()) < need) {
    throw ConfigError("predictor for " + d.serving.str() + " emits " + std::to_string(serving->size()) +
                      " horizons, trigger needs " + std::to_string(need));
  }
  d.serving_predicted_db = *serving;
  std::vector<NodeId> order(nodes.begin(), nodes.end());
  std::sort(order.begin(), order.end());
  for (const NodeId& node : order) {
    if (node == d.serving) continue;
    auto pred = forecast_db(store, ue, node, predictors, d.step, cache);
    if (!pred) continue;
    if (static_cast<int>(pred->size()) < need) {
      throw ConfigError("predictor for " + node.str() + " emits too few horizons");
    }
    CandidateForecast c;
    c.node = node;
    c.predicted_db = *pred;
    const std::size_t h = std::min(pred->size(), serving->size());
    for (std::size_t i = 0; i < h; ++i) c.delta_db.push_back((*pred)[i] - (*serving)[i]);
    d.candidates.push_back(std::move(c));
  }
  return true;
}

bool instant_trigger(const CandidateForecast& c, const TriggerConfig& cfg) {
  if (!(c.delta_db[0] > 0.0)) return false;  // equal forecasts keep the serving node
  const int horizons = cfg.mode == TriggerMode::Hysteresis ? cfg.n : 1;
  for (int h = 0; h < horizons; ++h) {
    if (!(c.delta_db[static_cast<std::size_t>(h)] >= cfg.delta_db)) return false;
  }
  return true;
}

void select(SteeringDecision& d, const TriggerConfig& cfg) {
  const CandidateForecast* best = nullptr;
  for (const auto& c : d.candidates) {
    if (!c.triggered) continue;
    if (best == nullptr || c.predicted_db[0] > best->predicted_db[0]) best = &c;
  }
  std::ostringstream why;
  if (best == nullptr) {
    why << "no candidate meets " << to_string(cfg.mode) << " delta>=" << cfg.delta_db;
    d.action = SteeringAction::Stay;
  } else {
    d.action = SteeringAction::Handover;
    d.target = best->node;
    why << best->node.str() << " meets " << to_string(cfg.mode) << " delta>=" << cfg.delta_db << " (delta[k+1]="
        << best->delta_db[0] << ")";
  }
  d.reason = why.str();
}

}  // namespace

SteeringDecision decide(const MeasurementStore& store, int ue, std::span<const NodeId> nodes,
                        const PredictorSet& predictors, NodeId serving, const TriggerConfig& cfg, int step,
                        ForecastCache* cache) {
  cfg.validate();
  if (cfg.mode == TriggerMode::HysteresisDwell) {
    throw ConfigError("dwell-timer hysteresis keeps state; use SteeringController");
  }
  SteeringDecision d;
  d.step = step;
  d.serving = serving;
  if (!gather(d, store, ue, nodes, predictors, cfg.horizons_needed(), cache)) return d;
  for (auto& c : d.candidates) c.triggered = instant_trigger(c, cfg);
  select(d, cfg);
  return d;
}

SteeringController::SteeringController(PredictorSet predictors, TriggerConfig cfg, std::vector<NodeId> nodes,
                                       std::size_t store_capacity)
    : predictors_(predictors), cfg_(cfg), nodes_(std::move(nodes)), store_(store_capacity) {
  cfg_.validate();
  for (NodeKind kind : {NodeKind::CellularBS, NodeKind::WifiAP}) {
    const bool used = std::any_of(nodes_.begin(), nodes_.end(), [&](const NodeId& n) { return n.kind == kind; });
    const Predictor* p = predictors_.for_kind(kind);
    if (!used) continue;
    if (p == nullptr) throw ConfigError("no predictor for " + to_string(kind) + " nodes");
    if (static_cast<std::size_t>(p->window()) > store_capacity) {
      throw ConfigError("store capacity below the " + to_string(kind) + " window");
    }
  }
}

SteeringDecision SteeringController::step(int ue, NodeId serving, int k, ForecastCache* cache) {
  if (cfg_.mode != TriggerMode::HysteresisDwell) return decide(store_, ue, nodes_, predictors_, serving, cfg_, k, cache);

  SteeringDecision d;
  d.step = k;
  d.serving = serving;
  if (!gather(d, store_, ue, nodes_, predictors_, 1, cache)) return d;
  TriggerConfig soft = cfg_;
  soft.mode = TriggerMode::Soft;
  for (auto& c : d.candidates) {
    int& s = streak_[c.node];
    s = instant_trigger(c, soft) ? s + 1 : 0;
    c.triggered = s >= cfg_.n;
  }
  select(d, cfg_);
  return d;
}

}  // namespace pcho
