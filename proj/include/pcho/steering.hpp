#pragma once

#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "pcho/predictor.hpp"
#include "pcho/sim.hpp"

namespace pcho {

// Per (UE, node) ring buffers of measurement reports with contiguous steps.
class MeasurementStore {
 public:
  explicit MeasurementStore(std::size_t capacity);

  // Throws StepOrderError unless the step follows the buffer's last step.
  void ingest(const MeasurementTuple& m);

  std::size_t capacity() const { return capacity_; }
  std::size_t size(int ue, NodeId node) const;
  std::optional<int> last_step(int ue, NodeId node) const;
  const std::deque<MeasurementTuple>* buffer(int ue, NodeId node) const;

 private:
  std::size_t capacity_;
  std::map<std::pair<int, NodeId>, std::deque<MeasurementTuple>> buffers_;
};

// Normalized W x F window of the newest W reports, or nullopt when fewer are stored.
std::optional<Eigen::MatrixXd> assemble_features(const MeasurementStore& store, int ue, NodeId node, int window,
                                                 const NormStats& norm);

enum class TriggerMode {
  Soft,             // delta[k+1] >= threshold
  Hysteresis,       // delta[k+h] >= threshold for h = 1..N from one forecast
  HysteresisDwell,  // delta[k+1] >= threshold at N consecutive decision instants
};

std::string to_string(TriggerMode mode);
TriggerMode trigger_mode_from_string(const std::string& s);

struct TriggerConfig {
  double delta_db = 2.5;
  TriggerMode mode = TriggerMode::Soft;
  int n = 1;  // ignored by Soft
  // Horizons the predictors must provide.
  int horizons_needed() const { return mode == TriggerMode::Hysteresis ? n : 1; }
  void validate() const;
};

struct PredictorSet {
  const Predictor* bs = nullptr;
  const Predictor* ap = nullptr;
  const Predictor* for_kind(NodeKind kind) const { return kind == NodeKind::CellularBS ? bs : ap; }
};

enum class SteeringAction { Stay, Handover };

struct CandidateForecast {
  NodeId node;
  std::vector<double> predicted_db;  // s_hat[k+1..k+H]
  std::vector<double> delta_db;      // minus the serving forecast, same horizons
  bool triggered = false;
};

struct SteeringDecision {
  int step = 0;
  NodeId serving;
  std::optional<NodeId> target;
  SteeringAction action = SteeringAction::Stay;
  std::vector<double> serving_predicted_db;
  std::vector<CandidateForecast> candidates;
  std::string reason;
};

// Memo of normalized forecasts keyed by (predictor, ue, node, step).
using ForecastCache = std::map<std::tuple<const Predictor*, int, NodeId, int>, Eigen::VectorXd>;

// Stateless trigger evaluation (Soft and Hysteresis). HysteresisDwell needs the
// streak counters of SteeringController and is rejected here.
SteeringDecision decide(const MeasurementStore& store, int ue, std::span<const NodeId> nodes,
                        const PredictorSet& predictors, NodeId serving, const TriggerConfig& cfg, int step,
                        ForecastCache* cache = nullptr);

class SteeringController {
 public:
  SteeringController(PredictorSet predictors, TriggerConfig cfg, std::vector<NodeId> nodes,
                     std::size_t store_capacity);

  void ingest(const MeasurementTuple& m) { store_.ingest(m); }
  SteeringDecision step(int ue, NodeId serving, int k, ForecastCache* cache = nullptr);
  // Clears dwell streaks, e.g. after the serving node changes.
  void reset_streaks() { streak_.clear(); }

  const MeasurementStore& store() const { return store_; }
  const TriggerConfig& config() const { return cfg_; }

 private:
  PredictorSet predictors_;
  TriggerConfig cfg_;
  std::vector<NodeId> nodes_;
  MeasurementStore store_;
  std::map<NodeId, int> streak_;
};

}  // namespace pcho
