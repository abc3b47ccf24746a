#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "pcho/error.hpp"
#include "pcho/handover.hpp"
#include "pcho/steering.hpp"

using namespace pcho;
namespace fs = std::filesystem;

namespace {

const NodeId kBs0{NodeKind::CellularBS, 0};
const NodeId kBs1{NodeKind::CellularBS, 1};
const NodeId kAp0{NodeKind::WifiAP, 0};
const NodeId kAp1{NodeKind::WifiAP, 1};

NormStats unit_norm() {
  NormStats n;
  n.mode = FeatureMode::SinrOnly;
  n.mean = {0.0};
  n.stddev = {1.0};
  return n;
}

// Linear extrapolation of the last two reports: forecasts are scripted by the reports themselves.
struct Extrapolator final : Predictor {
  NormStats n = unit_norm();
  int w = 2;
  int h = 3;
  ModelKind kind() const override { return ModelKind::LinearHead; }
  int window() const override { return w; }
  FeatureMode feature_mode() const override { return FeatureMode::SinrOnly; }
  int output_dim() const override { return h; }
  bool trained() const override { return true; }
  const NormStats& norm() const override { return n; }
  Eigen::VectorXd predict_normalized(const Eigen::MatrixXd& x) const override {
    const double last = x(x.rows() - 1, 0);
    const double slope = last - x(x.rows() - 2, 0);
    Eigen::VectorXd out(h);
    for (int i = 0; i < h; ++i) out[i] = last + slope * (i + 1);
    return out;
  }
};

MeasurementTuple report(NodeId node, int step, double q, int ue = 0) {
  MeasurementTuple m;
  m.traj_id = ue;
  m.step = step;
  m.node = node;
  m.sig_quality_db = q;
  m.rssi_dbm = -60.0;
  m.throughput_bps = 1e6;
  return m;
}

// Feeds two reports per node so the newest is at step 1.
MeasurementStore two_step_store(const std::vector<std::pair<NodeId, std::pair<double, double>>>& spec) {
  MeasurementStore s(8);
  for (const auto& [node, q] : spec) {
    s.ingest(report(node, 0, q.first));
    s.ingest(report(node, 1, q.second));
  }
  return s;
}

Trace synthetic_trace(int length) {
  Trace t;
  t.traj_id = 0;
  t.nodes = {kBs0, kAp0};
  t.series.resize(2);
  for (int k = 0; k < length; ++k) {
    t.series[0].push_back(report(kBs0, k, 10.0 + std::sin(0.7 * k)));
    // AP swings above and below the BS level several times.
    t.series[1].push_back(report(kAp0, k, 10.0 + 8.0 * std::sin(0.25 * k)));
  }
  return t;
}

}  // namespace

TEST_CASE("measurement store") {
  MeasurementStore s(3);
  s.ingest(report(kBs0, 0, 1));
  s.ingest(report(kBs0, 1, 2));
  CHECK(s.size(0, kBs0) == 2);
  CHECK(s.last_step(0, kBs0) == 1);
  CHECK_FALSE(s.last_step(0, kAp0).has_value());
  CHECK_THROWS_AS(s.ingest(report(kBs0, 3, 0)), StepOrderError);
  CHECK_THROWS_AS(s.ingest(report(kBs0, 1, 0)), StepOrderError);
  s.ingest(report(kBs0, 2, 3));
  s.ingest(report(kBs0, 3, 4));
  CHECK(s.size(0, kBs0) == 3);
  CHECK(s.buffer(0, kBs0)->front().step == 1);
  s.ingest(report(kBs0, 7, 0, 1));  // another UE has its own buffer
  CHECK(s.size(1, kBs0) == 1);
  CHECK_THROWS_AS(MeasurementStore(0), ConfigError);
}

TEST_CASE("feature assembly matches offline windows") {
  const Trace t = synthetic_trace(12);
  MeasurementStore s(16);
  const auto offline = make_windows(t, kAp0, 4, 1, FeatureMode::Full);
  NormStats id;
  id.mode = FeatureMode::Full;
  id.mean = {0, 0, 0};
  id.stddev = {1, 1, 1};
  for (int k = 0; k < 11; ++k) {
    s.ingest(t.series[1][static_cast<std::size_t>(k)]);
    const auto w = assemble_features(s, 0, kAp0, 4, id);
    if (k < 3) {
      CHECK_FALSE(w.has_value());
    } else {
      REQUIRE(w.has_value());
      CHECK(*w == offline[static_cast<std::size_t>(k - 3)].features);
    }
  }
}

TEST_CASE("trigger configuration") {
  TriggerConfig c;
  CHECK_NOTHROW(c.validate());
  c.delta_db = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.delta_db = 1.0;
  c.mode = TriggerMode::Hysteresis;
  c.n = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.n = 3;
  CHECK(c.horizons_needed() == 3);
  for (auto m : {TriggerMode::Soft, TriggerMode::Hysteresis, TriggerMode::HysteresisDwell}) {
    CHECK(trigger_mode_from_string(to_string(m)) == m);
  }
  CHECK_THROWS(trigger_mode_from_string("eager"));
}

TEST_CASE("trigger truth table") {
  Extrapolator p;
  const PredictorSet ps{&p, &p};
  const std::vector<NodeId> nodes{kBs0, kAp0};
  TriggerConfig soft;
  soft.delta_db = 2.5;
  TriggerConfig hyst = soft;
  hyst.mode = TriggerMode::Hysteresis;
  hyst.n = 2;

  SUBCASE("every candidate below serving") {
    const auto s = two_step_store({{kBs0, {10, 10}}, {kAp0, {5, 5}}});
    const auto d = decide(s, 0, nodes, ps, kBs0, soft, 1);
    CHECK(d.action == SteeringAction::Stay);
    CHECK_FALSE(d.target.has_value());
  }
  SUBCASE("margin of 3 dB over a 2.5 dB threshold") {
    const auto s = two_step_store({{kBs0, {10, 10}}, {kAp0, {13, 13}}});
    const auto d = decide(s, 0, nodes, ps, kBs0, soft, 1);
    CHECK(d.action == SteeringAction::Handover);
    CHECK(d.target == kAp0);
    REQUIRE(d.candidates.size() == 1);
    CHECK(d.candidates[0].delta_db[0] == doctest::Approx(3.0));
  }
  SUBCASE("second horizon falls short under hysteresis") {
    // Forecasts 13, 12 against a flat serving 10: deltas 3 then 2.
    const auto s = two_step_store({{kBs0, {10, 10}}, {kAp0, {15, 14}}});
    CHECK(decide(s, 0, nodes, ps, kBs0, soft, 1).action == SteeringAction::Handover);
    const auto d = decide(s, 0, nodes, ps, kBs0, hyst, 1);
    CHECK(d.action == SteeringAction::Stay);
    CHECK(d.candidates[0].delta_db[1] == doctest::Approx(2.0));
  }
  SUBCASE("both horizons clear the threshold") {
    const auto s = two_step_store({{kBs0, {10, 10}}, {kAp0, {13, 14}}});
    CHECK(decide(s, 0, nodes, ps, kBs0, hyst, 1).action == SteeringAction::Handover);
  }
  SUBCASE("equal forecasts keep the serving node") {
    TriggerConfig zero = soft;
    zero.delta_db = 0.0;
    const auto s = two_step_store({{kBs0, {10, 10}}, {kAp0, {10, 10}}});
    CHECK(decide(s, 0, nodes, ps, kBs0, zero, 1).action == SteeringAction::Stay);
  }
  SUBCASE("tied candidates resolve to the lowest id") {
    const std::vector<NodeId> four{kBs0, kBs1, kAp0, kAp1};
    const auto s = two_step_store({{kBs0, {0, 0}}, {kBs1, {9, 9}}, {kAp0, {9, 9}}, {kAp1, {9, 9}}});
    const auto d = decide(s, 0, four, ps, kAp1, soft, 1);
    // kAp1 serves at 9; others tie with it, so no positive margin anywhere.
    CHECK(d.action == SteeringAction::Stay);
    const auto s2 = two_step_store({{kBs0, {0, 0}}, {kBs1, {9, 9}}, {kAp0, {9, 9}}, {kAp1, {9, 9}}});
    const auto d2 = decide(s2, 0, four, ps, kBs0, soft, 1);
    CHECK(d2.action == SteeringAction::Handover);
    CHECK(d2.target == kBs1);
  }
  SUBCASE("the strongest triggered candidate wins") {
    const std::vector<NodeId> three{kBs0, kAp0, kAp1};
    const auto s = two_step_store({{kBs0, {0, 0}}, {kAp0, {5, 5}}, {kAp1, {7, 7}}});
    CHECK(decide(s, 0, three, ps, kBs0, soft, 1).target == kAp1);
  }
  SUBCASE("serving node without a full window stays") {
    MeasurementStore s(8);
    s.ingest(report(kBs0, 1, 0));
    s.ingest(report(kAp0, 0, 30));
    s.ingest(report(kAp0, 1, 30));
    CHECK(decide(s, 0, nodes, ps, kBs0, soft, 1).action == SteeringAction::Stay);
  }
  SUBCASE("dwell mode is not stateless") {
    TriggerConfig dwell = soft;
    dwell.mode = TriggerMode::HysteresisDwell;
    dwell.n = 2;
    const auto s = two_step_store({{kBs0, {10, 10}}, {kAp0, {13, 13}}});
    CHECK_THROWS_AS(decide(s, 0, nodes, ps, kBs0, dwell, 1), ConfigError);
  }
}

TEST_CASE("dwell trigger needs consecutive instants") {
  Extrapolator p;
  TriggerConfig cfg;
  cfg.delta_db = 2.5;
  cfg.mode = TriggerMode::HysteresisDwell;
  cfg.n = 2;
  SteeringController c(PredictorSet{&p, &p}, cfg, {kBs0, kAp0}, 8);
  const std::vector<double> ap{13, 13, 13, 10, 13, 13};
  std::vector<SteeringAction> got;
  for (int k = 0; k < static_cast<int>(ap.size()); ++k) {
    c.ingest(report(kBs0, k, 10));
    c.ingest(report(kAp0, k, ap[static_cast<std::size_t>(k)]));
    got.push_back(c.step(0, kBs0, k).action);
  }
  // Window ready at k = 1. Triggers at k = 1, 2, then broken by k = 3 (forecast 7), k = 4 (16), k = 5 (13).
  using A = SteeringAction;
  CHECK(got == std::vector<A>{A::Stay, A::Stay, A::Handover, A::Stay, A::Stay, A::Handover});
}

TEST_CASE("admission and callflow") {
  const std::vector<NodeId> nodes{kBs0, kAp0};
  SUBCASE("happy path walks every stage") {
    AdmissionControl adm(nodes, 2);
    REQUIRE(adm.try_admit(kBs0));
    const auto e = execute_handover(adm, 0, 5, kBs0, kAp0);
    REQUIRE(e.complete());
    const std::vector<HandoverState> want{HandoverState::Requested,       HandoverState::AdmissionChecked,
                                          HandoverState::Acked,           HandoverState::RrcReconfigured,
                                          HandoverState::Synced,          HandoverState::StatusTransferred,
                                          HandoverState::Complete};
    REQUIRE(e.log.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(e.log[i].state == want[i]);
      if (i > 0) CHECK(e.log[i].time > e.log[i - 1].time);
      CHECK(e.log[i].time >= 5.0);
      CHECK(e.log[i].time < 6.0);
    }
    CHECK(adm.load(kBs0) == 0);
    CHECK(adm.load(kAp0) == 1);
  }
  SUBCASE("full target rejects") {
    AdmissionControl adm(nodes, 1);
    REQUIRE(adm.try_admit(kBs0));
    REQUIRE(adm.try_admit(kAp0));
    const auto e = execute_handover(adm, 0, 2, kBs0, kAp0);
    CHECK(e.final_state() == HandoverState::Failed);
    CHECK(e.reason == FailureReason::AdmissionRejected);
    CHECK(adm.load(kBs0) == 1);
    CHECK(adm.load(kAp0) == 1);
  }
  SUBCASE("self handover is an error") {
    AdmissionControl adm(nodes, 1);
    CHECK_THROWS_AS(execute_handover(adm, 0, 0, kBs0, kBs0), ConfigError);
  }
  SUBCASE("release never goes negative") {
    AdmissionControl adm(nodes, 1);
    adm.release(kAp0);
    CHECK(adm.load(kAp0) == 0);
  }
}

TEST_CASE("racing for the last slot admits exactly one UE") {
  const std::vector<NodeId> nodes{kBs0, kBs1, kAp0};
  for (int round = 0; round < 200; ++round) {
    AdmissionControl adm(nodes, 1);
    std::atomic<bool> go{false};
    HandoverEvent a, b;
    std::thread t1([&] {
      while (!go.load()) {
      }
      a = execute_handover(adm, 1, round, kBs0, kAp0);
    });
    std::thread t2([&] {
      while (!go.load()) {
      }
      b = execute_handover(adm, 2, round, kBs1, kAp0);
    });
    go = true;
    t1.join();
    t2.join();
    CHECK(static_cast<int>(a.complete()) + static_cast<int>(b.complete()) == 1);
    CHECK(adm.load(kAp0) == 1);
  }
}

TEST_CASE("episode properties") {
  Extrapolator p;
  p.w = 3;
  const PredictorSet ps{&p, &p};
  const Trace t = synthetic_trace(120);

  SUBCASE("an unreachable threshold never hands over") {
    TriggerConfig c;
    c.delta_db = 1e6;
    const auto r = run_episode(t, ps, c);
    CHECK(r.metrics.handovers == 0);
    CHECK(r.events.empty());
    for (const auto& n : r.serving_timeline) CHECK(n == r.serving_timeline.front());
  }
  SUBCASE("soundness and timeline consistency") {
    TriggerConfig c;
    c.delta_db = 1.0;
    const auto r = run_episode(t, ps, c);
    CHECK(r.first_ready_step == 2);
    CHECK(r.metrics.handovers > 2);
    for (const auto& d : r.decisions) {
      if (d.action != SteeringAction::Handover) continue;
      const auto it = std::find_if(d.candidates.begin(), d.candidates.end(),
                                   [&](const CandidateForecast& cf) { return cf.node == *d.target; });
      REQUIRE(it != d.candidates.end());
      CHECK(it->triggered);
      CHECK(it->delta_db[0] >= c.delta_db);
    }
    int changes = 0;
    for (std::size_t i = 1; i < r.serving_timeline.size(); ++i) {
      if (r.serving_timeline[i] == r.serving_timeline[i - 1]) continue;
      ++changes;
      const int step = r.timeline_steps[i];
      const bool backed = std::any_of(r.events.begin(), r.events.end(), [&](const HandoverEvent& e) {
        return e.complete() && e.step + 1 == step && e.target == r.serving_timeline[i];
      });
      CHECK(backed);
    }
    CHECK(changes == r.metrics.handovers);
    CHECK(r.serving_timeline.size() == r.oracle_timeline.size());
  }
  SUBCASE("hysteresis with one horizon reproduces soft") {
    TriggerConfig s;
    s.delta_db = 1.5;
    TriggerConfig h = s;
    h.mode = TriggerMode::Hysteresis;
    h.n = 1;
    const auto a = run_episode(t, ps, s);
    const auto b = run_episode(t, ps, h);
    REQUIRE(a.decisions.size() == b.decisions.size());
    for (std::size_t i = 0; i < a.decisions.size(); ++i) {
      CHECK(a.decisions[i].action == b.decisions[i].action);
      CHECK(a.decisions[i].target == b.decisions[i].target);
    }
    CHECK(a.serving_timeline == b.serving_timeline);
  }
  SUBCASE("longer hysteresis never adds handovers") {
    TriggerConfig s;
    s.delta_db = 1.0;
    TriggerConfig h = s;
    h.mode = TriggerMode::Hysteresis;
    h.n = 3;
    CHECK(run_episode(t, ps, h).metrics.handovers <= run_episode(t, ps, s).metrics.handovers);
  }
  SUBCASE("csv writers") {
    TriggerConfig c;
    c.delta_db = 1.0;
    const auto r = run_episode(t, ps, c);
    const auto dir = fs::temp_directory_path() / "pcho_steer";
    fs::create_directories(dir);
    write_decision_csv(dir / "d.csv", r.decisions);
    write_event_csv(dir / "e.csv", r.events);
    std::ifstream d(dir / "d.csv");
    std::string line;
    std::getline(d, line);
    CHECK(line.rfind("step,serving,target,action,candidate", 0) == 0);
    std::size_t rows = 0;
    while (std::getline(d, line)) ++rows;
    CHECK(rows == 2 * r.decisions.size());
    std::ifstream e(dir / "e.csv");
    rows = 0;
    while (std::getline(e, line)) ++rows;
    CHECK(rows == r.events.size() + 1);
    fs::remove_all(dir);
  }
}
