#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pcho/channel.hpp"
#include "pcho/error.hpp"
#include "pcho/sim.hpp"

using namespace pcho;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Trajectory fixed_points(int id, std::vector<Point> pts) {
  Trajectory t;
  t.id = id;
  t.points = std::move(pts);
  return t;
}

fs::path tmpdir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("pcho_sim_" + name);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("UE on top of a BS sees that BS strongest") {
  const auto topo = build_default_topology(7);
  const auto t = fixed_points(0, std::vector<Point>(30, topo.bs_list[0].position));
  const auto trace = simulate_trace(topo, t, RadioDefaults{}, 7);
  const auto& s0 = trace.of({NodeKind::CellularBS, 0});
  const auto& s1 = trace.of({NodeKind::CellularBS, 1});
  for (std::size_t k = 0; k < trace.length(); ++k) CHECK(s0[k].rssi_dbm > s1[k].rssi_dbm);
}

TEST_CASE("co-located equal BSs without fading give 0 dB") {
  NetworkTopology topo = build_default_topology(7);
  topo.ap_list.clear();
  topo.bs_list[1].position = topo.bs_list[0].position;
  for (auto& b : topo.bs_list) b.rician_k_factor_db = 200.0;
  const Point p{topo.bs_list[0].position.x + 30.0, topo.bs_list[0].position.y};
  const auto trace = simulate_trace(topo, fixed_points(0, {p, p, p}), RadioDefaults{}, 3);
  for (const auto& s : trace.series) {
    for (const auto& m : s) CHECK(std::abs(m.sig_quality_db) < 1e-3);
  }
}

TEST_CASE("single BS matches the closed-form SNR") {
  const RadioDefaults radio;
  NetworkTopology topo = build_default_topology(7, radio);
  topo.ap_list.clear();
  topo.bs_list.resize(1);
  topo.bs_list[0].rician_k_factor_db = 200.0;
  const auto& bs = topo.bs_list[0];
  const std::vector<double> ds{12.0, 75.0, 160.0};
  std::vector<Point> pts;
  for (double d : ds) pts.push_back({bs.position.x + d, bs.position.y});
  const auto trace = simulate_trace(topo, fixed_points(0, pts), radio, 1);
  const double p_t = std::pow(10.0, (radio.bs_tx_power_dbm - 30.0) / 10.0);
  const double noise = std::pow(10.0, (radio.noise_psd_dbm_per_hz - 30.0) / 10.0) * radio.bs_bandwidth_hz;
  // K from the 50 m calibration: P_t K 50^-a = -70 dBm.
  const double k = std::pow(10.0, (-70.0 - 30.0) / 10.0) / p_t * std::pow(50.0, radio.bs_pathloss_exponent);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double snr_db = 10.0 * std::log10(p_t * k * std::pow(ds[i], -3.5) / noise);
    CHECK(trace.series[0][i].sig_quality_db == doctest::Approx(snr_db).epsilon(1e-9));
  }
}

TEST_CASE("trace invariants over a campaign") {
  const RadioDefaults radio;
  const auto topo = build_default_topology(7, radio);
  const auto trajs = generate_trajectory_set(topo, 6, TrajectoryParams{}, 7);
  const auto traces = simulate_campaign(topo, trajs, radio, 7);
  REQUIRE(traces.size() == 6);
  for (const auto& tr : traces) {
    REQUIRE(tr.nodes.size() == 6);
    for (const auto& s : tr.series) {
      REQUIRE(s.size() == tr.length());
      for (std::size_t k = 0; k < s.size(); ++k) {
        const auto& m = s[k];
        CHECK(m.step == static_cast<int>(k));
        CHECK(m.traj_id == tr.traj_id);
        CHECK(std::isfinite(m.rssi_dbm));
        CHECK(std::isfinite(m.sig_quality_db));
        CHECK(std::isfinite(m.throughput_bps));
        if (m.sig_quality_db > radio.sig_quality_floor_db) {
          const double expect = 20e6 * std::log2(1.0 + std::pow(10.0, m.sig_quality_db / 10.0));
          CHECK(std::abs(m.throughput_bps - expect) <= 1e-9 * expect);
        }
      }
    }
  }
}

TEST_CASE("seed isolation between trajectories") {
  const auto topo = build_default_topology(7);
  const auto trajs = generate_trajectory_set(topo, 5, TrajectoryParams{}, 7);
  const auto all = simulate_campaign(topo, trajs, RadioDefaults{}, 7);
  std::vector<Trajectory> without(trajs);
  without.erase(without.begin() + 2);
  const auto some = simulate_campaign(topo, without, RadioDefaults{}, 7);
  CHECK(some[0] == all[0]);
  CHECK(some[1] == all[1]);
  CHECK(some[2] == all[3]);
  CHECK(some[3] == all[4]);
}

TEST_CASE("campaign preconditions") {
  const auto topo = build_default_topology(7);
  CHECK_THROWS_AS(simulate_campaign(topo, std::vector<Trajectory>{}, RadioDefaults{}, 7), SimulationError);
  NetworkTopology empty;
  empty.area = topo.area;
  const auto t = fixed_points(0, {{1, 1}, {2, 2}});
  CHECK_THROWS_AS(simulate_campaign(empty, std::vector<Trajectory>{t}, RadioDefaults{}, 7), SimulationError);
}

TEST_CASE("trace CSV is deterministic and round-trips") {
  const auto topo = build_default_topology(7);
  const auto trajs = generate_trajectory_set(topo, 3, TrajectoryParams{}, 7);
  const auto dir = tmpdir("csv");
  const auto a = simulate_campaign(topo, trajs, RadioDefaults{}, 7);
  const auto b = simulate_campaign(topo, trajs, RadioDefaults{}, 7);
  write_trace_csv(dir / "a_bs.csv", dir / "a_ap.csv", a);
  write_trace_csv(dir / "b_bs.csv", dir / "b_ap.csv", b);
  CHECK(slurp(dir / "a_bs.csv") == slurp(dir / "b_bs.csv"));
  CHECK(slurp(dir / "a_ap.csv") == slurp(dir / "b_ap.csv"));
  const auto back = read_trace_csv(dir / "a_bs.csv", dir / "a_ap.csv");
  CHECK(back == a);
  fs::remove_all(dir);
}

namespace {

Trace synthetic(const std::vector<std::vector<double>>& q) {
  Trace t;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const NodeId id = i == 0 ? NodeId{NodeKind::CellularBS, 0} : NodeId{NodeKind::WifiAP, i - 1};
    t.nodes.push_back(id);
    std::vector<MeasurementTuple> s;
    for (std::size_t k = 0; k < q[i].size(); ++k) s.push_back({0, static_cast<int>(k), id, -60.0, q[i][k], 1.0});
    t.series.push_back(std::move(s));
  }
  return t;
}

}  // namespace

TEST_CASE("best server timeline") {
  SUBCASE("single node") {
    const auto tl = best_server_timeline(synthetic({{1, 5, -3, 2}}));
    for (const auto& n : tl) CHECK(n == NodeId{NodeKind::CellularBS, 0});
  }
  SUBCASE("crossing curves switch at the first strict excess") {
    std::vector<double> a, b;
    for (int k = 0; k < 20; ++k) {
      a.push_back(10.0 - k);
      b.push_back(k - 5.0);
    }
    const auto tl = best_server_timeline(synthetic({a, b}));
    // Brute-force oracle.
    for (int k = 0; k < 20; ++k) {
      const bool ap = b[static_cast<std::size_t>(k)] > a[static_cast<std::size_t>(k)];
      CHECK(tl[static_cast<std::size_t>(k)].kind == (ap ? NodeKind::WifiAP : NodeKind::CellularBS));
    }
  }
  SUBCASE("ties go to the lower id") {
    const auto tl = best_server_timeline(synthetic({{3, 3}, {3, 4}, {3, 4}}));
    CHECK(tl[0] == NodeId{NodeKind::CellularBS, 0});
    CHECK(tl[1] == NodeId{NodeKind::WifiAP, 0});
  }
}
