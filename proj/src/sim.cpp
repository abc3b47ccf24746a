#include "pcho/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "pcho/channel.hpp"
#include "pcho/csv.hpp"
#include "pcho/error.hpp"
#include "pcho/rng.hpp"

namespace pcho {

namespace {

constexpr std::uint64_t kFadingStream = 0x66616465ULL;

double quality_db(double linear, const RadioDefaults& radio) {
  if (!(linear > 0.0)) return radio.sig_quality_floor_db;
  return std::max(linear_to_db(linear), radio.sig_quality_floor_db);
}

}  // namespace

const std::vector<MeasurementTuple>& Trace::of(NodeId node) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] == node) return series[i];
  }
  throw SimulationError("trace has no node " + node.str());
}

Trace simulate_trace(const NetworkTopology& topo, const Trajectory& trajectory, const RadioDefaults& radio,
                     std::uint64_t seed) {
  if (topo.bs_list.empty()) throw SimulationError("topology has no BS");
  const std::size_t n_bs = topo.bs_list.size();
  const std::size_t n_ap = topo.ap_list.size();
  const double n0 = radio.noise_psd_w_per_hz();

  // One fading stream per (trajectory, BS) link.
  std::vector<Rng> fading_rng;
  for (std::size_t b = 0; b < n_bs; ++b) {
    fading_rng.push_back(make_rng(seed, {kFadingStream, static_cast<std::uint64_t>(trajectory.id), b}));
  }

  Trace trace;
  trace.traj_id = trajectory.id;
  trace.nodes = topo.nodes();
  trace.series.assign(trace.nodes.size(), {});
  for (auto& s : trace.series) s.reserve(trajectory.points.size());

  std::vector<LinkBudget> bs_links(n_bs);
  std::vector<LinkBudget> interferers;
  for (std::size_t k = 0; k < trajectory.points.size(); ++k) {
    const Point ue = trajectory.points[k];
    for (std::size_t b = 0; b < n_bs; ++b) {
      const auto& bs = topo.bs_list[b];
      const double gain = cellular_pathloss_gain(distance(ue, bs.position), bs.pathloss_scale, bs.pathloss_exponent);
      const double fading = draw_rician(bs.rician_k_factor_db, fading_rng[b]).power();
      bs_links[b] = LinkBudget::make(bs.tx_power_w, gain, fading);
    }
    for (std::size_t b = 0; b < n_bs; ++b) {
      interferers.clear();
      for (std::size_t i = 0; i < n_bs; ++i) {
        if (i != b) interferers.push_back(bs_links[i]);
      }
      const auto& bs = topo.bs_list[b];
      const double sinr = cellular_sinr(bs_links[b], interferers, {n0, bs.bandwidth_hz});
      trace.series[b].push_back({trajectory.id, static_cast<int>(k), trace.nodes[b],
                                 std::max(rssi_dbm(bs_links[b].rx_power_w), radio.rssi_floor_dbm),
                                 quality_db(sinr, radio), bs.bandwidth_hz * std::log2(1.0 + sinr)});
    }
    for (std::size_t a = 0; a < n_ap; ++a) {
      const auto& ap = topo.ap_list[a];
      const double gain = db_to_linear(-wifi_pathloss_db(distance(ue, ap.position), ap));
      const auto link = LinkBudget::make(ap.tx_power_w, gain, 1.0);
      const double snr = wifi_snr(link, {n0, ap.bandwidth_hz});
      trace.series[n_bs + a].push_back({trajectory.id, static_cast<int>(k), trace.nodes[n_bs + a],
                                        std::max(rssi_dbm(link.rx_power_w), radio.rssi_floor_dbm),
                                        quality_db(snr, radio), ap.bandwidth_hz * std::log2(1.0 + snr)});
    }
  }
  return trace;
}

std::vector<Trace> simulate_campaign(const NetworkTopology& topo, std::span<const Trajectory> trajectories,
                                     const RadioDefaults& radio, std::uint64_t seed) {
  if (trajectories.empty()) throw SimulationError("campaign needs at least one trajectory");
  if (topo.node_count() == 0) throw SimulationError("topology has no nodes");
  std::vector<Trace> out;
  out.reserve(trajectories.size());
  for (const auto& t : trajectories) out.push_back(simulate_trace(topo, t, radio, seed));
  return out;
}

std::vector<NodeId> best_server_timeline(const Trace& trace) {
  if (trace.nodes.empty() || trace.length() == 0) throw SimulationError("empty trace");
  std::vector<NodeId> out(trace.length());
  for (std::size_t k = 0; k < trace.length(); ++k) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < trace.nodes.size(); ++i) {
      const double v = trace.series[i][k].sig_quality_db;
      const double b = trace.series[best][k].sig_quality_db;
      if (v > b || (v == b && trace.nodes[i] < trace.nodes[best])) best = i;
    }
    out[k] = trace.nodes[best];
  }
  return out;
}

namespace {

constexpr const char* kTraceHeader = "traj_id,step,node_kind,node_index,rssi_dbm,sig_quality_db,throughput_bps";

void write_rows(std::ostream& os, std::span<const Trace> traces, NodeKind kind) {
  os << kTraceHeader << '\n';
  for (const auto& tr : traces) {
    for (std::size_t i = 0; i < tr.nodes.size(); ++i) {
      if (tr.nodes[i].kind != kind) continue;
      for (const auto& m : tr.series[i]) {
        os << m.traj_id << ',' << m.step << ',' << to_string(m.node.kind) << ',' << m.node.index << ','
           << csv::num17(m.rssi_dbm) << ',' << csv::num17(m.sig_quality_db) << ','
           << csv::num17(m.throughput_bps) << '\n';
      }
    }
  }
}

void read_rows(const std::filesystem::path& path, std::map<int, std::map<NodeId, std::vector<MeasurementTuple>>>& out) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path.string());
  std::string line;
  std::getline(is, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw SchemaError(path.string() + ": unexpected trace header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = csv::split(line);
    if (f.size() != 7) throw SchemaError(path.string() + ": expected 7 columns");
    MeasurementTuple m;
    m.traj_id = static_cast<int>(csv::to_int(f[0]));
    m.step = static_cast<int>(csv::to_int(f[1]));
    m.node = {node_kind_from_string(f[2]), static_cast<std::size_t>(csv::to_int(f[3]))};
    m.rssi_dbm = csv::to_double(f[4]);
    m.sig_quality_db = csv::to_double(f[5]);
    m.throughput_bps = csv::to_double(f[6]);
    out[m.traj_id][m.node].push_back(m);
  }
}

}  // namespace

void write_trace_csv(const std::filesystem::path& bs_path, const std::filesystem::path& ap_path,
                     std::span<const Trace> traces) {
  std::ofstream bs(bs_path);
  std::ofstream ap(ap_path);
  if (!bs || !ap) throw Error("cannot write trace csv");
  write_rows(bs, traces, NodeKind::CellularBS);
  write_rows(ap, traces, NodeKind::WifiAP);
}

std::vector<Trace> read_trace_csv(const std::filesystem::path& bs_path, const std::filesystem::path& ap_path) {
  std::map<int, std::map<NodeId, std::vector<MeasurementTuple>>> rows;
  read_rows(bs_path, rows);
  read_rows(ap_path, rows);
  std::vector<Trace> out;
  for (auto& [traj, per_node] : rows) {
    Trace t;
    t.traj_id = traj;
    for (auto& [node, series] : per_node) {
      std::sort(series.begin(), series.end(), [](const auto& a, const auto& b) { return a.step < b.step; });
      for (std::size_t k = 0; k < series.size(); ++k) {
        if (series[k].step != static_cast<int>(k)) throw SchemaError("trace steps not contiguous");
      }
      if (!t.series.empty() && series.size() != t.length()) throw SchemaError("trace nodes not aligned");
      t.nodes.push_back(node);
      t.series.push_back(std::move(series));
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace pcho
