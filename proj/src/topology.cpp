#include "pcho/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <utility>

#include "pcho/error.hpp"
#include "pcho/rng.hpp"

namespace pcho {

namespace {

double dbm_to_w(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

}  // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::string to_string(NodeKind kind) { return kind == NodeKind::CellularBS ? "BS" : "AP"; }

NodeKind node_kind_from_string(const std::string& s) {
  if (s == "BS") return NodeKind::CellularBS;
  if (s == "AP") return NodeKind::WifiAP;
  throw SchemaError("unknown node kind '" + s + "'");
}

std::string NodeId::str() const { return to_string(kind) + std::to_string(index); }

NodeId parse_node_id(const std::string& s) {
  if (s.size() < 3) throw SchemaError("malformed node id '" + s + "'");
  NodeId id;
  id.kind = node_kind_from_string(s.substr(0, 2));
  std::size_t pos = 0;
  id.index = std::stoul(s.substr(2), &pos);
  if (pos != s.size() - 2) throw SchemaError("malformed node id '" + s + "'");
  return id;
}

double RadioDefaults::bs_pathloss_scale() const {
  // P_t K d_ref^-alpha = P_ref
  const double ratio = dbm_to_w(bs_ref_rssi_dbm) / dbm_to_w(bs_tx_power_dbm);
  return ratio * std::pow(bs_ref_distance_m, bs_pathloss_exponent);
}

double RadioDefaults::noise_psd_w_per_hz() const { return dbm_to_w(noise_psd_dbm_per_hz); }

std::vector<NodeId> NetworkTopology::nodes() const {
  std::vector<NodeId> out;
  out.reserve(node_count());
  for (std::size_t i = 0; i < bs_list.size(); ++i) out.push_back({NodeKind::CellularBS, i});
  for (std::size_t i = 0; i < ap_list.size(); ++i) out.push_back({NodeKind::WifiAP, i});
  return out;
}

Point NetworkTopology::position(NodeId id) const {
  if (id.kind == NodeKind::CellularBS) return bs_list.at(id.index).position;
  return ap_list.at(id.index).position;
}

double coverage_radius_m(const BsConfig& bs, double floor_dbm) {
  // P_t K d^-alpha = floor  =>  d = (P_t K / floor)^(1/alpha)
  const double floor_w = dbm_to_w(floor_dbm);
  return std::pow(bs.tx_power_w * bs.pathloss_scale / floor_w, 1.0 / bs.pathloss_exponent);
}

void validate(const NetworkTopology& topo, double coverage_floor_dbm) {
  if (topo.bs_list.empty()) throw TopologyError("topology needs at least one BS");
  if (!(topo.area.width > 0.0 && topo.area.height > 0.0)) throw TopologyError("area must be non-empty");
  for (std::size_t i = 0; i < topo.bs_list.size(); ++i) {
    const auto& bs = topo.bs_list[i];
    const std::string name = "BS" + std::to_string(i);
    if (!(bs.tx_power_w > 0.0)) throw TopologyError(name + ": tx_power must be > 0");
    if (!(bs.pathloss_exponent > 0.0)) throw TopologyError(name + ": pathloss exponent must be > 0");
    if (!(bs.pathloss_scale > 0.0)) throw TopologyError(name + ": pathloss scale must be > 0");
    if (!(bs.bandwidth_hz > 0.0)) throw TopologyError(name + ": bandwidth must be > 0");
    if (!topo.area.contains(bs.position)) throw TopologyError(name + ": position outside area");
  }
  std::set<std::pair<std::size_t, int>> channels;
  for (std::size_t i = 0; i < topo.ap_list.size(); ++i) {
    const auto& ap = topo.ap_list[i];
    const std::string name = "AP" + std::to_string(i);
    if (!(ap.tx_power_w > 0.0)) throw TopologyError(name + ": tx_power must be > 0");
    if (!(ap.bandwidth_hz > 0.0)) throw TopologyError(name + ": bandwidth must be > 0");
    if (!(ap.ref_distance_m > 0.0)) throw TopologyError(name + ": reference distance must be > 0");
    if (!(ap.indoor_exponent > 0.0)) throw TopologyError(name + ": indoor exponent must be > 0");
    for (double l : ap.obstacle_losses_db) {
      if (!(l >= 0.0)) throw TopologyError(name + ": obstacle losses must be >= 0 dB");
    }
    if (!topo.area.contains(ap.position)) throw TopologyError(name + ": position outside area");
    if (ap.parent_bs >= topo.bs_list.size()) throw TopologyError(name + ": parent BS out of range");
    bool covered = false;
    for (const auto& bs : topo.bs_list) {
      if (distance(bs.position, ap.position) <= coverage_radius_m(bs, coverage_floor_dbm)) covered = true;
    }
    if (!covered) throw TopologyError(name + ": not inside any BS coverage disc");
    if (!channels.emplace(ap.parent_bs, ap.channel_index).second) {
      throw TopologyError(name + ": channel " + std::to_string(ap.channel_index) +
                          " reused under BS" + std::to_string(ap.parent_bs));
    }
  }
}

NetworkTopology build_default_topology(std::uint64_t seed, const RadioDefaults& radio,
                                       const LayoutParams& layout) {
  NetworkTopology topo;
  topo.area = {layout.area_width_m, layout.area_height_m};

  const double cx = layout.area_width_m / 2.0;
  const double cy = layout.area_height_m / 2.0;
  const double k_scale = radio.bs_pathloss_scale();
  for (int b = 0; b < 2; ++b) {
    BsConfig bs;
    bs.position = {cx + (b == 0 ? -0.5 : 0.5) * layout.bs_spacing_m, cy};
    bs.tx_power_w = dbm_to_w(radio.bs_tx_power_dbm);
    bs.carrier_freq_hz = radio.bs_carrier_hz;
    bs.bandwidth_hz = radio.bs_bandwidth_hz;
    bs.pathloss_exponent = radio.bs_pathloss_exponent;
    bs.pathloss_scale = k_scale;
    bs.rician_k_factor_db = radio.rician_k_factor_db;
    topo.bs_list.push_back(bs);
  }

  // Non-overlapping 2.4 GHz channels.
  constexpr int kChannels[] = {1, 6, 11};
  Rng rng(derive_seed(seed, {0x746f706fULL}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double margin = layout.edge_margin_m;
  for (std::size_t b = 0; b < topo.bs_list.size(); ++b) {
    const Point c = topo.bs_list[b].position;
    const double base_angle = 2.0 * std::numbers::pi * unit(rng);
    for (int a = 0; a < layout.aps_per_bs; ++a) {
      ApConfig ap;
      // Spread the APs of one cell around it, then clamp into the area.
      const double angle = base_angle + 2.0 * std::numbers::pi * a / layout.aps_per_bs +
                           0.5 * (unit(rng) - 0.5);
      const double r = layout.ap_min_offset_m + (layout.ap_max_offset_m - layout.ap_min_offset_m) * unit(rng);
      ap.position = {std::clamp(c.x + r * std::cos(angle), margin, layout.area_width_m - margin),
                     std::clamp(c.y + r * std::sin(angle), margin, layout.area_height_m - margin)};
      ap.tx_power_w = dbm_to_w(radio.ap_tx_power_dbm);
      ap.carrier_freq_hz = radio.ap_carrier_hz;
      ap.bandwidth_hz = radio.ap_bandwidth_hz;
      ap.ref_pathloss_db = radio.ap_ref_pathloss_db;
      ap.ref_distance_m = radio.ap_ref_distance_m;
      ap.indoor_exponent = radio.ap_indoor_exponent;
      ap.obstacle_losses_db = radio.ap_obstacle_losses_db;
      ap.channel_index = kChannels[a % 3];
      ap.parent_bs = b;
      topo.ap_list.push_back(ap);
    }
  }
  validate(topo, radio.coverage_floor_dbm);
  return topo;
}

// --- serialization -------------------------------------------------------

void to_json(nlohmann::json& j, const Point& p) { j = nlohmann::json::array({p.x, p.y}); }
void from_json(const nlohmann::json& j, Point& p) {
  p.x = j.at(0).get<double>();
  p.y = j.at(1).get<double>();
}

void to_json(nlohmann::json& j, const NodeId& id) { j = id.str(); }
void from_json(const nlohmann::json& j, NodeId& id) { id = parse_node_id(j.get<std::string>()); }

void to_json(nlohmann::json& j, const BsConfig& b) {
  j = {{"position", b.position},         {"tx_power_w", b.tx_power_w},
       {"carrier_freq_hz", b.carrier_freq_hz}, {"bandwidth_hz", b.bandwidth_hz},
       {"pathloss_exponent", b.pathloss_exponent}, {"pathloss_scale", b.pathloss_scale},
       {"rician_k_factor_db", b.rician_k_factor_db}};
}
void from_json(const nlohmann::json& j, BsConfig& b) {
  j.at("position").get_to(b.position);
  j.at("tx_power_w").get_to(b.tx_power_w);
  j.at("carrier_freq_hz").get_to(b.carrier_freq_hz);
  j.at("bandwidth_hz").get_to(b.bandwidth_hz);
  j.at("pathloss_exponent").get_to(b.pathloss_exponent);
  j.at("pathloss_scale").get_to(b.pathloss_scale);
  j.at("rician_k_factor_db").get_to(b.rician_k_factor_db);
}

void to_json(nlohmann::json& j, const ApConfig& a) {
  j = {{"position", a.position},
       {"tx_power_w", a.tx_power_w},
       {"carrier_freq_hz", a.carrier_freq_hz},
       {"bandwidth_hz", a.bandwidth_hz},
       {"ref_pathloss_db", a.ref_pathloss_db},
       {"ref_distance_m", a.ref_distance_m},
       {"indoor_exponent", a.indoor_exponent},
       {"obstacle_losses_db", a.obstacle_losses_db},
       {"channel_index", a.channel_index},
       {"parent_bs", a.parent_bs}};
}
void from_json(const nlohmann::json& j, ApConfig& a) {
  j.at("position").get_to(a.position);
  j.at("tx_power_w").get_to(a.tx_power_w);
  j.at("carrier_freq_hz").get_to(a.carrier_freq_hz);
  j.at("bandwidth_hz").get_to(a.bandwidth_hz);
  j.at("ref_pathloss_db").get_to(a.ref_pathloss_db);
  j.at("ref_distance_m").get_to(a.ref_distance_m);
  j.at("indoor_exponent").get_to(a.indoor_exponent);
  j.at("obstacle_losses_db").get_to(a.obstacle_losses_db);
  j.at("channel_index").get_to(a.channel_index);
  j.at("parent_bs").get_to(a.parent_bs);
}

void to_json(nlohmann::json& j, const NetworkTopology& t) {
  j = {{"area", {{"width_m", t.area.width}, {"height_m", t.area.height}}},
       {"bs", t.bs_list},
       {"ap", t.ap_list}};
}
void from_json(const nlohmann::json& j, NetworkTopology& t) {
  t.area.width = j.at("area").at("width_m").get<double>();
  t.area.height = j.at("area").at("height_m").get<double>();
  j.at("bs").get_to(t.bs_list);
  j.at("ap").get_to(t.ap_list);
}

#define PCHO_RADIO_FIELDS(X)                                                             \
  X(bs_tx_power_dbm) X(ap_tx_power_dbm) X(noise_psd_dbm_per_hz) X(bs_bandwidth_hz)       \
  X(ap_bandwidth_hz) X(bs_carrier_hz) X(ap_carrier_hz) X(rician_k_factor_db)             \
  X(bs_pathloss_exponent) X(bs_ref_rssi_dbm) X(bs_ref_distance_m) X(ap_ref_pathloss_db)  \
  X(ap_ref_distance_m) X(ap_indoor_exponent) X(ap_obstacle_losses_db) X(coverage_floor_dbm) \
  X(rssi_floor_dbm) X(sig_quality_floor_db)

void to_json(nlohmann::json& j, const RadioDefaults& r) {
  j = nlohmann::json::object();
#define X(f) j[#f] = r.f;
  PCHO_RADIO_FIELDS(X)
#undef X
}
void from_json(const nlohmann::json& j, RadioDefaults& r) {
#define X(f) \
  if (j.contains(#f)) j.at(#f).get_to(r.f);
  PCHO_RADIO_FIELDS(X)
#undef X
}

#define PCHO_LAYOUT_FIELDS(X) \
  X(area_width_m) X(area_height_m) X(bs_spacing_m) X(ap_min_offset_m) X(ap_max_offset_m) X(edge_margin_m) X(aps_per_bs)

void to_json(nlohmann::json& j, const LayoutParams& l) {
  j = nlohmann::json::object();
#define X(f) j[#f] = l.f;
  PCHO_LAYOUT_FIELDS(X)
#undef X
}
void from_json(const nlohmann::json& j, LayoutParams& l) {
#define X(f) \
  if (j.contains(#f)) j.at(#f).get_to(l.f);
  PCHO_LAYOUT_FIELDS(X)
#undef X
}

}  // namespace pcho
