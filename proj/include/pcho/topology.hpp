#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pcho {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

double distance(Point a, Point b);

enum class NodeKind : std::uint8_t { CellularBS = 0, WifiAP = 1 };

std::string to_string(NodeKind kind);  // "BS" / "AP"
NodeKind node_kind_from_string(const std::string& s);

// Ordering is (kind, index) ascending: every BS sorts before every AP.
struct NodeId {
  NodeKind kind = NodeKind::CellularBS;
  std::size_t index = 0;

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
  std::string str() const;  // e.g. "BS0", "AP3"
};

NodeId parse_node_id(const std::string& s);

// Axis-aligned rectangle [0, width] x [0, height].
struct Area {
  double width = 0.0;
  double height = 0.0;
  bool contains(Point p) const { return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height; }
  friend bool operator==(const Area&, const Area&) = default;
};

struct BsConfig {
  Point position;
  double tx_power_w = 0.0;
  double carrier_freq_hz = 0.0;
  double bandwidth_hz = 0.0;
  double pathloss_exponent = 0.0;  // alpha in G(d) = K d^-alpha
  double pathloss_scale = 0.0;     // K
  double rician_k_factor_db = 0.0;
  friend bool operator==(const BsConfig&, const BsConfig&) = default;
};

struct ApConfig {
  Point position;
  double tx_power_w = 0.0;
  double carrier_freq_hz = 0.0;
  double bandwidth_hz = 0.0;
  double ref_pathloss_db = 0.0;  // PL(d0)
  double ref_distance_m = 1.0;   // d0
  double indoor_exponent = 0.0;  // gamma
  std::vector<double> obstacle_losses_db;
  int channel_index = 0;
  std::size_t parent_bs = 0;
  friend bool operator==(const ApConfig&, const ApConfig&) = default;
};

// Radio constants that the deployment leaves free. Every field ends up in the
// experiment manifest.
struct RadioDefaults {
  double bs_tx_power_dbm = 40.0;
  double ap_tx_power_dbm = 20.0;
  double noise_psd_dbm_per_hz = -174.0;
  double bs_bandwidth_hz = 20e6;
  double ap_bandwidth_hz = 20e6;
  double bs_carrier_hz = 3.5e9;
  double ap_carrier_hz = 2.4e9;
  double rician_k_factor_db = 6.0;
  double bs_pathloss_exponent = 3.5;
  // K is solved so that the mean RSSI at bs_ref_distance_m equals bs_ref_rssi_dbm.
  double bs_ref_rssi_dbm = -70.0;
  double bs_ref_distance_m = 50.0;
  double ap_ref_pathloss_db = 40.05;  // free space at 1 m, 2.4 GHz
  double ap_ref_distance_m = 1.0;
  double ap_indoor_exponent = 3.0;
  std::vector<double> ap_obstacle_losses_db = {5.0};
  double coverage_floor_dbm = -100.0;
  double rssi_floor_dbm = -200.0;
  double sig_quality_floor_db = -100.0;

  double bs_pathloss_scale() const;
  double noise_psd_w_per_hz() const;
  friend bool operator==(const RadioDefaults&, const RadioDefaults&) = default;
};

// Geometry of the default two-cell deployment.
struct LayoutParams {
  double area_width_m = 360.0;
  double area_height_m = 200.0;
  double bs_spacing_m = 180.0;
  double ap_min_offset_m = 35.0;
  double ap_max_offset_m = 70.0;
  double edge_margin_m = 10.0;
  int aps_per_bs = 2;
  friend bool operator==(const LayoutParams&, const LayoutParams&) = default;
};

struct NetworkTopology {
  std::vector<BsConfig> bs_list;
  std::vector<ApConfig> ap_list;
  Area area;

  std::size_t node_count() const { return bs_list.size() + ap_list.size(); }
  // All nodes in NodeId order.
  std::vector<NodeId> nodes() const;
  Point position(NodeId id) const;
  friend bool operator==(const NetworkTopology&, const NetworkTopology&) = default;
};

// Distance at which the mean received power of `bs` drops to `floor_dbm`.
double coverage_radius_m(const BsConfig& bs, double floor_dbm);

// Throws TopologyError on the first violated invariant.
void validate(const NetworkTopology& topo, double coverage_floor_dbm = -100.0);

// Two 3.5 GHz cells with overlapping coverage, two 2.4 GHz APs per cell on
// distinct channels. AP placement around each BS is jittered by `seed`.
NetworkTopology build_default_topology(std::uint64_t seed, const RadioDefaults& radio = {},
                                       const LayoutParams& layout = {});

void to_json(nlohmann::json& j, const Point& p);
void from_json(const nlohmann::json& j, Point& p);
void to_json(nlohmann::json& j, const NodeId& id);
void from_json(const nlohmann::json& j, NodeId& id);
void to_json(nlohmann::json& j, const BsConfig& b);
void from_json(const nlohmann::json& j, BsConfig& b);
void to_json(nlohmann::json& j, const ApConfig& a);
void from_json(const nlohmann::json& j, ApConfig& a);
void to_json(nlohmann::json& j, const NetworkTopology& t);
void from_json(const nlohmann::json& j, NetworkTopology& t);
void to_json(nlohmann::json& j, const RadioDefaults& r);
void from_json(const nlohmann::json& j, RadioDefaults& r);
void to_json(nlohmann::json& j, const LayoutParams& l);
void from_json(const nlohmann::json& j, LayoutParams& l);

}  // namespace pcho
