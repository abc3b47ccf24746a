#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcho/topology.hpp"

namespace pcho {

struct Trajectory {
  int id = 0;
  std::vector<Point> points;
  double sample_interval_s = 1.0;
  double speed_mps = 3.0;

  std::size_t size() const { return points.size(); }
  double step_length() const { return speed_mps * sample_interval_s; }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct TrajectoryParams {
  int n_waypoints = 6;
  double speed_mps = 3.0;
  double sample_interval_s = 1.0;
  // Shortest acceptable trajectory: W_max + H_max + 1 with W_max = 15, H_max = 5.
  std::size_t min_points = 21;
  int max_attempts = 100;
  friend bool operator==(const TrajectoryParams&, const TrajectoryParams&) = default;
};

// Centripetal Catmull-Rom curve through `waypoints`, walked at constant speed:
// every consecutive pair of returned points is exactly speed * dt apart.
// Throws TrajectoryError when the waypoints span zero length.
std::vector<Point> constant_speed_walk(std::span<const Point> waypoints, double step_m);

// Dense polyline of the interpolating curve (samples_per_segment points per span).
std::vector<Point> spline_polyline(std::span<const Point> waypoints, int samples_per_segment = 64);

Trajectory trajectory_from_waypoints(std::span<const Point> waypoints, int id, double speed_mps,
                                     double sample_interval_s);

// Draws random waypoints in the area until the interpolant stays inside it and the
// walk has at least params.min_points samples. Deterministic per (id, seed).
Trajectory generate_trajectory(const NetworkTopology& topo, int id, const TrajectoryParams& params,
                               std::uint64_t seed);

// Ids 0..n-1; trajectory i draws from its own substream of `seed`.
std::vector<Trajectory> generate_trajectory_set(const NetworkTopology& topo, int n_trajectories,
                                                const TrajectoryParams& params, std::uint64_t seed);

void write_trajectories_csv(const std::filesystem::path& path, std::span<const Trajectory> trajectories);

void to_json(nlohmann::json& j, const Trajectory& t);
void from_json(const nlohmann::json& j, Trajectory& t);
void to_json(nlohmann::json& j, const TrajectoryParams& p);
void from_json(const nlohmann::json& j, TrajectoryParams& p);

// Scenario file: topology plus trajectory set, versioned.
inline constexpr int kScenarioFormatVersion = 1;
nlohmann::json scenario_to_json(const NetworkTopology& topo, std::span<const Trajectory> trajectories);
void scenario_from_json(const nlohmann::json& j, NetworkTopology& topo, std::vector<Trajectory>& trajectories);

}  // namespace pcho
