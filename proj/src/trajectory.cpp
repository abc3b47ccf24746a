#include "pcho/trajectory.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "pcho/csv.hpp"
#include "pcho/error.hpp"
#include "pcho/rng.hpp"

namespace pcho {

namespace {

Point lerp(Point a, Point b, double wa, double wb) { return {wa * a.x + wb * b.x, wa * a.y + wb * b.y}; }

// Centripetal (alpha = 1/2) Catmull-Rom over deduplicated control points, with
// reflected phantom points at both ends.
class CentripetalSpline {
 public:
  explicit CentripetalSpline(std::span<const Point> waypoints) {
    for (const Point& p : waypoints) {
      if (ctrl_.empty() || distance(ctrl_.back(), p) > 0.0) ctrl_.push_back(p);
    }
    if (ctrl_.size() < 2) throw TrajectoryError("waypoints span zero length");
    const Point first = ctrl_.front();
    const Point second = ctrl_[1];
    const Point last = ctrl_.back();
    const Point before_last = ctrl_[ctrl_.size() - 2];
    ctrl_.insert(ctrl_.begin(), Point{2.0 * first.x - second.x, 2.0 * first.y - second.y});
    ctrl_.push_back({2.0 * last.x - before_last.x, 2.0 * last.y - before_last.y});
  }

  int segments() const { return static_cast<int>(ctrl_.size()) - 3; }

  // u in [0, segments()]
  Point eval(double u) const {
    int s = static_cast<int>(std::floor(u));
    if (s >= segments()) s = segments() - 1;
    if (s < 0) s = 0;
    const double frac = u - s;
    const Point& p0 = ctrl_[s];
    const Point& p1 = ctrl_[s + 1];
    const Point& p2 = ctrl_[s + 2];
    const Point& p3 = ctrl_[s + 3];
    const double t0 = 0.0;
    const double t1 = t0 + std::sqrt(distance(p0, p1));
    const double t2 = t1 + std::sqrt(distance(p1, p2));
    const double t3 = t2 + std::sqrt(distance(p2, p3));
    const double t = t1 + frac * (t2 - t1);
    const Point a1 = lerp(p0, p1, (t1 - t) / (t1 - t0), (t - t0) / (t1 - t0));
    const Point a2 = lerp(p1, p2, (t2 - t) / (t2 - t1), (t - t1) / (t2 - t1));
    const Point a3 = lerp(p2, p3, (t3 - t) / (t3 - t2), (t - t2) / (t3 - t2));
    const Point b1 = lerp(a1, a2, (t2 - t) / (t2 - t0), (t - t0) / (t2 - t0));
    const Point b2 = lerp(a2, a3, (t3 - t) / (t3 - t1), (t - t1) / (t3 - t1));
    return lerp(b1, b2, (t2 - t) / (t2 - t1), (t - t1) / (t2 - t1));
  }

 private:
  std::vector<Point> ctrl_;
};

constexpr int kWalkResolution = 256;

}  // namespace

std::vector<Point> spline_polyline(std::span<const Point> waypoints, int samples_per_segment) {
  CentripetalSpline spline(waypoints);
  const int n = spline.segments() * samples_per_segment;
  std::vector<Point> out;
  out.reserve(n + 1);
  for (int i = 0; i <= n; ++i) out.push_back(spline.eval(static_cast<double>(i) / samples_per_segment));
  return out;
}

std::vector<Point> constant_speed_walk(std::span<const Point> waypoints, double step_m) {
  if (!(step_m > 0.0)) throw TrajectoryError("step length must be > 0");
  CentripetalSpline spline(waypoints);
  const int n_dense = spline.segments() * kWalkResolution;
  auto param = [&](int i) { return static_cast<double>(i) / kWalkResolution; };

  std::vector<Point> out;
  Point current = spline.eval(0.0);
  double u_current = 0.0;
  int j = 1;
  out.push_back(current);
  while (j <= n_dense) {
    // First dense sample at chord distance >= step from the current point.
    while (j <= n_dense && distance(spline.eval(param(j)), current) < step_m) ++j;
    if (j > n_dense) break;
    double lo = std::max(u_current, param(j - 1));
    double hi = param(j);
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (distance(spline.eval(mid), current) < step_m) lo = mid;
      else hi = mid;
    }
    // Snap onto the circle of radius step_m around the current point so the chord
    // is exact to rounding; the bracket is already below 1 ulp in u.
    Point next = spline.eval(hi);
    const double d = distance(next, current);
    next = {current.x + (next.x - current.x) * step_m / d, current.y + (next.y - current.y) * step_m / d};
    out.push_back(next);
    current = next;
    u_current = hi;
  }
  return out;
}

Trajectory trajectory_from_waypoints(std::span<const Point> waypoints, int id, double speed_mps,
                                     double sample_interval_s) {
  if (!(speed_mps > 0.0)) throw TrajectoryError("speed must be > 0");
  if (!(sample_interval_s > 0.0)) throw TrajectoryError("sample interval must be > 0");
  Trajectory t;
  t.id = id;
  t.speed_mps = speed_mps;
  t.sample_interval_s = sample_interval_s;
  t.points = constant_speed_walk(waypoints, speed_mps * sample_interval_s);
  return t;
}

Trajectory generate_trajectory(const NetworkTopology& topo, int id, const TrajectoryParams& params,
                               std::uint64_t seed) {
  if (params.n_waypoints < 2) throw TrajectoryError("need at least 2 waypoints");
  if (!(params.speed_mps > 0.0)) throw TrajectoryError("speed must be > 0");
  if (!(params.sample_interval_s > 0.0)) throw TrajectoryError("sample interval must be > 0");
  Rng rng(derive_seed(seed, {0x7472616aULL, static_cast<std::uint64_t>(id)}));
  std::uniform_real_distribution<double> ux(0.0, topo.area.width);
  std::uniform_real_distribution<double> uy(0.0, topo.area.height);

  for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
    std::vector<Point> waypoints(params.n_waypoints);
    for (auto& p : waypoints) {
      p.x = ux(rng);
      p.y = uy(rng);
    }
    Trajectory t;
    try {
      t = trajectory_from_waypoints(waypoints, id, params.speed_mps, params.sample_interval_s);
    } catch (const TrajectoryError&) {
      continue;
    }
    if (t.points.size() < params.min_points) continue;
    bool inside = true;
    for (const Point& p : spline_polyline(waypoints)) inside = inside && topo.area.contains(p);
    for (const Point& p : t.points) inside = inside && topo.area.contains(p);
    if (inside) return t;
  }
  throw TrajectoryError("trajectory " + std::to_string(id) + ": no valid waypoint set after " +
                        std::to_string(params.max_attempts) + " attempts (degenerate geometry)");
}

std::vector<Trajectory> generate_trajectory_set(const NetworkTopology& topo, int n_trajectories,
                                                const TrajectoryParams& params, std::uint64_t seed) {
  if (n_trajectories < 1) throw TrajectoryError("need at least one trajectory");
  std::vector<Trajectory> out;
  out.reserve(n_trajectories);
  for (int i = 0; i < n_trajectories; ++i) out.push_back(generate_trajectory(topo, i, params, seed));
  return out;
}

void write_trajectories_csv(const std::filesystem::path& path, std::span<const Trajectory> trajectories) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << "traj_id,step,x_m,y_m\n";
  for (const auto& t : trajectories) {
    for (std::size_t k = 0; k < t.points.size(); ++k) {
      os << t.id << ',' << k << ',' << csv::num17(t.points[k].x) << ',' << csv::num17(t.points[k].y) << '\n';
    }
  }
}

void to_json(nlohmann::json& j, const Trajectory& t) {
  j = {{"id", t.id}, {"sample_interval_s", t.sample_interval_s}, {"speed_mps", t.speed_mps}, {"points", t.points}};
}
void from_json(const nlohmann::json& j, Trajectory& t) {
  j.at("id").get_to(t.id);
  j.at("sample_interval_s").get_to(t.sample_interval_s);
  j.at("speed_mps").get_to(t.speed_mps);
  j.at("points").get_to(t.points);
}

void to_json(nlohmann::json& j, const TrajectoryParams& p) {
  j = {{"n_waypoints", p.n_waypoints},       {"speed_mps", p.speed_mps},
       {"sample_interval_s", p.sample_interval_s}, {"min_points", p.min_points},
       {"max_attempts", p.max_attempts}};
}
void from_json(const nlohmann::json& j, TrajectoryParams& p) {
  if (j.contains("n_waypoints")) j.at("n_waypoints").get_to(p.n_waypoints);
  if (j.contains("speed_mps")) j.at("speed_mps").get_to(p.speed_mps);
  if (j.contains("sample_interval_s")) j.at("sample_interval_s").get_to(p.sample_interval_s);
  if (j.contains("min_points")) j.at("min_points").get_to(p.min_points);
  if (j.contains("max_attempts")) j.at("max_attempts").get_to(p.max_attempts);
}

nlohmann::json scenario_to_json(const NetworkTopology& topo, std::span<const Trajectory> trajectories) {
  nlohmann::json j;
  j["format_version"] = kScenarioFormatVersion;
  j["topology"] = topo;
  j["trajectories"] = nlohmann::json::array();
  for (const auto& t : trajectories) j["trajectories"].push_back(t);
  return j;
}

void scenario_from_json(const nlohmann::json& j, NetworkTopology& topo, std::vector<Trajectory>& trajectories) {
  if (!j.contains("format_version")) throw SchemaError("scenario file lacks format_version");
  const int version = j.at("format_version").get<int>();
  if (version != kScenarioFormatVersion) {
    throw SchemaError("scenario format_version " + std::to_string(version) + " unsupported (expected " +
                      std::to_string(kScenarioFormatVersion) + ")");
  }
  j.at("topology").get_to(topo);
  trajectories.clear();
  if (j.contains("trajectories")) j.at("trajectories").get_to(trajectories);
}

}  // namespace pcho
