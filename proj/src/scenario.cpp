#include "lockit/scenario.hpp"

namespace lockit {

namespace {

constexpr std::uint64_t kMapScanSalt = 0x6d61700000000000ULL;
constexpr std::uint64_t kQueryScanSalt = 0x7172790000000000ULL;

void build_query(Scenario& s) {
  const ScenarioConfig& c = s.config;
  RouteSampling rs;
  rs.step_m = c.query_step_m;
  rs.start_arc_m = c.query_start_arc_m;
  rs.count = c.query_frames;
  rs.reverse = c.query_reverse;
  rs.lateral_offset_m = c.query_lateral_offset_m;
  s.query = make_trajectory(sample_route(s.route, rs), c.odometry, c.query_seed);
}

}  // namespace

PointCloud Scenario::map_scan(std::size_t i) const {
  PointCloud c = simulate_scan(world, map_poses.at(i), config.scan, kMapScanSalt ^ (config.world_seed << 20) ^ i);
  c.source_id = "map_" + std::to_string(i);
  return c;
}

Pose2 Scenario::query_sensor_pose(std::size_t k) const {
  const Pose2& t = query.truth.at(k);
  return Pose2(t.x, t.y, wrap_angle(t.theta + config.query_sensor_yaw_rad));
}

PointCloud Scenario::query_scan(std::size_t k) const {
  PointCloud c = simulate_scan(world, query_sensor_pose(k), config.scan, kQueryScanSalt ^ (config.query_seed << 20) ^ k);
  c.source_id = "query_" + std::to_string(k);
  return c;
}

std::vector<TrajectorySample> Scenario::mapping_samples() const {
  std::vector<TrajectorySample> out;
  out.reserve(map_poses.size());
  for (std::size_t i = 0; i < map_poses.size(); ++i) out.push_back({map_poses[i], map_scan(i)});
  return out;
}

Scenario make_scenario(const ScenarioConfig& cfg) {
  Scenario s;
  s.config = cfg;
  s.route = loop_route(cfg.extent, cfg.route_margin_m, cfg.corner_radius_m);
  WorldOptions wo;
  wo.keep_out_route = s.route;
  s.world = generate_world(cfg.world_seed, cfg.obstacles, cfg.extent, wo);
  RouteSampling ms;
  ms.step_m = polyline_length(s.route) / static_cast<double>(cfg.map_poses);
  ms.count = cfg.map_poses;
  s.map_poses = sample_route(s.route, ms);
  build_query(s);
  return s;
}

void resample_query(Scenario& s, std::uint64_t query_seed, double start_arc_m, bool reverse) {
  s.config.query_seed = query_seed;
  s.config.query_start_arc_m = start_arc_m;
  s.config.query_reverse = reverse;
  build_query(s);
}

}  // namespace lockit
