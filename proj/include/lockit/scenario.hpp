#pragma once

#include "lockit/sim_world.hpp"
#include "lockit/topo_map.hpp"

#include <cstdint>
#include <vector>

namespace lockit {

/// A loop route through a generated world, a mapping pass along the whole
/// loop and one query traversal with noisy odometry.
struct ScenarioConfig {
  std::uint64_t world_seed = 7;
  int obstacles = 50;
  Extent extent{0.0, 0.0, 80.0, 60.0};
  double route_margin_m = 8.0;
  double corner_radius_m = 5.0;
  std::size_t map_poses = 200;  // evenly spread over the loop

  std::uint64_t query_seed = 1;
  std::size_t query_frames = 151;
  double query_step_m = 1.0;
  double query_start_arc_m = 0.0;
  bool query_reverse = false;
  double query_lateral_offset_m = 0.3;
  /// Yaw of the query sensor relative to the direction of travel.
  double query_sensor_yaw_rad = 0.0;
  OdometryNoise odometry;
  ScanConfig scan;
};

struct Scenario {
  ScenarioConfig config;
  World world;
  std::vector<Eigen::Vector2d> route;
  std::vector<Pose2> map_poses;
  SimTrajectory query;

  PointCloud map_scan(std::size_t i) const;
  /// Truth pose of the query sensor: the vehicle pose turned by the mounting yaw.
  Pose2 query_sensor_pose(std::size_t k) const;
  PointCloud query_scan(std::size_t k) const;
  std::vector<TrajectorySample> mapping_samples() const;
};

Scenario make_scenario(const ScenarioConfig& cfg);

/// New query traversal over the same world and route.
void resample_query(Scenario& s, std::uint64_t query_seed, double start_arc_m, bool reverse);

}  // namespace lockit
