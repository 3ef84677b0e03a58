#pragma once

#include "lockit/cloud.hpp"
#include "lockit/geometry.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lockit {

enum class ObstacleKind { Box, Cylinder, Wall };

/// Vertical primitive standing on the ground plane z = 0. Boxes and walls use
/// half extents in their own (yawed) frame; cylinders use `radius`.
struct Obstacle {
  ObstacleKind kind = ObstacleKind::Box;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double yaw = 0.0;
  double half_x = 0.5;
  double half_y = 0.5;
  double radius = 0.5;
  double height = 2.0;

  /// Horizontal bounding radius.
  double footprint_radius() const;
  bool contains_xy(const Eigen::Vector2d& p, double margin = 0.0) const;
};

struct Extent {
  double min_x = 0.0, min_y = 0.0, max_x = 100.0, max_y = 100.0;

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  bool contains(double x, double y) const { return x >= min_x && x <= max_x && y >= min_y && y <= max_y; }
};

struct World {
  std::vector<Obstacle> obstacles;
  Extent extent;
  std::uint64_t seed = 0;
  bool ground = true;
};

struct ScanConfig {
  int rings = 32;
  int azimuth_steps = 360;
  double min_elevation_deg = -30.67;
  double max_elevation_deg = 10.67;
  double max_range_m = 50.0;
  double noise_sigma_m = 0.01;
  double sensor_height_m = 1.5;
};

struct WorldOptions {
  /// Obstacles keep at least `route_clearance_m` from this polyline.
  std::vector<Eigen::Vector2d> keep_out_route;
  double route_clearance_m = 2.5;
  /// Scans from probe positions at least this far apart must have
  /// synthetic global descriptors further apart than `min_descriptor_distance`.
  double distinct_radius_m = 10.0;
  double min_descriptor_distance = 0.1;
  bool enforce_distinctiveness = true;
  int max_attempts = 40;
  ScanConfig probe_scan = {16, 180};
};

/// Reproducible scattered boxes, cylinders and walls. Rejection-samples
/// whole worlds until the distinctiveness census passes.
World generate_world(std::uint64_t seed, int n_obstacles, const Extent& extent, const WorldOptions& opts = {});

/// Probe positions used by the distinctiveness census: a grid with
/// `spacing` pitch, skipping positions inside or touching obstacles.
std::vector<Eigen::Vector2d> probe_positions(const World& world, double spacing);

/// Ray-cast scan in the sensor frame. Deterministic in `seed`.
PointCloud simulate_scan(const World& world, const Pose2& pose, const ScanConfig& cfg, std::uint64_t seed);

/// World moved by a planar rigid motion.
World transform_world(const World& world, const Pose2& motion);

struct OdometryNoise {
  double distance_fraction = 0.05;   // sigma_d = fraction * d
  double heading_rad = deg2rad(1.0);  // sigma_theta
};

/// Exact relative deltas perturbed by zero-mean Gaussian noise on distance
/// and heading change.
std::vector<OdometryDelta> simulate_odometry(const std::vector<Pose2>& truth, const OdometryNoise& noise,
                                             std::uint64_t seed);

/// Dead-reckoned poses: start at `start` and compose every delta.
std::vector<Pose2> integrate_odometry(const Pose2& start, const std::vector<OdometryDelta>& odometry);

struct SimTrajectory {
  std::vector<Pose2> poses;  // dead-reckoned from the noisy odometry
  std::vector<OdometryDelta> odometry;
  std::vector<Pose2> truth;
};

SimTrajectory make_trajectory(const std::vector<Pose2>& truth, const OdometryNoise& noise, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Routes

/// Closed rounded-rectangle loop inset by `margin` from the extent.
std::vector<Eigen::Vector2d> loop_route(const Extent& extent, double margin, double corner_radius,
                                        int corner_segments = 12);

struct RouteSampling {
  double step_m = 1.0;
  double start_arc_m = 0.0;
  std::size_t count = 0;      // 0: one full traversal
  bool reverse = false;
  double lateral_offset_m = 0.0;  // left of travel direction
};

/// Poses at fixed arc-length steps along a closed polyline. Each heading is
/// the direction of travel from the previous sample, so composing the exact
/// deltas reproduces the sequence.
std::vector<Pose2> sample_route(const std::vector<Eigen::Vector2d>& loop, const RouteSampling& s);

double polyline_length(const std::vector<Eigen::Vector2d>& loop, bool closed = true);

// ---------------------------------------------------------------------------
// Persistence

nlohmann::json world_to_json(const World& world);
World world_from_json(const nlohmann::json& j);
void save_world(const std::filesystem::path& path, const World& world);
World load_world(const std::filesystem::path& path);

}  // namespace lockit
