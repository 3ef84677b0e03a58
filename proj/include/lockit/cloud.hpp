#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lockit {

using Vec3 = Eigen::Vector3d;

/// A LiDAR scan in the sensor frame (meters). `source_id` names the scan it
/// came from so that file-backed feature lookups can find their entries.
struct PointCloud {
  std::vector<Vec3> points;
  std::optional<std::vector<float>> intensity;
  std::string source_id;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  /// Copies metadata and keeps only the points at `indices` (in that order).
  PointCloud subset(const std::vector<std::size_t>& indices) const;
  bool all_finite() const;
};

/// Points with one unit normal each.
struct NormalCloud {
  PointCloud base;
  std::vector<Vec3> normals;

  std::size_t size() const { return base.size(); }
};

struct PreprocessConfig {
  double max_range_m = 50.0;
  double scale_factor = 50.0;
  double voxel_size_m = 0.3;
  double ground_distance_m = 0.2;
  bool normalize = true;
  /// Re-center on the centroid before scaling (for datasets whose clouds are
  /// not expressed around the sensor origin).
  bool recenter = false;
  std::uint64_t ground_seed = 7;

  void validate() const;
};

PointCloud crop_range(const PointCloud& cloud, double max_range_m);

/// Divides every coordinate by `scale_factor`. The sensor origin is the
/// center, so no translation happens.
PointCloud center_and_scale(const PointCloud& cloud, double scale_factor);

/// Subtracts the centroid. Empty clouds pass through.
PointCloud recenter_on_centroid(const PointCloud& cloud);

/// One centroid per occupied voxel of an origin-anchored grid. Output is
/// ordered by first occurrence of each voxel in the input.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size_m);

struct Plane {
  Vec3 normal = Vec3::UnitZ();  // unit
  double offset = 0.0;          // normal.dot(p) + offset == 0

  double distance(const Vec3& p) const { return std::abs(normal.dot(p) + offset); }
};

struct GroundRemovalOptions {
  double max_tilt_deg = 30.0;
  int iterations = 200;
};

/// Fits the dominant plane by seeded random sample consensus and removes its
/// inliers when the plane is within `max_tilt_deg` of horizontal.
PointCloud remove_ground(const PointCloud& cloud, double ground_distance_m, std::uint64_t rng_seed,
                         const GroundRemovalOptions& opts = {});

/// PCA normals from the k nearest neighbors, flipped to face the sensor origin.
NormalCloud estimate_normals(const PointCloud& cloud, int k_neighbors = 20);

/// crop -> scale -> voxel -> ground. Voxel and ground thresholds are given in
/// meters and applied in the scaled frame.
PointCloud preprocess_for_descriptor(const PointCloud& cloud, const PreprocessConfig& cfg);

/// crop -> voxel -> ground, metric units preserved.
PointCloud preprocess_for_registration(const PointCloud& cloud, const PreprocessConfig& cfg);

PointCloud transform_cloud(const PointCloud& cloud, const Eigen::Matrix3d& rotation,
                           const Vec3& translation);

}  // namespace lockit
