#pragma once

#include "lockit/cloud.hpp"
#include "lockit/errors.hpp"
#include "lockit/features.hpp"
#include "lockit/geometry.hpp"
#include "lockit/topo_map.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lockit {

struct Correspondence {
  std::size_t source_index = 0;
  std::size_t target_index = 0;
  double feature_distance = 0.0;
};

/// Cost of one accepted ICP iteration, evaluated on that iteration's
/// correspondence set before and after the update.
struct IcpIteration {
  double cost_before = 0.0;
  double cost_after = 0.0;
  std::size_t correspondences = 0;
};

struct RegistrationResult {
  RigidTransform3 transform;  // maps source points into the target frame
  double final_cost = 0.0;    // sum of squared residuals, m^2
  std::size_t inlier_count = 0;
  std::size_t correspondence_count = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<IcpIteration> history;  // ICP only
};

struct IcpOptions {
  int max_iters = 50;
  double corr_dist_m = 1.0;
  double tol = 1e-6;  // relative cost improvement
  double degeneracy_ratio = 1e-10;
};

/// Point-to-plane ICP minimizing sum(((p - T q) . n_p)^2) with p in `target`
/// (carrying normals) and q in `source`. Each iteration takes one linearized
/// Gauss-Newton step with backtracking so the cost on the current
/// correspondence set never increases.
RegistrationResult icp_point_to_plane(const PointCloud& source, const NormalCloud& target, const RigidTransform3& seed,
                                      const IcpOptions& opts = {});

struct MatchOptions {
  double ratio = 1.0;  // < 1 enables the best/second-best test
  bool mutual = true;
  bool normalize = false;  // L2-normalize feature vectors before matching
};

/// Nearest neighbours in feature space from F to Q, ascending by distance.
std::vector<Correspondence> match_features(const LocalFeatureCloud& f, const LocalFeatureCloud& q,
                                           const MatchOptions& opts = {});

struct RansacOptions {
  double inlier_dist_m = 0.3;
  int max_trials = 10000;
  double confidence = 0.999;
  std::uint64_t seed = 42;
  /// Rejects samples whose pairwise edge lengths disagree by more than
  /// twice the inlier distance before solving.
  bool edge_length_check = true;
  int refit_rounds = 5;
};

/// Least-squares rigid transform taking `src` onto `dst` (SVD of the
/// cross-covariance with determinant correction).
RigidTransform3 solve_rigid_transform(std::span<const Vec3> src, std::span<const Vec3> dst);

/// 3-point RANSAC over correspondences (source = F, target = Q). The
/// returned transform maps F into Q's frame.
RegistrationResult ransac_register(const PointCloud& f_cloud, const PointCloud& q_cloud,
                                   const std::vector<Correspondence>& corrs, const RansacOptions& opts = {});

/// Heading of travel from `prev` to `curr`.
double yaw_from_consecutive(const Pose2& prev, const Pose2& curr);

// ---------------------------------------------------------------------------
// Fine localization against the map

struct FineOptions {
  PreprocessConfig preprocess;
  int normal_k = 20;
  IcpOptions icp;
  MatchOptions match;
  RansacOptions ransac;
  bool polish = true;  // point-to-plane refinement of the RANSAC result
};

struct FineResult {
  RigidTransform3 transform;  // query sensor frame -> map frame (6-DoF)
  Pose2 pose;                 // planar projection; the coarse pose on fallback
  Pose2 seed;                 // planar seed handed to registration
  std::size_t node_index = 0;
  RegistrationResult registration;
  bool fallback = false;
  std::optional<Errc> error;
  std::string message;
  double wall_time_ms = 0.0;
};

/// Caches preprocessed node clouds, normals and local features per map node.
/// Not safe for concurrent use (the caches fill lazily).
class FineLocalizer {
 public:
  FineLocalizer(const TopoMap& map, const FeatureBackend* backend, FineOptions opts = {});

  /// Seed: (x, y) from `coarse`, z = roll = pitch = 0, yaw from the travel
  /// direction prev_coarse -> coarse (coarse.theta when they coincide).
  FineResult localize_icp(const PointCloud& query, const Pose2& coarse, const Pose2& prev_coarse);

  /// Feature matching + RANSAC; needs no heading seed.
  FineResult localize_dlf(const PointCloud& query, const Pose2& coarse);

  const FineOptions& options() const { return opts_; }

 private:
  struct NodeEntry {
    std::optional<PointCloud> cloud;
    std::optional<NormalCloud> normals;
    std::optional<LocalFeatureCloud> features;
  };
  NodeEntry& entry(std::size_t node_index);
  const NormalCloud& node_normals(std::size_t node_index);
  const LocalFeatureCloud& node_features(std::size_t node_index);
  RigidTransform3 node_pose(std::size_t node_index) const;

  const TopoMap* map_;
  const FeatureBackend* backend_;
  FineOptions opts_;
  std::map<std::size_t, NodeEntry> cache_;
};

FineResult fine_localize_icp(const PointCloud& query, const TopoMap& map, const Pose2& coarse, const Pose2& prev_coarse,
                             const FineOptions& opts = {});
FineResult fine_localize_dlf(const PointCloud& query, const TopoMap& map, const Pose2& coarse,
                             const FeatureBackend& backend, const FineOptions& opts = {});

/// One JSON record per query for the evaluation harness.
nlohmann::json registration_report(const FineResult& r, const std::string& method);

}  // namespace lockit
