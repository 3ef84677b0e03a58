#include "lockit/cloud.hpp"

#include "lockit/errors.hpp"
#include "lockit/kdtree.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>
#include <unordered_map>

namespace lockit {

PointCloud PointCloud::subset(const std::vector<std::size_t>& indices) const {
  PointCloud out;
  out.source_id = source_id;
  out.points.reserve(indices.size());
  for (std::size_t i : indices) out.points.push_back(points[i]);
  if (intensity) {
    std::vector<float> in;
    in.reserve(indices.size());
    for (std::size_t i : indices) in.push_back((*intensity)[i]);
    out.intensity = std::move(in);
  }
  return out;
}

bool PointCloud::all_finite() const {
  for (const auto& p : points)
    if (!p.allFinite()) return false;
  return true;
}

void PreprocessConfig::validate() const {
  if (!(max_range_m > 0)) throw Error(Errc::InvalidArgument, "max_range_m must be > 0");
  if (!(scale_factor > 0)) throw Error(Errc::InvalidArgument, "scale_factor must be > 0");
  if (!(voxel_size_m > 0)) throw Error(Errc::InvalidArgument, "voxel_size_m must be > 0");
  if (!(ground_distance_m >= 0)) throw Error(Errc::InvalidArgument, "ground_distance_m must be >= 0");
}

PointCloud crop_range(const PointCloud& cloud, double max_range_m) {
  if (!(max_range_m > 0)) throw Error(Errc::InvalidArgument, "crop radius must be > 0");
  std::vector<std::size_t> keep;
  keep.reserve(cloud.size());
  const double r2 = max_range_m * max_range_m;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (cloud.points[i].squaredNorm() <= r2) keep.push_back(i);
  return cloud.subset(keep);
}

PointCloud center_and_scale(const PointCloud& cloud, double scale_factor) {
  if (!(scale_factor > 0)) throw Error(Errc::InvalidArgument, "scale factor must be > 0");
  PointCloud out = cloud;
  for (auto& p : out.points) p /= scale_factor;
  return out;
}

PointCloud recenter_on_centroid(const PointCloud& cloud) {
  if (cloud.empty()) return cloud;
  Vec3 c = Vec3::Zero();
  for (const auto& p : cloud.points) c += p;
  c /= static_cast<double>(cloud.size());
  PointCloud out = cloud;
  for (auto& p : out.points) p -= c;
  return out;
}

namespace {

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size_m) {
  if (!(voxel_size_m > 0)) throw Error(Errc::InvalidArgument, "voxel size must be > 0");
  struct Acc {
    Vec3 sum = Vec3::Zero();
    double intensity = 0.0;
    std::size_t count = 0;
  };
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> slot;
  std::vector<Acc> acc;
  slot.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const VoxelKey key{static_cast<std::int64_t>(std::floor(p.x() / voxel_size_m)),
                       static_cast<std::int64_t>(std::floor(p.y() / voxel_size_m)),
                       static_cast<std::int64_t>(std::floor(p.z() / voxel_size_m))};
    auto [it, inserted] = slot.try_emplace(key, acc.size());
    if (inserted) acc.emplace_back();
    Acc& a = acc[it->second];
    a.sum += p;
    if (cloud.intensity) a.intensity += (*cloud.intensity)[i];
    ++a.count;
  }
  PointCloud out;
  out.source_id = cloud.source_id;
  out.points.reserve(acc.size());
  for (const auto& a : acc) out.points.push_back(a.sum / static_cast<double>(a.count));
  if (cloud.intensity) {
    std::vector<float> in;
    in.reserve(acc.size());
    for (const auto& a : acc) in.push_back(static_cast<float>(a.intensity / a.count));
    out.intensity = std::move(in);
  }
  return out;
}

PointCloud remove_ground(const PointCloud& cloud, double ground_distance_m, std::uint64_t rng_seed,
                         const GroundRemovalOptions& opts) {
  if (cloud.size() < 3) throw Error(Errc::DegenerateCloud, "ground removal needs at least 3 points");
  if (!(ground_distance_m >= 0)) throw Error(Errc::InvalidArgument, "ground distance must be >= 0");

  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
  const auto& pts = cloud.points;

  Plane best;
  std::size_t best_count = 0;
  for (int it = 0; it < opts.iterations; ++it) {
    const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || b == c || a == c) continue;
    Vec3 n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
    const double len = n.norm();
    if (len < 1e-12) continue;
    n /= len;
    const Plane cand{n, -n.dot(pts[a])};
    std::size_t count = 0;
    for (const auto& p : pts)
      if (cand.distance(p) <= ground_distance_m) ++count;
    if (count > best_count) {
      best_count = count;
      best = cand;
    }
  }
  if (best_count == 0) return cloud;

  const double cos_gate = std::cos(opts.max_tilt_deg * std::numbers::pi / 180.0);
  if (std::abs(best.normal.z()) < cos_gate) return cloud;

  std::vector<std::size_t> keep;
  keep.reserve(cloud.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (best.distance(pts[i]) > ground_distance_m) keep.push_back(i);
  return cloud.subset(keep);
}

NormalCloud estimate_normals(const PointCloud& cloud, int k_neighbors) {
  if (k_neighbors < 3) throw Error(Errc::DegenerateCloud, "normal estimation needs k >= 3");
  if (cloud.size() < static_cast<std::size_t>(k_neighbors))
    throw Error(Errc::DegenerateCloud, "cloud has fewer points than k");

  const KdTree3 tree(cloud.points);
  NormalCloud out;
  out.base = cloud;
  out.normals.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = tree.knn(cloud.points[i], static_cast<std::size_t>(k_neighbors));
    Vec3 mean = Vec3::Zero();
    for (const auto& nb : nbrs) mean += cloud.points[nb.index];
    mean /= static_cast<double>(nbrs.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& nb : nbrs) {
      const Vec3 d = cloud.points[nb.index] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    Vec3 n = es.eigenvectors().col(0).normalized();
    if (n.dot(-cloud.points[i]) < 0) n = -n;
    out.normals[i] = n;
  }
  return out;
}

PointCloud preprocess_for_descriptor(const PointCloud& cloud, const PreprocessConfig& cfg) {
  cfg.validate();
  PointCloud c = crop_range(cloud, cfg.max_range_m);
  if (cfg.normalize) {
    if (cfg.recenter) c = recenter_on_centroid(c);
    c = center_and_scale(c, cfg.scale_factor);
  }
  const double unit = cfg.normalize ? cfg.scale_factor : 1.0;
  c = voxel_downsample(c, cfg.voxel_size_m / unit);
  if (c.size() >= 3) c = remove_ground(c, cfg.ground_distance_m / unit, cfg.ground_seed);
  return c;
}

PointCloud preprocess_for_registration(const PointCloud& cloud, const PreprocessConfig& cfg) {
  PreprocessConfig metric = cfg;
  metric.normalize = false;
  return preprocess_for_descriptor(cloud, metric);
}

PointCloud transform_cloud(const PointCloud& cloud, const Eigen::Matrix3d& rotation,
                           const Vec3& translation) {
  PointCloud out = cloud;
  for (auto& p : out.points) p = rotation * p + translation;
  return out;
}

}  // namespace lockit
