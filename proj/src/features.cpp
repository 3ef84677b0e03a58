#include "lockit/features.hpp"

#include "lockit/descriptor_io.hpp"
#include "lockit/errors.hpp"
#include "lockit/kdtree.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace lockit {

GlobalDescriptor global_descriptor(const FeatureBackend& backend, const PointCloud& cloud) {
  GlobalDescriptor d = backend.compute_global(cloud);
  if (d.dim() != backend.global_dim())
    throw Error(Errc::DimensionMismatch, backend.name() + " returned global dim " +
                                             std::to_string(d.dim()) + ", declared " +
                                             std::to_string(backend.global_dim()));
  if (!d.values.allFinite()) throw Error(Errc::InvalidArgument, "non-finite descriptor entry");
  // Descriptors travel as float32; keep the in-memory copy on the same grid
  // so persisted maps answer queries exactly like freshly built ones.
  d.values = d.values.cast<float>().cast<double>();
  return d;
}

LocalFeatureCloud local_features(const FeatureBackend& backend, const PointCloud& cloud) {
  LocalFeatureCloud f = backend.compute_local(cloud);
  if (f.dim() != backend.local_dim())
    throw Error(Errc::DimensionMismatch, backend.name() + " returned local dim " +
                                             std::to_string(f.dim()) + ", declared " +
                                             std::to_string(backend.local_dim()));
  if (static_cast<std::size_t>(f.features.cols()) != f.points.size())
    throw Error(Errc::DimensionMismatch, "feature count differs from point count");
  return f;
}

namespace {

// Linear-interpolation binning of x in [lo, hi] into `out` (bin centers at
// lo + (i + 0.5) * width). Values outside the window land on the edge bins.
template <typename Vec>
void soft_bin(Vec&& out, int offset, int bins, double x, double lo, double hi) {
  const double u = std::clamp((x - lo) / (hi - lo), 0.0, 1.0) * bins - 0.5;
  const int i0 = static_cast<int>(std::floor(u));
  const double f = u - i0;
  out[offset + std::clamp(i0, 0, bins - 1)] += 1.0 - f;
  out[offset + std::clamp(i0 + 1, 0, bins - 1)] += f;
}

void normalize_block(Eigen::Ref<Eigen::VectorXd> block) {
  const double n = block.norm();
  if (n > 0) block /= n;
}

}  // namespace

GlobalDescriptor synthetic_global(const PointCloud& cloud, const SyntheticGlobalOptions& o) {
  if (cloud.empty()) throw Error(Errc::EmptyCloud, "synthetic_global on empty cloud");

  constexpr int kRadial = 64, kHeight = 32, kJointR = 16, kJointZ = 8;
  constexpr int kRadialOff = 0, kHeightOff = kRadial, kJointOff = kRadial + kHeight;
  constexpr int kUsed = kJointOff + kJointR * kJointZ;
  static_assert(kUsed <= static_cast<int>(kGlobalDescriptorDim));

  Eigen::VectorXd v = Eigen::VectorXd::Zero(kGlobalDescriptorDim);
  Eigen::VectorXd joint_r(kJointR);
  for (const auto& p : cloud.points) {
    const double rho = std::hypot(p.x(), p.y());
    soft_bin(v, kRadialOff, kRadial, rho, 0.0, o.max_range);
    soft_bin(v, kHeightOff, kHeight, p.z(), o.min_height, o.max_height);
    // Joint shell x height: outer product of the two 1D soft assignments.
    joint_r.setZero();
    soft_bin(joint_r, 0, kJointR, rho, 0.0, o.max_range);
    Eigen::VectorXd joint_z = Eigen::VectorXd::Zero(kJointZ);
    soft_bin(joint_z, 0, kJointZ, p.z(), o.min_height, o.max_height);
    for (int r = 0; r < kJointR; ++r) {
      if (joint_r[r] == 0.0) continue;
      for (int z = 0; z < kJointZ; ++z) v[kJointOff + r * kJointZ + z] += joint_r[r] * joint_z[z];
    }
  }
  normalize_block(v.segment(kRadialOff, kRadial));
  normalize_block(v.segment(kHeightOff, kHeight));
  normalize_block(v.segment(kJointOff, kJointR * kJointZ));
  normalize_block(v);
  return {std::move(v)};
}

LocalFeatureCloud synthetic_local(const PointCloud& cloud, const SyntheticLocalOptions& o) {
  if (cloud.empty()) throw Error(Errc::EmptyCloud, "synthetic_local on empty cloud");

  constexpr int kShape = 8, kJointR = 8, kJointZ = 12, kHeight = 48, kRange = 40;
  constexpr int kShapeOff = 0, kJointOff = kShape, kHeightOff = kJointOff + kJointR * kJointZ;
  constexpr int kRangeOff = kHeightOff + kHeight;
  static_assert(kRangeOff + kRange == static_cast<int>(kLocalFeatureDim));

  const double radius = o.radius_m;
  const KdTree3 tree(cloud.points);
  LocalFeatureCloud out;
  out.points = cloud.points;
  out.layer = "synthetic-local";
  out.features = Eigen::MatrixXd::Zero(kLocalFeatureDim, static_cast<Eigen::Index>(cloud.size()));

  Eigen::VectorXd jr(kJointR), jz(kJointZ);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    auto f = out.features.col(static_cast<Eigen::Index>(i));
    const auto nbrs = tree.radius_search(p, radius);

    Vec3 mean = Vec3::Zero();
    for (const auto& nb : nbrs) mean += cloud.points[nb.index];
    mean /= static_cast<double>(nbrs.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& nb : nbrs) {
      const Vec3 d = cloud.points[nb.index] - mean;
      cov += d * d.transpose();
    }
    if (nbrs.size() >= 3) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
      const Vec3 ev = es.eigenvalues().cwiseMax(0.0);  // ascending
      const double sum = ev.sum();
      if (sum > 1e-12 && ev[2] > 1e-12) {
        const double l1 = ev[2], l2 = ev[1], l3 = ev[0];
        f[kShapeOff + 0] = l1 / sum;
        f[kShapeOff + 1] = l2 / sum;
        f[kShapeOff + 2] = l3 / sum;
        f[kShapeOff + 3] = (l1 - l2) / l1;
        f[kShapeOff + 4] = (l2 - l3) / l1;
        f[kShapeOff + 5] = l3 / l1;
        f[kShapeOff + 6] = std::abs(es.eigenvectors().col(0).z());
        f[kShapeOff + 7] = std::abs(es.eigenvectors().col(2).z());
      }
    }

    for (const auto& nb : nbrs) {
      const Vec3 d = cloud.points[nb.index] - p;
      const double rho = std::hypot(d.x(), d.y());
      jr.setZero();
      jz.setZero();
      soft_bin(jr, 0, kJointR, rho, 0.0, radius);
      soft_bin(jz, 0, kJointZ, d.z(), -radius, radius);
      for (int r = 0; r < kJointR; ++r) {
        if (jr[r] == 0.0) continue;
        for (int z = 0; z < kJointZ; ++z) f[kJointOff + r * kJointZ + z] += jr[r] * jz[z];
      }
      soft_bin(f, kHeightOff, kHeight, d.z(), -radius, radius);
      soft_bin(f, kRangeOff, kRange, std::sqrt(nb.sq_dist), 0.0, radius);
    }
    normalize_block(f.segment(kJointOff, kJointR * kJointZ));
    normalize_block(f.segment(kHeightOff, kHeight));
    normalize_block(f.segment(kRangeOff, kRange));
  }
  return out;
}

GlobalDescriptor SyntheticBackend::compute_global(const PointCloud& cloud) const {
  return synthetic_global(cloud, global_opts_);
}

LocalFeatureCloud SyntheticBackend::compute_local(const PointCloud& cloud) const {
  return synthetic_local(cloud, local_opts_);
}

FileBackend::FileBackend(std::filesystem::path dir, std::size_t global_dim, std::size_t local_dim)
    : dir_(std::move(dir)), global_dim_(global_dim), local_dim_(local_dim) {
  if (!std::filesystem::is_directory(dir_))
    throw Error(Errc::BackendUnavailable, "descriptor directory not found: " + dir_.string());
}

GlobalDescriptor FileBackend::compute_global(const PointCloud& cloud) const {
  if (cloud.source_id.empty())
    throw Error(Errc::BackendUnavailable, "file backend needs a scan id");
  const auto path = global_ldsc_path(dir_, cloud.source_id);
  if (!std::filesystem::exists(path))
    throw Error(Errc::BackendUnavailable, "no global descriptor for scan '" + cloud.source_id + "'");
  return load_global_ldsc(path);
}

LocalFeatureCloud FileBackend::compute_local(const PointCloud& cloud) const {
  if (cloud.source_id.empty())
    throw Error(Errc::BackendUnavailable, "file backend needs a scan id");
  const auto path = local_ldsc_path(dir_, cloud.source_id);
  if (!std::filesystem::exists(path))
    throw Error(Errc::BackendUnavailable, "no local features for scan '" + cloud.source_id + "'");
  LocalFeatureCloud f = load_local_ldsc(path);
  if (f.size() == 0) throw Error(Errc::EmptyCloud, "empty local feature file " + path.string());
  return f;
}

std::unique_ptr<FeatureBackend> make_backend(const std::string& spec) {
  if (spec == "synthetic") return std::make_unique<SyntheticBackend>();
  if (spec.rfind("file:", 0) == 0) return std::make_unique<FileBackend>(spec.substr(5));
  throw Error(Errc::InvalidArgument, "unknown backend '" + spec + "' (expected synthetic or file:<dir>)");
}

}  // namespace lockit
