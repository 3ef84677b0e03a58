#pragma once

#include "lockit/cloud.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <memory>
#include <string>

namespace lockit {

inline constexpr std::size_t kGlobalDescriptorDim = 512;
inline constexpr std::size_t kLocalFeatureDim = 192;

struct GlobalDescriptor {
  Eigen::VectorXd values;

  std::size_t dim() const { return static_cast<std::size_t>(values.size()); }
  double distance(const GlobalDescriptor& other) const { return (values - other.values).norm(); }
};

/// Per-point feature vectors. `features` holds one column per point.
struct LocalFeatureCloud {
  std::vector<Vec3> points;
  Eigen::MatrixXd features;
  std::string layer;

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.rows()); }
};

/// Source of global descriptors and local features. Implementations are
/// immutable after construction and safe to call concurrently.
class FeatureBackend {
 public:
  virtual ~FeatureBackend() = default;

  virtual std::string name() const = 0;
  virtual std::size_t global_dim() const = 0;
  virtual std::size_t local_dim() const = 0;

 protected:
  friend GlobalDescriptor global_descriptor(const FeatureBackend&, const PointCloud&);
  friend LocalFeatureCloud local_features(const FeatureBackend&, const PointCloud&);

  virtual GlobalDescriptor compute_global(const PointCloud& cloud) const = 0;
  virtual LocalFeatureCloud compute_local(const PointCloud& cloud) const = 0;
};

/// Descriptor for a cloud prepared with preprocess_for_descriptor(). Throws
/// DimensionMismatch if the backend breaks its declared dimension.
GlobalDescriptor global_descriptor(const FeatureBackend& backend, const PointCloud& cloud);

/// Local features for a cloud prepared with preprocess_for_registration().
LocalFeatureCloud local_features(const FeatureBackend& backend, const PointCloud& cloud);

// ---------------------------------------------------------------------------
// Handcrafted backend

struct SyntheticGlobalOptions {
  /// Horizontal range covered by the radial shells, in the (scaled) cloud units.
  double max_range = 1.0;
  /// Height window covered by the height histograms.
  double min_height = -0.1;
  double max_height = 0.1;
};

/// Rotation-invariant scan signature: radial-shell and height histograms
/// (soft-binned), each block L2-normalized, concatenated, zero-padded to 512
/// and normalized to unit length.
GlobalDescriptor synthetic_global(const PointCloud& cloud, const SyntheticGlobalOptions& opts = {});

struct SyntheticLocalOptions {
  double radius_m = 2.0;
};

/// Per-point geometry signature over a fixed-radius ball: PCA shape values
/// plus range/height histograms of the neighbors relative to the point.
/// Invariant to rotations about the vertical axis and to translations.
LocalFeatureCloud synthetic_local(const PointCloud& cloud, const SyntheticLocalOptions& opts = {});

class SyntheticBackend final : public FeatureBackend {
 public:
  SyntheticBackend() = default;
  SyntheticBackend(SyntheticGlobalOptions g, SyntheticLocalOptions l) : global_opts_(g), local_opts_(l) {}

  std::string name() const override { return "synthetic"; }
  std::size_t global_dim() const override { return kGlobalDescriptorDim; }
  std::size_t local_dim() const override { return kLocalFeatureDim; }

 protected:
  GlobalDescriptor compute_global(const PointCloud& cloud) const override;
  LocalFeatureCloud compute_local(const PointCloud& cloud) const override;

 private:
  SyntheticGlobalOptions global_opts_;
  SyntheticLocalOptions local_opts_;
};

// ---------------------------------------------------------------------------
// File backend

/// Reads precomputed descriptors named <scan_id>.g.ldsc / <scan_id>.l.ldsc
/// from one directory, keyed by PointCloud::source_id.
class FileBackend final : public FeatureBackend {
 public:
  explicit FileBackend(std::filesystem::path dir, std::size_t global_dim = kGlobalDescriptorDim,
                       std::size_t local_dim = kLocalFeatureDim);

  std::string name() const override { return "file"; }
  std::size_t global_dim() const override { return global_dim_; }
  std::size_t local_dim() const override { return local_dim_; }
  const std::filesystem::path& directory() const { return dir_; }

 protected:
  GlobalDescriptor compute_global(const PointCloud& cloud) const override;
  LocalFeatureCloud compute_local(const PointCloud& cloud) const override;

 private:
  std::filesystem::path dir_;
  std::size_t global_dim_;
  std::size_t local_dim_;
};

/// "synthetic" or "file:<dir>".
std::unique_ptr<FeatureBackend> make_backend(const std::string& spec);

}  // namespace lockit
