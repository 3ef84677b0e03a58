#pragma once

#include "lockit/cloud.hpp"
#include "lockit/features.hpp"
#include "lockit/geometry.hpp"
#include "lockit/kdtree.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lockit {

struct MapNode {
  int id = 0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double yaw_at_capture = 0.0;
  std::string cloud_ref;  // storage key, relative to the map directory
  GlobalDescriptor descriptor;
};

struct TrajectorySample {
  Pose2 pose;
  PointCloud cloud;
};

struct DescriptorMatch {
  std::size_t node_index;
  double distance;
};

/// Topological map: scan-capture nodes with a spatial index over positions
/// and an exact index over global descriptors. Immutable once built.
class TopoMap {
 public:
  TopoMap() = default;
  TopoMap(std::vector<MapNode> nodes, double spacing_m, std::string backend_name = "synthetic");

  const std::vector<MapNode>& nodes() const { return nodes_; }
  const MapNode& node(std::size_t index) const { return nodes_.at(index); }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  double spacing() const { return spacing_m_; }
  const std::string& backend_name() const { return backend_name_; }

  /// Index of the node nearest to (x, y); ties resolved by lowest id.
  std::size_t nearest_index(double x, double y) const;
  const MapNode& nearest_node(double x, double y) const { return nodes_[nearest_index(x, y)]; }

  /// The `b` nodes with the smallest descriptor distance, ascending,
  /// ties by node id.
  std::vector<DescriptorMatch> top_b_descriptor_matches(const GlobalDescriptor& query, std::size_t b) const;

  /// Map index of the node with the given id.
  std::optional<std::size_t> index_of(int id) const;

  /// Stored point cloud of a node; empty if the map was built without clouds
  /// and no directory is attached.
  const PointCloud& cloud(std::size_t index) const;
  void attach_clouds(std::vector<PointCloud> clouds);
  bool has_clouds() const { return clouds_.size() == nodes_.size() && !nodes_.empty(); }

 private:
  std::vector<MapNode> nodes_;
  double spacing_m_ = 1.0;
  std::string backend_name_;
  KdTree2 spatial_;
  Eigen::MatrixXd descriptors_;  // one column per node
  std::vector<PointCloud> clouds_;
};

/// Greedy node selection: a scan is kept when its (x, y) is at least
/// `spacing_m` from every node kept so far. `descriptor_of` receives the raw
/// scan and returns its global descriptor.
TopoMap build_map(const std::vector<TrajectorySample>& trajectory, double spacing_m,
                  const std::function<GlobalDescriptor(const PointCloud&)>& descriptor_of,
                  std::string backend_name = "synthetic");

/// Convenience: descriptor = global_descriptor(backend, preprocess_for_descriptor(scan)).
TopoMap build_map(const std::vector<TrajectorySample>& trajectory, double spacing_m, const FeatureBackend& backend,
                  const PreprocessConfig& pre = {});

/// Indices of the samples the greedy builder keeps.
std::vector<std::size_t> select_nodes(const std::vector<Pose2>& poses, double spacing_m);

// Map directory: map.json, clouds/<id>.lpcd, descriptors/<id>.g.ldsc
void save_map(const std::filesystem::path& dir, const TopoMap& map);
TopoMap load_map(const std::filesystem::path& dir, bool load_clouds = true);
void export_nodes_csv(const std::filesystem::path& path, const TopoMap& map);

}  // namespace lockit
