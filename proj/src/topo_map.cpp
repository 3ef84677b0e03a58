#include "lockit/topo_map.hpp"

#include "lockit/cloud_io.hpp"
#include "lockit/descriptor_io.hpp"
#include "lockit/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>

namespace lockit {

TopoMap::TopoMap(std::vector<MapNode> nodes, double spacing_m, std::string backend_name)
    : nodes_(std::move(nodes)), spacing_m_(spacing_m), backend_name_(std::move(backend_name)) {
  std::set<int> ids;
  for (const auto& n : nodes_) {
    if (!ids.insert(n.id).second) throw Error(Errc::InvalidArgument, "duplicate node id " + std::to_string(n.id));
    if (!n.position.allFinite()) throw Error(Errc::InvalidArgument, "non-finite node position");
  }
  // Keep nodes sorted by id so index order and id order agree for tie-breaks.
  std::stable_sort(nodes_.begin(), nodes_.end(), [](const MapNode& a, const MapNode& b) { return a.id < b.id; });

  std::vector<KdTree2::Point> pos;
  pos.reserve(nodes_.size());
  for (const auto& n : nodes_) pos.push_back(n.position);
  spatial_ = KdTree2(std::move(pos));

  if (!nodes_.empty()) {
    const Eigen::Index dim = nodes_.front().descriptor.values.size();
    descriptors_.resize(dim, static_cast<Eigen::Index>(nodes_.size()));
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].descriptor.values.size() != dim)
        throw Error(Errc::DimensionMismatch, "node descriptors differ in dimension");
      descriptors_.col(static_cast<Eigen::Index>(i)) = nodes_[i].descriptor.values;
    }
  }
}

std::size_t TopoMap::nearest_index(double x, double y) const {
  if (nodes_.empty()) throw Error(Errc::EmptyMap, "nearest node query on an empty map");
  return spatial_.nearest(KdTree2::Point(x, y)).index;
}

std::vector<DescriptorMatch> TopoMap::top_b_descriptor_matches(const GlobalDescriptor& query, std::size_t b) const {
  if (nodes_.empty()) throw Error(Errc::EmptyMap, "descriptor query on an empty map");
  if (b < 1 || b > nodes_.size())
    throw Error(Errc::BTooLarge, "B = " + std::to_string(b) + " but map has " + std::to_string(nodes_.size()) + " nodes");
  if (query.values.size() != descriptors_.rows())
    throw Error(Errc::DimensionMismatch, "query descriptor dimension differs from map");

  const Eigen::VectorXd d2 = (descriptors_.colwise() - query.values).colwise().squaredNorm().transpose();
  std::vector<std::size_t> order(nodes_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(b), order.end(),
                    [&](std::size_t i, std::size_t j) { return d2[i] < d2[j] || (d2[i] == d2[j] && i < j); });
  std::vector<DescriptorMatch> out;
  out.reserve(b);
  for (std::size_t k = 0; k < b; ++k) out.push_back({order[k], std::sqrt(d2[order[k]])});
  return out;
}

std::optional<std::size_t> TopoMap::index_of(int id) const {
  const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id, [](const MapNode& n, int v) { return n.id < v; });
  if (it == nodes_.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - nodes_.begin());
}

const PointCloud& TopoMap::cloud(std::size_t index) const {
  if (index >= clouds_.size()) throw Error(Errc::Io, "map has no stored cloud for node index " + std::to_string(index));
  return clouds_[index];
}

void TopoMap::attach_clouds(std::vector<PointCloud> clouds) {
  if (clouds.size() != nodes_.size()) throw Error(Errc::InvalidArgument, "cloud count differs from node count");
  clouds_ = std::move(clouds);
}

std::vector<std::size_t> select_nodes(const std::vector<Pose2>& poses, double spacing_m) {
  if (!(spacing_m > 0)) throw Error(Errc::InvalidArgument, "spacing must be > 0");
  std::vector<std::size_t> kept;
  std::vector<KdTree2::Point> kept_pos;
  const double s2 = spacing_m * spacing_m;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (!poses[i].finite()) throw Error(Errc::InvalidArgument, "non-finite trajectory pose");
    const KdTree2::Point p(poses[i].x, poses[i].y);
    bool far = true;
    for (const auto& q : kept_pos)
      if ((q - p).squaredNorm() < s2) {
        far = false;
        break;
      }
    if (far) {
      kept.push_back(i);
      kept_pos.push_back(p);
    }
  }
  return kept;
}

TopoMap build_map(const std::vector<TrajectorySample>& trajectory, double spacing_m,
                  const std::function<GlobalDescriptor(const PointCloud&)>& descriptor_of,
                  std::string backend_name) {
  if (trajectory.empty()) throw Error(Errc::EmptyTrajectory, "map trajectory is empty");
  std::vector<Pose2> poses;
  poses.reserve(trajectory.size());
  for (const auto& s : trajectory) poses.push_back(s.pose);
  const auto kept = select_nodes(poses, spacing_m);

  std::vector<MapNode> nodes;
  std::vector<PointCloud> clouds;
  nodes.reserve(kept.size());
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const auto& s = trajectory[kept[k]];
    MapNode n;
    n.id = static_cast<int>(k);
    n.position = s.pose.position();
    n.yaw_at_capture = s.pose.theta;
    n.cloud_ref = s.cloud.source_id.empty() ? "node_" + std::to_string(k) : s.cloud.source_id;
    n.descriptor = descriptor_of(s.cloud);
    nodes.push_back(std::move(n));
    clouds.push_back(s.cloud);
  }
  TopoMap map(std::move(nodes), spacing_m, std::move(backend_name));
  map.attach_clouds(std::move(clouds));
  return map;
}

TopoMap build_map(const std::vector<TrajectorySample>& trajectory, double spacing_m, const FeatureBackend& backend,
                  const PreprocessConfig& pre) {
  return build_map(
      trajectory, spacing_m,
      [&](const PointCloud& c) { return global_descriptor(backend, preprocess_for_descriptor(c, pre)); },
      backend.name());
}

namespace {
constexpr int kMapVersion = 1;
}

void save_map(const std::filesystem::path& dir, const TopoMap& map) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "clouds");
  fs::create_directories(dir / "descriptors");
  nlohmann::json j;
  j["version"] = kMapVersion;
  j["spacing_m"] = map.spacing();
  j["backend"] = map.backend_name();
  auto& table = j["nodes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < map.size(); ++i) {
    const MapNode& n = map.node(i);
    const std::string key = "node_" + std::to_string(n.id);
    const std::string cloud_file = "clouds/" + key + ".lpcd";
    const std::string desc_file = "descriptors/" + key + ".g.ldsc";
    if (map.has_clouds()) save_lpcd(dir / cloud_file, map.cloud(i));
    save_global_ldsc(dir / desc_file, n.descriptor, map.backend_name());
    table.push_back({{"id", n.id},
                     {"x", n.position.x()},
                     {"y", n.position.y()},
                     {"yaw", n.yaw_at_capture},
                     {"source", n.cloud_ref},
                     {"cloud", map.has_clouds() ? nlohmann::json(cloud_file) : nlohmann::json(nullptr)},
                     {"descriptors", {{"global", desc_file}}}});
  }
  std::ofstream os(dir / "map.json");
  if (!os) throw Error(Errc::Io, "cannot write " + (dir / "map.json").string());
  os << j.dump(2) << '\n';
}

TopoMap load_map(const std::filesystem::path& dir, bool load_clouds) {
  const auto manifest = dir / "map.json";
  std::ifstream is(manifest);
  if (!is) throw Error(Errc::Io, "cannot open map manifest " + manifest.string());
  nlohmann::json j;
  try {
    is >> j;
    if (j.at("version").get<int>() != kMapVersion) throw Error(Errc::Parse, "unsupported map version");
    std::vector<MapNode> nodes;
    std::vector<PointCloud> clouds;
    bool all_clouds = load_clouds;
    for (const auto& nj : j.at("nodes")) {
      MapNode n;
      n.id = nj.at("id").get<int>();
      n.position = {nj.at("x").get<double>(), nj.at("y").get<double>()};
      n.yaw_at_capture = nj.value("yaw", 0.0);
      n.cloud_ref = nj.value("source", std::string{});
      n.descriptor = load_global_ldsc(dir / nj.at("descriptors").at("global").get<std::string>());
      if (all_clouds && nj.contains("cloud") && nj["cloud"].is_string()) {
        PointCloud c = load_lpcd(dir / nj["cloud"].get<std::string>());
        if (!n.cloud_ref.empty()) c.source_id = n.cloud_ref;
        clouds.push_back(std::move(c));
      } else {
        all_clouds = false;
      }
      nodes.push_back(std::move(n));
    }
    // Clouds follow the manifest order; the map sorts by id, so pair them up first.
    std::vector<std::size_t> order(nodes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return nodes[a].id < nodes[b].id; });
    TopoMap map(std::move(nodes), j.at("spacing_m").get<double>(), j.value("backend", std::string("synthetic")));
    if (all_clouds && !clouds.empty()) {
      std::vector<PointCloud> sorted;
      sorted.reserve(clouds.size());
      for (std::size_t k : order) sorted.push_back(std::move(clouds[k]));
      map.attach_clouds(std::move(sorted));
    }
    return map;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::Parse, manifest.string() + ": " + ex.what());
  }
}

void export_nodes_csv(const std::filesystem::path& path, const TopoMap& map) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::Io, "cannot write " + path.string());
  os << "id,x,y,yaw\n" << std::setprecision(17);
  for (const auto& n : map.nodes()) os << n.id << ',' << n.position.x() << ',' << n.position.y() << ',' << n.yaw_at_capture << '\n';
}

}  // namespace lockit
