#pragma once

#include "lockit/geometry.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lockit {

/// One row of the pose CSV: id,x,y,yaw,cloud[,gt_x,gt_y,gt_yaw]. Blank gt
/// fields mean no truth for that row.
/// Mapping files carry ground-truth poses in x,y,yaw; query files carry
/// odometry poses there and the truth in the optional gt columns.
struct PoseRecord {
  std::string id;
  Pose2 pose;
  std::filesystem::path cloud;  // resolved against the CSV's directory on read
  std::optional<Pose2> truth;
};

std::vector<PoseRecord> read_pose_csv(const std::filesystem::path& path);

/// Cloud paths are written relative to the CSV's directory when possible.
void write_pose_csv(const std::filesystem::path& path, const std::vector<PoseRecord>& records);

}  // namespace lockit
