#pragma once

#include "lockit/cloud.hpp"

#include <filesystem>
#include <iosfwd>

namespace lockit {

// LPCD binary layout (little-endian):
//   char[4] "LPCD" | u16 version=1 | u8 flags (bit0: intensity block) | u64 count
//   count * 3 * f32 xyz | [count * f32 intensity]
void write_lpcd(std::ostream& os, const PointCloud& cloud);
PointCloud read_lpcd(std::istream& is);

void save_lpcd(const std::filesystem::path& path, const PointCloud& cloud);
/// Sets `source_id` to the file stem.
PointCloud load_lpcd(const std::filesystem::path& path);

/// Whitespace-separated "x y z" per line; '#' starts a comment.
PointCloud read_xyz_text(std::istream& is, const std::string& source_name = "<stream>");
PointCloud load_xyz_text(const std::filesystem::path& path);

/// Dispatches on extension: .lpcd binary, anything else plain text.
PointCloud load_cloud(const std::filesystem::path& path);

}  // namespace lockit
