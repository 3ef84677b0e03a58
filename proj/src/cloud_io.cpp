#include "lockit/cloud_io.hpp"

#include "binary_io.hpp"
#include "lockit/errors.hpp"

#include <fstream>
#include <sstream>

namespace lockit {

namespace {
constexpr std::uint16_t kLpcdVersion = 1;
constexpr std::uint8_t kFlagIntensity = 0x01;
}  // namespace

void write_lpcd(std::ostream& os, const PointCloud& cloud) {
  using detail::put;
  if (cloud.intensity && cloud.intensity->size() != cloud.size())
    throw Error(Errc::InvalidArgument, "intensity block size differs from point count");
  os.write("LPCD", 4);
  put<std::uint16_t>(os, kLpcdVersion);
  put<std::uint8_t>(os, cloud.intensity ? kFlagIntensity : 0);
  put<std::uint64_t>(os, cloud.size());
  for (const auto& p : cloud.points) {
    put<float>(os, static_cast<float>(p.x()));
    put<float>(os, static_cast<float>(p.y()));
    put<float>(os, static_cast<float>(p.z()));
  }
  if (cloud.intensity)
    for (float v : *cloud.intensity) put<float>(os, v);
  if (!os) throw Error(Errc::Io, "failed writing LPCD stream");
}

PointCloud read_lpcd(std::istream& is) {
  using detail::get;
  detail::expect_magic(is, "LPCD");
  const auto version = get<std::uint16_t>(is, "LPCD version");
  if (version != kLpcdVersion)
    throw Error(Errc::Parse, "unsupported LPCD version " + std::to_string(version));
  const auto flags = get<std::uint8_t>(is, "LPCD flags");
  const auto count = get<std::uint64_t>(is, "LPCD count");
  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const float x = get<float>(is, "LPCD point");
    const float y = get<float>(is, "LPCD point");
    const float z = get<float>(is, "LPCD point");
    cloud.points.emplace_back(x, y, z);
  }
  if (flags & kFlagIntensity) {
    std::vector<float> in(count);
    for (auto& v : in) v = get<float>(is, "LPCD intensity");
    cloud.intensity = std::move(in);
  }
  if (!cloud.all_finite()) throw Error(Errc::Parse, "LPCD contains non-finite coordinates");
  return cloud;
}

void save_lpcd(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::Io, "cannot open for writing: " + path.string());
  write_lpcd(os, cloud);
}

PointCloud load_lpcd(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::Io, "cannot open: " + path.string());
  try {
    PointCloud c = read_lpcd(is);
    c.source_id = path.stem().string();
    return c;
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

PointCloud read_xyz_text(std::istream& is, const std::string& source_name) {
  PointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x)) continue;  // blank or comment-only
    if (!(ls >> y >> z))
      throw Error(Errc::Parse, source_name + ":" + std::to_string(lineno) + ": expected \"x y z\"");
    std::string extra;
    if (ls >> extra)
      throw Error(Errc::Parse, source_name + ":" + std::to_string(lineno) + ": trailing token '" + extra + "'");
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
      throw Error(Errc::Parse, source_name + ":" + std::to_string(lineno) + ": non-finite coordinate");
    cloud.points.emplace_back(x, y, z);
  }
  return cloud;
}

PointCloud load_xyz_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::Io, "cannot open: " + path.string());
  PointCloud c = read_xyz_text(is, path.string());
  c.source_id = path.stem().string();
  return c;
}

PointCloud load_cloud(const std::filesystem::path& path) {
  if (path.extension() == ".lpcd") return load_lpcd(path);
  return load_xyz_text(path);
}

}  // namespace lockit
