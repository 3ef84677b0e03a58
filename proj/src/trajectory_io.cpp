#include "lockit/trajectory_io.hpp"

#include "csv.hpp"
#include "lockit/errors.hpp"

#include <charconv>
#include <fstream>

namespace lockit {

std::vector<PoseRecord> read_pose_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::Io, "cannot open " + path.string());
  const std::filesystem::path base = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  std::optional<detail::CsvHeader> header;
  std::vector<PoseRecord> out;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    auto fields = detail::split_csv(line);
    if (!header) {
      header.emplace(std::move(fields), path.string());
      for (const char* col : {"id", "x", "y", "yaw", "cloud"}) header->index(col);
      continue;
    }
    if (fields.size() != header->size())
      throw Error(Errc::Parse, where + ": expected " + std::to_string(header->size()) + " fields, got " +
                                   std::to_string(fields.size()));
    auto get = [&](const char* name) { return detail::parse_double(fields[header->index(name)], where); };
    PoseRecord r;
    r.id = fields[header->index("id")];
    r.pose = Pose2(get("x"), get("y"), get("yaw"));
    const std::filesystem::path cloud = fields[header->index("cloud")];
    r.cloud = cloud.is_absolute() || cloud.empty() ? cloud : base / cloud;
    if (header->has("gt_x") && !fields[header->index("gt_x")].empty())
      r.truth = Pose2(get("gt_x"), get("gt_y"), get("gt_yaw"));
    if (!r.pose.finite()) throw Error(Errc::Parse, where + ": non-finite pose");
    out.push_back(std::move(r));
  }
  if (!header) throw Error(Errc::EmptyInput, path.string() + ": no header");
  if (out.empty()) throw Error(Errc::EmptyTrajectory, path.string() + ": no poses");
  return out;
}

namespace {

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_pose_csv(const std::filesystem::path& path, const std::vector<PoseRecord>& records) {
  bool with_truth = false;
  for (const auto& r : records) with_truth = with_truth || r.truth.has_value();
  std::ofstream os(path);
  if (!os) throw Error(Errc::Io, "cannot write " + path.string());
  os << "id,x,y,yaw,cloud" << (with_truth ? ",gt_x,gt_y,gt_yaw" : "") << '\n';
  const std::filesystem::path base = path.parent_path();
  for (const auto& r : records) {
    std::filesystem::path cloud = r.cloud;
    if (cloud.is_absolute() && !base.empty()) cloud = cloud.lexically_relative(std::filesystem::absolute(base));
    os << r.id << ',' << num(r.pose.x) << ',' << num(r.pose.y) << ',' << num(r.pose.theta) << ',' << cloud.generic_string();
    if (r.truth) os << ',' << num(r.truth->x) << ',' << num(r.truth->y) << ',' << num(r.truth->theta);
    else if (with_truth) os << ",,,";
    os << '\n';
  }
  if (!os) throw Error(Errc::Io, "write failed: " + path.string());
}

}  // namespace lockit
