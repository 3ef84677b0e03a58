#include "lockit/evaluation.hpp"

#include "csv.hpp"
#include "lockit/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

namespace lockit {

double position_error_m(const Pose2& estimate, const Pose2& truth) {
  return std::hypot(estimate.x - truth.x, estimate.y - truth.y);
}

double orientation_error_deg(double estimate_rad, double truth_rad) {
  return std::abs(rad2deg(wrap_angle(estimate_rad - truth_rad)));
}

ErrorStats summarize(std::vector<double> values) {
  if (values.empty()) throw Error(Errc::EmptyInput, "no error values to summarize");
  ErrorStats s;
  s.count = values.size();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.count);
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = s.count > 1 ? std::sqrt(ss / static_cast<double>(s.count - 1)) : 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = s.count / 2;
  s.median = s.count % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return s;
}

ErrorRecord make_error_record(std::string session, int iter, std::string query_id, std::string stage,
                              const Pose2& estimate, const Pose2& truth, bool post_burn_in) {
  ErrorRecord r;
  r.session = std::move(session);
  r.iter = iter;
  r.query_id = std::move(query_id);
  r.stage = std::move(stage);
  r.estimate = estimate;
  r.truth = truth;
  r.pos_err_m = position_error_m(estimate, truth);
  r.ori_err_deg = orientation_error_deg(estimate.theta, truth.theta);
  r.post_burn_in = post_burn_in;
  return r;
}

namespace {

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void check_field(const std::string& s, const char* what) {
  if (s.find_first_of(",\n\r") != std::string::npos)
    throw Error(Errc::InvalidArgument, std::string(what) + " must not contain commas or newlines: '" + s + "'");
}

}  // namespace

void write_errors_header(std::ostream& os) {
  os << "session,iter,query_id,stage,est_x,est_y,est_yaw,gt_x,gt_y,gt_yaw,pos_err_m,ori_err_deg,region,post_burn_in\n";
}

void write_error_record(std::ostream& os, const ErrorRecord& r) {
  check_field(r.session, "session");
  check_field(r.query_id, "query id");
  check_field(r.stage, "stage");
  check_field(r.region, "region");
  os << r.session << ',' << r.iter << ',' << r.query_id << ',' << r.stage << ',' << num(r.estimate.x) << ','
     << num(r.estimate.y) << ',' << num(r.estimate.theta) << ',' << num(r.truth.x) << ',' << num(r.truth.y) << ','
     << num(r.truth.theta) << ',' << num(r.pos_err_m) << ',' << num(r.ori_err_deg) << ',' << r.region << ','
     << (r.post_burn_in ? 1 : 0) << '\n';
}

void write_errors_csv(const std::filesystem::path& path, const std::vector<ErrorRecord>& records) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::Io, "cannot write " + path.string());
  write_errors_header(os);
  for (const auto& r : records) write_error_record(os, r);
  if (!os) throw Error(Errc::Io, "write failed: " + path.string());
}

std::vector<ErrorRecord> read_errors_csv(std::istream& is, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) break;
  }
  if (line.empty()) throw Error(Errc::EmptyInput, source_name + ": no header");
  const detail::CsvHeader header(detail::split_csv(line), source_name);
  const std::size_t c_session = header.index("session"), c_iter = header.index("iter"),
                    c_query = header.index("query_id"), c_stage = header.index("stage"),
                    c_pos = header.index("pos_err_m"), c_ori = header.index("ori_err_deg");
  const bool has_poses = header.has("est_x");
  const bool has_region = header.has("region");
  const bool has_burn = header.has("post_burn_in");

  std::vector<ErrorRecord> out;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::string where = source_name + ":" + std::to_string(line_no);
    const auto f = detail::split_csv(line);
    if (f.size() != header.size())
      throw Error(Errc::Parse, where + ": expected " + std::to_string(header.size()) + " fields, got " +
                                   std::to_string(f.size()));
    ErrorRecord r;
    r.session = f[c_session];
    r.iter = static_cast<int>(detail::parse_int(f[c_iter], where));
    r.query_id = f[c_query];
    r.stage = f[c_stage];
    r.pos_err_m = detail::parse_double(f[c_pos], where);
    r.ori_err_deg = detail::parse_double(f[c_ori], where);
    if (!(r.pos_err_m >= 0) || !(r.ori_err_deg >= 0) || r.ori_err_deg > 180.0)
      throw Error(Errc::Parse, where + ": error values out of range");
    if (has_poses) {
      auto get = [&](const char* name) { return detail::parse_double(f[header.index(name)], where); };
      r.estimate = Pose2(get("est_x"), get("est_y"), get("est_yaw"));
      r.truth = Pose2(get("gt_x"), get("gt_y"), get("gt_yaw"));
    }
    if (has_region) r.region = f[header.index("region")];
    if (has_burn) r.post_burn_in = detail::parse_int(f[header.index("post_burn_in")], where) != 0;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ErrorRecord> read_errors_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::Io, "cannot open " + path.string());
  return read_errors_csv(is, path.string());
}

// ---------------------------------------------------------------------------

bool Region::contains(const Eigen::Vector2d& p) const {
  bool inside = false;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = polygon[i];
    const auto& b = polygon[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) && p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x())
      inside = !inside;
  }
  return inside;
}

const std::string& RegionSet::classify(const Eigen::Vector2d& p) const {
  for (const auto& r : regions)
    if (r.contains(p)) return r.name;
  return fallback;
}

RegionSet load_regions(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::Io, "cannot open " + path.string());
  RegionSet set;
  try {
    const auto j = nlohmann::json::parse(is);
    set.fallback = j.value("default", std::string("outdoor"));
    for (const auto& rj : j.at("regions")) {
      Region r;
      r.name = rj.at("name").get<std::string>();
      for (const auto& v : rj.at("polygon")) r.polygon.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
      if (r.polygon.size() < 3) throw Error(Errc::Parse, path.string() + ": region '" + r.name + "' needs >= 3 vertices");
      set.regions.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, path.string() + ": " + e.what());
  }
  return set;
}

void tag_regions(std::vector<ErrorRecord>& records, const RegionSet& regions) {
  for (auto& r : records) r.region = regions.classify(r.truth.position());
}

// ---------------------------------------------------------------------------

std::vector<TableRow> aggregate(const std::vector<ErrorRecord>& records, const TableOptions& opts) {
  using Key = std::tuple<std::size_t, std::size_t, std::size_t>;
  std::vector<std::string> sessions, stages, regions{"all"};
  auto slot = [](std::vector<std::string>& names, const std::string& n) {
    const auto it = std::find(names.begin(), names.end(), n);
    if (it != names.end()) return static_cast<std::size_t>(it - names.begin());
    names.push_back(n);
    return names.size() - 1;
  };

  std::map<Key, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : records) {
    if (opts.post_burn_in_only && !r.post_burn_in) continue;
    const std::size_t s = slot(sessions, r.session), st = slot(stages, r.stage);
    auto add = [&](std::size_t session_slot, std::size_t region_slot) {
      auto& g = groups[{session_slot, st, region_slot}];
      g.first.push_back(r.pos_err_m);
      g.second.push_back(r.ori_err_deg);
    };
    add(s, 0);
    if (opts.split_regions) add(s, slot(regions, r.region.empty() ? std::string("unlabelled") : r.region));
  }
  if (groups.empty()) throw Error(Errc::EmptyInput, "no scored error records");

  const std::size_t overall = sessions.size();
  if (sessions.size() > 1) {
    std::map<Key, std::pair<std::vector<double>, std::vector<double>>> extra;
    for (const auto& [k, g] : groups) {
      auto& e = extra[{overall, std::get<1>(k), std::get<2>(k)}];
      e.first.insert(e.first.end(), g.first.begin(), g.first.end());
      e.second.insert(e.second.end(), g.second.begin(), g.second.end());
    }
    groups.insert(extra.begin(), extra.end());
  }

  std::vector<TableRow> rows;
  for (const auto& [k, g] : groups) {
    const auto [s, st, rg] = k;
    TableRow row;
    row.session = s == overall ? std::string("overall") : sessions[s];
    row.stage = stages[st];
    row.region = regions[rg];
    row.position = summarize(g.first);
    row.orientation = summarize(g.second);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_table_csv(std::ostream& os, const std::vector<TableRow>& rows) {
  os << "session,stage,region,count,pos_median_m,pos_mean_m,pos_std_m,ori_median_deg,ori_mean_deg,ori_std_deg\n";
  for (const auto& r : rows) {
    os << r.session << ',' << r.stage << ',' << r.region << ',' << r.position.count << ',' << num(r.position.median)
       << ',' << num(r.position.mean) << ',' << num(r.position.stddev) << ',' << num(r.orientation.median) << ','
       << num(r.orientation.mean) << ',' << num(r.orientation.stddev) << '\n';
  }
}

std::string format_table(const std::vector<TableRow>& rows) {
  std::size_t w_session = 7, w_stage = 6, w_region = 6;
  for (const auto& r : rows) {
    w_session = std::max(w_session, r.session.size());
    w_stage = std::max(w_stage, r.stage.size());
    w_region = std::max(w_region, r.region.size());
  }
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(w_session)) << "session" << "  " << std::setw(static_cast<int>(w_stage))
     << "method" << "  " << std::setw(static_cast<int>(w_region)) << "region" << std::right << std::setw(8) << "n"
     << std::setw(18) << "median error [m]" << std::setw(16) << "mean error [m]" << std::setw(20)
     << "median error [deg]" << std::setw(18) << "mean error [deg]" << '\n';
  os << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(w_session)) << r.session << "  " << std::setw(static_cast<int>(w_stage))
       << r.stage << "  " << std::setw(static_cast<int>(w_region)) << r.region << std::right << std::setw(8)
       << r.position.count << std::setw(18) << r.position.median << std::setw(16) << r.position.mean << std::setw(20)
       << r.orientation.median << std::setw(18) << r.orientation.mean << '\n';
  }
  return os.str();
}

}  // namespace lockit
