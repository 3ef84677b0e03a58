#pragma once

#include "lockit/geometry.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace lockit {

/// Euclidean error in (x, y), metres.
double position_error_m(const Pose2& estimate, const Pose2& truth);

/// Absolute wrapped yaw difference in degrees, in [0, 180].
double orientation_error_deg(double estimate_rad, double truth_rad);

struct ErrorStats {
  std::size_t count = 0;
  double median = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single value
};

/// Throws EmptyInput on an empty sequence.
ErrorStats summarize(std::vector<double> values);

/// One scored query of one localization stage.
struct ErrorRecord {
  std::string session;
  int iter = 0;
  std::string query_id;
  std::string stage;  // "mcl", "mcl-icp" or "mcl-dlf"
  Pose2 estimate;
  Pose2 truth;
  double pos_err_m = 0.0;
  double ori_err_deg = 0.0;
  std::string region;
  bool post_burn_in = true;
};

ErrorRecord make_error_record(std::string session, int iter, std::string query_id, std::string stage,
                              const Pose2& estimate, const Pose2& truth, bool post_burn_in);

void write_errors_header(std::ostream& os);
void write_error_record(std::ostream& os, const ErrorRecord& r);
void write_errors_csv(const std::filesystem::path& path, const std::vector<ErrorRecord>& records);
std::vector<ErrorRecord> read_errors_csv(std::istream& is, const std::string& source_name = "<stream>");
std::vector<ErrorRecord> read_errors_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Region tagging

struct Region {
  std::string name;
  std::vector<Eigen::Vector2d> polygon;  // implicit closing edge

  bool contains(const Eigen::Vector2d& p) const;
};

struct RegionSet {
  std::vector<Region> regions;
  std::string fallback = "outdoor";  // name for points outside every polygon

  /// First region whose polygon contains `p`, else `fallback`.
  const std::string& classify(const Eigen::Vector2d& p) const;
};

/// {"default": "outdoor", "regions": [{"name": "indoor", "polygon": [[x, y], ...]}]}
RegionSet load_regions(const std::filesystem::path& path);

/// Sets each record's region from its ground-truth position.
void tag_regions(std::vector<ErrorRecord>& records, const RegionSet& regions);

// ---------------------------------------------------------------------------
// Tables

struct TableRow {
  std::string session;  // "overall" aggregates every session
  std::string stage;
  std::string region;  // "all" when not split
  ErrorStats position;
  ErrorStats orientation;
};

struct TableOptions {
  bool post_burn_in_only = true;
  bool split_regions = false;
};

/// Rows grouped by (session, stage, region) in first-appearance order,
/// followed by the "overall" rows. Throws EmptyInput when nothing is scored.
std::vector<TableRow> aggregate(const std::vector<ErrorRecord>& records, const TableOptions& opts = {});

void write_table_csv(std::ostream& os, const std::vector<TableRow>& rows);

/// Text layout with one row per method and "median error [m] & mean error [m]"
/// style columns for position and orientation.
std::string format_table(const std::vector<TableRow>& rows);

}  // namespace lockit
