#include "lockit/errors.hpp"
#include "lockit/evaluation.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

using namespace lockit;

namespace {

struct OracleStats {
  std::size_t n = 0;
  double median = 0, mean = 0, stddev = 0;
};

// One pass over values in a plain loop; median by full sort.
OracleStats oracle(std::vector<double> v) {
  OracleStats s;
  s.n = v.size();
  double sum = 0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.stddev = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  s.median = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  return s;
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

std::vector<ErrorRecord> random_records(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-50, 50), a(-3.14, 3.14);
  std::uniform_int_distribution<int> pick(0, 2);
  const char* sessions[] = {"2012-02-19", "2012-03-31", "2012-05-26"};
  const char* stages[] = {"mcl", "mcl-dlf", "mcl-icp"};
  std::vector<ErrorRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const Pose2 truth(u(rng), u(rng), a(rng));
    const Pose2 est(truth.x + u(rng) / 20, truth.y + u(rng) / 20, a(rng));
    out.push_back(make_error_record(sessions[pick(rng)], static_cast<int>(i), "q" + std::to_string(i),
                                    stages[pick(rng)], est, truth, pick(rng) != 0));
  }
  return out;
}

}  // namespace

TEST_CASE("summary arithmetic") {
  const auto s = summarize({1, 2, 100});
  CHECK(s.count == 3);
  CHECK(s.median == 2.0);
  CHECK(s.mean == doctest::Approx(34.333333333333));
  CHECK(std::round(s.mean * 100) / 100 == 34.33);
  CHECK(summarize({4, 1, 3, 2}).median == 2.5);
  CHECK(summarize({7}).stddev == 0.0);
  CHECK(summarize({2, 4}).stddev == doctest::Approx(std::sqrt(2.0)));
  try {
    summarize({});
    FAIL("expected EmptyInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyInput);
  }
}

TEST_CASE("error metrics") {
  CHECK(orientation_error_deg(deg2rad(-179), deg2rad(179)) == doctest::Approx(2.0));
  CHECK(orientation_error_deg(deg2rad(10), deg2rad(-10)) == doctest::Approx(20.0));
  CHECK(orientation_error_deg(std::numbers::pi, 0.0) == doctest::Approx(180.0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> a(-20, 20);
  for (int i = 0; i < 1000; ++i) {
    const double e = orientation_error_deg(a(rng), a(rng));
    CHECK(e >= 0.0);
    CHECK(e <= 180.0);
  }
  CHECK(position_error_m(Pose2(3, 4, 0), Pose2(0, 0, 1)) == doctest::Approx(5.0));
}

TEST_CASE("errors CSV round trip") {
  const auto records = random_records(2, 50);
  std::stringstream ss;
  write_errors_header(ss);
  for (const auto& r : records) write_error_record(ss, r);
  const auto back = read_errors_csv(ss);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].session == records[i].session);
    CHECK(back[i].stage == records[i].stage);
    CHECK(back[i].query_id == records[i].query_id);
    CHECK(back[i].pos_err_m == records[i].pos_err_m);
    CHECK(back[i].ori_err_deg == records[i].ori_err_deg);
    CHECK(back[i].estimate.x == records[i].estimate.x);
    CHECK(back[i].truth.theta == records[i].truth.theta);
    CHECK(back[i].post_burn_in == records[i].post_burn_in);
  }
}

TEST_CASE("externally supplied minimal CSV") {
  std::istringstream is(
      "session,iter,query_id,stage,pos_err_m,ori_err_deg\n"
      "a,1,q1,mcl,1,3\n"
      "a,2,q2,mcl,2,1\n"
      "a,3,q3,mcl,100,2\n");
  const auto recs = read_errors_csv(is);
  const auto rows = aggregate(recs);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].position.median == 2.0);
  CHECK(rows[0].position.mean == doctest::Approx(103.0 / 3));
  CHECK(rows[0].orientation.median == 2.0);

  std::istringstream missing("session,iter,stage\n");
  CHECK_THROWS_AS(read_errors_csv(missing), Error);
  std::istringstream bad(
      "session,iter,query_id,stage,pos_err_m,ori_err_deg\n"
      "a,1,q1,mcl,x,3\n");
  try {
    read_errors_csv(bad, "runs/errors.csv");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Parse);
    CHECK(std::string(e.what()).find("runs/errors.csv:2") != std::string::npos);
  }
  std::istringstream out_of_range(
      "session,iter,query_id,stage,pos_err_m,ori_err_deg\n"
      "a,1,q1,mcl,1,270\n");
  CHECK_THROWS_AS(read_errors_csv(out_of_range), Error);
}

TEST_CASE("aggregation equals a scalar oracle") {
  auto records = random_records(3, 600);
  std::stringstream ss;
  write_errors_header(ss);
  for (const auto& r : records) write_error_record(ss, r);
  records = read_errors_csv(ss);

  for (bool burn : {true, false}) {
    TableOptions opts;
    opts.post_burn_in_only = burn;
    const auto rows = aggregate(records, opts);
    std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (const auto& r : records) {
      if (burn && !r.post_burn_in) continue;
      for (const std::string& s : {r.session, std::string("overall")}) {
        groups[{s, r.stage}].first.push_back(r.pos_err_m);
        groups[{s, r.stage}].second.push_back(r.ori_err_deg);
      }
    }
    CHECK(rows.size() == groups.size());
    for (const auto& row : rows) {
      CHECK(row.region == "all");
      const auto it = groups.find({row.session, row.stage});
      REQUIRE(it != groups.end());
      const auto p = oracle(it->second.first), o = oracle(it->second.second);
      CHECK(row.position.count == p.n);
      CHECK(close(row.position.median, p.median));
      CHECK(close(row.position.mean, p.mean));
      CHECK(close(row.position.stddev, p.stddev));
      CHECK(close(row.orientation.median, o.median));
      CHECK(close(row.orientation.mean, o.mean));
    }
  }
}

TEST_CASE("region tagging and split tables") {
  const auto dir = std::filesystem::temp_directory_path() / "lockit_test_regions";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "regions.json")
      << R"({"default": "outdoor", "regions": [{"name": "indoor", "polygon": [[0,0],[10,0],[10,10],[0,10]]}]})";
  const RegionSet regions = load_regions(dir / "regions.json");
  CHECK(regions.classify({5, 5}) == "indoor");
  CHECK(regions.classify({15, 5}) == "outdoor");

  Region tri{"tri", {{0, 0}, {4, 0}, {0, 4}}};
  CHECK(tri.contains({1, 1}));
  CHECK_FALSE(tri.contains({3, 3}));

  std::vector<ErrorRecord> recs;
  recs.push_back(make_error_record("s", 1, "a", "mcl", Pose2(5, 5, 0), Pose2(5, 6, 0), true));
  recs.push_back(make_error_record("s", 2, "b", "mcl", Pose2(20, 5, 0), Pose2(20, 8, 0), true));
  recs.push_back(make_error_record("s", 3, "c", "mcl", Pose2(2, 2, 0), Pose2(2, 2, 0.1), true));
  tag_regions(recs, regions);
  CHECK(recs[0].region == "indoor");
  CHECK(recs[1].region == "outdoor");

  TableOptions opts;
  opts.split_regions = true;
  const auto rows = aggregate(recs, opts);
  REQUIRE(rows.size() == 3);
  std::map<std::string, TableRow> by;
  for (const auto& r : rows) by[r.region] = r;
  CHECK(by["all"].position.count == 3);
  CHECK(by["indoor"].position.median == doctest::Approx(0.5));
  CHECK(by["outdoor"].position.mean == doctest::Approx(3.0));

  std::ostringstream csv;
  write_table_csv(csv, rows);
  CHECK(csv.str().rfind("session,stage,region,count,pos_median_m", 0) == 0);
  const std::string text = format_table(rows);
  CHECK(text.find("median error [m]") != std::string::npos);
  CHECK(text.find("mean error [deg]") != std::string::npos);

  std::vector<ErrorRecord> burn_only{make_error_record("s", 1, "a", "mcl", Pose2(), Pose2(), false)};
  try {
    aggregate(burn_only);
    FAIL("expected EmptyInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyInput);
  }
}
