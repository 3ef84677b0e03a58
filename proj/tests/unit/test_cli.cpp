#include "lockit/evaluation.hpp"
#include "lockit/topo_map.hpp"
#include "lockit/trajectory_io.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lockit;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string err;
};

const fs::path& root() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "lockit_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run run_cli(const std::string& args) {
  const fs::path log = root() / "stderr.txt";
  const std::string cmd = std::string("\"") + LOCKIT_CLI_PATH + "\" " + args + " >/dev/null 2>\"" + log.string() + "\"";
  const int status = std::system(cmd.c_str());
  std::ifstream is(log);
  std::stringstream ss;
  ss << is.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::size_t greedy_count(const std::vector<PoseRecord>& recs, double spacing) {
  std::vector<Pose2> kept;
  for (const auto& r : recs) {
    const bool far = std::all_of(kept.begin(), kept.end(), [&](const Pose2& k) {
      return std::hypot(r.pose.x - k.x, r.pose.y - k.y) >= spacing;
    });
    if (far) kept.push_back(r.pose);
  }
  return kept.size();
}

const fs::path& world() {
  static const fs::path dir = [] {
    const fs::path d = root() / "world";
    REQUIRE(run_cli("simulate --out " + d.string() + " --query-frames 60").code == 0);
    REQUIRE(run_cli("build-map --trajectory " + (d / "mapping/poses.csv").string() + " --spacing 1.0 --out " +
                   (d / "map").string())
                .code == 0);
    return d;
  }();
  return dir;
}

std::vector<ErrorRecord> post_burn_in(const fs::path& errors_csv, const std::string& stage) {
  std::vector<ErrorRecord> out;
  for (const auto& e : read_errors_csv(errors_csv))
    if (e.post_burn_in && e.stage == stage) out.push_back(e);
  return out;
}

}  // namespace

TEST_CASE("simulate and build-map") {
  const fs::path& w = world();
  CHECK(fs::exists(w / "world.json"));
  const auto mapping = read_pose_csv(w / "mapping/poses.csv");
  CHECK(mapping.size() == 200);
  const auto queries = read_pose_csv(w / "queries/poses.csv");
  CHECK(queries.size() == 60);
  for (const auto& q : queries) CHECK(q.truth.has_value());

  const TopoMap map = load_map(w / "map", false);
  CHECK(map.size() == greedy_count(mapping, 1.0));

  REQUIRE(run_cli("build-map --trajectory " + (w / "mapping/poses.csv").string() + " --spacing 1.0 --out " +
                 (root() / "map2").string())
              .code == 0);
  CHECK(slurp(w / "map/map.json") == slurp(root() / "map2/map.json"));

  REQUIRE(run_cli("build-map --trajectory " + (w / "mapping/poses.csv").string() + " --spacing 3.0 --out " +
                 (root() / "map3").string())
              .code == 0);
  CHECK(load_map(root() / "map3", false).size() == greedy_count(mapping, 3.0));
}

TEST_CASE("error exits") {
  const fs::path missing = root() / "nowhere" / "poses.csv";
  const Run r = run_cli("build-map --trajectory " + missing.string() + " --out " + (root() / "m").string());
  CHECK(r.code == 3);
  CHECK(r.err.find(missing.string()) != std::string::npos);

  std::ofstream(root() / "bad.json") << R"({"mcl": {"particles": "many"}})";
  const Run c = run_cli("localize --map " + (world() / "map").string() + " --queries " +
                       (world() / "queries/poses.csv").string() + " --config " + (root() / "bad.json").string() +
                       " --out " + (root() / "badrun").string());
  CHECK(c.code == 2);

  CHECK(run_cli("localize --map x").code == 2);
  CHECK(run_cli("build-map --trajectory " + (world() / "mapping/poses.csv").string() + " --spacing 0 --out " +
               (root() / "m0").string())
            .code == 2);
}

TEST_CASE("localize, evaluate and plot") {
  const fs::path& w = world();
  const std::string base =
      "localize --map " + (w / "map").string() + " --queries " + (w / "queries/poses.csv").string() + " --seed 4";
  REQUIRE(run_cli(base + " --fine none --out " + (root() / "coarse_a").string()).code == 0);
  REQUIRE(run_cli(base + " --fine none --out " + (root() / "coarse_b").string()).code == 0);
  CHECK(slurp(root() / "coarse_a/trace.csv") == slurp(root() / "coarse_b/trace.csv"));
  const auto all = read_errors_csv(root() / "coarse_a/errors.csv");
  REQUIRE_FALSE(all.empty());
  for (const auto& e : all) CHECK(e.stage == "mcl");

  REQUIRE(run_cli(base + " --fine dlf --out " + (root() / "dlf").string()).code == 0);
  auto fine = post_burn_in(root() / "dlf/errors.csv", "mcl-dlf");
  REQUIRE(fine.size() >= 10);
  std::vector<double> pos;
  for (const auto& e : fine) pos.push_back(e.pos_err_m);
  CHECK(summarize(pos).median < 0.5);
  CHECK(fs::exists(root() / "dlf/registrations.jsonl"));

  const fs::path table = root() / "table";
  REQUIRE(run_cli("evaluate --runs " + (root() / "coarse_a").string() + " " + (root() / "dlf").string() + " --out " +
                 table.string())
              .code == 0);
  const std::string csv = slurp(table / "table.csv");
  CHECK(csv.find("mcl-dlf") != std::string::npos);
  CHECK(csv.find("mcl") != std::string::npos);
  CHECK(fs::exists(table / "table.txt"));

  REQUIRE(run_cli("plot --trace " + (root() / "dlf/trace.csv").string() + " --out " + (root() / "fig_a").string())
              .code == 0);
  REQUIRE(run_cli("plot --trace " + (root() / "dlf/trace.csv").string() + " --out " + (root() / "fig_b").string())
              .code == 0);
  std::size_t images = 0;
  for (const auto& entry : fs::directory_iterator(root() / "fig_a")) {
    ++images;
    CHECK(slurp(entry.path()) == slurp(root() / "fig_b" / entry.path().filename()));
  }
  CHECK(images >= 3);

  fs::create_directories(root() / "empty");
  std::ofstream(root() / "empty/trace.csv")
      << "iter,est_x,est_y,est_theta,effective_sample_size,top1_node_id,top1_desc_dist\n";
  const Run e = run_cli("plot --trace " + (root() / "empty/trace.csv").string() + " --out " +
                       (root() / "fig_empty").string());
  CHECK(e.code != 0);
  CHECK((!fs::exists(root() / "fig_empty") || fs::is_empty(root() / "fig_empty")));
}
