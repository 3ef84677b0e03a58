#include "helpers.hpp"
#include "lockit/errors.hpp"

#include <doctest.h>

#include <map>
#include <random>
#include <set>
#include <tuple>

using namespace lockit;

namespace {

PointCloud ball(std::size_t n, double radius, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  PointCloud c;
  while (c.size() < n) {
    Vec3 p(u(rng), u(rng), u(rng));
    if (p.norm() <= radius) c.points.push_back(p);
  }
  return c;
}

using VoxelKey = std::tuple<long, long, long>;

VoxelKey voxel_of(const Vec3& p, double size) {
  return {static_cast<long>(std::floor(p.x() / size)), static_cast<long>(std::floor(p.y() / size)),
          static_cast<long>(std::floor(p.z() / size))};
}

// Box standing on a flat floor. Returns the cloud and how many points belong
// to the box.
std::pair<PointCloud, std::size_t> box_on_floor() {
  PointCloud c;
  for (const auto& p : test::grid_plane(10, 0.2, 0.0)) c.points.push_back(p);
  std::size_t box = 0;
  for (double x = 2; x <= 3 + 1e-9; x += 0.1)
    for (double y = 2; y <= 3 + 1e-9; y += 0.1)
      for (double z : {0.6, 1.0, 1.4}) {
        c.points.emplace_back(x, y, z);
        ++box;
      }
  return {c, box};
}

}  // namespace

TEST_CASE("crop_range keeps exactly the points inside the radius") {
  PointCloud c;
  c.points = {Vec3(49.9, 0, 0), Vec3(50.1, 0, 0)};
  const auto out = crop_range(c, 50);
  REQUIRE(out.size() == 1);
  CHECK(out.points[0].x() == doctest::Approx(49.9));
  CHECK(crop_range(PointCloud{}, 50).empty());

  const PointCloud big = ball(1000, 100, 1);
  std::vector<Vec3> expect;
  for (const auto& p : big.points)
    if (p.norm() <= 50) expect.push_back(p);
  const auto cropped = crop_range(big, 50);
  REQUIRE(cropped.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(cropped.points[i] == expect[i]);
  CHECK(crop_range(cropped, 50).points == cropped.points);
  CHECK_THROWS_AS(crop_range(c, 0), Error);
}

TEST_CASE("center_and_scale divides by the factor") {
  PointCloud c;
  c.points = {Vec3(25, 0, 0), Vec3(0, 0, 0)};
  const auto s = center_and_scale(c, 50);
  CHECK(s.points[0] == Vec3(0.5, 0, 0));
  CHECK(s.points[1] == Vec3(0, 0, 0));

  const PointCloud cropped = crop_range(ball(2000, 80, 2), 50);
  const auto scaled = center_and_scale(cropped, 50);
  double max_abs = 0;
  for (const auto& p : scaled.points) max_abs = std::max(max_abs, p.cwiseAbs().maxCoeff());
  CHECK(max_abs <= 1.0);
  for (std::size_t i = 0; i < cropped.size(); ++i)
    CHECK((scaled.points[i] * 50 - cropped.points[i]).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("recenter_on_centroid") {
  PointCloud c;
  c.points = {Vec3(1, 1, 1), Vec3(3, 1, 1)};
  const auto r = recenter_on_centroid(c);
  CHECK(r.points[0] == Vec3(-1, 0, 0));
  CHECK(recenter_on_centroid(PointCloud{}).empty());
}

TEST_CASE("voxel_downsample examples") {
  PointCloud near;
  near.points = {Vec3(0.1, 0.1, 0.1), Vec3(0.11, 0.1, 0.1)};
  const auto one = voxel_downsample(near, 0.3);
  REQUIRE(one.size() == 1);
  CHECK((one.points[0] - Vec3(0.105, 0.1, 0.1)).norm() < 1e-12);

  PointCloud apart;
  apart.points = {Vec3(0.1, 0.1, 0.1), Vec3(0.4, 0.1, 0.1)};
  CHECK(voxel_downsample(apart, 0.3).size() == 2);
}

TEST_CASE("voxel_downsample matches an independent voxel census") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PointCloud c = ball(5000, 10, 100 + seed);
    const double size = 0.5 + 0.3 * seed;
    std::map<VoxelKey, std::pair<Vec3, int>> census;
    for (const auto& p : c.points) {
      auto& [sum, n] = census[voxel_of(p, size)];
      if (n == 0) sum = Vec3::Zero();
      sum += p;
      ++n;
    }
    const auto out = voxel_downsample(c, size);
    CHECK(out.size() == census.size());
    CHECK(out.size() <= c.size());
    std::set<VoxelKey> seen;
    for (const auto& p : out.points) {
      const auto key = voxel_of(p, size);
      CHECK(seen.insert(key).second);
      const auto it = census.find(key);
      REQUIRE(it != census.end());
      CHECK((p - it->second.first / it->second.second).norm() < 1e-9);
    }
  }
}

TEST_CASE("voxel_downsample keeps size when every point has its own voxel") {
  PointCloud c;
  for (int i = 0; i < 50; ++i) c.points.emplace_back(i * 1.0 + 0.5, 0.5, 0.5);
  CHECK(voxel_downsample(c, 1.0).size() == c.size());
}

TEST_CASE("remove_ground strips the floor and keeps the box") {
  const auto [c, box] = box_on_floor();
  const auto out = remove_ground(c, 0.2, 7);
  CHECK(out.size() == box);
  for (const auto& p : out.points) CHECK(p.z() > 0.5);
  const auto again = remove_ground(c, 0.2, 7);
  CHECK(again.points == out.points);
}

TEST_CASE("remove_ground leaves a vertical wall untouched") {
  PointCloud wall;
  for (double y = -5; y <= 5; y += 0.2)
    for (double z = 0; z <= 3; z += 0.2) wall.points.emplace_back(4.0, y, z);
  CHECK(remove_ground(wall, 0.2, 3).points == wall.points);
  PointCloud two;
  two.points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  CHECK_THROWS_AS(remove_ground(two, 0.2, 1), Error);
}

TEST_CASE("normals on a plane are vertical") {
  PointCloud c;
  for (const auto& p : test::grid_plane(5, 0.25, 0.0)) c.points.push_back(p);
  const auto n = estimate_normals(c, 20);
  REQUIRE(n.normals.size() == c.size());
  for (const auto& v : n.normals) {
    CHECK(std::abs(v.norm() - 1.0) < 1e-6);
    CHECK(std::abs(std::abs(v.z()) - 1.0) < 1e-3);
  }
}

TEST_CASE("normals on a sphere point toward the origin") {
  PointCloud c;
  const int n_pts = 3000;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n_pts; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n_pts, r = std::sqrt(1 - z * z);
    c.points.push_back(5.0 * Vec3(r * std::cos(golden * i), r * std::sin(golden * i), z));
  }
  const auto n = estimate_normals(c, 12);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Vec3 inward = -c.points[i].normalized();
    CHECK(n.normals[i].dot(inward) > 0.995);
  }
  PointCloud small;
  small.points.assign(5, Vec3::Zero());
  CHECK_THROWS_AS(estimate_normals(small, 20), Error);
  CHECK_THROWS_AS(estimate_normals(c, 2), Error);
}

TEST_CASE("descriptor preprocessing normalizes and removes ground") {
  auto [c, box] = box_on_floor();
  for (auto& p : c.points) p *= 4.0;  // floor spans 80 m, so cropping matters
  PreprocessConfig cfg;
  const auto out = preprocess_for_descriptor(c, cfg);
  REQUIRE_FALSE(out.empty());
  for (const auto& p : out.points) {
    CHECK(p.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(p.z() * cfg.scale_factor > 1.0);  // nothing left near the floor
  }
  CHECK(preprocess_for_descriptor(PointCloud{}, cfg).empty());
}

TEST_CASE("registration preprocessing keeps metric units") {
  PointCloud c;
  for (const auto& p : test::grid_plane(20, 0.5, 0.0)) c.points.push_back(p);
  c.points.emplace_back(25, 0, 1);
  c.points.emplace_back(70, 0, 1);
  PreprocessConfig cfg;
  const auto out = preprocess_for_registration(c, cfg);
  bool found = false;
  double max_r = 0;
  for (const auto& p : out.points) {
    if ((p - Vec3(25, 0, 1)).norm() < 1e-12) found = true;
    max_r = std::max(max_r, p.norm());
  }
  CHECK(found);
  CHECK(max_r <= cfg.max_range_m);
  CHECK(preprocess_for_registration(PointCloud{}, cfg).empty());

  // With one point per voxel every survivor is an untouched input point and
  // pairwise distances carry over.
  PointCloud scene;
  for (double x = 1; x <= 20; x += 0.5)
    for (double z = 0.25; z <= 3; z += 0.5) {
      scene.points.emplace_back(x, -3.0, z);
      scene.points.emplace_back(x, 3.0, z);
    }
  const auto reg = preprocess_for_registration(scene, cfg);
  REQUIRE(reg.size() > 10);
  std::vector<Vec3> originals;
  for (const auto& p : reg.points) {
    const Vec3* match = nullptr;
    for (const auto& q : scene.points)
      if ((p - q).norm() < 1e-12) match = &q;
    REQUIRE(match != nullptr);
    originals.push_back(*match);
  }
  for (std::size_t i = 0; i < reg.size(); i += 7)
    for (std::size_t j = 0; j < reg.size(); j += 11)
      CHECK(std::abs((reg.points[i] - reg.points[j]).norm() - (originals[i] - originals[j]).norm()) < 1e-9);
}

TEST_CASE("config validation") {
  PreprocessConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.voxel_size_m = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.ground_distance_m = -1;
  CHECK_THROWS_AS(preprocess_for_registration(PointCloud{}, cfg), Error);
}

TEST_CASE("subset and transform keep metadata") {
  PointCloud c;
  c.points = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  c.intensity = std::vector<float>{0.1f, 0.2f, 0.3f};
  c.source_id = "scan";
  const auto s = c.subset({2, 0});
  CHECK(s.points == std::vector<Vec3>{Vec3(0, 0, 1), Vec3(1, 0, 0)});
  CHECK(*s.intensity == std::vector<float>{0.3f, 0.1f});
  CHECK(s.source_id == "scan");
  const auto t = transform_cloud(c, Eigen::Matrix3d::Identity(), Vec3(1, 2, 3));
  CHECK(t.points[0] == Vec3(2, 2, 3));
}
