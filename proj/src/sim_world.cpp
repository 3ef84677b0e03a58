#include "lockit/sim_world.hpp"

#include "lockit/errors.hpp"
#include "lockit/features.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace lockit {

double Obstacle::footprint_radius() const {
  return kind == ObstacleKind::Cylinder ? radius : std::hypot(half_x, half_y);
}

bool Obstacle::contains_xy(const Eigen::Vector2d& p, double margin) const {
  const Eigen::Vector2d d = p - center;
  if (kind == ObstacleKind::Cylinder) return d.norm() <= radius + margin;
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double lx = c * d.x() + s * d.y();
  const double ly = -s * d.x() + c * d.y();
  return std::abs(lx) <= half_x + margin && std::abs(ly) <= half_y + margin;
}

namespace {

double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - p).norm();
}

double distance_to_route(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2d>& route) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < route.size(); ++i)
    best = std::min(best, point_segment_distance(p, route[i], route[(i + 1) % route.size()]));
  return best;
}

Obstacle random_obstacle(std::mt19937_64& rng, const Extent& e) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  Obstacle o;
  const double k = u01(rng);
  if (k < 0.45) {
    o.kind = ObstacleKind::Box;
    o.half_x = uni(0.4, 2.5);
    o.half_y = uni(0.4, 2.5);
    o.height = uni(0.6, 3.5);
  } else if (k < 0.8) {
    o.kind = ObstacleKind::Cylinder;
    o.radius = uni(0.15, 1.2);
    o.height = uni(1.0, 6.0);
  } else {
    o.kind = ObstacleKind::Wall;
    o.half_x = uni(2.0, 7.0);
    o.half_y = 0.15;
    o.height = uni(1.5, 4.0);
  }
  o.yaw = uni(-std::numbers::pi, std::numbers::pi);
  o.center = {uni(e.min_x, e.max_x), uni(e.min_y, e.max_y)};
  return o;
}

bool inside_extent(const Obstacle& o, const Extent& e) {
  const double r = o.footprint_radius();
  return o.center.x() - r >= e.min_x && o.center.x() + r <= e.max_x && o.center.y() - r >= e.min_y &&
         o.center.y() + r <= e.max_y;
}

std::vector<Obstacle> place_obstacles(std::mt19937_64& rng, int n, const Extent& extent,
                                      const WorldOptions& opts) {
  std::vector<Obstacle> obstacles;
  constexpr int kTriesPerObstacle = 2000;
  for (int i = 0; i < n; ++i) {
    bool placed = false;
    for (int t = 0; t < kTriesPerObstacle && !placed; ++t) {
      Obstacle o = random_obstacle(rng, extent);
      if (!inside_extent(o, extent)) continue;
      if (!opts.keep_out_route.empty() &&
          distance_to_route(o.center, opts.keep_out_route) < o.footprint_radius() + opts.route_clearance_m)
        continue;
      bool clash = false;
      for (const auto& other : obstacles)
        if ((other.center - o.center).norm() < other.footprint_radius() + o.footprint_radius() + 0.5) {
          clash = true;
          break;
        }
      if (clash) continue;
      obstacles.push_back(o);
      placed = true;
    }
    if (!placed)
      throw Error(Errc::ExtentTooSmall, "could not place obstacle " + std::to_string(i) + " of " +
                                            std::to_string(n) + " in the given extent");
  }
  return obstacles;
}

bool distinct_enough(const World& w, const WorldOptions& opts) {
  const auto probes = probe_positions(w, opts.distinct_radius_m);
  PreprocessConfig pre;
  std::vector<GlobalDescriptor> desc;
  desc.reserve(probes.size());
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const PointCloud scan = simulate_scan(w, Pose2(probes[i].x(), probes[i].y(), 0.0), opts.probe_scan, i);
    const PointCloud p = preprocess_for_descriptor(scan, pre);
    if (p.empty()) return false;
    desc.push_back(synthetic_global(p));
  }
  for (std::size_t i = 0; i < desc.size(); ++i)
    for (std::size_t j = i + 1; j < desc.size(); ++j)
      if (desc[i].distance(desc[j]) <= opts.min_descriptor_distance) return false;
  return true;
}

// Ray/primitive intersections return the first hit distance along a unit
// direction, or +inf.
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = 1e-9;

double hit_box(const Obstacle& o, const Vec3& origin, const Vec3& dir) {
  const double c = std::cos(o.yaw), s = std::sin(o.yaw);
  const Vec3 rel = origin - Vec3(o.center.x(), o.center.y(), 0.0);
  const Vec3 lo(c * rel.x() + s * rel.y(), -s * rel.x() + c * rel.y(), rel.z());
  const Vec3 ld(c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y(), dir.z());
  const Vec3 bmin(-o.half_x, -o.half_y, 0.0), bmax(o.half_x, o.half_y, o.height);
  double t0 = -kInf, t1 = kInf;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(ld[a]) < 1e-15) {
      if (lo[a] < bmin[a] || lo[a] > bmax[a]) return kInf;
      continue;
    }
    double ta = (bmin[a] - lo[a]) / ld[a];
    double tb = (bmax[a] - lo[a]) / ld[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return kInf;
  }
  if (t0 > kEps) return t0;
  if (t1 > kEps) return t1;
  return kInf;
}

double hit_cylinder(const Obstacle& o, const Vec3& origin, const Vec3& dir) {
  const double ox = origin.x() - o.center.x(), oy = origin.y() - o.center.y();
  double best = kInf;
  const double a = dir.x() * dir.x() + dir.y() * dir.y();
  if (a > 1e-15) {
    const double b = 2.0 * (ox * dir.x() + oy * dir.y());
    const double c = ox * ox + oy * oy - o.radius * o.radius;
    const double disc = b * b - 4 * a * c;
    if (disc >= 0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)}) {
        if (t <= kEps) continue;
        const double z = origin.z() + t * dir.z();
        if (z >= 0.0 && z <= o.height) {
          best = std::min(best, t);
          break;
        }
      }
    }
  }
  if (std::abs(dir.z()) > 1e-15) {
    const double t = (o.height - origin.z()) / dir.z();
    if (t > kEps) {
      const double x = ox + t * dir.x(), y = oy + t * dir.y();
      if (x * x + y * y <= o.radius * o.radius) best = std::min(best, t);
    }
  }
  return best;
}

double cast_ray(const World& w, const Vec3& origin, const Vec3& dir, double max_range) {
  double best = kInf;
  if (w.ground && dir.z() < -1e-15) best = -origin.z() / dir.z();
  for (const auto& o : w.obstacles) {
    // Cheap reject on horizontal distance from the ray's start.
    const Eigen::Vector2d rel = o.center - origin.head<2>();
    const double fr = o.footprint_radius();
    if (rel.norm() - fr > std::min(best, max_range)) continue;
    const double t = o.kind == ObstacleKind::Cylinder ? hit_cylinder(o, origin, dir) : hit_box(o, origin, dir);
    best = std::min(best, t);
  }
  return best;
}

}  // namespace

World generate_world(std::uint64_t seed, int n_obstacles, const Extent& extent, const WorldOptions& opts) {
  if (n_obstacles < 1) throw Error(Errc::InvalidArgument, "n_obstacles must be >= 1");
  if (!(extent.width() >= 10.0 && extent.height() >= 10.0))
    throw Error(Errc::ExtentTooSmall, "extent must be at least 10 m x 10 m");

  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    World w;
    w.extent = extent;
    w.seed = seed;
    w.obstacles = place_obstacles(rng, n_obstacles, extent, opts);
    if (!opts.enforce_distinctiveness || distinct_enough(w, opts)) return w;
  }
  throw Error(Errc::ExtentTooSmall, "no sufficiently distinctive world after " +
                                        std::to_string(opts.max_attempts) + " attempts");
}

std::vector<Eigen::Vector2d> probe_positions(const World& world, double spacing) {
  std::vector<Eigen::Vector2d> out;
  const Extent& e = world.extent;
  const int nx = static_cast<int>(std::floor(e.width() / spacing));
  const int ny = static_cast<int>(std::floor(e.height() / spacing));
  const double x0 = e.min_x + 0.5 * (e.width() - (nx - 1) * spacing);
  const double y0 = e.min_y + 0.5 * (e.height() - (ny - 1) * spacing);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      const Eigen::Vector2d p(x0 + ix * spacing, y0 + iy * spacing);
      bool blocked = false;
      for (const auto& o : world.obstacles)
        if (o.contains_xy(p, 0.5)) {
          blocked = true;
          break;
        }
      if (!blocked) out.push_back(p);
    }
  return out;
}

PointCloud simulate_scan(const World& world, const Pose2& pose, const ScanConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma_m > 0 ? cfg.noise_sigma_m : 1.0);
  const Vec3 origin(pose.x, pose.y, cfg.sensor_height_m);
  const double cy = std::cos(pose.theta), sy = std::sin(pose.theta);

  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(cfg.rings * cfg.azimuth_steps));
  for (int r = 0; r < cfg.rings; ++r) {
    const double el = deg2rad(cfg.rings == 1 ? cfg.min_elevation_deg
                                             : cfg.min_elevation_deg + (cfg.max_elevation_deg - cfg.min_elevation_deg) *
                                                                           r / (cfg.rings - 1));
    for (int a = 0; a < cfg.azimuth_steps; ++a) {
      const double az = 2.0 * std::numbers::pi * a / cfg.azimuth_steps;
      const Vec3 ds(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
      const Vec3 dw(cy * ds.x() - sy * ds.y(), sy * ds.x() + cy * ds.y(), ds.z());
      const double t = cast_ray(world, origin, dw, cfg.max_range_m);
      if (!(t <= cfg.max_range_m)) continue;
      const double range = cfg.noise_sigma_m > 0 ? t + noise(rng) : t;
      // float32 grid, matching the LPCD on-disk precision
      cloud.points.push_back((range * ds).cast<float>().cast<double>());
    }
  }
  return cloud;
}

World transform_world(const World& world, const Pose2& m) {
  World out = world;
  const double c = std::cos(m.theta), s = std::sin(m.theta);
  for (auto& o : out.obstacles) {
    o.center = Eigen::Vector2d(c * o.center.x() - s * o.center.y() + m.x, s * o.center.x() + c * o.center.y() + m.y);
    o.yaw = wrap_angle(o.yaw + m.theta);
  }
  // Axis-aligned hull of the moved extent corners.
  const Extent& e = world.extent;
  Extent ne{kInf, kInf, -kInf, -kInf};
  for (double x : {e.min_x, e.max_x})
    for (double y : {e.min_y, e.max_y}) {
      const double nx = c * x - s * y + m.x, ny = s * x + c * y + m.y;
      ne.min_x = std::min(ne.min_x, nx);
      ne.max_x = std::max(ne.max_x, nx);
      ne.min_y = std::min(ne.min_y, ny);
      ne.max_y = std::max(ne.max_y, ny);
    }
  out.extent = ne;
  return out;
}

std::vector<OdometryDelta> simulate_odometry(const std::vector<Pose2>& truth, const OdometryNoise& noise,
                                             std::uint64_t seed) {
  if (truth.size() < 2) throw Error(Errc::TooShort, "odometry needs at least two poses");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<OdometryDelta> out;
  out.reserve(truth.size() - 1);
  for (std::size_t i = 1; i < truth.size(); ++i) {
    const OdometryDelta exact = delta_between(truth[i - 1], truth[i]);
    const double e_d = n01(rng), e_th = n01(rng);
    if (noise.distance_fraction == 0.0 && noise.heading_rad == 0.0) {
      out.push_back(exact);
      continue;
    }
    const double d = exact.distance() * (1.0 + noise.distance_fraction * e_d);
    const double dth = exact.dtheta + noise.heading_rad * e_th;
    out.push_back({d * std::cos(dth), d * std::sin(dth), dth});
  }
  return out;
}

std::vector<Pose2> integrate_odometry(const Pose2& start, const std::vector<OdometryDelta>& odometry) {
  std::vector<Pose2> out{start};
  out.reserve(odometry.size() + 1);
  for (const auto& u : odometry) out.push_back(compose(out.back(), u));
  return out;
}

SimTrajectory make_trajectory(const std::vector<Pose2>& truth, const OdometryNoise& noise, std::uint64_t seed) {
  SimTrajectory t;
  t.truth = truth;
  t.odometry = simulate_odometry(truth, noise, seed);
  t.poses = integrate_odometry(truth.front(), t.odometry);
  return t;
}

std::vector<Eigen::Vector2d> loop_route(const Extent& e, double margin, double rc, int seg) {
  const double x0 = e.min_x + margin, x1 = e.max_x - margin;
  const double y0 = e.min_y + margin, y1 = e.max_y - margin;
  if (x1 - x0 < 2 * rc || y1 - y0 < 2 * rc) throw Error(Errc::ExtentTooSmall, "route does not fit in extent");
  std::vector<Eigen::Vector2d> pts;
  // Counter-clockwise, corners centred inside the rectangle.
  const Eigen::Vector2d centres[4] = {{x1 - rc, y0 + rc}, {x1 - rc, y1 - rc}, {x0 + rc, y1 - rc}, {x0 + rc, y0 + rc}};
  for (int c = 0; c < 4; ++c) {
    const double a0 = -std::numbers::pi / 2 + c * std::numbers::pi / 2;
    for (int k = 0; k <= seg; ++k) {
      const double a = a0 + (std::numbers::pi / 2) * k / seg;
      pts.emplace_back(centres[c].x() + rc * std::cos(a), centres[c].y() + rc * std::sin(a));
    }
  }
  return pts;
}

double polyline_length(const std::vector<Eigen::Vector2d>& loop, bool closed) {
  double len = 0.0;
  const std::size_t n = loop.size();
  for (std::size_t i = 0; i + 1 < n + (closed ? 1 : 0); ++i) len += (loop[(i + 1) % n] - loop[i]).norm();
  return len;
}

std::vector<Pose2> sample_route(const std::vector<Eigen::Vector2d>& loop_in, const RouteSampling& s) {
  if (loop_in.size() < 2) throw Error(Errc::InvalidArgument, "route needs at least two vertices");
  if (!(s.step_m > 0)) throw Error(Errc::InvalidArgument, "route step must be > 0");
  std::vector<Eigen::Vector2d> loop = loop_in;
  if (s.reverse) std::reverse(loop.begin(), loop.end());
  const std::size_t n = loop.size();
  std::vector<double> cum{0.0};
  for (std::size_t i = 0; i < n; ++i) cum.push_back(cum.back() + (loop[(i + 1) % n] - loop[i]).norm());
  const double total = cum.back();

  auto point_at = [&](double arc) -> std::pair<Eigen::Vector2d, Eigen::Vector2d> {
    arc = std::fmod(arc, total);
    if (arc < 0) arc += total;
    const auto it = std::upper_bound(cum.begin(), cum.end(), arc);
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()) - 1, n - 1);
    const Eigen::Vector2d a = loop[i], b = loop[(i + 1) % n];
    const double seg = cum[i + 1] - cum[i];
    const double t = seg > 0 ? (arc - cum[i]) / seg : 0.0;
    const Eigen::Vector2d dir = seg > 0 ? Eigen::Vector2d((b - a) / seg) : Eigen::Vector2d(1, 0);
    return {a + t * (b - a), dir};
  };

  const std::size_t count = s.count ? s.count : static_cast<std::size_t>(std::floor(total / s.step_m));
  std::vector<Eigen::Vector2d> xy;
  xy.reserve(count);
  Eigen::Vector2d first_dir;
  for (std::size_t k = 0; k < count; ++k) {
    auto [p, dir] = point_at(s.start_arc_m + s.step_m * static_cast<double>(k));
    if (k == 0) first_dir = dir;
    const Eigen::Vector2d left(-dir.y(), dir.x());
    xy.push_back(p + s.lateral_offset_m * left);
  }
  std::vector<Pose2> poses;
  poses.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double heading = k == 0 ? std::atan2(first_dir.y(), first_dir.x())
                                  : std::atan2(xy[k].y() - xy[k - 1].y(), xy[k].x() - xy[k - 1].x());
    poses.emplace_back(xy[k].x(), xy[k].y(), heading);
  }
  return poses;
}

nlohmann::json world_to_json(const World& w) {
  nlohmann::json j;
  j["version"] = 1;
  j["seed"] = w.seed;
  j["ground"] = w.ground;
  j["extent"] = {w.extent.min_x, w.extent.min_y, w.extent.max_x, w.extent.max_y};
  auto& arr = j["obstacles"] = nlohmann::json::array();
  for (const auto& o : w.obstacles) {
    nlohmann::json oj;
    oj["kind"] = o.kind == ObstacleKind::Box ? "box" : o.kind == ObstacleKind::Cylinder ? "cylinder" : "wall";
    oj["center"] = {o.center.x(), o.center.y()};
    oj["yaw"] = o.yaw;
    oj["height"] = o.height;
    if (o.kind == ObstacleKind::Cylinder) oj["radius"] = o.radius;
    else oj["half_extents"] = {o.half_x, o.half_y};
    arr.push_back(std::move(oj));
  }
  return j;
}

World world_from_json(const nlohmann::json& j) {
  try {
    World w;
    w.seed = j.value("seed", std::uint64_t{0});
    w.ground = j.value("ground", true);
    const auto& e = j.at("extent");
    w.extent = {e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>(), e.at(3).get<double>()};
    for (const auto& oj : j.at("obstacles")) {
      Obstacle o;
      const auto kind = oj.at("kind").get<std::string>();
      if (kind == "box") o.kind = ObstacleKind::Box;
      else if (kind == "cylinder") o.kind = ObstacleKind::Cylinder;
      else if (kind == "wall") o.kind = ObstacleKind::Wall;
      else throw Error(Errc::Parse, "unknown obstacle kind '" + kind + "'");
      o.center = {oj.at("center").at(0).get<double>(), oj.at("center").at(1).get<double>()};
      o.yaw = oj.at("yaw").get<double>();
      o.height = oj.at("height").get<double>();
      if (o.kind == ObstacleKind::Cylinder) {
        o.radius = oj.at("radius").get<double>();
      } else {
        o.half_x = oj.at("half_extents").at(0).get<double>();
        o.half_y = oj.at("half_extents").at(1).get<double>();
      }
      w.obstacles.push_back(o);
    }
    return w;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::Parse, std::string("world manifest: ") + ex.what());
  }
}

void save_world(const std::filesystem::path& path, const World& world) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::Io, "cannot open for writing: " + path.string());
  os << world_to_json(world).dump(2) << '\n';
}

World load_world(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::Io, "cannot open: " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::Parse, path.string() + ": " + ex.what());
  }
  return world_from_json(j);
}

}  // namespace lockit
