#include "lockit/evaluation.hpp"
#include "lockit/mcl.hpp"
#include "lockit/pipeline.hpp"
#include "lockit/registration.hpp"
#include "lockit/scenario.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace lockit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// ICP invariants observed over every registration run by this binary.
struct IcpAudit {
  std::size_t registrations = 0;
  std::size_t iterations = 0;
  std::size_t violations = 0;

  void record(const RegistrationResult& r) {
    if (r.history.empty() && r.iterations == 0) return;
    ++registrations;
    for (const auto& h : r.history) {
      ++iterations;
      if (h.cost_after > h.cost_before) ++violations;
    }
    if (!r.transform.is_valid(1e-9)) ++violations;
  }
};

IcpAudit audit;

// ---------------------------------------------------------------------------
// Shared synthetic benchmark

struct Bench {
  Scenario scenario;
  TopoMap map;
  SyntheticBackend backend;
};

Bench& bench() {
  static Bench b = [] {
    ScenarioConfig cfg;
    Bench x{make_scenario(cfg), {}, {}};
    x.map = build_map(x.scenario.mapping_samples(), 1.0, x.backend);
    return x;
  }();
  return b;
}

QuerySource source_of(const Scenario& s) {
  QuerySource q;
  for (std::size_t k = 0; k < s.query.truth.size(); ++k) {
    q.ids.push_back("q" + std::to_string(k));
    q.odometry_poses.push_back(s.query.poses[k]);
    q.truth.emplace_back(s.query_sensor_pose(k));
  }
  q.cloud = [&s](std::size_t k) { return s.query_scan(k); };
  return q;
}

std::vector<double> stage_errors(const SessionResult& r, const std::string& stage) {
  std::vector<double> out;
  for (const auto& e : r.errors)
    if (e.post_burn_in && e.stage == stage) out.push_back(e.pos_err_m);
  return out;
}

// ---------------------------------------------------------------------------
// Observation weights against a scalar double loop

std::vector<double> scalar_weights(const ParticleSet& set, const GlobalDescriptor& q, const TopoMap& map,
                                   const MclConfig& cfg) {
  std::vector<std::pair<double, int>> ranked;
  for (std::size_t j = 0; j < map.size(); ++j) {
    double d2 = 0;
    for (Eigen::Index c = 0; c < q.values.size(); ++c) {
      const double t = map.node(j).descriptor.values[c] - q.values[c];
      d2 += t * t;
    }
    ranked.emplace_back(std::sqrt(d2), map.node(j).id);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<double> w(set.size(), 0.0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Particle& p = set.particles[i];
    const auto& di = map.node(p.node_index).descriptor.values;
    for (std::size_t k = 0; k < cfg.retrieval_depth; ++k) {
      const MapNode& nj = map.node(*map.index_of(ranked[k].second));
      const double dx = nj.position.x() - p.pose.x, dy = nj.position.y() - p.pose.y;
      double h2 = 0;
      for (Eigen::Index c = 0; c < di.size(); ++c) h2 += (nj.descriptor.values[c] - di[c]) * (nj.descriptor.values[c] - di[c]);
      w[i] += std::exp(-(dx * dx + dy * dy) / (cfg.sigma_l * cfg.sigma_l)) * std::exp(-h2 / (cfg.sigma_m * cfg.sigma_m));
    }
  }
  return w;
}

Outcome weight_equivalence() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> pos(0.0, 40.0);
  std::normal_distribution<double> g(0.0, 0.15);
  double worst = 0;
  int runs = 0;
  for (int inst = 0; inst < 100; ++inst) {
    std::vector<MapNode> nodes(200);
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      nodes[j].id = static_cast<int>(j);
      nodes[j].position = {pos(rng), pos(rng)};
      nodes[j].descriptor.values = Eigen::VectorXd::NullaryExpr(32, [&] { return g(rng); });
    }
    const TopoMap map(std::move(nodes), 1.0);
    for (std::size_t b : {1, 3, 5}) {
      MclConfig cfg;
      cfg.particles = 200;
      cfg.retrieval_depth = b;
      cfg.seed = rng();
      auto set = init_particles(map, cfg);
      set = predict(std::move(set), {0.8, 0.3, 0.2}, map, cfg);
      GlobalDescriptor q;
      q.values = Eigen::VectorXd::NullaryExpr(32, [&] { return g(rng); });
      const auto fast = observation_weights(set, q, map, cfg);
      const auto slow = scalar_weights(set, q, map, cfg);
      if (fast.size() != slow.size()) return {false, "weight count differs"};
      for (std::size_t i = 0; i < fast.size(); ++i)
        worst = std::max(worst, std::abs(fast[i] - slow[i]) / std::max(std::abs(slow[i]), 1e-300));
      ++runs;
    }
  }
  return {worst <= 1e-12, fmt("%d instance/B pairs, worst relative difference %.3g", runs, worst)};
}

// ---------------------------------------------------------------------------
// Coarse convergence

Outcome mcl_convergence() {
  Bench& b = bench();
  const double limit = 1.5 * b.map.spacing();
  Scenario s = b.scenario;
  int good = 0;
  std::string medians;
  for (int seed = 0; seed < 10; ++seed) {
    resample_query(s, 300 + seed, 20.7 * seed, seed % 2 == 1);
    SessionOptions opts;
    opts.fine = FineMethod::None;
    opts.mcl.seed = 900 + seed;
    const auto r = run_session(b.map, b.backend, source_of(s), opts);
    const auto errs = stage_errors(r, "mcl");
    const double med = errs.empty() ? INFINITY : median_of(errs);
    good += med < limit;
    medians += fmt("%s%.2f", medians.empty() ? "" : " ", med);
  }
  return {good >= 9, fmt("%d/10 seeds below %.2f m (medians: %s)", good, limit, medians.c_str())};
}

// ---------------------------------------------------------------------------
// Registration trials around mapping poses

struct PairTrial {
  PointCloud node_cloud;
  PointCloud query_cloud;
  RigidTransform3 truth;  // query frame -> node frame
};

PairTrial make_pair(int t, double yaw, double r, double bearing) {
  const Scenario& s = bench().scenario;
  const Pose2 node = s.map_poses[(static_cast<std::size_t>(t) * 37) % s.map_poses.size()];
  const Pose2 q(node.x + r * std::cos(bearing), node.y + r * std::sin(bearing), node.theta + yaw);
  PreprocessConfig pre;
  pre.normalize = false;
  PairTrial p;
  p.node_cloud = preprocess_for_registration(simulate_scan(s.world, node, s.config.scan, 40000 + t), pre);
  p.query_cloud = preprocess_for_registration(simulate_scan(s.world, q, s.config.scan, 50000 + t), pre);
  p.truth = RigidTransform3::from_pose2(node).inverse() * RigidTransform3::from_pose2(q);
  return p;
}

void planar_error(const RigidTransform3& truth, const RigidTransform3& est, double& et, double& er) {
  const auto e = truth.inverse() * est;
  et = e.translation.head<2>().norm();
  er = std::abs(rad2deg(wrap_angle(e.yaw())));
}

Outcome dlf_recovery() {
  SyntheticBackend backend;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int ok = 0;
  double worst_t = 0, worst_r = 0;
  for (int t = 0; t < 100; ++t) {
    const double yaw = M_PI * u(rng), r = std::abs(u(rng)), bearing = M_PI * u(rng);
    const PairTrial p = make_pair(t, yaw, r, bearing);
    const auto fn = local_features(backend, p.node_cloud);
    const auto fq = local_features(backend, p.query_cloud);
    auto corr = match_features(fq, fn);
    std::uniform_int_distribution<std::size_t> pick(0, fn.size() - 1);
    for (std::size_t k = 0; k < corr.size(); ++k)
      if (k % 10 < 3) corr[k].target_index = pick(rng);
    PointCloud src, dst;
    src.points = fq.points;
    dst.points = fn.points;
    double et = INFINITY, er = INFINITY;
    try {
      auto res = ransac_register(src, dst, corr);
      res = icp_point_to_plane(p.query_cloud, estimate_normals(p.node_cloud, 20), res.transform);
      audit.record(res);
      planar_error(p.truth, res.transform, et, er);
    } catch (const Error&) {
    }
    ok += et < 0.1 && er < 1.0;
    worst_t = std::max(worst_t, et);
    worst_r = std::max(worst_r, er);
  }
  return {ok >= 95, fmt("%d/100 within 0.1 m / 1 deg", ok)};
}

// A 180 deg seed fails when ICP ends more than 1 m off, stops without
// converging, or gives up with one of its documented errors.
Outcome icp_basin() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int near_ok = 0, far_off = 0, far_unconverged = 0, far_errors = 0, far_recovered = 0;
  for (int t = 0; t < 200; ++t) {
    const bool far = t >= 100;
    const double yaw = M_PI * u(rng), r = std::abs(u(rng)), bearing = M_PI * u(rng);
    const PairTrial p = make_pair(t, yaw, r, bearing);
    const double dyaw = far ? M_PI : deg2rad(10.0) * u(rng);
    const double dr = far ? 0.0 : 0.5 * std::abs(u(rng)), da = M_PI * u(rng);
    const auto seed = p.truth * RigidTransform3::from_pose2(Pose2(dr * std::cos(da), dr * std::sin(da), dyaw));
    double et = INFINITY, er = INFINITY;
    bool converged = false;
    try {
      const auto res = icp_point_to_plane(p.query_cloud, estimate_normals(p.node_cloud, 20), seed);
      audit.record(res);
      planar_error(p.truth, res.transform, et, er);
      converged = res.converged;
    } catch (const Error& e) {
      if (!far) continue;
      if (e.code() != Errc::EmptyCorrespondences && e.code() != Errc::DegenerateGeometry) throw;
      ++far_errors;
      continue;
    }
    if (!far) {
      near_ok += et < 0.05 && er < 0.5;
    } else if (et > 1.0) {
      ++far_off;
    } else if (!converged) {
      ++far_unconverged;
    } else {
      ++far_recovered;
    }
  }
  const int far_fail = far_off + far_unconverged + far_errors;
  return {near_ok >= 95 && far_fail >= 80,
          fmt("near seeds recovered %d/100; 180 deg seeds failed %d/100 (%d off by > 1 m, %d not converged, %d gave "
              "up with an ICP error, %d converged within 1 m)",
              near_ok, far_fail, far_off, far_unconverged, far_errors, far_recovered)};
}

// ---------------------------------------------------------------------------
// End-to-end ordering

Outcome e2e_ordering() {
  Bench& b = bench();
  Scenario s = b.scenario;
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> yaw(-M_PI, M_PI);
  std::vector<double> coarse, icp, dlf;
  std::string yaws;
  for (int k = 0; k < 4; ++k) {
    s.config.query_sensor_yaw_rad = yaw(rng);
    yaws += fmt("%s%.0f", yaws.empty() ? "" : " ", rad2deg(s.config.query_sensor_yaw_rad));
    resample_query(s, 700 + k, 55.0 * k + 10.0, k % 2 == 1);
    for (auto method : {FineMethod::Icp, FineMethod::Dlf}) {
      SessionOptions opts;
      opts.fine = method;
      opts.mcl.seed = 40 + k;
      const auto r = run_session(b.map, b.backend, source_of(s), opts);
      for (const auto& f : r.fine) audit.record(f.registration);
      const auto c = stage_errors(r, "mcl");
      const auto f = stage_errors(r, method == FineMethod::Icp ? "mcl-icp" : "mcl-dlf");
      if (method == FineMethod::Icp) coarse.insert(coarse.end(), c.begin(), c.end());
      auto& dst = method == FineMethod::Icp ? icp : dlf;
      dst.insert(dst.end(), f.begin(), f.end());
    }
  }
  if (coarse.empty() || icp.empty() || dlf.empty()) return {false, "no scored queries"};
  const double mc = median_of(coarse), mi = median_of(icp), md = median_of(dlf);
  const double ai = mean_of(icp), ad = mean_of(dlf);
  return {mi < mc && md < mc && ad <= ai,
          fmt("sensor yaws %s deg; median coarse %.3f / icp %.3f / dlf %.3f m; mean icp %.3f, dlf %.3f m", yaws.c_str(), mc, mi,
               md, ai, ad)};
}

// ---------------------------------------------------------------------------
// Resampling

// Wilson-Hilferty approximation of the 0.99 chi-square quantile.
double chi2_99(double dof) {
  const double z = 2.3263478740408408, a = 2.0 / (9.0 * dof);
  return dof * std::pow(1.0 - a + z * std::sqrt(a), 3);
}

Outcome resampling_statistics() {
  const std::size_t m = 10000, bins = 100;
  std::mt19937_64 rng(77);
  std::gamma_distribution<double> gam(0.5, 1.0);
  int passed = 0, total = 0;
  double worst_ratio = 0;
  for (int v = 0; v < 20; ++v) {
    ParticleSet base;
    base.particles.resize(m);
    double sum = 0;
    for (std::size_t i = 0; i < m; ++i) {
      base.particles[i] = {Pose2(static_cast<double>(i), 0, 0), gam(rng), i};
      sum += base.particles[i].weight;
    }
    for (auto& p : base.particles) p.weight /= sum;
    for (auto scheme : {ResamplingScheme::Multinomial, ResamplingScheme::Systematic}) {
      ParticleSet s = base;
      s.rng.seed(1000 + v);
      const auto out = resample(std::move(s), scheme);
      // Offspring counts pooled over contiguous blocks of parents.
      std::vector<double> observed(bins, 0.0), expected(bins, 0.0);
      for (std::size_t i = 0; i < m; ++i) expected[i * bins / m] += base.particles[i].weight * static_cast<double>(m);
      for (const auto& p : out.particles) observed[p.node_index * bins / m] += 1.0;
      double stat = 0;
      for (std::size_t k = 0; k < bins; ++k) stat += (observed[k] - expected[k]) * (observed[k] - expected[k]) / expected[k];
      const double crit = chi2_99(static_cast<double>(bins - 1));
      passed += stat <= crit;
      ++total;
      worst_ratio = std::max(worst_ratio, stat / crit);
    }
  }
  return {passed == total, fmt("%d/%d weight vectors pass (largest statistic / critical value %.2f)", passed, total,
                               worst_ratio)};
}

// ---------------------------------------------------------------------------
// Evaluation harness

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + LOCKIT_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::vector<std::string>> read_table(const fs::path& path) {
  std::ifstream is(path);
  std::map<std::string, std::vector<std::string>> rows;
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    rows[f[0] + "/" + f[1] + "/" + f[2]] = f;
  }
  return rows;
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

Outcome evaluation_harness() {
  const fs::path dir = fs::temp_directory_path() / "lockit_acceptance_eval";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string header = "session,iter,query_id,stage,est_x,est_y,est_yaw,gt_x,gt_y,gt_yaw,pos_err_m,ori_err_deg,region,post_burn_in\n";

  // Worked examples: errors {1, 2, 100} m and a 359 deg vs 1 deg heading.
  {
    std::ofstream os(dir / "examples.csv");
    os << header;
    os << "s,21,a,mcl,1,0,0,0,0,0,1,0,,1\n";
    os << "s,22,b,mcl,2,0,0,0,0,0,2,0,,1\n";
    os << "s,23,c,mcl,100,0,0,0,0,0,100,0,,1\n";
    os << "s,24,d,wrap," << 0 << ",0," << deg2rad(359.0) << ",0,0," << deg2rad(1.0) << ",0,2,,1\n";
  }
  if (run_cli("evaluate --runs " + (dir / "examples.csv").string() + " --out " + (dir / "ex").string()) != 0)
    return {false, "evaluate failed on the worked examples"};
  auto ex = read_table(dir / "ex" / "table.csv");
  const auto& mcl = ex["s/mcl/all"];
  const auto& wrap = ex["s/wrap/all"];
  const bool examples_ok = mcl.size() == 10 && std::stod(mcl[4]) == 2.0 && close(std::stod(mcl[5]), 103.0 / 3.0) &&
                           wrap.size() == 10 && close(std::stod(wrap[7]), 2.0);

  // Random external records against a scalar oracle.
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-50.0, 50.0), a(-M_PI, M_PI);
  const std::vector<std::string> sessions{"2012-01-08", "2012-02-05"}, stages{"mcl", "mcl-icp", "mcl-dlf"};
  struct Acc {
    std::vector<double> pos, ori;
  };
  std::map<std::string, Acc> oracle;
  {
    std::ofstream os(dir / "external.csv");
    os << header;
    for (int i = 0; i < 600; ++i) {
      const std::string& session = sessions[static_cast<std::size_t>(i) % 2];
      const std::string& stage = stages[static_cast<std::size_t>(i / 2) % 3];
      const int iter = 1 + i / 6;
      const bool post = iter > 20;
      const double ex_ = u(rng), ey = u(rng), eyaw = a(rng), gx = u(rng), gy = u(rng), gyaw = a(rng);
      const double pe = std::hypot(ex_ - gx, ey - gy);
      double de = std::fmod(std::abs(rad2deg(eyaw - gyaw)), 360.0);
      if (de > 180.0) de = 360.0 - de;
      char line[512];
      std::snprintf(line, sizeof line, "%s,%d,q%d,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,,%d\n",
                    session.c_str(), iter, i, stage.c_str(), ex_, ey, eyaw, gx, gy, gyaw, pe, de, post ? 1 : 0);
      os << line;
      if (!post) continue;
      oracle[session + "/" + stage + "/all"].pos.push_back(pe);
      oracle[session + "/" + stage + "/all"].ori.push_back(de);
      oracle["overall/" + stage + "/all"].pos.push_back(pe);
      oracle["overall/" + stage + "/all"].ori.push_back(de);
    }
  }
  if (run_cli("evaluate --runs " + (dir / "external.csv").string() + " --out " + (dir / "ext").string()) != 0)
    return {false, "evaluate failed on external records"};
  const auto table = read_table(dir / "ext" / "table.csv");
  bool table_ok = table.size() == oracle.size();
  for (const auto& [key, acc] : oracle) {
    const auto it = table.find(key);
    if (it == table.end() || it->second.size() != 10) {
      table_ok = false;
      continue;
    }
    const auto& f = it->second;
    table_ok = table_ok && std::stoul(f[3]) == acc.pos.size() && close(std::stod(f[4]), median_of(acc.pos)) &&
               close(std::stod(f[5]), mean_of(acc.pos)) && close(std::stod(f[7]), median_of(acc.ori)) &&
               close(std::stod(f[8]), mean_of(acc.ori));
  }
  return {examples_ok && table_ok, fmt("worked examples %s; %zu table rows vs oracle %s", examples_ok ? "exact" : "WRONG",
                                       oracle.size(), table_ok ? "match" : "DIFFER")};
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  const std::vector<Criterion> criteria{
      {"observation weights match the scalar oracle", 10.0, weight_equivalence},
      {"coarse localization converges", 120.0, mcl_convergence},
      {"DLF recovers large misalignment with outliers", 60.0, dlf_recovery},
      {"ICP basin: small seeds recover, 180 deg seeds fail", 0.0, icp_basin},
      {"fine beats coarse, DLF mean <= ICP mean", 0.0, e2e_ordering},
      {"resampling offspring follow the weights", 0.0, resampling_statistics},
      {"ICP cost monotone and rotations valid", 0.0,
       [] {
         return Outcome{audit.violations == 0 && audit.registrations > 0,
                        fmt("%zu violations over %zu registrations / %zu iterations", audit.violations,
                            audit.registrations, audit.iterations)};
       }},
      {"evaluation arithmetic and table oracle", 0.0, evaluation_harness},
  };

  // The shared benchmark is built once and not charged to any criterion.
  const auto t_setup = clock::now();
  bench();
  std::printf("setup: synthetic benchmark with %zu map nodes (%.1f s)\n", bench().map.size(),
              std::chrono::duration<double>(clock::now() - t_setup).count());

  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", c.budget_s);
    }
    failed += !o.pass;
    std::printf("%s  %-52s %7.1f s  %s\n", o.pass ? "PASS" : "FAIL", c.name.c_str(), secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed ? 1 : 0;
}
