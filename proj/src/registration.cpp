#include "lockit/registration.hpp"

#include "lockit/errors.hpp"
#include "lockit/kdtree.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace lockit {

namespace {

RigidTransform3 small_motion(const Eigen::Matrix<double, 6, 1>& x) {
  RigidTransform3 t;
  const Vec3 w = x.head<3>();
  const double angle = w.norm();
  if (angle > 0) t.rotation = Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
  t.translation = x.tail<3>();
  return t;
}

struct Pair {
  std::size_t source;
  std::size_t target;
};

double point_to_plane_cost(const std::vector<Vec3>& moved, const NormalCloud& target, const std::vector<Pair>& pairs,
                           const RigidTransform3& delta) {
  double cost = 0.0;
  for (const auto& pr : pairs) {
    const double r = (target.base.points[pr.target] - delta.apply(moved[pr.source])).dot(target.normals[pr.target]);
    cost += r * r;
  }
  return cost;
}

}  // namespace

RegistrationResult icp_point_to_plane(const PointCloud& source, const NormalCloud& target, const RigidTransform3& seed,
                                      const IcpOptions& opts) {
  if (source.empty() || target.base.empty()) throw Error(Errc::EmptyCloud, "ICP needs non-empty clouds");
  if (target.normals.size() != target.base.size()) throw Error(Errc::InvalidArgument, "target normals missing");
  if (!seed.is_valid(1e-6)) throw Error(Errc::InvalidArgument, "ICP seed is not a proper rigid transform");

  const KdTree3 tree(target.base.points);
  const double gate2 = opts.corr_dist_m * opts.corr_dist_m;

  RegistrationResult res;
  res.transform = seed;
  res.transform.rotation = orthonormalize(seed.rotation);
  std::vector<Vec3> moved(source.size());
  std::vector<Pair> pairs;
  pairs.reserve(source.size());

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    for (std::size_t i = 0; i < source.size(); ++i) moved[i] = res.transform.apply(source.points[i]);
    pairs.clear();
    for (std::size_t i = 0; i < moved.size(); ++i) {
      const auto nb = tree.nearest(moved[i]);
      if (nb.sq_dist <= gate2) pairs.push_back({i, nb.index});
    }
    if (pairs.empty()) throw Error(Errc::EmptyCorrespondences, "no correspondences within the ICP gate");

    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    double cost_before = 0.0;
    for (const auto& pr : pairs) {
      const Vec3& q = moved[pr.source];
      const Vec3& n = target.normals[pr.target];
      const double r = (target.base.points[pr.target] - q).dot(n);
      Eigen::Matrix<double, 6, 1> a;
      a << q.cross(n), n;
      h.noalias() += a * a.transpose();
      g.noalias() += a * r;
      cost_before += r * r;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> es(h, Eigen::EigenvaluesOnly);
    const double max_eig = es.eigenvalues().maxCoeff();
    if (!(max_eig > 0) || es.eigenvalues().minCoeff() <= opts.degeneracy_ratio * max_eig)
      throw Error(Errc::DegenerateGeometry,
                  "point-to-plane normal matrix is rank deficient (" + std::to_string(pairs.size()) + " pairs)");

    const Eigen::Matrix<double, 6, 1> x = h.ldlt().solve(g);
    double alpha = 1.0;
    RigidTransform3 delta;
    double cost_after = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 12; ++k, alpha *= 0.5) {
      delta = small_motion(alpha * x);
      cost_after = point_to_plane_cost(moved, target, pairs, delta);
      if (cost_after <= cost_before) break;
    }
    res.iterations = iter + 1;
    res.correspondence_count = pairs.size();
    res.inlier_count = pairs.size();
    if (!(cost_after <= cost_before)) {
      // No descent direction left for this correspondence set.
      res.final_cost = cost_before;
      res.converged = true;
      break;
    }
    res.transform = delta * res.transform;
    res.transform.rotation = orthonormalize(res.transform.rotation);
    res.history.push_back({cost_before, cost_after, pairs.size()});
    res.final_cost = cost_after;
    if (cost_before - cost_after <= opts.tol * cost_before || (alpha * x).norm() < 1e-10) {
      res.converged = true;
      break;
    }
  }
  return res;
}

std::vector<Correspondence> match_features(const LocalFeatureCloud& f_in, const LocalFeatureCloud& q_in,
                                           const MatchOptions& opts) {
  if (f_in.size() == 0 || q_in.size() == 0) throw Error(Errc::EmptyCloud, "feature matching needs non-empty clouds");
  if (f_in.dim() != q_in.dim())
    throw Error(Errc::DimensionMismatch, "feature dimensions differ: " + std::to_string(f_in.dim()) + " vs " +
                                             std::to_string(q_in.dim()));
  Eigen::MatrixXd fm = f_in.features, qm = q_in.features;
  if (opts.normalize) {
    for (Eigen::Index i = 0; i < fm.cols(); ++i)
      if (fm.col(i).norm() > 0) fm.col(i).normalize();
    for (Eigen::Index i = 0; i < qm.cols(); ++i)
      if (qm.col(i).norm() > 0) qm.col(i).normalize();
  }
  const Eigen::Index n = fm.cols(), m = qm.cols();
  const Eigen::RowVectorXd q_sq = qm.colwise().squaredNorm();
  const Eigen::VectorXd f_sq = fm.colwise().squaredNorm().transpose();

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> best_q(static_cast<std::size_t>(n), -1);
  std::vector<double> best_d(static_cast<std::size_t>(n), kInf), second_d(static_cast<std::size_t>(n), kInf);
  std::vector<Eigen::Index> best_f(static_cast<std::size_t>(m), -1);
  std::vector<double> best_fd(static_cast<std::size_t>(m), kInf);

  // Squared distances via the Gram expansion, block by block.
  constexpr Eigen::Index kBlock = 256;
  for (Eigen::Index b0 = 0; b0 < n; b0 += kBlock) {
    const Eigen::Index bn = std::min(kBlock, n - b0);
    Eigen::MatrixXd d2 = -2.0 * fm.middleCols(b0, bn).transpose() * qm;
    d2.colwise() += f_sq.segment(b0, bn);
    d2.rowwise() += q_sq;
    for (Eigen::Index r = 0; r < bn; ++r) {
      const auto i = static_cast<std::size_t>(b0 + r);
      for (Eigen::Index c = 0; c < m; ++c) {
        const double v = std::max(d2(r, c), 0.0);
        if (v < best_d[i]) {
          second_d[i] = best_d[i];
          best_d[i] = v;
          best_q[i] = c;
        } else if (v < second_d[i]) {
          second_d[i] = v;
        }
        const auto j = static_cast<std::size_t>(c);
        if (v < best_fd[j]) {
          best_fd[j] = v;
          best_f[j] = b0 + r;
        }
      }
    }
  }

  std::vector<Correspondence> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    const Eigen::Index j = best_q[iu];
    if (j < 0) continue;
    if (opts.mutual && best_f[static_cast<std::size_t>(j)] != i) continue;
    if (opts.ratio < 1.0 && !(std::sqrt(best_d[iu]) <= opts.ratio * std::sqrt(second_d[iu]))) continue;
    out.push_back({iu, static_cast<std::size_t>(j), (fm.col(i) - qm.col(j)).norm()});
  }
  std::sort(out.begin(), out.end(), [](const Correspondence& a, const Correspondence& b) {
    return a.feature_distance < b.feature_distance ||
           (a.feature_distance == b.feature_distance && a.source_index < b.source_index);
  });
  return out;
}

RigidTransform3 solve_rigid_transform(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size() || src.size() < 3)
    throw Error(Errc::TooFewCorrespondences, "rigid solve needs >= 3 paired points");
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(dst.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) cov += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d u = svd.matrixU(), v = svd.matrixV();
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  if ((v * u.transpose()).determinant() < 0) s(2, 2) = -1.0;
  RigidTransform3 t;
  t.rotation = orthonormalize(v * s * u.transpose());
  t.translation = cd - t.rotation * cs;
  return t;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<std::size_t> inliers_of(const RigidTransform3& t, const PointCloud& f, const PointCloud& q,
                                    const std::vector<Correspondence>& corrs, double dist2) {
  std::vector<std::size_t> in;
  for (std::size_t k = 0; k < corrs.size(); ++k)
    if ((t.apply(f.points[corrs[k].source_index]) - q.points[corrs[k].target_index]).squaredNorm() <= dist2)
      in.push_back(k);
  return in;
}

RigidTransform3 fit_on(const std::vector<std::size_t>& idx, const PointCloud& f, const PointCloud& q,
                       const std::vector<Correspondence>& corrs) {
  std::vector<Vec3> a, b;
  a.reserve(idx.size());
  b.reserve(idx.size());
  for (std::size_t k : idx) {
    a.push_back(f.points[corrs[k].source_index]);
    b.push_back(q.points[corrs[k].target_index]);
  }
  return solve_rigid_transform(a, b);
}

}  // namespace

RegistrationResult ransac_register(const PointCloud& f_cloud, const PointCloud& q_cloud,
                                   const std::vector<Correspondence>& corrs, const RansacOptions& opts) {
  if (corrs.size() < 3)
    throw Error(Errc::TooFewCorrespondences, "RANSAC needs >= 3 correspondences, got " + std::to_string(corrs.size()));
  for (const auto& c : corrs)
    if (c.source_index >= f_cloud.size() || c.target_index >= q_cloud.size())
      throw Error(Errc::InvalidArgument, "correspondence index out of range");

  const double dist2 = opts.inlier_dist_m * opts.inlier_dist_m;
  const double edge_tol = 2.0 * opts.inlier_dist_m;
  const std::size_t n = corrs.size();

  RigidTransform3 best;
  std::size_t best_count = 0;
  double needed = static_cast<double>(opts.max_trials);
  int trials = 0;
  for (; trials < opts.max_trials && trials < needed; ++trials) {
    // Per-trial derived stream: trial t draws the same sample regardless of order.
    std::uint64_t s = splitmix64(opts.seed ^ splitmix64(static_cast<std::uint64_t>(trials)));
    std::size_t idx[3];
    for (int k = 0; k < 3; ++k) {
      s = splitmix64(s);
      idx[k] = static_cast<std::size_t>(s % n);
    }
    if (idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2]) continue;

    Vec3 a[3], b[3];
    for (int k = 0; k < 3; ++k) {
      a[k] = f_cloud.points[corrs[idx[k]].source_index];
      b[k] = q_cloud.points[corrs[idx[k]].target_index];
    }
    if (opts.edge_length_check) {
      bool ok = true;
      for (int u = 0; u < 3 && ok; ++u) {
        const int v = (u + 1) % 3;
        ok = std::abs((a[u] - a[v]).norm() - (b[u] - b[v]).norm()) <= edge_tol;
      }
      if (!ok) continue;
    }
    if ((a[1] - a[0]).cross(a[2] - a[0]).norm() < 1e-9) continue;  // collinear

    const RigidTransform3 t = solve_rigid_transform(std::span<const Vec3>(a, 3), std::span<const Vec3>(b, 3));
    std::size_t count = 0;
    for (const auto& c : corrs)
      if ((t.apply(f_cloud.points[c.source_index]) - q_cloud.points[c.target_index]).squaredNorm() <= dist2) ++count;
    if (count > best_count) {
      best_count = count;
      best = t;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double p_all = w * w * w;
      needed = p_all >= 1.0 ? 0.0 : std::log(1.0 - opts.confidence) / std::log(1.0 - p_all);
    }
  }
  if (best_count < 3) throw Error(Errc::NoConsensus, "best model has " + std::to_string(best_count) + " inliers");

  // Refit on the consensus set while it does not shrink.
  RigidTransform3 model = best;
  std::vector<std::size_t> in = inliers_of(model, f_cloud, q_cloud, corrs, dist2);
  for (int round = 0; round < opts.refit_rounds; ++round) {
    const RigidTransform3 refit = fit_on(in, f_cloud, q_cloud, corrs);
    auto refit_in = inliers_of(refit, f_cloud, q_cloud, corrs, dist2);
    if (refit_in.size() < in.size()) break;
    const bool same = refit_in == in;
    model = refit;
    in = std::move(refit_in);
    if (same) break;
  }

  RegistrationResult res;
  res.transform = model;
  res.inlier_count = in.size();
  res.correspondence_count = n;
  res.iterations = trials;
  res.converged = true;
  for (std::size_t k : in)
    res.final_cost += (model.apply(f_cloud.points[corrs[k].source_index]) - q_cloud.points[corrs[k].target_index]).squaredNorm();
  return res;
}

double yaw_from_consecutive(const Pose2& prev, const Pose2& curr) {
  const double dx = curr.x - prev.x, dy = curr.y - prev.y;
  if (std::hypot(dx, dy) < 1e-6) throw Error(Errc::DegenerateMotion, "consecutive poses coincide");
  return std::atan2(dy, dx);
}

// ---------------------------------------------------------------------------

FineLocalizer::FineLocalizer(const TopoMap& map, const FeatureBackend* backend, FineOptions opts)
    : map_(&map), backend_(backend), opts_(std::move(opts)) {
  if (map.empty()) throw Error(Errc::EmptyMap, "fine localization needs a non-empty map");
}

FineLocalizer::NodeEntry& FineLocalizer::entry(std::size_t node_index) {
  NodeEntry& e = cache_[node_index];
  if (!e.cloud) {
    PointCloud c = preprocess_for_registration(map_->cloud(node_index), opts_.preprocess);
    if (c.source_id.empty()) c.source_id = map_->node(node_index).cloud_ref;
    e.cloud = std::move(c);
  }
  return e;
}

const NormalCloud& FineLocalizer::node_normals(std::size_t node_index) {
  NodeEntry& e = entry(node_index);
  if (!e.normals) e.normals = estimate_normals(*e.cloud, opts_.normal_k);
  return *e.normals;
}

const LocalFeatureCloud& FineLocalizer::node_features(std::size_t node_index) {
  NodeEntry& e = entry(node_index);
  if (!e.features) {
    if (!backend_) throw Error(Errc::BackendUnavailable, "no feature backend configured");
    e.features = local_features(*backend_, *e.cloud);
  }
  return *e.features;
}

RigidTransform3 FineLocalizer::node_pose(std::size_t node_index) const {
  const MapNode& n = map_->node(node_index);
  return RigidTransform3::from_pose2(Pose2(n.position.x(), n.position.y(), n.yaw_at_capture));
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void fall_back(FineResult& r, const Pose2& coarse, const Error& e) {
  r.fallback = true;
  r.error = e.code();
  r.message = e.what();
  r.pose = coarse;
  r.transform = RigidTransform3::from_pose2(coarse);
}

}  // namespace

FineResult FineLocalizer::localize_icp(const PointCloud& query, const Pose2& coarse, const Pose2& prev_coarse) {
  const auto t0 = std::chrono::steady_clock::now();
  FineResult r;
  r.node_index = map_->nearest_index(coarse.x, coarse.y);
  double yaw = coarse.theta;
  try {
    yaw = yaw_from_consecutive(prev_coarse, coarse);
  } catch (const Error& e) {
    if (e.code() != Errc::DegenerateMotion) throw;
  }
  r.seed = Pose2(coarse.x, coarse.y, yaw);
  try {
    const RigidTransform3 node = node_pose(r.node_index);
    const NormalCloud& target = node_normals(r.node_index);
    const PointCloud source = preprocess_for_registration(query, opts_.preprocess);
    const RigidTransform3 seed = node.inverse() * RigidTransform3::from_pose2(r.seed);
    r.registration = icp_point_to_plane(source, target, seed, opts_.icp);
    r.transform = node * r.registration.transform;
    r.pose = r.transform.to_pose2();
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidArgument) throw;
    fall_back(r, coarse, e);
  }
  r.wall_time_ms = elapsed_ms(t0);
  return r;
}

FineResult FineLocalizer::localize_dlf(const PointCloud& query, const Pose2& coarse) {
  const auto t0 = std::chrono::steady_clock::now();
  FineResult r;
  r.node_index = map_->nearest_index(coarse.x, coarse.y);
  r.seed = coarse;
  try {
    if (!backend_) throw Error(Errc::BackendUnavailable, "no feature backend configured");
    const RigidTransform3 node = node_pose(r.node_index);
    const LocalFeatureCloud& target = node_features(r.node_index);
    PointCloud source = preprocess_for_registration(query, opts_.preprocess);
    if (source.source_id.empty()) source.source_id = query.source_id;
    const LocalFeatureCloud feats = local_features(*backend_, source);
    const auto corrs = match_features(feats, target, opts_.match);

    PointCloud f_pts, q_pts;
    f_pts.points = feats.points;
    q_pts.points = target.points;
    r.registration = ransac_register(f_pts, q_pts, corrs, opts_.ransac);
    if (opts_.polish) {
      try {
        PointCloud src_cloud = source;
        RegistrationResult polished = icp_point_to_plane(src_cloud, node_normals(r.node_index), r.registration.transform, opts_.icp);
        r.registration.transform = polished.transform;
        r.registration.final_cost = polished.final_cost;
        r.registration.history = std::move(polished.history);
        r.registration.iterations += polished.iterations;
      } catch (const Error& e) {
        if (e.code() != Errc::DegenerateGeometry && e.code() != Errc::EmptyCorrespondences) throw;
      }
    }
    r.transform = node * r.registration.transform;
    r.pose = r.transform.to_pose2();
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidArgument) throw;
    fall_back(r, coarse, e);
  }
  r.wall_time_ms = elapsed_ms(t0);
  return r;
}

FineResult fine_localize_icp(const PointCloud& query, const TopoMap& map, const Pose2& coarse, const Pose2& prev_coarse,
                             const FineOptions& opts) {
  FineLocalizer loc(map, nullptr, opts);
  return loc.localize_icp(query, coarse, prev_coarse);
}

FineResult fine_localize_dlf(const PointCloud& query, const TopoMap& map, const Pose2& coarse,
                             const FeatureBackend& backend, const FineOptions& opts) {
  FineLocalizer loc(map, &backend, opts);
  return loc.localize_dlf(query, coarse);
}

nlohmann::json registration_report(const FineResult& r, const std::string& method) {
  auto pose = [](const Pose2& p) { return nlohmann::json{{"x", p.x}, {"y", p.y}, {"yaw", p.theta}}; };
  nlohmann::json j;
  j["method"] = method;
  j["node_index"] = r.node_index;
  j["seed_pose"] = pose(r.seed);
  j["refined_pose"] = pose(r.pose);
  j["translation"] = {r.transform.translation.x(), r.transform.translation.y(), r.transform.translation.z()};
  j["cost"] = r.registration.final_cost;
  j["inliers"] = r.registration.inlier_count;
  j["iterations"] = r.registration.iterations;
  j["converged"] = r.registration.converged;
  j["fallback"] = r.fallback;
  j["error"] = r.error ? nlohmann::json(std::string(errc_name(*r.error))) : nlohmann::json(nullptr);
  j["wall_time_ms"] = r.wall_time_ms;
  return j;
}

}  // namespace lockit
