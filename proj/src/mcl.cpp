#include "lockit/mcl.hpp"

#include "lockit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <ostream>
#include <unordered_map>

namespace lockit {

void MclConfig::validate(const TopoMap& map) const {
  if (map.empty()) throw Error(Errc::EmptyMap, "MCL needs a non-empty map");
  if (retrieval_depth < 1) throw Error(Errc::InvalidArgument, "B must be >= 1");
  if (retrieval_depth > map.size())
    throw Error(Errc::BTooLarge, "B = " + std::to_string(retrieval_depth) + " exceeds map size " +
                                     std::to_string(map.size()));
  if (!(sigma_l > 0) || !(sigma_m > 0)) throw Error(Errc::InvalidArgument, "kernel widths must be > 0");
  if (!(step_distance_m > 0)) throw Error(Errc::InvalidArgument, "step distance must be > 0");
  if (!(reinit_weight_floor >= 0) || reinit_weight_floor >= 1)
    throw Error(Errc::InvalidArgument, "re-initialization floor must lie in [0, 1)");
  if (burn_in_iters < 0) throw Error(Errc::InvalidArgument, "burn-in must be >= 0");
  if (motion_noise.distance_fraction < 0 || motion_noise.heading_rad < 0)
    throw Error(Errc::InvalidArgument, "motion noise must be >= 0");
}

double ParticleSet::weight_sum() const {
  double s = 0.0;
  for (const auto& p : particles) s += p.weight;
  return s;
}

namespace {

double uniform_heading(std::mt19937_64& rng) {
  // (-pi, pi]
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return std::numbers::pi - 2.0 * std::numbers::pi * u(rng);
}

}  // namespace

ParticleSet init_particles(const TopoMap& map, const MclConfig& cfg) {
  if (map.empty()) throw Error(Errc::EmptyMap, "cannot initialize particles on an empty map");
  const std::size_t n = map.size();
  const std::size_t m = cfg.particle_count(map);
  ParticleSet set;
  set.rng.seed(cfg.seed);

  std::vector<std::size_t> hosts(m);
  if (m <= n) {
    // Partial Fisher-Yates: m distinct nodes, uniformly.
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    if (m < n) {
      for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(pool[i], pool[pick(set.rng)]);
      }
    }
    std::copy_n(pool.begin(), m, hosts.begin());
  } else {
    for (std::size_t i = 0; i < m; ++i) hosts[i] = i % n;
  }

  set.particles.resize(m);
  const double w = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    const MapNode& node = map.node(hosts[i]);
    set.particles[i] = {Pose2(node.position.x(), node.position.y(), uniform_heading(set.rng)), w, hosts[i]};
  }
  return set;
}

ParticleSet predict(ParticleSet set, const OdometryDelta& u, const TopoMap& map, const MclConfig& cfg) {
  const double d = u.distance();
  const double sigma_d = cfg.motion_noise.distance_fraction * d;
  const double sigma_th = cfg.motion_noise.heading_rad;
  std::normal_distribution<double> n01(0.0, 1.0);
  for (auto& p : set.particles) {
    const double dn = sigma_d > 0 ? d + sigma_d * n01(set.rng) : d;
    const double dth = sigma_th > 0 ? u.dtheta + sigma_th * n01(set.rng) : u.dtheta;
    const double heading = p.pose.theta + dth;
    const double x = p.pose.x + dn * std::cos(heading);
    const double y = p.pose.y + dn * std::sin(heading);
    const std::size_t k = map.nearest_index(x, y);
    const Eigen::Vector2d& snapped = map.node(k).position;
    p.pose = Pose2(snapped.x(), snapped.y(), heading);
    p.node_index = k;
  }
  return set;
}

std::vector<double> observation_weights(const ParticleSet& set, const std::vector<DescriptorMatch>& retrieved,
                                        const TopoMap& map, const MclConfig& cfg) {
  const auto b = static_cast<Eigen::Index>(retrieved.size());
  const auto m = static_cast<Eigen::Index>(set.size());

  // Descriptor factor depends only on (particle node, retrieved node): cache per occupied node.
  std::unordered_map<std::size_t, Eigen::Index> slot;
  std::vector<std::size_t> occupied;
  for (const auto& p : set.particles)
    if (slot.try_emplace(p.node_index, static_cast<Eigen::Index>(occupied.size())).second)
      occupied.push_back(p.node_index);

  Eigen::MatrixXd desc_factor(static_cast<Eigen::Index>(occupied.size()), b);
  for (std::size_t k = 0; k < occupied.size(); ++k) {
    const Eigen::VectorXd& dk = map.node(occupied[k]).descriptor.values;
    for (Eigen::Index j = 0; j < b; ++j) {
      const double h2 = (map.node(retrieved[static_cast<std::size_t>(j)].node_index).descriptor.values - dk).squaredNorm();
      const double expo = cfg.kernel == DescriptorKernel::Gaussian ? h2 / (cfg.sigma_m * cfg.sigma_m) : h2 * cfg.sigma_m;
      desc_factor(static_cast<Eigen::Index>(k), j) = std::exp(-expo);
    }
  }

  Eigen::Matrix2Xd particle_xy(2, m);
  Eigen::MatrixXd factor(m, b);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& p = set.particles[static_cast<std::size_t>(i)];
    particle_xy.col(i) << p.pose.x, p.pose.y;
    factor.row(i) = desc_factor.row(slot.at(p.node_index));
  }
  Eigen::Matrix2Xd node_xy(2, b);
  for (Eigen::Index j = 0; j < b; ++j) node_xy.col(j) = map.node(retrieved[static_cast<std::size_t>(j)].node_index).position;

  // |n_j - x_i|^2 for all pairs, then the metric kernel.
  Eigen::MatrixXd sq(m, b);
  for (Eigen::Index j = 0; j < b; ++j)
    sq.col(j) = (particle_xy.colwise() - node_xy.col(j)).colwise().squaredNorm().transpose();
  const Eigen::VectorXd w =
      ((-sq.array() / (cfg.sigma_l * cfg.sigma_l)).exp() * factor.array()).rowwise().sum().matrix();
  return {w.data(), w.data() + w.size()};
}

std::vector<double> observation_weights(const ParticleSet& set, const GlobalDescriptor& query, const TopoMap& map,
                                        const MclConfig& cfg) {
  cfg.validate(map);
  return observation_weights(set, map.top_b_descriptor_matches(query, cfg.retrieval_depth), map, cfg);
}

namespace {

void assign_normalized(ParticleSet& set, const std::vector<double>& w) {
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) set.particles[i].weight = sum > 0 ? w[i] / sum : 0.0;
}

}  // namespace

ParticleSet update_weights(ParticleSet set, const GlobalDescriptor& query, const TopoMap& map, const MclConfig& cfg) {
  assign_normalized(set, observation_weights(set, query, map, cfg));
  return set;
}

ParticleSet resample(ParticleSet set, ResamplingScheme scheme) {
  const std::size_t m = set.size();
  if (m == 0) throw Error(Errc::EmptySet, "cannot resample an empty particle set");
  std::vector<double> cum(m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double w = set.particles[i].weight;
    if (!(w >= 0) || !std::isfinite(w)) throw Error(Errc::InvalidArgument, "invalid particle weight");
    total += w;
    cum[i] = total;
  }
  if (!(total > 0)) throw Error(Errc::AllZeroWeights, "every particle weight is zero");

  auto ancestor = [&](double u) {
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), m - 1);
  };

  std::vector<Particle> out;
  out.reserve(m);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (scheme == ResamplingScheme::Multinomial) {
    for (std::size_t k = 0; k < m; ++k) out.push_back(set.particles[ancestor(u01(set.rng) * total)]);
  } else {
    const double stride = total / static_cast<double>(m);
    const double start = u01(set.rng) * stride;
    for (std::size_t k = 0; k < m; ++k) out.push_back(set.particles[ancestor(start + stride * static_cast<double>(k))]);
  }
  const double w = 1.0 / static_cast<double>(m);
  for (auto& p : out) p.weight = w;
  set.particles = std::move(out);
  return set;
}

Pose2 estimate(const ParticleSet& set) {
  if (set.particles.empty()) throw Error(Errc::EmptySet, "cannot estimate from an empty particle set");
  double sx = 0, sy = 0, ss = 0, sc = 0;
  for (const auto& p : set.particles) {
    sx += p.pose.x;
    sy += p.pose.y;
    ss += std::sin(p.pose.theta);
    sc += std::cos(p.pose.theta);
  }
  const double m = static_cast<double>(set.size());
  return Pose2(sx / m, sy / m, std::atan2(ss, sc));
}

double effective_sample_size(const ParticleSet& set) {
  const double sum = set.weight_sum();
  if (!(sum > 0)) return 0.0;
  double sq = 0.0;
  for (const auto& p : set.particles) sq += (p.weight / sum) * (p.weight / sum);
  return 1.0 / sq;
}

StepResult step(ParticleSet set, const OdometryDelta& u, const GlobalDescriptor& query, const TopoMap& map,
                const MclConfig& cfg) {
  cfg.validate(map);
  set = predict(std::move(set), u, map, cfg);
  const auto retrieved = map.top_b_descriptor_matches(query, cfg.retrieval_depth);
  const std::vector<double> raw = observation_weights(set, retrieved, map, cfg);
  const double strongest = raw.empty() ? 0.0 : *std::max_element(raw.begin(), raw.end());
  if (strongest < cfg.reinit_weight_floor)
    throw Error(Errc::AllZeroWeights, "strongest particle weight " + std::to_string(strongest) +
                                          " is below the re-initialization floor");
  assign_normalized(set, raw);

  TraceRow row;
  row.effective_sample_size = effective_sample_size(set);
  row.top1_node_id = map.node(retrieved.front().node_index).id;
  row.top1_desc_dist = retrieved.front().distance;

  set = resample(std::move(set), cfg.resampling);
  const Pose2 est = estimate(set);
  row.estimate = est;
  return {std::move(set), est, row};
}

MclFilter::MclFilter(const TopoMap& map, MclConfig cfg) : map_(&map), cfg_(cfg) {
  cfg_.validate(map);
  set_ = init_particles(map, cfg_);
  estimate_ = lockit::estimate(set_);
}

bool MclFilter::accumulate(const OdometryDelta& u) {
  accumulated_ = compose(accumulated_, u);
  return ready();
}

bool MclFilter::ready() const { return std::hypot(accumulated_.x, accumulated_.y) >= cfg_.step_distance_m; }

TraceRow MclFilter::step(const GlobalDescriptor& query) {
  const OdometryDelta u{accumulated_.x, accumulated_.y, accumulated_.theta};
  accumulated_ = Pose2();
  ++iteration_;
  TraceRow row;
  try {
    StepResult r = lockit::step(std::move(set_), u, query, *map_, cfg_);
    set_ = std::move(r.set);
    estimate_ = r.estimate;
    row = r.trace;
  } catch (const Error& e) {
    if (e.code() != Errc::AllZeroWeights) throw;
    reinitialize();
    row.estimate = estimate_;
    row.reinitialized = true;
  }
  row.iter = iteration_;
  return row;
}

void MclFilter::reinitialize() {
  MclConfig c = cfg_;
  c.seed = cfg_.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(++reinit_count_);
  set_ = init_particles(*map_, c);
  estimate_ = lockit::estimate(set_);
}

void write_trace_header(std::ostream& os) {
  os << "iter,est_x,est_y,est_theta,effective_sample_size,top1_node_id,top1_desc_dist\n";
}

void write_trace_row(std::ostream& os, const TraceRow& r) {
  const auto prec = os.precision(10);
  os << r.iter << ',' << r.estimate.x << ',' << r.estimate.y << ',' << r.estimate.theta << ','
     << r.effective_sample_size << ',' << r.top1_node_id << ',' << r.top1_desc_dist << '\n';
  os.precision(prec);
}

}  // namespace lockit
