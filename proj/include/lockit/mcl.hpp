#pragma once

#include "lockit/features.hpp"
#include "lockit/geometry.hpp"
#include "lockit/topo_map.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace lockit {

/// Descriptor-space kernel of the observation model.
///  Gaussian:    exp(-h^2 / sigma_m^2)
///  Exponential: exp(-h^2 * sigma_m), sigma_m read as a precision.
enum class DescriptorKernel { Gaussian, Exponential };

enum class ResamplingScheme { Multinomial, Systematic };

struct MotionNoise {
  double distance_fraction = 0.05;    // sigma_d = fraction * d
  double heading_rad = deg2rad(1.0);  // sigma_theta
};

struct MclConfig {
  std::size_t particles = 0;      // M; 0 means one per map node
  std::size_t retrieval_depth = 5;  // B
  double sigma_l = 3.0;           // metres
  double sigma_m = 0.3;           // descriptor units
  double step_distance_m = 1.0;
  int burn_in_iters = 20;
  MotionNoise motion_noise;
  /// Re-initialize on all nodes when no particle's unnormalized weight
  /// reaches this value (no particle near any retrieved node). 0 disables.
  double reinit_weight_floor = 1e-3;
  std::uint64_t seed = 1;
  DescriptorKernel kernel = DescriptorKernel::Gaussian;
  ResamplingScheme resampling = ResamplingScheme::Multinomial;

  std::size_t particle_count(const TopoMap& map) const { return particles ? particles : map.size(); }
  void validate(const TopoMap& map) const;
};

struct Particle {
  Pose2 pose;
  double weight = 0.0;
  std::size_t node_index = 0;  // map index of the node the particle sits on
};

struct ParticleSet {
  std::vector<Particle> particles;
  std::mt19937_64 rng;

  std::size_t size() const { return particles.size(); }
  double weight_sum() const;
};

ParticleSet init_particles(const TopoMap& map, const MclConfig& cfg);

/// Motion update followed by snapping each particle onto its nearest node.
ParticleSet predict(ParticleSet set, const OdometryDelta& u, const TopoMap& map, const MclConfig& cfg);

/// Unnormalized observation weights, one per particle:
///   w_i = sum_j exp(-|n_j - x_i|^2 / sigma_l^2) * K(|d_j - d_node(i)|)
/// over the B nodes whose descriptors are closest to `query`.
std::vector<double> observation_weights(const ParticleSet& set, const GlobalDescriptor& query, const TopoMap& map,
                                        const MclConfig& cfg);

/// Same sum, given an already retrieved node list.
std::vector<double> observation_weights(const ParticleSet& set, const std::vector<DescriptorMatch>& retrieved,
                                        const TopoMap& map, const MclConfig& cfg);

/// Stores normalized observation weights. If every weight underflows to zero
/// the weights are left at zero and resample() reports AllZeroWeights.
ParticleSet update_weights(ParticleSet set, const GlobalDescriptor& query, const TopoMap& map, const MclConfig& cfg);

ParticleSet resample(ParticleSet set, ResamplingScheme scheme = ResamplingScheme::Multinomial);

/// Mean position and circular-mean heading.
Pose2 estimate(const ParticleSet& set);

/// 1 / sum(w^2) over normalized weights.
double effective_sample_size(const ParticleSet& set);

struct TraceRow {
  int iter = 0;
  Pose2 estimate;
  double effective_sample_size = 0.0;
  int top1_node_id = -1;
  double top1_desc_dist = 0.0;
  bool reinitialized = false;
};

struct StepResult {
  ParticleSet set;
  Pose2 estimate;
  TraceRow trace;
};

/// predict -> update_weights -> resample -> estimate. Throws AllZeroWeights
/// when the strongest weight is below cfg.reinit_weight_floor.
StepResult step(ParticleSet set, const OdometryDelta& u, const GlobalDescriptor& query, const TopoMap& map,
                const MclConfig& cfg);

/// Filter driver: accumulates odometry until the configured travel distance
/// is reached, runs one iteration per observation and re-initializes on all
/// map nodes when the weights collapse.
class MclFilter {
 public:
  MclFilter(const TopoMap& map, MclConfig cfg);

  /// Adds odometry; returns true once the accumulated distance reaches
  /// the step distance.
  bool accumulate(const OdometryDelta& u);
  bool ready() const;

  /// One iteration with the accumulated motion; clears the accumulator.
  TraceRow step(const GlobalDescriptor& query);

  /// Kidnap handling: particles back on all nodes with random headings.
  void reinitialize();

  int iteration() const { return iteration_; }
  bool past_burn_in() const { return iteration_ > cfg_.burn_in_iters; }
  const ParticleSet& particles() const { return set_; }
  const Pose2& estimate() const { return estimate_; }
  const MclConfig& config() const { return cfg_; }

 private:
  const TopoMap* map_;
  MclConfig cfg_;
  ParticleSet set_;
  Pose2 accumulated_;
  int iteration_ = 0;
  int reinit_count_ = 0;
  Pose2 estimate_;
};

void write_trace_header(std::ostream& os);
void write_trace_row(std::ostream& os, const TraceRow& row);

}  // namespace lockit
