#pragma once

#include "lockit/evaluation.hpp"
#include "lockit/mcl.hpp"
#include "lockit/registration.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lockit {

enum class FineMethod { None, Icp, Dlf };

FineMethod parse_fine_method(const std::string& name);
std::string to_string(FineMethod m);
/// Stage label used in error records: "mcl-icp", "mcl-dlf".
std::string stage_name(FineMethod m);

/// Query frames with odometry poses (any rate) and optional ground truth.
/// Clouds are fetched only for frames where the filter steps.
struct QuerySource {
  std::vector<std::string> ids;
  std::vector<Pose2> odometry_poses;
  std::vector<std::optional<Pose2>> truth;
  std::function<PointCloud(std::size_t)> cloud;

  std::size_t size() const { return odometry_poses.size(); }
};

struct SessionOptions {
  std::string session = "session";
  MclConfig mcl;
  PreprocessConfig descriptor_preprocess;  // normalize on
  FineMethod fine = FineMethod::None;
  FineOptions fine_options;               // registration path, normalize off
  int max_iterations = 0;                 // 0: run through every frame
};

/// Optional streaming outputs; rows are flushed as they are produced so a
/// failure leaves the partial run on disk.
struct SessionSinks {
  std::ostream* trace = nullptr;
  std::ostream* particles = nullptr;
  std::ostream* registrations = nullptr;
  std::ostream* errors = nullptr;
};

struct SessionResult {
  std::vector<TraceRow> trace;
  std::vector<FineResult> fine;  // one per iteration when a fine method is set
  std::vector<ErrorRecord> errors;
  int reinitializations = 0;
};

void write_particles_header(std::ostream& os);
void write_particles(std::ostream& os, int iter, const ParticleSet& set);

/// Runs the coarse-to-fine loop: one filter iteration per step distance of
/// odometry, the chosen fine method after each iteration, and error records
/// for frames with ground truth.
SessionResult run_session(const TopoMap& map, const FeatureBackend& backend, const QuerySource& queries,
                          const SessionOptions& opts, const SessionSinks& sinks = {});

}  // namespace lockit
