#pragma once

#include "lockit/evaluation.hpp"
#include "lockit/mcl.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lockit {

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

struct ParticleSnapshot {
  int iter = 0;
  std::vector<Eigen::Vector2d> positions;
};

/// Snapshots in file order, one per iteration.
std::vector<ParticleSnapshot> read_particles_csv(const std::filesystem::path& path);

/// Root-mean-square distance of the positions from their centroid.
double dispersion_radius(const std::vector<Eigen::Vector2d>& positions);

/// Snapshot panels for the listed iterations (those present in `snapshots`).
std::string particles_svg(const std::vector<ParticleSnapshot>& snapshots, const std::vector<int>& iters);

/// Estimated track from the trace, with truth and refined tracks when error
/// records are supplied.
std::string trajectory_svg(const std::vector<TraceRow>& trace, const std::vector<ErrorRecord>& errors);

std::string histogram_svg(const std::vector<double>& values, int bins, const std::string& title,
                          const std::string& unit);

struct PlotInputs {
  std::filesystem::path trace;
  std::optional<std::filesystem::path> particles;
  std::optional<std::filesystem::path> errors;
};

/// Writes particles.svg (when particles are given), trajectory.svg and,
/// with error records, one error histogram per stage. Throws EmptyInput on an
/// empty trace before creating any file.
std::vector<std::filesystem::path> plot_run(const PlotInputs& in, const std::filesystem::path& out_dir);

}  // namespace lockit
