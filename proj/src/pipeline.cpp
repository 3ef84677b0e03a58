#include "lockit/pipeline.hpp"

#include "lockit/errors.hpp"

#include <ostream>

namespace lockit {

FineMethod parse_fine_method(const std::string& name) {
  if (name == "none") return FineMethod::None;
  if (name == "icp") return FineMethod::Icp;
  if (name == "dlf") return FineMethod::Dlf;
  throw Error(Errc::InvalidArgument, "unknown fine method '" + name + "' (expected none, icp or dlf)");
}

std::string to_string(FineMethod m) {
  switch (m) {
    case FineMethod::Icp: return "icp";
    case FineMethod::Dlf: return "dlf";
    default: return "none";
  }
}

std::string stage_name(FineMethod m) { return m == FineMethod::None ? "mcl" : "mcl-" + to_string(m); }

void write_particles_header(std::ostream& os) { os << "iter,particle,x,y,theta,weight,node_index\n"; }

void write_particles(std::ostream& os, int iter, const ParticleSet& set) {
  const auto prec = os.precision(10);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Particle& p = set.particles[i];
    os << iter << ',' << i << ',' << p.pose.x << ',' << p.pose.y << ',' << p.pose.theta << ',' << p.weight << ','
       << p.node_index << '\n';
  }
  os.precision(prec);
}

SessionResult run_session(const TopoMap& map, const FeatureBackend& backend, const QuerySource& queries,
                          const SessionOptions& opts, const SessionSinks& sinks) {
  if (queries.size() == 0) throw Error(Errc::EmptyInput, "query sequence is empty");
  if (queries.ids.size() != queries.size() || queries.truth.size() != queries.size())
    throw Error(Errc::InvalidArgument, "query ids, poses and truth differ in length");
  if (!queries.cloud) throw Error(Errc::InvalidArgument, "query source has no cloud loader");
  if (opts.fine == FineMethod::Icp && !map.has_clouds())
    throw Error(Errc::InvalidArgument, "ICP refinement needs a map with clouds");

  SessionResult out;
  MclFilter filter(map, opts.mcl);
  std::optional<FineLocalizer> fine;
  if (opts.fine != FineMethod::None) fine.emplace(map, &backend, opts.fine_options);

  if (sinks.particles) write_particles(*sinks.particles, 0, filter.particles());
  Pose2 prev_estimate = filter.estimate();
  const std::string fine_stage = stage_name(opts.fine);

  for (std::size_t k = 1; k < queries.size(); ++k) {
    filter.accumulate(delta_between(queries.odometry_poses[k - 1], queries.odometry_poses[k]));
    if (!filter.ready()) continue;
    if (opts.max_iterations > 0 && filter.iteration() >= opts.max_iterations) break;

    const PointCloud scan = queries.cloud(k);
    const GlobalDescriptor d = global_descriptor(backend, preprocess_for_descriptor(scan, opts.descriptor_preprocess));
    const TraceRow row = filter.step(d);
    out.reinitializations += row.reinitialized ? 1 : 0;
    out.trace.push_back(row);
    if (sinks.trace) write_trace_row(*sinks.trace, row);
    if (sinks.particles) write_particles(*sinks.particles, row.iter, filter.particles());

    const bool scored = filter.past_burn_in();
    const auto& truth = queries.truth[k];
    if (truth) {
      out.errors.push_back(
          make_error_record(opts.session, row.iter, queries.ids[k], "mcl", row.estimate, *truth, scored));
      if (sinks.errors) write_error_record(*sinks.errors, out.errors.back());
    }

    if (fine) {
      FineResult r = opts.fine == FineMethod::Icp ? fine->localize_icp(scan, row.estimate, prev_estimate)
                                                  : fine->localize_dlf(scan, row.estimate);
      if (sinks.registrations) {
        auto j = registration_report(r, to_string(opts.fine));
        j["session"] = opts.session;
        j["iter"] = row.iter;
        j["query_id"] = queries.ids[k];
        *sinks.registrations << j.dump() << '\n';
      }
      if (truth) {
        out.errors.push_back(make_error_record(opts.session, row.iter, queries.ids[k], fine_stage, r.pose, *truth, scored));
        if (sinks.errors) write_error_record(*sinks.errors, out.errors.back());
      }
      out.fine.push_back(std::move(r));
    }
    prev_estimate = row.estimate;
    for (std::ostream* s : {sinks.trace, sinks.particles, sinks.registrations, sinks.errors})
      if (s) s->flush();
  }
  return out;
}

}  // namespace lockit
