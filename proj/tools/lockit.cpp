#include "lockit/cloud_io.hpp"
#include "lockit/config.hpp"
#include "lockit/descriptor_io.hpp"
#include "lockit/errors.hpp"
#include "lockit/evaluation.hpp"
#include "lockit/pipeline.hpp"
#include "lockit/plot.hpp"
#include "lockit/scenario.hpp"
#include "lockit/topo_map.hpp"
#include "lockit/trajectory_io.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace lockit;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kRuntime = 4 };

int exit_code_for(Errc c) {
  switch (c) {
    case Errc::InvalidArgument:
    case Errc::BTooLarge:
      return kConfig;
    case Errc::Io:
    case Errc::Parse:
    case Errc::EmptyInput:
    case Errc::EmptyTrajectory:
    case Errc::EmptyMap:
    case Errc::EmptyCloud:
    case Errc::BackendUnavailable:
    case Errc::DimensionMismatch:
    case Errc::TooShort:
      return kData;
    default:
      return kRuntime;
  }
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("lockit");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("LOCKIT_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off")
      spdlog::warn("LOCKIT_LOG='{}' is not a log level; using info", env);
    else
      spdlog::set_level(level);
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::Io, "cannot write " + path.string());
  return os;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  fs::path out;
  ScenarioConfig scenario;
  int rings = 32;
  int azimuth_steps = 360;
};

int cmd_simulate(const SimulateArgs& a) {
  ScenarioConfig cfg = a.scenario;
  cfg.scan.rings = a.rings;
  cfg.scan.azimuth_steps = a.azimuth_steps;
  if (cfg.map_poses < 2 || cfg.query_frames < 2) throw Error(Errc::InvalidArgument, "need at least two poses");
  const Scenario s = make_scenario(cfg);
  fs::create_directories(a.out / "mapping" / "clouds");
  fs::create_directories(a.out / "queries" / "clouds");
  save_world(a.out / "world.json", s.world);

  std::vector<PoseRecord> mapping;
  for (std::size_t i = 0; i < s.map_poses.size(); ++i) {
    const PointCloud c = s.map_scan(i);
    const fs::path rel = fs::path("clouds") / (c.source_id + ".lpcd");
    save_lpcd(a.out / "mapping" / rel, c);
    mapping.push_back({c.source_id, s.map_poses[i], rel, std::nullopt});
  }
  write_pose_csv(a.out / "mapping" / "poses.csv", mapping);

  std::vector<PoseRecord> queries;
  for (std::size_t k = 0; k < s.query.poses.size(); ++k) {
    const PointCloud c = s.query_scan(k);
    const fs::path rel = fs::path("clouds") / (c.source_id + ".lpcd");
    save_lpcd(a.out / "queries" / rel, c);
    queries.push_back({c.source_id, s.query.poses[k], rel, s.query_sensor_pose(k)});
  }
  write_pose_csv(a.out / "queries" / "poses.csv", queries);
  std::cout << "world: " << s.world.obstacles.size() << " obstacles, " << mapping.size() << " mapping scans, "
            << queries.size() << " query scans -> " << a.out.string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct ExportArgs {
  std::vector<fs::path> trajectories;
  fs::path config;
  fs::path out;
};

int cmd_export(const ExportArgs& a) {
  RunConfig cfg;
  if (!a.config.empty()) cfg = load_run_config(a.config);
  cfg.validate();
  const SyntheticBackend backend;
  fs::create_directories(a.out);
  std::size_t n = 0;
  for (const auto& t : a.trajectories) {
    for (const auto& r : read_pose_csv(t)) {
      const PointCloud c = load_cloud(r.cloud);
      save_global_ldsc(global_ldsc_path(a.out, c.source_id),
                       global_descriptor(backend, preprocess_for_descriptor(c, cfg.preprocess)), backend.name());
      save_local_ldsc(local_ldsc_path(a.out, c.source_id),
                      local_features(backend, preprocess_for_registration(c, cfg.preprocess)));
      ++n;
    }
  }
  std::cout << "exported descriptors for " << n << " scans -> " << a.out.string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct BuildMapArgs {
  std::vector<fs::path> trajectories;
  double spacing = 1.0;
  std::string backend;
  fs::path config;
  fs::path out;
};

int cmd_build_map(const BuildMapArgs& a) {
  RunConfig cfg;
  if (!a.config.empty()) cfg = load_run_config(a.config);
  if (!a.backend.empty()) cfg.backend = a.backend;
  cfg.validate();
  if (!(a.spacing > 0)) throw Error(Errc::InvalidArgument, "--spacing must be > 0");
  const auto backend = make_backend(cfg.backend);

  std::vector<TrajectorySample> samples;
  for (const auto& t : a.trajectories) {
    const auto records = read_pose_csv(t);
    spdlog::info("{}: {} poses", t.string(), records.size());
    for (const auto& r : records) samples.push_back({r.pose, load_cloud(r.cloud)});
  }
  const TopoMap map = build_map(samples, a.spacing, *backend, cfg.preprocess);
  save_map(a.out, map);
  export_nodes_csv(a.out / "nodes.csv", map);
  std::cout << "map: " << map.size() << " nodes -> " << a.out.string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct LocalizeArgs {
  fs::path map;
  fs::path queries;
  std::string fine;
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::string backend;
  std::string session;
  int max_iterations = 0;
  fs::path out;
};

int cmd_localize(const LocalizeArgs& a) {
  RunConfig cfg;
  if (!a.config.empty()) cfg = load_run_config(a.config);
  if (!a.fine.empty()) cfg.fine = parse_fine_method(a.fine);
  if (a.seed) cfg.mcl.seed = *a.seed;
  if (!a.backend.empty()) cfg.backend = a.backend;
  cfg.registration.preprocess = cfg.preprocess;
  cfg.validate();

  const auto backend = make_backend(cfg.backend);
  const TopoMap map = load_map(a.map, cfg.fine == FineMethod::Icp || cfg.fine == FineMethod::Dlf);
  if (map.backend_name() != backend->name())
    spdlog::warn("map descriptors come from '{}', queries use '{}'", map.backend_name(), backend->name());
  cfg.mcl.validate(map);

  const auto records = read_pose_csv(a.queries);
  QuerySource q;
  for (const auto& r : records) {
    q.ids.push_back(r.id);
    q.odometry_poses.push_back(r.pose);
    q.truth.push_back(r.truth);
  }
  q.cloud = [&](std::size_t k) { return load_cloud(records[k].cloud); };

  SessionOptions opts;
  opts.session = a.session.empty() ? a.queries.parent_path().filename().string() : a.session;
  if (opts.session.empty()) opts.session = "session";
  opts.mcl = cfg.mcl;
  opts.descriptor_preprocess = cfg.preprocess;
  opts.fine = cfg.fine;
  opts.fine_options = cfg.registration;
  opts.max_iterations = a.max_iterations;

  fs::create_directories(a.out);
  {
    std::ofstream os = open_out(a.out / "config.json");
    os << to_json(cfg).dump(2) << '\n';
  }
  std::ofstream trace = open_out(a.out / "trace.csv");
  std::ofstream particles = open_out(a.out / "particles.csv");
  std::ofstream errors = open_out(a.out / "errors.csv");
  std::optional<std::ofstream> regs;
  if (cfg.fine != FineMethod::None) regs.emplace(open_out(a.out / "registrations.jsonl"));
  write_trace_header(trace);
  write_particles_header(particles);
  write_errors_header(errors);

  SessionSinks sinks{&trace, &particles, regs ? &*regs : nullptr, &errors};
  spdlog::info("localizing {} frames against {} nodes (fine: {})", q.size(), map.size(), to_string(cfg.fine));
  const SessionResult r = run_session(map, *backend, q, opts, sinks);
  spdlog::info("{} iterations, {} re-initializations", r.trace.size(), r.reinitializations);

  std::size_t fallbacks = 0;
  for (const auto& f : r.fine) fallbacks += f.fallback ? 1 : 0;
  if (fallbacks) spdlog::warn("{} fine registrations fell back to the coarse pose", fallbacks);

  if (!r.errors.empty()) {
    try {
      std::cout << format_table(aggregate(r.errors));
    } catch (const Error& e) {
      if (e.code() != Errc::EmptyInput) throw;
      std::cout << "no post-burn-in iterations to score\n";
    }
  } else {
    std::cout << r.trace.size() << " iterations, no ground truth to score\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::vector<fs::path> runs;
  fs::path regions;
  fs::path out;
  bool include_burn_in = false;
};

int cmd_evaluate(const EvaluateArgs& a) {
  std::vector<ErrorRecord> all;
  for (const auto& run : a.runs) {
    const fs::path file = fs::is_directory(run) ? run / "errors.csv" : run;
    auto recs = read_errors_csv(file);
    spdlog::info("{}: {} records", file.string(), recs.size());
    all.insert(all.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  if (all.empty()) throw Error(Errc::EmptyInput, "no error records in the given runs");
  TableOptions opts;
  opts.post_burn_in_only = !a.include_burn_in;
  if (!a.regions.empty()) {
    tag_regions(all, load_regions(a.regions));
    opts.split_regions = true;
  }
  const auto rows = aggregate(all, opts);
  const std::string text = format_table(rows);
  std::cout << text;
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    std::ofstream csv = open_out(a.out / "table.csv");
    write_table_csv(csv, rows);
    std::ofstream txt = open_out(a.out / "table.txt");
    txt << text;
    if (opts.split_regions) write_errors_csv(a.out / "errors_tagged.csv", all);
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct PlotArgs {
  fs::path trace;
  fs::path particles;
  fs::path errors;
  fs::path out;
};

int cmd_plot(const PlotArgs& a) {
  PlotInputs in;
  in.trace = a.trace;
  const fs::path dir = a.trace.parent_path();
  if (!a.particles.empty()) in.particles = a.particles;
  else if (fs::exists(dir / "particles.csv")) in.particles = dir / "particles.csv";
  if (!a.errors.empty()) in.errors = a.errors;
  else if (fs::exists(dir / "errors.csv")) in.errors = dir / "errors.csv";
  for (const auto& f : plot_run(in, a.out)) std::cout << f.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"lockit: coarse-to-fine LiDAR localization"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic world with mapping and query scans");
  s->add_option("--out", sim.out, "Output directory")->required();
  s->add_option("--world-seed", sim.scenario.world_seed, "World seed");
  s->add_option("--obstacles", sim.scenario.obstacles, "Obstacle count");
  s->add_option("--map-poses", sim.scenario.map_poses, "Mapping scans spread over the loop");
  s->add_option("--query-frames", sim.scenario.query_frames, "Query frames");
  s->add_option("--query-step", sim.scenario.query_step_m, "Query frame spacing in metres");
  s->add_option("--query-seed", sim.scenario.query_seed, "Query odometry and scan seed");
  s->add_option("--start-arc", sim.scenario.query_start_arc_m, "Query start position along the loop, metres");
  s->add_flag("--reverse", sim.scenario.query_reverse, "Drive the loop clockwise");
  s->add_option("--sensor-yaw", sim.scenario.query_sensor_yaw_rad, "Query sensor yaw relative to travel, radians");
  s->add_option("--rings", sim.rings, "Scan elevation rings");
  s->add_option("--azimuth-steps", sim.azimuth_steps, "Scan azimuth steps");

  ExportArgs exp;
  auto* e = app.add_subcommand("export-descriptors", "Write LDSC files for the file backend using synthetic features");
  e->add_option("--trajectory", exp.trajectories, "Pose CSV files")->required();
  e->add_option("--config", exp.config, "Run configuration (JSON)");
  e->add_option("--out", exp.out, "Output directory")->required();

  BuildMapArgs bm;
  auto* b = app.add_subcommand("build-map", "Build a topological map from mapping trajectories");
  b->add_option("--trajectory", bm.trajectories, "Pose CSV files, concatenated in order")->required();
  b->add_option("--spacing", bm.spacing, "Node spacing in metres");
  b->add_option("--backend", bm.backend, "synthetic or file:<dir>");
  b->add_option("--config", bm.config, "Run configuration (JSON)");
  b->add_option("--out", bm.out, "Map directory")->required();

  LocalizeArgs loc;
  auto* l = app.add_subcommand("localize", "Run coarse-to-fine localization on a query sequence");
  l->add_option("--map", loc.map, "Map directory")->required();
  l->add_option("--queries", loc.queries, "Query pose CSV")->required();
  l->add_option("--fine", loc.fine, "Fine method")->check(CLI::IsMember({"dlf", "icp", "none"}));
  l->add_option("--config", loc.config, "Run configuration (JSON)");
  l->add_option("--seed", loc.seed, "Filter seed");
  l->add_option("--backend", loc.backend, "synthetic or file:<dir>");
  l->add_option("--session", loc.session, "Session name in error records");
  l->add_option("--max-iterations", loc.max_iterations, "Stop after this many filter iterations");
  l->add_option("--out", loc.out, "Run output directory")->required();

  EvaluateArgs ev;
  auto* v = app.add_subcommand("evaluate", "Aggregate error records into tables");
  v->add_option("--runs", ev.runs, "Run directories or errors.csv files")->required();
  v->add_option("--regions", ev.regions, "Region polygons (JSON) for the indoor/outdoor split");
  v->add_option("--out", ev.out, "Directory for table.csv and table.txt");
  v->add_flag("--include-burn-in", ev.include_burn_in, "Score burn-in iterations too");

  PlotArgs pl;
  auto* p = app.add_subcommand("plot", "Render SVG figures from a run");
  p->add_option("--trace", pl.trace, "trace.csv of a run")->required();
  p->add_option("--particles", pl.particles, "particles.csv (default: next to the trace)");
  p->add_option("--errors", pl.errors, "errors.csv (default: next to the trace)");
  p->add_option("--out", pl.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*e) return cmd_export(exp);
    if (*b) return cmd_build_map(bm);
    if (*l) return cmd_localize(loc);
    if (*v) return cmd_evaluate(ev);
    if (*p) return cmd_plot(pl);
  } catch (const Error& err) {
    spdlog::error("{}", err.what());
    return exit_code_for(err.code());
  } catch (const std::filesystem::filesystem_error& err) {
    spdlog::error("{}", err.what());
    return kData;
  } catch (const std::exception& err) {
    spdlog::error("{}", err.what());
    return kRuntime;
  }
  return kRuntime;
}
