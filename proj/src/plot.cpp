#include "lockit/plot.hpp"

#include "csv.hpp"
#include "lockit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace lockit {

namespace {

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::Io, "cannot open " + path.string());
  return is;
}

template <typename RowFn>
void for_each_row(const std::filesystem::path& path, RowFn fn) {
  std::ifstream is = open_or_throw(path);
  std::string line;
  std::size_t line_no = 0;
  std::optional<detail::CsvHeader> header;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto fields = detail::split_csv(line);
    if (!header) {
      header.emplace(std::move(fields), path.string());
      continue;
    }
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != header->size()) throw Error(Errc::Parse, where + ": wrong field count");
    fn(*header, fields, where);
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Bounds {
  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
  double max_x = -std::numeric_limits<double>::infinity(), max_y = max_x;

  void add(double x, double y) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  }
  void pad() {
    const double span = std::max({max_x - min_x, max_y - min_y, 1.0});
    min_x -= 0.05 * span;
    max_x += 0.05 * span;
    min_y -= 0.05 * span;
    max_y += 0.05 * span;
  }
};

/// Maps world coordinates into a square panel with y pointing up.
struct Panel {
  Bounds b;
  double ox, oy, size;

  double scale() const { return size / std::max(b.max_x - b.min_x, b.max_y - b.min_y); }
  double px(double x) const { return ox + (x - b.min_x) * scale(); }
  double py(double y) const { return oy + size - (y - b.min_y) * scale(); }
};

std::string svg_open(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) + "\" viewBox=\"0 0 " +
         fmt(w) + " " + fmt(h) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string polyline(const Panel& p, const std::vector<Eigen::Vector2d>& pts, const char* color) {
  std::string s = "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"";
  for (const auto& q : pts) s += fmt(p.px(q.x())) + "," + fmt(p.py(q.y())) + " ";
  return s + "\"/>\n";
}

std::string text(double x, double y, const std::string& t, int size = 12) {
  return "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-family=\"sans-serif\" font-size=\"" +
         std::to_string(size) + "\">" + t + "</text>\n";
}

}  // namespace

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
  std::vector<TraceRow> rows;
  for_each_row(path, [&](const detail::CsvHeader& h, const std::vector<std::string>& f, const std::string& where) {
    TraceRow r;
    r.iter = static_cast<int>(detail::parse_int(f[h.index("iter")], where));
    r.estimate = Pose2(detail::parse_double(f[h.index("est_x")], where), detail::parse_double(f[h.index("est_y")], where),
                       detail::parse_double(f[h.index("est_theta")], where));
    r.effective_sample_size = detail::parse_double(f[h.index("effective_sample_size")], where);
    r.top1_node_id = static_cast<int>(detail::parse_int(f[h.index("top1_node_id")], where));
    r.top1_desc_dist = detail::parse_double(f[h.index("top1_desc_dist")], where);
    rows.push_back(r);
  });
  return rows;
}

std::vector<ParticleSnapshot> read_particles_csv(const std::filesystem::path& path) {
  std::vector<ParticleSnapshot> out;
  for_each_row(path, [&](const detail::CsvHeader& h, const std::vector<std::string>& f, const std::string& where) {
    const int iter = static_cast<int>(detail::parse_int(f[h.index("iter")], where));
    if (out.empty() || out.back().iter != iter) out.push_back({iter, {}});
    out.back().positions.emplace_back(detail::parse_double(f[h.index("x")], where),
                                      detail::parse_double(f[h.index("y")], where));
  });
  return out;
}

double dispersion_radius(const std::vector<Eigen::Vector2d>& positions) {
  if (positions.empty()) throw Error(Errc::EmptyInput, "no particle positions");
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : positions) c += p;
  c /= static_cast<double>(positions.size());
  double ss = 0.0;
  for (const auto& p : positions) ss += (p - c).squaredNorm();
  return std::sqrt(ss / static_cast<double>(positions.size()));
}

std::string particles_svg(const std::vector<ParticleSnapshot>& snapshots, const std::vector<int>& iters) {
  std::vector<const ParticleSnapshot*> chosen;
  for (int it : iters)
    for (const auto& s : snapshots)
      if (s.iter == it) chosen.push_back(&s);
  if (chosen.empty()) throw Error(Errc::EmptyInput, "none of the requested iterations has a particle snapshot");

  Bounds b;
  for (const auto& s : snapshots)
    for (const auto& p : s.positions) b.add(p.x(), p.y());
  b.pad();
  const double panel = 260, gap = 20, head = 30;
  const double width = gap + static_cast<double>(chosen.size()) * (panel + gap);
  std::string svg = svg_open(width, panel + head + gap);
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    const Panel p{b, gap + static_cast<double>(k) * (panel + gap), head, panel};
    svg += "<rect x=\"" + fmt(p.ox) + "\" y=\"" + fmt(p.oy) + "\" width=\"" + fmt(panel) + "\" height=\"" + fmt(panel) +
           "\" fill=\"none\" stroke=\"#888\"/>\n";
    svg += text(p.ox, head - 10, "iteration " + std::to_string(chosen[k]->iter) + ", dispersion " +
                                     fmt(dispersion_radius(chosen[k]->positions)) + " m");
    for (const auto& q : chosen[k]->positions)
      svg += "<circle cx=\"" + fmt(p.px(q.x())) + "\" cy=\"" + fmt(p.py(q.y())) + "\" r=\"1.5\" fill=\"red\"/>\n";
  }
  return svg + "</svg>\n";
}

std::string trajectory_svg(const std::vector<TraceRow>& trace, const std::vector<ErrorRecord>& errors) {
  if (trace.empty()) throw Error(Errc::EmptyInput, "empty trace");
  std::vector<Eigen::Vector2d> est;
  Bounds b;
  for (const auto& r : trace) {
    est.push_back(r.estimate.position());
    b.add(r.estimate.x, r.estimate.y);
  }
  std::vector<Eigen::Vector2d> truth;
  std::map<std::string, std::vector<Eigen::Vector2d>> refined;
  for (const auto& e : errors) {
    if (e.stage == "mcl") truth.push_back(e.truth.position());
    else refined[e.stage].push_back(e.estimate.position());
    b.add(e.truth.x, e.truth.y);
  }
  b.pad();
  const double size = 600, margin = 40;
  const Panel p{b, margin, margin, size};
  std::string svg = svg_open(size + 2 * margin, size + 2 * margin + 20);
  if (!truth.empty()) svg += polyline(p, truth, "black");
  svg += polyline(p, est, "red");
  const char* colors[] = {"blue", "green", "purple"};
  std::size_t c = 0;
  std::string legend = "truth (black), coarse estimate (red)";
  for (const auto& [stage, pts] : refined) {
    svg += polyline(p, pts, colors[c % 3]);
    legend += ", " + stage + " (" + colors[c % 3] + ")";
    ++c;
  }
  svg += text(margin, margin - 15, legend);
  return svg + "</svg>\n";
}

std::string histogram_svg(const std::vector<double>& values, int bins, const std::string& title,
                          const std::string& unit) {
  if (values.empty()) throw Error(Errc::EmptyInput, "no values for histogram '" + title + "'");
  if (bins < 1) throw Error(Errc::InvalidArgument, "histogram needs >= 1 bin");
  const double hi = std::max(*std::max_element(values.begin(), values.end()), 1e-9);
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    const auto k = std::min(static_cast<std::size_t>(std::max(v, 0.0) / hi * bins), counts.size() - 1);
    ++counts[k];
  }
  const std::size_t peak = *std::max_element(counts.begin(), counts.end());
  const double w = 600, h = 300, margin = 40;
  const double bar = w / bins;
  std::string svg = svg_open(w + 2 * margin, h + 2 * margin);
  svg += text(margin, margin - 15, title + " (n = " + std::to_string(values.size()) + ")");
  for (int k = 0; k < bins; ++k) {
    const double bh = h * static_cast<double>(counts[static_cast<std::size_t>(k)]) / static_cast<double>(peak);
    svg += "<rect x=\"" + fmt(margin + k * bar) + "\" y=\"" + fmt(margin + h - bh) + "\" width=\"" + fmt(bar * 0.9) +
           "\" height=\"" + fmt(bh) + "\" fill=\"steelblue\"/>\n";
  }
  svg += text(margin, margin + h + 20, "0");
  svg += text(margin + w - 60, margin + h + 20, fmt(hi) + " " + unit);
  return svg + "</svg>\n";
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::Io, "cannot write " + path.string());
  os << content;
  if (!os) throw Error(Errc::Io, "write failed: " + path.string());
}

}  // namespace

std::vector<std::filesystem::path> plot_run(const PlotInputs& in, const std::filesystem::path& out_dir) {
  // Everything is rendered in memory first so failures leave no partial images.
  const auto trace = read_trace_csv(in.trace);
  if (trace.empty()) throw Error(Errc::EmptyInput, in.trace.string() + ": trace has no rows");
  std::vector<ErrorRecord> errors;
  if (in.errors) errors = read_errors_csv(*in.errors);

  std::vector<std::pair<std::string, std::string>> files;
  if (in.particles) {
    const auto snaps = read_particles_csv(*in.particles);
    if (!snaps.empty()) {
      std::vector<int> iters{0, 1, 5, 10, 20, snaps.back().iter};
      iters.erase(std::unique(iters.begin(), iters.end()), iters.end());
      files.emplace_back("particles.svg", particles_svg(snaps, iters));
    }
  }
  files.emplace_back("trajectory.svg", trajectory_svg(trace, errors));
  std::map<std::string, std::vector<double>> pos;
  for (const auto& e : errors)
    if (e.post_burn_in) pos[e.stage].push_back(e.pos_err_m);
  for (const auto& [stage, v] : pos)
    files.emplace_back("errors_" + stage + ".svg", histogram_svg(v, 20, stage + " position error", "m"));

  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [name, content] : files) {
    write_file(out_dir / name, content);
    written.push_back(out_dir / name);
  }
  return written;
}

}  // namespace lockit
