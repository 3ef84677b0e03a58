#include "lockit/config.hpp"

#include "lockit/errors.hpp"

#include <fstream>
#include <initializer_list>

namespace lockit {

namespace {

using nlohmann::json;

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "config: '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw Error(Errc::InvalidArgument, "config: unknown key '" + where + (where.empty() ? "" : ".") + it.key() + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::InvalidArgument, "config: bad value for '" + where + (where.empty() ? "" : ".") + key + "'");
  }
}

void read_mcl(MclConfig& m, const json& j) {
  only_keys(j, "mcl", {"particles", "retrieval_depth", "sigma_l", "sigma_m", "step_distance_m", "burn_in_iters",
                       "motion_noise", "reinit_weight_floor", "seed", "kernel", "resampling"});
  read(j, "particles", m.particles, "mcl");
  read(j, "retrieval_depth", m.retrieval_depth, "mcl");
  read(j, "sigma_l", m.sigma_l, "mcl");
  read(j, "sigma_m", m.sigma_m, "mcl");
  read(j, "step_distance_m", m.step_distance_m, "mcl");
  read(j, "burn_in_iters", m.burn_in_iters, "mcl");
  read(j, "reinit_weight_floor", m.reinit_weight_floor, "mcl");
  read(j, "seed", m.seed, "mcl");
  if (j.contains("motion_noise")) {
    const json& n = j["motion_noise"];
    only_keys(n, "mcl.motion_noise", {"distance_fraction", "heading_deg"});
    read(n, "distance_fraction", m.motion_noise.distance_fraction, "mcl.motion_noise");
    double deg = rad2deg(m.motion_noise.heading_rad);
    read(n, "heading_deg", deg, "mcl.motion_noise");
    m.motion_noise.heading_rad = deg2rad(deg);
  }
  std::string kernel = m.kernel == DescriptorKernel::Gaussian ? "gaussian" : "exponential";
  read(j, "kernel", kernel, "mcl");
  if (kernel == "gaussian") m.kernel = DescriptorKernel::Gaussian;
  else if (kernel == "exponential") m.kernel = DescriptorKernel::Exponential;
  else throw Error(Errc::InvalidArgument, "config: mcl.kernel must be 'gaussian' or 'exponential'");
  std::string scheme = m.resampling == ResamplingScheme::Multinomial ? "multinomial" : "systematic";
  read(j, "resampling", scheme, "mcl");
  if (scheme == "multinomial") m.resampling = ResamplingScheme::Multinomial;
  else if (scheme == "systematic") m.resampling = ResamplingScheme::Systematic;
  else throw Error(Errc::InvalidArgument, "config: mcl.resampling must be 'multinomial' or 'systematic'");
}

void read_preprocess(PreprocessConfig& p, const json& j) {
  only_keys(j, "preprocess", {"max_range_m", "scale_factor", "voxel_size_m", "ground_distance_m", "recenter", "ground_seed"});
  read(j, "max_range_m", p.max_range_m, "preprocess");
  read(j, "scale_factor", p.scale_factor, "preprocess");
  read(j, "voxel_size_m", p.voxel_size_m, "preprocess");
  read(j, "ground_distance_m", p.ground_distance_m, "preprocess");
  read(j, "recenter", p.recenter, "preprocess");
  read(j, "ground_seed", p.ground_seed, "preprocess");
}

void read_registration(FineOptions& f, const json& j) {
  only_keys(j, "registration", {"normal_k", "polish", "icp", "match", "ransac"});
  read(j, "normal_k", f.normal_k, "registration");
  read(j, "polish", f.polish, "registration");
  if (j.contains("icp")) {
    const json& i = j["icp"];
    only_keys(i, "registration.icp", {"max_iters", "corr_dist_m", "tol", "degeneracy_ratio"});
    read(i, "max_iters", f.icp.max_iters, "registration.icp");
    read(i, "corr_dist_m", f.icp.corr_dist_m, "registration.icp");
    read(i, "tol", f.icp.tol, "registration.icp");
    read(i, "degeneracy_ratio", f.icp.degeneracy_ratio, "registration.icp");
  }
  if (j.contains("match")) {
    const json& m = j["match"];
    only_keys(m, "registration.match", {"ratio", "mutual", "normalize"});
    read(m, "ratio", f.match.ratio, "registration.match");
    read(m, "mutual", f.match.mutual, "registration.match");
    read(m, "normalize", f.match.normalize, "registration.match");
  }
  if (j.contains("ransac")) {
    const json& r = j["ransac"];
    only_keys(r, "registration.ransac",
              {"inlier_dist_m", "max_trials", "confidence", "seed", "edge_length_check", "refit_rounds"});
    read(r, "inlier_dist_m", f.ransac.inlier_dist_m, "registration.ransac");
    read(r, "max_trials", f.ransac.max_trials, "registration.ransac");
    read(r, "confidence", f.ransac.confidence, "registration.ransac");
    read(r, "seed", f.ransac.seed, "registration.ransac");
    read(r, "edge_length_check", f.ransac.edge_length_check, "registration.ransac");
    read(r, "refit_rounds", f.ransac.refit_rounds, "registration.ransac");
  }
}

}  // namespace

void RunConfig::validate() const {
  preprocess.validate();
  if (!(mcl.sigma_l > 0) || !(mcl.sigma_m > 0)) throw Error(Errc::InvalidArgument, "kernel widths must be > 0");
  if (mcl.retrieval_depth < 1) throw Error(Errc::InvalidArgument, "retrieval depth must be >= 1");
  if (!(mcl.step_distance_m > 0)) throw Error(Errc::InvalidArgument, "step distance must be > 0");
  if (mcl.burn_in_iters < 0) throw Error(Errc::InvalidArgument, "burn-in must be >= 0");
  if (registration.normal_k < 3) throw Error(Errc::InvalidArgument, "normal_k must be >= 3");
  if (registration.icp.max_iters < 1 || !(registration.icp.corr_dist_m > 0) || !(registration.icp.tol >= 0))
    throw Error(Errc::InvalidArgument, "ICP options out of range");
  if (!(registration.ransac.inlier_dist_m > 0) || registration.ransac.max_trials < 1 ||
      !(registration.ransac.confidence > 0 && registration.ransac.confidence < 1))
    throw Error(Errc::InvalidArgument, "RANSAC options out of range");
  if (!(registration.match.ratio > 0 && registration.match.ratio <= 1))
    throw Error(Errc::InvalidArgument, "match ratio must lie in (0, 1]");
}

void apply_config(RunConfig& cfg, const json& j) {
  only_keys(j, "", {"backend", "fine", "seed", "mcl", "preprocess", "registration"});
  read(j, "backend", cfg.backend, "");
  if (j.contains("fine")) {
    std::string fine;
    read(j, "fine", fine, "");
    cfg.fine = parse_fine_method(fine);
  }
  read(j, "seed", cfg.mcl.seed, "");
  if (j.contains("mcl")) read_mcl(cfg.mcl, j["mcl"]);
  if (j.contains("preprocess")) read_preprocess(cfg.preprocess, j["preprocess"]);
  if (j.contains("registration")) read_registration(cfg.registration, j["registration"]);
  cfg.registration.preprocess = cfg.preprocess;
  cfg.registration.preprocess.normalize = false;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::Io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, "config " + path.string() + ": " + e.what());
  }
  RunConfig cfg;
  apply_config(cfg, j);
  return cfg;
}

json to_json(const RunConfig& c) {
  const auto& m = c.mcl;
  const auto& p = c.preprocess;
  const auto& r = c.registration;
  return json{
      {"backend", c.backend},
      {"fine", to_string(c.fine)},
      {"mcl",
       {{"particles", m.particles},
        {"retrieval_depth", m.retrieval_depth},
        {"sigma_l", m.sigma_l},
        {"sigma_m", m.sigma_m},
        {"step_distance_m", m.step_distance_m},
        {"burn_in_iters", m.burn_in_iters},
        {"motion_noise",
         {{"distance_fraction", m.motion_noise.distance_fraction}, {"heading_deg", rad2deg(m.motion_noise.heading_rad)}}},
        {"reinit_weight_floor", m.reinit_weight_floor},
        {"seed", m.seed},
        {"kernel", m.kernel == DescriptorKernel::Gaussian ? "gaussian" : "exponential"},
        {"resampling", m.resampling == ResamplingScheme::Multinomial ? "multinomial" : "systematic"}}},
      {"preprocess",
       {{"max_range_m", p.max_range_m},
        {"scale_factor", p.scale_factor},
        {"voxel_size_m", p.voxel_size_m},
        {"ground_distance_m", p.ground_distance_m},
        {"recenter", p.recenter},
        {"ground_seed", p.ground_seed}}},
      {"registration",
       {{"normal_k", r.normal_k},
        {"polish", r.polish},
        {"icp",
         {{"max_iters", r.icp.max_iters},
          {"corr_dist_m", r.icp.corr_dist_m},
          {"tol", r.icp.tol},
          {"degeneracy_ratio", r.icp.degeneracy_ratio}}},
        {"match", {{"ratio", r.match.ratio}, {"mutual", r.match.mutual}, {"normalize", r.match.normalize}}},
        {"ransac",
         {{"inlier_dist_m", r.ransac.inlier_dist_m},
          {"max_trials", r.ransac.max_trials},
          {"confidence", r.ransac.confidence},
          {"seed", r.ransac.seed},
          {"edge_length_check", r.ransac.edge_length_check},
          {"refit_rounds", r.ransac.refit_rounds}}}}}};
}

}  // namespace lockit
