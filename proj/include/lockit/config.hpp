#pragma once

#include "lockit/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace lockit {

/// Everything a localization run needs besides its input paths.
struct RunConfig {
  std::string backend = "synthetic";
  FineMethod fine = FineMethod::Dlf;
  MclConfig mcl;
  PreprocessConfig preprocess;  // shared by the descriptor and registration paths
  FineOptions registration;

  void validate() const;
};

/// Overlays the keys present in `j` onto `cfg`. Unknown keys and ill-typed
/// values throw InvalidArgument naming the offending key.
void apply_config(RunConfig& cfg, const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace lockit
