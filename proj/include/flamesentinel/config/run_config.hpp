#pragma once

#include <cstddef>
#include <filesystem>

#include <json.hpp>

#include "flamesentinel/dataio/frames.hpp"
#include "flamesentinel/detection/detection.hpp"
#include "flamesentinel/models/csae.hpp"
#include "flamesentinel/physval/physval.hpp"
#include "flamesentinel/stats/stats.hpp"
#include "flamesentinel/training/trainer.hpp"

namespace flamesentinel::config {

struct ValidationSpec {
  physval::CannySpec canny;
  double fraction = 0.7;        // conditioning cut as a fraction of P_max
  std::size_t neighbours = 1;   // samples on each side of a peak that are also scored

  void validate() const;
};

/// Parameters of every pipeline stage. Each JSON section is optional and
/// every field inside a section defaults to the module default.
struct RunConfig {
  dataio::PreprocessSpec dataio;
  dataio::SamplingSpec sampling;
  models::ModelConfig model;
  training::TrainingConfig training;
  detection::MetricSpec metric;
  detection::EventSpec events;
  ValidationSpec physval;
  stats::SeparationSpec stats;

  /// Re-runs every module check; ConfigError on the first violation.
  void validate() const;
};

/// Complete document with every field spelled out.
nlohmann::json to_json(const RunConfig& c);
/// ConfigError on unknown sections or keys, wrong types, or invalid values.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace flamesentinel::config
