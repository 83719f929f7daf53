#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flamesentinel/config/run_config.hpp"
#include "flamesentinel/detection/detection.hpp"
#include "flamesentinel/stats/stats.hpp"
#include "flamesentinel/training/trainer.hpp"

namespace flamesentinel::cli {

namespace fs = std::filesystem;

struct SynthOptions {
  std::string protocol;
  fs::path out;
  std::uint64_t seed = 0;
  std::optional<double> fps;       // protocol default when empty
  std::optional<double> duration;  // s
  std::size_t size = 32;
  /// Single-regime videos only: stable frames share the unstable per-frame marginals.
  bool temporal_only = false;
};

/// Canned protocol names plus "stable" and "unstable" single-regime videos.
std::vector<std::string> synth_names();

/// Writes video.fvid, pressure.csv and truth.json into `out`.
void cmd_synth(const SynthOptions& o);

struct TrainOptions {
  std::optional<fs::path> config;
  fs::path stable_dir;
  fs::path unstable_dir;
  fs::path out;  // checkpoint manifest
  std::optional<models::Variant> variant;
  /// Overrides the configured epoch count with the full 200-epoch schedule.
  bool full_schedule = false;
  /// Trainer state saved after every epoch; an existing file is resumed.
  std::optional<fs::path> state;
};

struct TrainSummary {
  std::size_t parameters = 0;
  std::size_t encoder_convs = 0;
  std::size_t decoder_convs = 0;
  std::size_t volumes = 0;
  training::History history;
  fs::path history_csv;
};

struct CorpusFile {
  std::string name;  // file name inside the corpus directory
  training::Label label = training::Label::stable;
  std::size_t volumes = 0;
};

/// Every *.fvid under the directory, sorted by name, preprocessed and cut
/// into volumes with the given label. Appends one entry per file to `files`.
std::vector<training::LabeledVolume> load_corpus(const fs::path& dir, training::Label label,
                                                 const config::RunConfig& cfg, std::vector<CorpusFile>* files = nullptr);

/// Trains on both corpora, writes the checkpoint and <stem>.history.csv next
/// to it, and logs progress to `log`. The checkpoint header records the run
/// configuration, the corpus file list with labels, and the history. ConfigError when a corpus is missing or
/// empty.
TrainSummary cmd_train(const TrainOptions& o, std::ostream& log);

struct DetectOptions {
  fs::path model;
  fs::path video;
  fs::path out;
  /// Overrides the configuration stored in the checkpoint.
  std::optional<fs::path> config;
};

/// Writes trace.csv, events.json and PGM snapshots (input and reconstruction
/// at frames 1, N/2 and N of the first, highest-output and last samples).
/// ShapeError when the preprocessed video does not match the trained input.
detection::InstabilityTrace cmd_detect(const DetectOptions& o);

struct ValidateOptions {
  fs::path video;
  fs::path pressure;
  fs::path events;
  fs::path out;
  std::optional<fs::path> config;
};

/// Thinness of one sample window, or null when it holds no usable edges.
struct WindowScore {
  std::size_t sample_index = 0;
  std::size_t first_frame = 0;
  std::size_t instants = 0;
  std::optional<double> thinness;
};

struct PeakValidation {
  std::size_t peak = 0;
  std::vector<WindowScore> windows;  // peak - neighbours .. peak + neighbours
};

/// Writes conditioned_pressure.csv, edges_sample_<j>.pgm per scored window
/// and thinness.json. InputDomainError when the pressure record and the
/// video disagree in length or rate.
std::vector<PeakValidation> cmd_validate(const ValidateOptions& o);

struct ReportOptions {
  fs::path run;
  std::optional<fs::path> config;
  std::optional<fs::path> truth;      // defaults to <run>/truth.json when present
  std::optional<double> split_time;   // s; overrides the truth file
};

/// Reads <run>/trace.csv and writes kde_raw.csv, kde_output.csv and
/// separation.json. The stable/unstable split comes from split_time, the
/// truth file, or the detected transition, in that order.
stats::SeparationReport cmd_report(const ReportOptions& o);

/// First sample whose centre time is at or after t.
std::size_t split_index_for(const std::vector<double>& time_s, double t);

}  // namespace flamesentinel::cli
