#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "flamesentinel/dataio/frames.hpp"
#include "flamesentinel/models/csae.hpp"
#include "flamesentinel/nn/adam.hpp"

namespace flamesentinel::training {

enum class Label { stable, unstable };

struct LabeledVolume {
  dataio::VolumetricSample sample;
  Label label = Label::stable;
};

struct TrainingConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  nn::AdamConfig adam;
  double split = 0.8;
  double binarize_threshold = 1.0 / 255.0;
  std::uint64_t seed = 0;
  /// Load the lowest-validation-loss parameters after the last epoch.
  bool restore_best = true;

  void validate() const;
};

nlohmann::json to_json(const TrainingConfig& c);
TrainingConfig training_config_from_json(const nlohmann::json& j);

/// Stable -> zeros; unstable -> 1 where the voxel exceeds threshold, else 0.
/// Shape matches the sample's voxels.
Tensor<float> make_target(const LabeledVolume& v, double threshold);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Per-label shuffle, then round(fraction * class size) of each class go to
/// training. Indices in each part are ascending.
Split split_corpus(std::span<const Label> labels, double fraction, std::uint64_t seed);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct History {
  double initial_val_loss = 0.0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0: the initial parameters
  double best_val_loss = 0.0;
};

void write_history_csv(const History& h, const std::filesystem::path& path);
nlohmann::json to_json(const History& h);
History history_from_json(const nlohmann::json& j);

/// Mean squared error against make_target over the listed volumes, infer mode.
double evaluate_loss(const models::CsaeModel& model, std::span<const LabeledVolume> corpus,
                     std::span<const std::size_t> indices, double threshold, std::size_t batch_size);

/// Selective training loop. Epoch e shuffles with mix_seed(seed, 10^6 + e) and each
/// optimizer step s reseeds dropout from mix_seed(seed, s), so a run resumed
/// from a saved state continues bit-identically.
class Trainer {
 public:
  Trainer(models::CsaeModel& model, TrainingConfig config);

  using EpochCallback = std::function<void(const EpochRecord&)>;

  /// Runs the remaining epochs. ConfigError if the corpus lacks a class or
  /// volumes disagree in shape.
  const History& fit(std::span<const LabeledVolume> corpus, const EpochCallback& on_epoch = {});

  /// Stops fit() after this many total epochs; used to interrupt for resume.
  void stop_after(std::size_t epochs) { stop_after_ = epochs; }

  const History& history() const noexcept { return history_; }
  std::size_t epochs_completed() const noexcept { return history_.epochs.size(); }
  const Split& split() const noexcept { return split_; }

  /// Model, optimizer moments, best parameters and history.
  void save_state(const std::filesystem::path& manifest, const nlohmann::json& extra = nlohmann::json::object()) const;
  /// Restores into a trainer built around a model of the same configuration.
  void load_state(const std::filesystem::path& manifest);

 private:
  void prepare(std::span<const LabeledVolume> corpus);
  double run_epoch(std::span<const LabeledVolume> corpus, std::size_t epoch);

  models::CsaeModel& model_;
  TrainingConfig config_;
  nn::Adam<float> adam_;
  History history_;
  Split split_;
  bool prepared_ = false;
  std::vector<nn::NamedTensor> best_;
  std::optional<std::size_t> stop_after_;
};

}  // namespace flamesentinel::training
