#include "flamesentinel/training/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "flamesentinel/core/csv.hpp"
#include "flamesentinel/core/rng.hpp"

namespace flamesentinel::training {

void TrainingConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(split > 0.0 && split < 1.0)) throw ConfigError("split must lie in (0,1)");
  if (!(binarize_threshold >= 0.0 && binarize_threshold < 1.0)) throw ConfigError("binarize_threshold must lie in [0,1)");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0,1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

nlohmann::json to_json(const TrainingConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.adam.learning_rate},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"split", c.split},
          {"binarize_threshold", c.binarize_threshold},
          {"seed", c.seed},
          {"restore_best", c.restore_best}};
}

TrainingConfig training_config_from_json(const nlohmann::json& j) {
  TrainingConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.adam.learning_rate = j.at("learning_rate").get<double>();
  c.adam.beta1 = j.at("beta1").get<double>();
  c.adam.beta2 = j.at("beta2").get<double>();
  c.adam.epsilon = j.at("epsilon").get<double>();
  c.split = j.at("split").get<double>();
  c.binarize_threshold = j.at("binarize_threshold").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.restore_best = j.at("restore_best").get<bool>();
  c.validate();
  return c;
}

Tensor<float> make_target(const LabeledVolume& v, double threshold) {
  Tensor<float> t(v.sample.voxels.shape());
  if (v.label == Label::unstable) {
    const auto src = v.sample.voxels.values();
    for (std::size_t i = 0; i < src.size(); ++i) t[i] = static_cast<double>(src[i]) > threshold ? 1.0f : 0.0f;
  }
  return t;
}

Split split_corpus(std::span<const Label> labels, double fraction, std::uint64_t seed) {
  if (labels.empty()) throw InputDomainError("cannot split an empty corpus");
  if (!(fraction > 0.0 && fraction < 1.0)) throw InputDomainError("split fraction must lie in (0,1)");
  constexpr std::array<Label, 2> classes{Label::stable, Label::unstable};
  std::array<std::vector<std::size_t>, 2> idx;
  for (std::size_t i = 0; i < labels.size(); ++i) idx[labels[i] == Label::stable ? 0 : 1].push_back(i);

  // Largest-remainder allocation: the total is rounded once, then each class
  // gets its floor share and the leftover goes to the largest remainders.
  const auto total = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(labels.size())));
  std::array<std::size_t, 2> n_train{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    const double share = fraction * static_cast<double>(idx[c].size());
    n_train[c] = static_cast<std::size_t>(std::floor(share));
    remainder[c] = share - static_cast<double>(n_train[c]);
    assigned += n_train[c];
  }
  std::array<std::size_t, 2> order{0, 1};
  if (remainder[1] > remainder[0]) std::swap(order[0], order[1]);
  for (std::size_t k = 0; assigned < total && k < 2; ++k) {
    if (n_train[order[k]] < idx[order[k]].size()) {
      ++n_train[order[k]];
      ++assigned;
    }
  }

  Split s;
  for (std::size_t c = 0; c < 2; ++c) {
    auto& v = idx[c];
    Rng rng(mix_seed(seed, classes[c] == Label::stable ? 11 : 12));
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
    s.train.insert(s.train.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n_train[c]));
    s.validation.insert(s.validation.end(), v.begin() + static_cast<std::ptrdiff_t>(n_train[c]), v.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

void write_history_csv(const History& h, const std::filesystem::path& path) {
  csv::Writer w(path, {"epoch", "train_loss", "val_loss"});
  for (const auto& e : h.epochs) w.row({static_cast<double>(e.epoch), e.train_loss, e.val_loss});
  w.close();
}

nlohmann::json to_json(const History& h) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : h.epochs) epochs.push_back({e.epoch, e.train_loss, e.val_loss});
  return {{"initial_val_loss", h.initial_val_loss},
          {"best_epoch", h.best_epoch},
          {"best_val_loss", h.best_val_loss},
          {"epochs", epochs}};
}

History history_from_json(const nlohmann::json& j) {
  History h;
  h.initial_val_loss = j.at("initial_val_loss").get<double>();
  h.best_epoch = j.at("best_epoch").get<std::size_t>();
  h.best_val_loss = j.at("best_val_loss").get<double>();
  for (const auto& e : j.at("epochs")) h.epochs.push_back({e.at(0).get<std::size_t>(), e.at(1).get<double>(), e.at(2).get<double>()});
  return h;
}

namespace {

Tensor<float> stack_targets(std::span<const LabeledVolume> corpus, std::span<const std::size_t> order,
                            double threshold) {
  const Shape& s = corpus[order.front()].sample.voxels.shape();
  Tensor<float> batch({order.size(), s[0], s[1], s[2], 1});
  const std::size_t per = element_count(s);
  for (std::size_t b = 0; b < order.size(); ++b) {
    const Tensor<float> t = make_target(corpus[order[b]], threshold);
    std::copy(t.values().begin(), t.values().end(), batch.data() + b * per);
  }
  return batch;
}

Tensor<float> stack_inputs(std::span<const LabeledVolume> corpus, std::span<const std::size_t> order) {
  const Shape& s = corpus[order.front()].sample.voxels.shape();
  Tensor<float> batch({order.size(), s[0], s[1], s[2], 1});
  const std::size_t per = element_count(s);
  for (std::size_t b = 0; b < order.size(); ++b) {
    const auto v = corpus[order[b]].sample.voxels.values();
    std::copy(v.begin(), v.end(), batch.data() + b * per);
  }
  return batch;
}

}  // namespace

double evaluate_loss(const models::CsaeModel& model, std::span<const LabeledVolume> corpus,
                     std::span<const std::size_t> indices, double threshold, std::size_t batch_size) {
  if (indices.empty()) return 0.0;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    const auto chunk = indices.subspan(start, std::min(batch_size, indices.size() - start));
    const Tensor<float> out = model.infer(stack_inputs(corpus, chunk));
    const Tensor<float> target = stack_targets(corpus, chunk, threshold);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double d = static_cast<double>(out[i]) - static_cast<double>(target[i]);
      total += d * d;
    }
    count += out.size();
  }
  return total / static_cast<double>(count);
}

Trainer::Trainer(models::CsaeModel& model, TrainingConfig config)
    : model_(model), config_(config), adam_(config.adam) {
  config_.validate();
}

void Trainer::prepare(std::span<const LabeledVolume> corpus) {
  if (corpus.empty()) throw ConfigError("training corpus is empty");
  std::vector<Label> labels;
  bool has_stable = false, has_unstable = false;
  for (const auto& v : corpus) {
    labels.push_back(v.label);
    has_stable = has_stable || v.label == Label::stable;
    has_unstable = has_unstable || v.label == Label::unstable;
    if (v.sample.voxels.shape() != corpus.front().sample.voxels.shape()) {
      throw ConfigError("training volumes must share one shape");
    }
  }
  if (!has_stable || !has_unstable) {
    throw ConfigError("training corpus needs both stable and unstable volumes; selectivity is unlearnable otherwise");
  }
  const Shape& s = corpus.front().sample.voxels.shape();
  model_.check_input({1, s[0], s[1], s[2], 1});
  split_ = split_corpus(labels, config_.split, config_.seed);
  if (split_.train.empty() || split_.validation.empty()) {
    throw ConfigError("split leaves an empty training or validation set");
  }
  if (history_.epochs.empty() && best_.empty()) {
    history_.initial_val_loss =
        evaluate_loss(model_, corpus, split_.validation, config_.binarize_threshold, config_.batch_size);
    history_.best_epoch = 0;
    history_.best_val_loss = history_.initial_val_loss;
    best_ = model_.state();
  }
  prepared_ = true;
}

double Trainer::run_epoch(std::span<const LabeledVolume> corpus, std::size_t epoch) {
  std::vector<std::size_t> order = split_.train;
  Rng rng(mix_seed(config_.seed, 1'000'000 + epoch));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  double total = 0.0;
  std::size_t seen = 0;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    const auto chunk = std::span<const std::size_t>(order).subspan(start, std::min(config_.batch_size, order.size() - start));
    const Tensor<float> x = stack_inputs(corpus, chunk);
    const Tensor<float> target = stack_targets(corpus, chunk, config_.binarize_threshold);
    model_.net().reseed_dropout(mix_seed(config_.seed, adam_.step_count()));
    model_.net().zero_grad();
    const Tensor<float> y = model_.forward(x, nn::Mode::train);
    const nn::Loss<float> loss = nn::mse_loss(y, target);
    model_.backward(loss.grad);
    adam_.step(model_.net().parameters());
    total += static_cast<double>(loss.value) * static_cast<double>(chunk.size());
    seen += chunk.size();
  }
  return total / static_cast<double>(seen);
}

const History& Trainer::fit(std::span<const LabeledVolume> corpus, const EpochCallback& on_epoch) {
  prepare(corpus);
  const std::size_t last = stop_after_ ? std::min(config_.epochs, *stop_after_) : config_.epochs;
  for (std::size_t epoch = history_.epochs.size() + 1; epoch <= last; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = run_epoch(corpus, epoch);
    rec.val_loss = evaluate_loss(model_, corpus, split_.validation, config_.binarize_threshold, config_.batch_size);
    history_.epochs.push_back(rec);
    if (rec.val_loss < history_.best_val_loss) {
      history_.best_val_loss = rec.val_loss;
      history_.best_epoch = epoch;
      best_ = model_.state();
    }
    if (on_epoch) on_epoch(rec);
  }
  if (history_.epochs.size() == config_.epochs && config_.restore_best && history_.best_epoch != history_.epochs.size()) {
    nn::Checkpoint ck;
    ck.tensors = best_;
    model_.load_state(ck);
  }
  return history_;
}

void Trainer::save_state(const std::filesystem::path& manifest, const nlohmann::json& extra) const {
  nn::Checkpoint ck;
  ck.header = model_.header();
  ck.header["training"] = {{"config", to_json(config_)},
                           {"history", to_json(history_)},
                           {"adam_steps", adam_.step_count()}};
  ck.header.update(extra);
  ck.tensors = model_.state();
  const auto& m = adam_.first_moments();
  const auto& v = adam_.second_moments();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::string name = ck.tensors[i].name;  // state() lists parameters first, in step order
    ck.tensors.push_back({"adam.m." + name, m[i]});
    ck.tensors.push_back({"adam.v." + name, v[i]});
  }
  for (const auto& b : best_) ck.tensors.push_back({"best." + b.name, b.tensor});
  nn::save_checkpoint(manifest, ck);
}

void Trainer::load_state(const std::filesystem::path& manifest) {
  const nn::Checkpoint ck = nn::load_checkpoint(manifest);
  const models::ModelConfig mc = models::CsaeModel::config_from_header(ck.header);
  const auto& own = model_.config();
  if (mc.variant != own.variant || mc.width_scale != own.width_scale) {
    throw FormatError("saved training state belongs to a different model configuration");
  }
  try {
    const auto& tr = ck.header.at("training");
    history_ = history_from_json(tr.at("history"));
    const auto steps = tr.at("adam_steps").get<std::uint64_t>();
    model_.load_state(ck);
    std::vector<Tensor<float>> m, v;
    if (steps > 0) {
      for (auto* p : model_.net().parameters()) {
        m.push_back(ck.at("adam.m." + p->name));
        v.push_back(ck.at("adam.v." + p->name));
      }
    }
    adam_.restore(steps, std::move(m), std::move(v));
    best_.clear();
    for (const auto& t : model_.state()) best_.push_back({t.name, ck.at("best." + t.name)});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("saved training state is incomplete: ") + e.what());
  }
}

}  // namespace flamesentinel::training
