#include "flamesentinel/config/run_config.hpp"

#include <fstream>
#include <set>
#include <string>
#include <type_traits>

#include "flamesentinel/core/error.hpp"

namespace flamesentinel::config {
namespace {

// Reads optional keys from one JSON object and rejects any key never asked for.
class Section {
 public:
  Section(const nlohmann::json& root, const std::string& name) : name_(name) {
    if (!root.contains(name)) return;
    obj_ = &root.at(name);
    if (!obj_->is_object()) throw ConfigError("config section '" + name + "' must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    const auto& v = obj_->at(key);
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_unsigned()) throw ConfigError("config key " + name_ + "." + key + " must be a non-negative integer");
    }
    if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("config key " + name_ + "." + key + " must be a number");
    }
    try {
      out = v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key " + name_ + "." + key + " has the wrong type");
    }
  }

  template <class T>
  void read_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    if (obj_->at(key).is_null()) {
      out.reset();
      return;
    }
    T v{};
    read(key, v);
    out = v;
  }

  const nlohmann::json* raw(const char* key) {
    seen_.insert(key);
    return obj_ && obj_->contains(key) ? &obj_->at(key) : nullptr;
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [key, _] : obj_->items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key " + name_ + "." + key);
    }
  }

 private:
  std::string name_;
  const nlohmann::json* obj_ = nullptr;
  std::set<std::string> seen_;
};

const std::set<std::string> kSections{"dataio", "sampling", "model", "training", "metric", "events", "physval", "stats"};

}  // namespace

void ValidationSpec::validate() const {
  canny.validate();
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("physval fraction must lie in (0,1)");
}

void RunConfig::validate() const {
  if (dataio.out_height == 0 || dataio.out_width == 0) throw ConfigError("dataio output size must be positive");
  if (!(dataio.raw_max > dataio.raw_min)) throw ConfigError("dataio raw_max must exceed raw_min");
  if (dataio.roi && (dataio.roi->height == 0 || dataio.roi->width == 0)) throw ConfigError("dataio roi must be non-empty");
  try {
    sampling.validate();
  } catch (const InputDomainError& e) {
    throw ConfigError(e.what());
  }
  models::channel_plan(model.width_scale);
  if (!(model.dropout >= 0.0 && model.dropout < 1.0)) throw ConfigError("model dropout must lie in [0,1)");
  training.validate();
  metric.validate();
  events.validate();
  physval.validate();
  stats.validate();
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json roi = nullptr;
  if (c.dataio.roi) {
    roi = {{"top", c.dataio.roi->top}, {"left", c.dataio.roi->left}, {"height", c.dataio.roi->height},
           {"width", c.dataio.roi->width}};
  }
  nlohmann::json j;
  j["dataio"] = {{"roi", roi},
                 {"out_height", c.dataio.out_height},
                 {"out_width", c.dataio.out_width},
                 {"raw_min", c.dataio.raw_min},
                 {"raw_max", c.dataio.raw_max}};
  j["sampling"] = {{"frames_per_sample", c.sampling.frames_per_sample}, {"stride", c.sampling.stride}};
  j["model"] = {{"variant", models::to_string(c.model.variant)},
                {"width_scale", c.model.width_scale},
                {"dropout", c.model.dropout},
                {"seed", c.model.seed}};
  j["training"] = training::to_json(c.training);
  j["metric"] = {{"epsilon", c.metric.epsilon}, {"filter_size", c.metric.filter_size}};
  j["events"] = {{"lambda", c.events.lambda},
                 {"stable_fraction", c.events.stable_fraction},
                 {"stable_window", c.events.stable_window ? nlohmann::json(*c.events.stable_window) : nlohmann::json()},
                 {"abs_floor_fraction", c.events.abs_floor_fraction},
                 {"min_run", c.events.min_run}};
  j["physval"] = {{"sigma", c.physval.canny.sigma},
                  {"low", c.physval.canny.low},
                  {"high", c.physval.canny.high},
                  {"fraction", c.physval.fraction},
                  {"neighbours", c.physval.neighbours}};
  j["stats"] = {{"bandwidth", c.stats.bandwidth ? nlohmann::json(*c.stats.bandwidth) : nlohmann::json()},
                {"kde_grid_points", c.stats.kde_grid_points},
                {"overlap_grid_points", c.stats.overlap_grid_points}};
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kSections.count(key)) throw ConfigError("unknown config section '" + key + "'");
  }
  RunConfig c;

  Section d(j, "dataio");
  if (const auto* roi = d.raw("roi"); roi && !roi->is_null()) {
    dataio::Roi v;
    if (!roi->is_object()) throw ConfigError("config key dataio.roi must be an object or null");
    nlohmann::json wrapped{{"roi", *roi}};
    Section rs(wrapped, "roi");
    rs.read("top", v.top);
    rs.read("left", v.left);
    rs.read("height", v.height);
    rs.read("width", v.width);
    rs.finish();
    c.dataio.roi = v;
  }
  d.read("out_height", c.dataio.out_height);
  d.read("out_width", c.dataio.out_width);
  d.read("raw_min", c.dataio.raw_min);
  d.read("raw_max", c.dataio.raw_max);
  d.finish();

  Section s(j, "sampling");
  s.read("frames_per_sample", c.sampling.frames_per_sample);
  s.read("stride", c.sampling.stride);
  s.finish();

  Section m(j, "model");
  std::string variant = models::to_string(c.model.variant);
  m.read("variant", variant);
  c.model.variant = models::parse_variant(variant);
  m.read("width_scale", c.model.width_scale);
  m.read("dropout", c.model.dropout);
  m.read("seed", c.model.seed);
  m.finish();

  Section t(j, "training");
  t.read("epochs", c.training.epochs);
  t.read("batch_size", c.training.batch_size);
  t.read("learning_rate", c.training.adam.learning_rate);
  t.read("beta1", c.training.adam.beta1);
  t.read("beta2", c.training.adam.beta2);
  t.read("epsilon", c.training.adam.epsilon);
  t.read("split", c.training.split);
  t.read("binarize_threshold", c.training.binarize_threshold);
  t.read("seed", c.training.seed);
  t.read("restore_best", c.training.restore_best);
  t.finish();

  Section me(j, "metric");
  me.read("epsilon", c.metric.epsilon);
  me.read("filter_size", c.metric.filter_size);
  me.finish();

  Section e(j, "events");
  e.read("lambda", c.events.lambda);
  e.read("stable_fraction", c.events.stable_fraction);
  e.read_optional("stable_window", c.events.stable_window);
  e.read("abs_floor_fraction", c.events.abs_floor_fraction);
  e.read("min_run", c.events.min_run);
  e.finish();

  Section p(j, "physval");
  p.read("sigma", c.physval.canny.sigma);
  p.read("low", c.physval.canny.low);
  p.read("high", c.physval.canny.high);
  p.read("fraction", c.physval.fraction);
  p.read("neighbours", c.physval.neighbours);
  p.finish();

  Section st(j, "stats");
  st.read_optional("bandwidth", c.stats.bandwidth);
  st.read("kde_grid_points", c.stats.kde_grid_points);
  st.read("overlap_grid_points", c.stats.overlap_grid_points);
  st.finish();

  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace flamesentinel::config
