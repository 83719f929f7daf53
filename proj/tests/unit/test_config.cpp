#include <doctest.h>

#include <fstream>

#include "flamesentinel/config/run_config.hpp"
#include "flamesentinel/core/error.hpp"
#include "support.hpp"

using namespace flamesentinel;
using namespace flamesentinel::config;
using nlohmann::json;

TEST_CASE("an empty document yields module defaults") {
  const RunConfig c = run_config_from_json(json::object());
  CHECK(c.dataio.out_height == 64);
  CHECK_FALSE(c.dataio.roi.has_value());
  CHECK(c.sampling.frames_per_sample == 16);
  CHECK(c.sampling.stride == 16);
  CHECK(c.model.variant == models::Variant::csae3d);
  CHECK(c.model.width_scale == 1.0);
  CHECK(c.training.epochs == 50);
  CHECK(c.training.adam.beta1 == 0.975);
  CHECK(c.metric.epsilon == 1e-6);
  CHECK(c.metric.filter_size == 6);
  CHECK(c.events.lambda == 4.0);
  CHECK(c.physval.canny.sigma == 1.4);
  CHECK(c.physval.fraction == 0.7);
  CHECK_FALSE(c.stats.bandwidth.has_value());
}

TEST_CASE("partial sections override single fields") {
  const json j = json::parse(R"({
    "dataio": {"roi": {"top": 2, "left": 3, "height": 20, "width": 24}, "out_height": 32, "out_width": 32},
    "model": {"variant": "2d", "width_scale": 0.25},
    "training": {"epochs": 3, "beta1": 0.9},
    "events": {"stable_window": 40},
    "stats": {"bandwidth": 0.5}
  })");
  const RunConfig c = run_config_from_json(j);
  REQUIRE(c.dataio.roi.has_value());
  CHECK(c.dataio.roi->left == 3);
  CHECK(c.dataio.roi->width == 24);
  CHECK(c.dataio.out_width == 32);
  CHECK(c.model.variant == models::Variant::csae2d);
  CHECK(c.model.width_scale == 0.25);
  CHECK(c.training.epochs == 3);
  CHECK(c.training.adam.beta1 == 0.9);
  CHECK(c.training.batch_size == 8);
  CHECK(c.events.stable_window == std::optional<std::size_t>(40));
  CHECK(c.stats.bandwidth == std::optional<double>(0.5));
}

TEST_CASE("serialisation round trip") {
  RunConfig c;
  c.dataio.roi = dataio::Roi{1, 2, 3, 4};
  c.sampling = {8, 4};
  c.model.seed = 9;
  c.events.min_run = 7;
  c.physval.neighbours = 2;
  c.stats.kde_grid_points = 128;
  const json j = to_json(c);
  const RunConfig back = run_config_from_json(j);
  CHECK(to_json(back) == j);
  for (const char* section : {"dataio", "sampling", "model", "training", "metric", "events", "physval", "stats"}) {
    CHECK(j.contains(section));
  }
}

TEST_CASE("unknown keys and bad values are rejected") {
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"modle": {}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"model": {"widht_scale": 1}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"dataio": {"roi": {"top": 0, "bottom": 3}}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"model": []})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"sampling": {"stride": -1}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"sampling": {"stride": 0}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"metric": {"epsilon": "small"}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"model": {"variant": "4d"}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"model": {"width_scale": 0}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"training": {"split": 1.5}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"events": {"lambda": -1}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"physval": {"low": 0.5, "high": 0.2}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"physval": {"fraction": 1.0}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"stats": {"bandwidth": 0}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"dataio": {"raw_min": 1, "raw_max": 1}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::array()), ConfigError);
}

TEST_CASE("loading from disk") {
  const auto dir = testing::scratch_dir("config");
  {
    std::ofstream(dir / "ok.json") << R"({"training": {"epochs": 2}})";
    std::ofstream(dir / "broken.json") << R"({"training": )";
  }
  CHECK(load_run_config(dir / "ok.json").training.epochs == 2);
  CHECK_THROWS_AS(load_run_config(dir / "broken.json"), ConfigError);
  CHECK_THROWS_AS(load_run_config(dir / "missing.json"), ConfigError);
}
