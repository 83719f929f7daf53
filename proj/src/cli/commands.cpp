#include "flamesentinel/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>

#include "flamesentinel/core/error.hpp"
#include "flamesentinel/dataio/pgm.hpp"
#include "flamesentinel/nn/checkpoint.hpp"
#include "flamesentinel/physval/physval.hpp"
#include "flamesentinel/synth/scenario.hpp"

namespace flamesentinel::cli {
namespace {

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputDomainError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  out.close();
  if (!out) throw InputDomainError("write failed for " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputDomainError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputDomainError("cannot create directory " + dir.string());
}

config::RunConfig config_or_default(const std::optional<fs::path>& path) {
  return path ? config::load_run_config(*path) : config::RunConfig{};
}

// Only the named sections of `section_source`, layered over `base`.
config::RunConfig with_sections(const config::RunConfig& base, const nlohmann::json& section_source,
                                std::initializer_list<const char*> names) {
  nlohmann::json j = config::to_json(base);
  for (const char* name : names) {
    if (section_source.contains(name)) j[name] = section_source.at(name);
  }
  return config::run_config_from_json(j);
}

std::string padded(std::size_t v, int width) {
  std::string s = std::to_string(v);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

}  // namespace

std::size_t split_index_for(const std::vector<double>& time_s, double t) {
  return static_cast<std::size_t>(std::lower_bound(time_s.begin(), time_s.end(), t) - time_s.begin());
}

std::vector<std::string> synth_names() {
  std::vector<std::string> names = synth::protocol_names();
  names.insert(names.end(), {"stable", "unstable"});
  return names;
}

void cmd_synth(const SynthOptions& o) {
  const double fps = o.fps.value_or(500.0), duration = o.duration.value_or(6.0);
  synth::ScenarioSpec spec;
  if (o.protocol == "stable" || o.protocol == "unstable") {
    const auto regime = o.protocol == "stable" ? synth::Regime::stable : synth::Regime::unstable;
    spec = synth::single_regime(regime, o.seed, fps, duration, o.size, o.temporal_only);
  } else {
    if (o.temporal_only) throw ConfigError("--temporal-only applies to single-regime videos");
    spec = synth::make_protocol(o.protocol, o.seed, fps, duration, o.size);
  }
  make_dir(o.out);
  const auto video = synth::generate_video(spec);
  const auto pressure = synth::generate_pressure(spec);
  const auto truth = synth::ground_truth(spec);
  dataio::write_fvid(video, o.out / "video.fvid");
  dataio::write_pressure_csv(pressure, o.out / "pressure.csv");
  nlohmann::json t = synth::to_json(truth);
  t["protocol"] = o.protocol;
  t["seed"] = o.seed;
  t["fps"] = spec.fps;
  t["frames"] = spec.frame_count();
  t["temporal_only"] = spec.temporal_only;
  t["nominal_split_s"] = synth::nominal_split_time(spec);
  t["scenario"] = synth::to_json(spec);
  write_json(t, o.out / "truth.json");
}

std::vector<training::LabeledVolume> load_corpus(const fs::path& dir, training::Label label,
                                                 const config::RunConfig& cfg, std::vector<CorpusFile>* listing) {
  const std::string side = label == training::Label::stable ? "stable" : "unstable";
  if (!fs::is_directory(dir)) throw ConfigError(side + " corpus directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".fvid") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError(side + " corpus " + dir.string() + " holds no .fvid files");
  std::vector<training::LabeledVolume> out;
  for (const auto& f : files) {
    const auto seq = dataio::preprocess(dataio::read_fvid(f), cfg.dataio);
    auto vols = dataio::make_volumes(seq, cfg.sampling);
    if (listing) listing->push_back({f.filename().string(), label, vols.size()});
    for (auto& s : vols) out.push_back({std::move(s), label});
  }
  return out;
}

TrainSummary cmd_train(const TrainOptions& o, std::ostream& log) {
  config::RunConfig cfg = config_or_default(o.config);
  if (o.variant) cfg.model.variant = *o.variant;
  if (o.full_schedule) cfg.training.epochs = 200;
  std::vector<CorpusFile> files;
  auto corpus = load_corpus(o.stable_dir, training::Label::stable, cfg, &files);
  auto unstable = load_corpus(o.unstable_dir, training::Label::unstable, cfg, &files);
  corpus.insert(corpus.end(), std::make_move_iterator(unstable.begin()), std::make_move_iterator(unstable.end()));

  models::CsaeModel model(cfg.model);
  TrainSummary s;
  s.parameters = model.parameter_count();
  s.encoder_convs = model.encoder_conv_count();
  s.decoder_convs = model.decoder_conv_count();
  s.volumes = corpus.size();
  log << "variant " << models::to_string(cfg.model.variant) << ", width " << cfg.model.width_scale << "\n"
      << "parameters " << s.parameters << "\n"
      << "encoder conv layers " << s.encoder_convs << ", decoder conv layers " << s.decoder_convs << "\n"
      << "volumes " << s.volumes << "\n";

  training::Trainer trainer(model, cfg.training);
  if (o.state && fs::exists(*o.state)) {
    trainer.load_state(*o.state);
    log << "resumed after epoch " << trainer.epochs_completed() << "\n";
  }
  const auto& history = trainer.fit(corpus, [&](const training::EpochRecord& r) {
    log << "epoch " << r.epoch << "/" << cfg.training.epochs << " train " << r.train_loss << " val " << r.val_loss
        << std::endl;
    if (o.state) trainer.save_state(*o.state);
  });
  s.history = history;

  const auto& shape = corpus.front().sample.voxels.shape();
  nlohmann::json listing = nlohmann::json::array();
  for (const auto& f : files) {
    listing.push_back({{"file", f.name},
                       {"label", f.label == training::Label::stable ? "stable" : "unstable"},
                       {"volumes", f.volumes}});
  }
  const nlohmann::json extra{{"run_config", config::to_json(cfg)},
                             {"corpus", listing},
                             {"input", {{"frames", shape[0]}, {"height", shape[1]}, {"width", shape[2]}}},
                             {"history", training::to_json(history)}};
  if (o.out.has_parent_path()) make_dir(o.out.parent_path());
  model.save(o.out, extra);
  s.history_csv = o.out.parent_path() / (o.out.stem().string() + ".history.csv");
  training::write_history_csv(history, s.history_csv);
  const double final_train = history.epochs.empty() ? 0.0 : history.epochs.back().train_loss;
  log << "final train loss " << final_train << ", best val loss " << history.best_val_loss << " (epoch "
      << history.best_epoch << ")\n";
  return s;
}

detection::InstabilityTrace cmd_detect(const DetectOptions& o) {
  const nn::Checkpoint ck = nn::load_checkpoint(o.model);
  models::CsaeModel model = models::CsaeModel::from_checkpoint(ck);
  config::RunConfig cfg;
  if (ck.header.contains("run_config")) cfg = config::run_config_from_json(ck.header.at("run_config"));
  if (o.config) cfg = config::load_run_config(*o.config);

  const auto seq = dataio::preprocess(dataio::read_fvid(o.video), cfg.dataio);
  const std::size_t n_frames = cfg.sampling.frames_per_sample;
  if (ck.header.contains("input")) {
    const auto& in = ck.header.at("input");
    const std::size_t f = in.at("frames").get<std::size_t>(), h = in.at("height").get<std::size_t>(),
                      w = in.at("width").get<std::size_t>();
    if (f != n_frames || h != seq.height || w != seq.width) {
      throw ShapeError("model expects " + std::to_string(f) + "x" + std::to_string(h) + "x" + std::to_string(w) +
                       " volumes, video gives " + std::to_string(n_frames) + "x" + std::to_string(seq.height) + "x" +
                       std::to_string(seq.width));
    }
  }
  model.check_input(Shape{1, n_frames, seq.height, seq.width, 1});

  const auto infer = [&](const Tensor<float>& batch) { return model.infer(batch); };
  const auto t = detection::trace(infer, seq, cfg.sampling, cfg.metric, cfg.events, cfg.training.batch_size);
  const std::size_t expected = dataio::sample_count(seq.count, cfg.sampling);
  if (t.raw.size() != expected || t.output.size() != expected) throw Error("trace length disagrees with the sample count");

  make_dir(o.out);
  detection::write_trace_csv(t, o.out / "trace.csv");
  nlohmann::json ev = detection::events_json(t);
  const nlohmann::json cj = config::to_json(cfg);
  ev["samples"] = expected;
  ev["frames"] = seq.count;
  ev["fps"] = seq.fps;
  ev["sampling"] = cj.at("sampling");
  ev["dataio"] = cj.at("dataio");
  write_json(ev, o.out / "events.json");

  const auto samples = dataio::make_volumes(seq, cfg.sampling);
  const std::size_t peak =
      static_cast<std::size_t>(std::max_element(t.output.begin(), t.output.end()) - t.output.begin());
  const std::vector<std::pair<std::string, std::size_t>> picks{{"first", 0}, {"peak", peak}, {"last", expected - 1}};
  std::set<std::size_t> frames{0, std::max<std::size_t>(n_frames / 2, 1) - 1, n_frames - 1};
  const fs::path snaps = o.out / "snapshots";
  make_dir(snaps);
  for (const auto& [role, j] : picks) {
    const std::vector<std::size_t> one{j};
    const Tensor<float> x = dataio::stack_batch(samples, one);
    const Tensor<float> y = model.infer(x);
    const std::size_t plane = seq.frame_size();
    for (std::size_t f : frames) {
      const std::string stem = role + "_sample" + padded(j, 5) + "_frame" + padded(f + 1, 2);
      dataio::write_pgm(dataio::to_graymap(x.values().subspan(f * plane, plane), seq.height, seq.width),
                        snaps / (stem + "_input.pgm"));
      dataio::write_pgm(dataio::to_graymap(y.values().subspan(f * plane, plane), seq.height, seq.width),
                        snaps / (stem + "_output.pgm"));
    }
  }
  return t;
}

std::vector<PeakValidation> cmd_validate(const ValidateOptions& o) {
  const nlohmann::json ev = read_json(o.events);
  const config::RunConfig cfg = with_sections(config_or_default(o.config), ev, {"sampling", "dataio"});
  const auto seq = dataio::preprocess(dataio::read_fvid(o.video), cfg.dataio);
  const auto pressure = dataio::read_pressure_csv(o.pressure);
  if (pressure.values.size() != seq.count) {
    throw InputDomainError("pressure record has " + std::to_string(pressure.values.size()) + " values for " +
                           std::to_string(seq.count) + " frames");
  }
  if (std::abs(pressure.fps - seq.fps) > 1e-6 * seq.fps) {
    throw InputDomainError("pressure rate " + std::to_string(pressure.fps) + " Hz differs from the video rate " +
                           std::to_string(seq.fps) + " Hz");
  }
  make_dir(o.out);
  const auto normalized = physval::normalized_conditioned_pressure(pressure.values, cfg.physval.fraction);
  physval::write_conditioned_pressure_csv(normalized, seq.fps, o.out / "conditioned_pressure.csv");

  const std::size_t n = cfg.sampling.frames_per_sample, k = cfg.sampling.stride;
  const std::size_t samples = dataio::sample_count(seq.count, cfg.sampling);
  std::vector<PeakValidation> out;
  nlohmann::json report = nlohmann::json::array();
  std::set<std::size_t> written;
  for (const auto& p : ev.at("peaks")) {
    PeakValidation pv;
    pv.peak = p.at("sample_index").get<std::size_t>();
    if (pv.peak >= samples) throw InputDomainError("peak sample " + std::to_string(pv.peak) + " lies outside the video");
    const std::size_t lo = pv.peak >= cfg.physval.neighbours ? pv.peak - cfg.physval.neighbours : 0;
    const std::size_t hi = std::min(samples - 1, pv.peak + cfg.physval.neighbours);
    nlohmann::json windows = nlohmann::json::array();
    for (std::size_t j = lo; j <= hi; ++j) {
      WindowScore w;
      w.sample_index = j;
      w.first_frame = j * k;
      const auto instants = physval::window_instants(pressure.values, w.first_frame, n, cfg.physval.fraction);
      const auto ens = physval::ensemble_edges(seq, instants, cfg.physval.canny);
      w.instants = instants.size();
      if (!ens.empty() && ens.union_map.count() > 0) w.thinness = physval::thinness(ens);
      if (written.insert(j).second) {
        dataio::write_pgm(physval::to_graymap(ens.union_map), o.out / ("edges_sample" + padded(j, 5) + ".pgm"));
      }
      windows.push_back({{"sample_index", j},
                         {"first_frame", w.first_frame},
                         {"instants", w.instants},
                         {"thinness", w.thinness ? nlohmann::json(*w.thinness) : nlohmann::json()}});
      pv.windows.push_back(w);
    }
    report.push_back({{"peak", pv.peak}, {"windows", windows}});
    out.push_back(std::move(pv));
  }
  write_json({{"fraction", cfg.physval.fraction}, {"peaks", report}}, o.out / "thinness.json");
  return out;
}

stats::SeparationReport cmd_report(const ReportOptions& o) {
  const config::RunConfig cfg = config_or_default(o.config);
  const auto t = detection::read_trace_csv(o.run / "trace.csv");
  std::optional<double> split_time = o.split_time;
  std::string source = "split_time";
  const fs::path truth = o.truth.value_or(o.run / "truth.json");
  if (!split_time && (o.truth || fs::exists(truth))) {
    const auto j = read_json(truth);
    if (j.contains("transition_time") && !j.at("transition_time").is_null()) {
      split_time = j.at("transition_time").get<double>();
    } else if (j.contains("nominal_split_s")) {
      split_time = j.at("nominal_split_s").get<double>();
    }
    source = "truth";
  }
  std::size_t split;
  if (split_time) {
    split = split_index_for(t.time_s, *split_time);
  } else if (t.events.transition) {
    split = *t.events.transition;
    source = "detected_transition";
  } else {
    throw InputDomainError("no stable/unstable split: pass a split time or a truth file");
  }
  const auto r = stats::separation_report(t.raw, t.output, split, cfg.stats);
  stats::write_density_csv(r.raw, o.run / "kde_raw.csv", cfg.stats.kde_grid_points);
  stats::write_density_csv(r.output, o.run / "kde_output.csv", cfg.stats.kde_grid_points);
  nlohmann::json j = stats::to_json(r);
  j["split_source"] = source;
  j["split_time_s"] = t.time_s[split];
  write_json(j, o.run / "separation.json");
  return r;
}

}  // namespace flamesentinel::cli
