#include <CLI11.hpp>

#include <iostream>

#include "flamesentinel/cli/commands.hpp"
#include "flamesentinel/core/error.hpp"

namespace fsc = flamesentinel::cli;
using flamesentinel::models::Variant;

// Exit codes: 0 success, 2 usage, 3 configuration, 4 input data, 1 anything else.
int main(int argc, char** argv) {
  CLI::App app{"Selective autoencoder toolkit for flame video instability detection"};
  app.require_subcommand(1);

  fsc::SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic protocol video with pressure and ground truth");
  s->add_option("--protocol", synth.protocol, "Protocol name")
      ->required()
      ->check(CLI::IsMember(fsc::synth_names()));
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Random seed")->required();
  s->add_option("--fps", synth.fps, "Frame rate in Hz (default 500)");
  s->add_option("--duration", synth.duration, "Duration in seconds (default 6)");
  s->add_option("--size", synth.size, "Frame edge in pixels")->capture_default_str();
  s->add_flag("--temporal-only", synth.temporal_only, "Stable frames carry the lobe at random phase");

  fsc::TrainOptions train;
  std::string variant;
  auto* t = app.add_subcommand("train", "Train a selective autoencoder on stable and unstable corpora");
  t->add_option("--config", train.config, "Run configuration JSON")->check(CLI::ExistingFile);
  t->add_option("--stable", train.stable_dir, "Directory of stable .fvid videos")->required();
  t->add_option("--unstable", train.unstable_dir, "Directory of unstable .fvid videos")->required();
  t->add_option("--out", train.out, "Checkpoint manifest path")->required();
  t->add_option("--variant", variant, "Model variant")->check(CLI::IsMember({"3d", "2d", "csae3d", "csae2d"}));
  t->add_flag("--full-schedule", train.full_schedule, "Train for 200 epochs regardless of the configuration");
  t->add_option("--state", train.state, "Trainer state file, saved every epoch and resumed if present");

  fsc::DetectOptions detect;
  auto* d = app.add_subcommand("detect", "Compute the instability trace and events of a video");
  d->add_option("--model", detect.model, "Checkpoint manifest")->required();
  d->add_option("--video", detect.video, "Input .fvid video")->required();
  d->add_option("--out", detect.out, "Output directory")->required();
  d->add_option("--config", detect.config, "Run configuration overriding the checkpoint's")->check(CLI::ExistingFile);

  fsc::ValidateOptions validate;
  auto* v = app.add_subcommand("validate", "Pressure-conditioned edge ensembles around detected peaks");
  v->add_option("--video", validate.video, "Input .fvid video")->required();
  v->add_option("--pressure", validate.pressure, "Pressure CSV aligned with the video")->required();
  v->add_option("--events", validate.events, "events.json written by detect")->required();
  v->add_option("--out", validate.out, "Output directory")->required();
  v->add_option("--config", validate.config, "Run configuration JSON")->check(CLI::ExistingFile);

  fsc::ReportOptions report;
  auto* r = app.add_subcommand("report", "Density overlap and AUC of raw and reconstructed metrics");
  r->add_option("--run", report.run, "Directory holding trace.csv")->required();
  r->add_option("--config", report.config, "Run configuration JSON")->check(CLI::ExistingFile);
  r->add_option("--truth", report.truth, "Ground-truth JSON (default <run>/truth.json)");
  r->add_option("--split-time", report.split_time, "Stable/unstable split in seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*s) {
      fsc::cmd_synth(synth);
      std::cout << "wrote " << (synth.out / "video.fvid").string() << "\n";
    } else if (*t) {
      if (!variant.empty()) train.variant = flamesentinel::models::parse_variant(variant);
      const auto summary = fsc::cmd_train(train, std::cout);
      std::cout << "wrote " << train.out.string() << " and " << summary.history_csv.string() << "\n";
    } else if (*d) {
      const auto trace = fsc::cmd_detect(detect);
      std::cout << trace.raw.size() << " samples, " << trace.events.peaks.size() << " peaks, transition "
                << (trace.events.transition ? std::to_string(*trace.events.transition) : std::string("none")) << "\n";
    } else if (*v) {
      const auto peaks = fsc::cmd_validate(validate);
      for (const auto& p : peaks) {
        std::cout << "peak " << p.peak << ":";
        for (const auto& w : p.windows) {
          std::cout << " [" << w.sample_index << "] " << (w.thinness ? std::to_string(*w.thinness) : std::string("n/a"));
        }
        std::cout << "\n";
      }
    } else if (*r) {
      const auto rep = fsc::cmd_report(report);
      std::cout << "overlap raw " << rep.raw.overlap << " output " << rep.output.overlap << ", auc raw " << rep.raw.auc
                << " output " << rep.output.auc << "\n";
    }
  } catch (const flamesentinel::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 3;
  } catch (const flamesentinel::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
