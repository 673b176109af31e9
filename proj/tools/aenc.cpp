#include "aenc/cli/commands.hpp"
#include "aenc/cli/report.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <limits>

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kDataError = 2;

const char* const kFoldNote =
    "Folds assign windows of each video to folds at random, not in contiguous blocks. Overlapping "
    "10 s windows therefore leak between train and test folds; treat absolute scores as optimistic.";

}  // namespace

int main(int argc, char** argv) {
  using namespace aenc::cli;
  CLI::App app{"aenc: auditory emotion encoding pipeline (synchrony, audio features, ridge encoding, statistics)"};
  app.require_subcommand(0, 1);

  CommonOptions common;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string out;
  bool validate_only = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config, "run configuration (JSON)")->required();
    sub->add_option("--seed", seed, "overrides the configured seed");
    sub->add_option("--threads", threads, "worker cap (0 = all cores); overrides AENC_THREADS");
    sub->add_option("--out", out, "output directory; overrides AENC_OUT and the config");
    sub->add_flag("--validate", validate_only, "check config and manifest, then exit");
  };

  struct Pipeline {
    const char* name;
    const char* help;
    std::function<void(const Context&)> run;
  };
  const Pipeline pipeline[] = {
      {"features", "low-level descriptor tables per clip and element", cmd_features},
      {"synchrony", "group dynamic synchrony per stimulus and channel", cmd_synchrony},
      {"splithalf", "split-half reliability of the group synchrony", cmd_splithalf},
      {"encode", "cross-validated emotion scores per response target", cmd_encode},
      {"null", "shuffle nulls and FDR-corrected significance per target", cmd_null},
      {"stepwise", "stepwise acoustic/semantic paths and per-region score differences", cmd_stepwise},
      {"layers", "emotion score per feature layer", cmd_layers},
      {"elements", "leave-one-audio-out voice vs soundtrack effect", cmd_elements},
  };
  std::vector<std::pair<CLI::App*, const Pipeline*>> subs;
  for (const auto& p : pipeline) {
    auto* sub = app.add_subcommand(p.name, p.help);
    add_common(sub);
    if (std::string(p.name) == "encode" || std::string(p.name) == "null") sub->footer(kFoldNote);
    subs.emplace_back(sub, &p);
  }

  std::string report_dir;
  auto* report = app.add_subcommand("report", "SVG plots and Markdown tables from existing JSON results");
  report->add_option("dir", report_dir, "results directory")->required();

  SynthOptions synth;
  std::string snr_text = "inf";
  auto* synth_cmd = app.add_subcommand("synth", "write the synthetic demo fixture");
  synth_cmd->add_option("--out", synth.out, "fixture directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "generator seed");
  synth_cmd->add_option("--clips", synth.clips, "number of clips (>= 3)");
  synth_cmd->add_option("--duration", synth.duration_s, "clip length in seconds");
  synth_cmd->add_option("--subjects", synth.subjects, "EEG subjects per clip");
  synth_cmd->add_option("--channels", synth.channels, "EEG channels");
  synth_cmd->add_option("--snr", snr_text, "annotation signal-to-noise ratio, or inf");
  synth_cmd->add_option("--layers", synth.layers, "number of layer tables");
  synth_cmd->add_option("--layer-width", synth.layer_width, "columns per layer table");
  synth_cmd->add_option("--best-layer", synth.best_layer, "layer carrying the most signal");

  bool show_schema = false;
  app.add_flag("--schema", show_schema, "print the config and manifest schema");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidationFailure;
  }
  if (show_schema) {
    std::cout << config_schema();
    return kOk;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kValidationFailure;
  }

  try {
    if (synth_cmd->parsed()) {
      try {
        synth.snr = snr_text == "inf" ? std::numeric_limits<double>::infinity() : std::stod(snr_text);
      } catch (const std::exception&) {
        throw ValidationError("--snr must be a number or inf");
      }
      cmd_synth(synth);
      return kOk;
    }
    if (report->parsed()) {
      cmd_report(report_dir);
      return kOk;
    }
    for (const auto& [sub, p] : subs) {
      if (!sub->parsed()) continue;
      if (sub->count("--seed")) common.seed = seed;
      if (sub->count("--threads")) common.threads = threads;
      if (sub->count("--out")) common.out = out;
      const Context ctx = prepare(common);
      if (validate_only) {
        std::cout << "config and manifest OK (" << ctx.manifest.stimuli.size() << " stimuli)\n";
        return kOk;
      }
      p->run(ctx);
      return kOk;
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation failed: " << e.what() << "\n";
    return kValidationFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}
