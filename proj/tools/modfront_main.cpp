// modfront: learnable modulation front end for audio.
//
// Verbs: analyze, filters, train, eval, init-config. Every config key is also
// a command-line override (e.g. --sample_rate 8000), applied on top of the
// optional --config file. Exit codes: 0 ok, 2 config error, 3 IO error,
// 4 numeric or internal failure.

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "modfront/commands.hpp"
#include "modfront/config.hpp"
#include "modfront/errors.hpp"

namespace {

using modfront::Config;

struct ConfigArgs {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_config_options(CLI::App* sub, ConfigArgs& args) {
  sub->add_option("--config", args.config_path, "key=value config file (defaults otherwise)");
  for (const std::string& key : modfront::config_keys()) {
    sub->add_option_function<std::string>(
        "--" + key,
        [key, &args](const std::string& value) { args.overrides.emplace_back(key, value); },
        "override config key " + key);
  }
}

Config build_config(const ConfigArgs& args) {
  Config cfg;
  if (!args.config_path.empty()) cfg = modfront::load_config(args.config_path);
  for (const auto& [key, value] : args.overrides) modfront::config_set(cfg, key, value);
  return cfg;
}

std::vector<int> parse_stride_list(const std::string& text) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    std::string piece = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(piece, &used);
    } catch (const std::exception&) {
      throw modfront::ConfigError("--mod-stride: bad stride '" + piece + "'");
    }
    if (used != piece.size() || v < 1)
      throw modfront::ConfigError("--mod-stride: bad stride '" + piece + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw modfront::ConfigError("--mod-stride: empty stride list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learnable modulation front end for audio"};
  app.require_subcommand(1);

  ConfigArgs analyze_cfg, filters_cfg, train_cfg, eval_cfg, init_cfg;
  modfront::AnalyzeOptions analyze_opt;
  modfront::FiltersOptions filters_opt;
  modfront::TrainCommandOptions train_opt;
  std::string train_strides;
  modfront::EvalOptions eval_opt;
  std::string init_out = "config.txt";

  CLI::App* analyze = app.add_subcommand(
      "analyze", "decompose a WAV file into time-frequency and modulation matrices");
  analyze->add_option("--audio", analyze_opt.audio_path, "input WAV file")->required();
  analyze->add_option("--out", analyze_opt.out_dir, "output directory")->required();
  analyze->add_option("--checkpoint", analyze_opt.checkpoint_path,
                      "trained checkpoint (fresh init otherwise)");
  analyze->add_flag("--resample-linear", analyze_opt.resample,
                    "linearly resample input to the configured rate");
  add_config_options(analyze, analyze_cfg);

  CLI::App* filters = app.add_subcommand(
      "filters", "export impulse responses, frequency responses, and band summaries");
  filters->add_option("--out", filters_opt.out_dir, "output directory")->required();
  filters->add_option("--checkpoint", filters_opt.checkpoint_path,
                      "trained checkpoint (fresh init otherwise)");
  add_config_options(filters, filters_cfg);

  CLI::App* train = app.add_subcommand(
      "train", "train on the synthetic modulation-rate task or a WAV manifest");
  train->add_option("--out", train_opt.out_dir, "output directory")->required();
  train->add_option("--manifest", train_opt.manifest_path,
                    "CSV of path,label rows (synthetic task otherwise)");
  train->add_option("--mod-stride", train_strides,
                    "comma-separated stride list; one training run per stride");
  train->add_flag("--resample-linear", train_opt.resample,
                  "linearly resample manifest audio to the configured rate");
  add_config_options(train, train_cfg);

  CLI::App* eval = app.add_subcommand("eval", "score a prediction CSV pair");
  eval->add_option("--scores", eval_opt.scores_path, "per-class score CSV")->required();
  eval->add_option("--labels", eval_opt.labels_path, "per-class 0/1 label CSV")->required();
  eval->add_option("--out", eval_opt.out_dir, "output directory")->required();
  add_config_options(eval, eval_cfg);

  CLI::App* init = app.add_subcommand("init-config", "write a config file with every key");
  init->add_option("--out", init_out, "output path (default config.txt)");
  add_config_options(init, init_cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (analyze->parsed()) {
      int windows = modfront::cmd_analyze(build_config(analyze_cfg), analyze_opt);
      std::printf("analyzed %d window%s into %s\n", windows, windows == 1 ? "" : "s",
                  analyze_opt.out_dir.c_str());
    } else if (filters->parsed()) {
      modfront::cmd_filters(build_config(filters_cfg), filters_opt);
      std::printf("wrote filter exports to %s\n", filters_opt.out_dir.c_str());
    } else if (train->parsed()) {
      if (!train_strides.empty()) train_opt.mod_strides = parse_stride_list(train_strides);
      modfront::cmd_train(build_config(train_cfg), train_opt);
      std::printf("training artifacts written to %s\n", train_opt.out_dir.c_str());
    } else if (eval->parsed()) {
      modfront::EvalReport report = modfront::cmd_eval(eval_opt);
      std::printf("macro roc_auc %.6f (over %d classes), macro pr_auc %.6f (over %d classes)\n",
                  report.roc.value, report.roc.num_defined, report.pr.value,
                  report.pr.num_defined);
    } else if (init->parsed()) {
      Config cfg = build_config(init_cfg);
      cfg.validate();
      modfront::save_config(cfg, init_out);
      std::printf("wrote %s\n", init_out.c_str());
    }
  } catch (const modfront::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const modfront::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
