#pragma once

#include <string>
#include <vector>

#include "modfront/config.hpp"
#include "modfront/learn.hpp"
#include "modfront/metrics.hpp"

namespace modfront {

// Subcommand implementations. Each writes its artifacts under out_dir
// (created if absent) and throws on failure; exit-code mapping lives in the
// CLI entry point.

struct AnalyzeOptions {
  std::string audio_path;
  std::string out_dir;
  std::string checkpoint_path;  // empty: fresh initialization from the config
  bool resample = false;
};

// Runs the front end over the audio in analysis windows and writes, per
// window, the rectified time-frequency map (tf_wNNN.{csv,bin,pgm}) and one
// matrix per modulation channel (modMM_wNNN.*), values taken before any
// normalization. Returns the number of windows processed.
int cmd_analyze(const Config& cfg, const AnalyzeOptions& opt);

struct FiltersOptions {
  std::string out_dir;
  std::string checkpoint_path;  // empty: fresh initialization
};

// Writes impulse responses, frequency responses, and band summaries
// (f1/f2/center/bandwidth in Hz) for the time-frequency bank and, unless the
// pooling baseline is configured, the modulation bank.
void cmd_filters(const Config& cfg, const FiltersOptions& opt);

struct TrainCommandOptions {
  std::string out_dir;
  std::string manifest_path;   // empty: synthetic AM task from the config
  std::vector<int> mod_strides;  // empty: single run at the configured stride
  bool resample = false;
};

// One training run per stride. Artifacts per run: config, checkpoint,
// history CSV, and an appended line in metrics.jsonl.
void cmd_train(const Config& cfg, const TrainCommandOptions& opt);

struct EvalOptions {
  std::string scores_path;
  std::string labels_path;
  std::string out_dir;
};

struct EvalReport {
  MacroResult roc;
  MacroResult pr;
};

EvalReport cmd_eval(const EvalOptions& opt);

void cmd_init_config(const std::string& path);

// Manifest rows are "path,label" under that exact header; classes are the
// sorted distinct labels, split 70/15/15 per class in file order.
Dataset load_manifest_dataset(const std::string& path, int sample_rate, bool resample);

}  // namespace modfront
