#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "modfront/learn.hpp"

namespace modfront {

// Every knob of the pipeline, trainer, synthetic task generator, and
// analyzer, a flat key=value namespace shared by config files and CLI flags.
struct Config {
  PipelineConfig pipe;

  double lr = 1e-3;
  int batch_size = 4;
  int max_epochs = 200;
  int lr_patience = 5;
  int stop_patience = 15;
  std::uint64_t seed = 7;
  bool freeze_frontend = false;

  std::vector<double> synth_rates_hz = {4.0, 40.0};
  int synth_per_class = 200;
  double synth_duration_s = 5.0;
  Carrier synth_carrier = Carrier::noise;
  double synth_carrier_hz = 1000.0;

  double analyze_window_s = 5.0;
  double analyze_hop_s = 2.5;

  void validate() const;  // throws ConfigError
};

// Registry of keys in canonical order.
const std::vector<std::string>& config_keys();

std::string config_get(const Config& cfg, const std::string& key);
void config_set(Config& cfg, const std::string& key, const std::string& value);

// key=value lines for every key, registry order, canonical number formatting.
std::string canonical_config(const Config& cfg);

// FNV-1a of the canonical text. Identical settings hash identically across
// runs; any value change changes the digest. Recorded in every artifact.
std::uint64_t config_digest(const Config& cfg);

// key = value file with '#' comments and blank lines; unknown keys and
// unparsable values are errors naming the offender.
Config load_config(const std::string& path);
void save_config(const Config& cfg, const std::string& path);

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace modfront
