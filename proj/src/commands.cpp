#include "modfront/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "json.hpp"
#include "modfront/errors.hpp"
#include "modfront/io.hpp"
#include "modfront/modulation.hpp"

namespace modfront {

namespace {

namespace fs = std::filesystem;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

ParamVector load_params(const Config& cfg, const std::string& checkpoint_path) {
  if (checkpoint_path.empty()) return init_params(cfg.pipe, cfg.seed);
  TrainState state = read_checkpoint(checkpoint_path, cfg.pipe, config_digest(cfg));
  return state.params;
}

void write_artifact_set(const std::string& dir, const std::string& stem,
                        const MatrixArtifact& a) {
  write_matrix_csv(join(dir, stem + ".csv"), a);
  write_matrix_raw(join(dir, stem + ".bin"), a);
  write_matrix_pgm(join(dir, stem + ".pgm"), a);
}

std::string format_g(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

int cmd_analyze(const Config& cfg, const AnalyzeOptions& opt) {
  cfg.validate();
  ensure_dir(opt.out_dir);
  ParamVector params = load_params(cfg, opt.checkpoint_path);
  std::uint64_t digest = config_digest(cfg);

  Waveform audio = load_audio(opt.audio_path, cfg.pipe.sample_rate, opt.resample);
  const int rate = cfg.pipe.sample_rate;
  std::size_t win = std::size_t(std::llround(cfg.analyze_window_s * rate));
  std::size_t hop = std::size_t(std::llround(cfg.analyze_hop_s * rate));
  if (win == 0 || hop == 0)
    throw ConfigError("analysis window and hop must cover at least one sample");

  // Window starts at multiples of the hop while a full window fits; a file
  // shorter than one window is processed whole.
  std::vector<std::size_t> starts;
  if (audio.samples.size() < win) {
    starts.push_back(0);
    win = audio.samples.size();
  } else {
    for (std::size_t s = 0; s + win <= audio.samples.size(); s += hop) starts.push_back(s);
  }

  const double frame_rate = cfg.pipe.frame_rate();
  char stem[64];
  for (std::size_t wi = 0; wi < starts.size(); ++wi) {
    Waveform piece;
    piece.sample_rate = rate;
    piece.samples.assign(audio.samples.begin() + long(starts[wi]),
                         audio.samples.begin() + long(starts[wi] + win));
    ForwardCache cache = forward(piece, params, cfg.pipe);
    double t0 = double(starts[wi]) / rate;

    MatrixArtifact tf;
    tf.values = cache.z;
    tf.row_axis = {AxisUnit::index, 0.0, 1.0};
    tf.col_axis = {AxisUnit::seconds, t0, 1.0 / frame_rate};
    tf.config_digest = digest;
    std::snprintf(stem, sizeof stem, "tf_w%03zu", wi);
    write_artifact_set(opt.out_dir, stem, tf);

    // Modulation matrices are exported before normalization so channel
    // energies stay comparable.
    const Tensor3& v = cache.v;
    double mod_step = (cfg.pipe.max_pool ? cfg.pipe.pool_stride : cfg.pipe.mod_stride) / frame_rate;
    for (std::size_t m = 0; m < v.d0; ++m) {
      MatrixArtifact mm;
      mm.values = Matrix(v.d1, v.d2);
      for (std::size_t k = 0; k < v.d1; ++k)
        for (std::size_t t = 0; t < v.d2; ++t) mm.values(k, t) = v(m, k, t);
      mm.row_axis = {AxisUnit::index, 0.0, 1.0};
      mm.col_axis = {AxisUnit::seconds, t0, mod_step};
      mm.config_digest = digest;
      std::snprintf(stem, sizeof stem, "mod%02zu_w%03zu", m, wi);
      write_artifact_set(opt.out_dir, stem, mm);
    }
  }
  return int(starts.size());
}

namespace {

// f1/f2 of an arbitrary FIR band-pass read off its response: the -3 dB
// crossings on either side of the peak, linearly interpolated between grid
// points (band edge taken as the grid end if the response never falls off).
void minus3db_band(const FreqResponse& fr, double& f1, double& f2) {
  std::size_t peak = 0;
  for (std::size_t i = 1; i < fr.magnitude_db.size(); ++i)
    if (fr.magnitude_db[i] > fr.magnitude_db[peak]) peak = i;

  auto cross = [&](std::size_t a, std::size_t b) {
    // interpolate the -3 dB point between grid indices a (below) and b (above)
    double da = fr.magnitude_db[a], db_ = fr.magnitude_db[b];
    double t = ((-3.0) - da) / (db_ - da);
    return fr.freq_hz[a] + t * (fr.freq_hz[b] - fr.freq_hz[a]);
  };

  f1 = fr.freq_hz.front();
  for (std::size_t i = peak; i-- > 0;) {
    if (fr.magnitude_db[i] < -3.0) {
      f1 = cross(i, i + 1);
      break;
    }
  }
  f2 = fr.freq_hz.back();
  for (std::size_t i = peak + 1; i < fr.magnitude_db.size(); ++i) {
    if (fr.magnitude_db[i] < -3.0) {
      f2 = cross(i, i - 1);
      break;
    }
  }
}

struct BankExport {
  std::string prefix;       // "tf" or "mod"
  Matrix kernels;           // one filter per row
  std::vector<double> f1_hz, f2_hz;
  double rate = 0.0;        // Hz corresponding to normalized 1.0
};

void write_bank(const std::string& dir, const BankExport& bank) {
  constexpr int kResponsePoints = 1024;

  std::ostringstream imp, resp, summary;
  imp << "filter,tap,value\n";
  resp << "filter,freq_hz,magnitude_db\n";
  summary << "filter,f1_hz,f2_hz,center_hz,bandwidth_hz\n";

  for (std::size_t m = 0; m < bank.kernels.rows; ++m) {
    std::vector<double> taps(bank.kernels.data.begin() + long(m * bank.kernels.cols),
                             bank.kernels.data.begin() + long((m + 1) * bank.kernels.cols));
    for (std::size_t n = 0; n < taps.size(); ++n)
      imp << m << ',' << n << ',' << format_g(taps[n]) << '\n';

    FreqResponse fr = freq_response(taps, bank.rate, kResponsePoints);
    for (std::size_t i = 0; i < fr.freq_hz.size(); ++i)
      resp << m << ',' << format_g(fr.freq_hz[i]) << ',' << format_g(fr.magnitude_db[i]) << '\n';

    double f1, f2;
    if (m < bank.f1_hz.size()) {
      f1 = bank.f1_hz[m];
      f2 = bank.f2_hz[m];
    } else {
      minus3db_band(fr, f1, f2);
    }
    summary << m << ',' << format_g(f1) << ',' << format_g(f2) << ','
            << format_g(0.5 * (f1 + f2)) << ',' << format_g(f2 - f1) << '\n';
  }

  write_text_file(join(dir, bank.prefix + "_impulses.csv"), imp.str());
  write_text_file(join(dir, bank.prefix + "_responses.csv"), resp.str());
  write_text_file(join(dir, bank.prefix + "_summary.csv"), summary.str());
}

}  // namespace

void cmd_filters(const Config& cfg, const FiltersOptions& opt) {
  cfg.validate();
  ensure_dir(opt.out_dir);
  ParamVector params = load_params(cfg, opt.checkpoint_path);
  const PipelineConfig& p = cfg.pipe;

  BankExport tf;
  tf.prefix = "tf";
  tf.rate = p.sample_rate;
  tf.kernels = Matrix(std::size_t(p.num_tf_filters), std::size_t(p.tf_kernel_len));
  for (int k = 0; k < p.num_tf_filters; ++k) {
    double f1 = params.tf_cutoffs[std::size_t(2 * k)];
    double f2 = params.tf_cutoffs[std::size_t(2 * k) + 1];
    std::vector<double> g = sinc_kernel(f1, f2, p.tf_kernel_len, p.window);
    std::copy(g.begin(), g.end(), tf.kernels.data.begin() + long(k) * p.tf_kernel_len);
    tf.f1_hz.push_back(f1 * p.sample_rate);
    tf.f2_hz.push_back(f2 * p.sample_rate);
  }
  write_bank(opt.out_dir, tf);

  if (p.max_pool) return;  // pooling baseline has no modulation filters

  BankExport mod;
  mod.prefix = "mod";
  mod.rate = p.frame_rate();
  mod.kernels = Matrix(std::size_t(p.num_mod_filters), std::size_t(p.mod_kernel_len));
  if (p.mod_variant == ModVariant::fir) {
    mod.kernels = params.mod_taps;
  } else {
    for (int m = 0; m < p.num_mod_filters; ++m) {
      double f1 = params.mod_cutoffs[std::size_t(2 * m)];
      double f2 = params.mod_cutoffs[std::size_t(2 * m) + 1];
      std::vector<double> g = sinc_kernel(f1, f2, p.mod_kernel_len, p.window);
      std::copy(g.begin(), g.end(), mod.kernels.data.begin() + long(m) * p.mod_kernel_len);
      mod.f1_hz.push_back(f1 * mod.rate);
      mod.f2_hz.push_back(f2 * mod.rate);
    }
  }
  if (p.normalization == Normalization::weight) weight_norm(mod.kernels);
  write_bank(opt.out_dir, mod);
}

Dataset load_manifest_dataset(const std::string& path, int sample_rate, bool resample) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t lineno = 0;

  auto split2 = [&](const std::string& l, std::string& a, std::string& b) {
    std::size_t comma = l.find(',');
    if (comma == std::string::npos || l.find(',', comma + 1) != std::string::npos)
      throw IoError(path + ":" + std::to_string(lineno) + ": expected exactly two columns");
    a = l.substr(0, comma);
    b = l.substr(comma + 1);
  };

  std::vector<std::pair<std::string, std::string>> rows;  // path, label
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::string a, b;
    split2(line, a, b);
    if (!have_header) {
      if (a != "path" || b != "label")
        throw IoError(path + ": manifest header must be 'path,label', got '" + a + "," + b + "'");
      have_header = true;
      continue;
    }
    rows.emplace_back(a, b);
  }
  if (!have_header) throw IoError(path + ": empty manifest");
  if (rows.empty()) throw IoError(path + ": manifest has no data rows");

  std::map<std::string, int> class_of;  // sorted distinct labels -> indices
  for (const auto& r : rows) class_of.emplace(r.second, 0);
  int next = 0;
  for (auto& kv : class_of) kv.second = next++;

  // Audio paths are taken relative to the manifest's directory.
  fs::path base = fs::path(path).parent_path();
  std::vector<std::vector<LabeledExample>> per_class(class_of.size());
  for (const auto& r : rows) {
    fs::path audio = fs::path(r.first);
    if (audio.is_relative()) audio = base / audio;
    LabeledExample ex;
    ex.audio = load_audio(audio.string(), sample_rate, resample);
    ex.label = class_of.at(r.second);
    per_class[std::size_t(ex.label)].push_back(std::move(ex));
  }

  Dataset data;
  data.num_classes = int(class_of.size());
  for (auto& bucket : per_class) {
    std::size_t n = bucket.size();
    std::size_t n_val = n * 15 / 100, n_test = n_val;
    std::size_t n_train = n - n_val - n_test;
    for (std::size_t i = 0; i < n; ++i) {
      auto& dst = i < n_train ? data.train : (i < n_train + n_val ? data.val : data.test);
      dst.push_back(std::move(bucket[i]));
    }
  }
  return data;
}

void cmd_train(const Config& cfg, const TrainCommandOptions& opt) {
  cfg.validate();
  ensure_dir(opt.out_dir);

  Dataset data;
  if (opt.manifest_path.empty()) {
    if (int(cfg.synth_rates_hz.size()) != cfg.pipe.num_classes)
      throw ConfigError("synthetic task defines " + std::to_string(cfg.synth_rates_hz.size()) +
                        " modulation rates but num_classes is " +
                        std::to_string(cfg.pipe.num_classes));
    data = make_am_dataset(cfg.seed, cfg.synth_per_class, cfg.synth_rates_hz,
                           cfg.synth_duration_s, cfg.synth_carrier, cfg.pipe.sample_rate,
                           cfg.synth_carrier_hz);
  } else {
    data = load_manifest_dataset(opt.manifest_path, cfg.pipe.sample_rate, opt.resample);
    if (data.num_classes != cfg.pipe.num_classes)
      throw ConfigError("manifest defines " + std::to_string(data.num_classes) +
                        " classes but num_classes is " + std::to_string(cfg.pipe.num_classes));
  }

  std::vector<int> strides = opt.mod_strides;
  if (strides.empty()) strides.push_back(cfg.pipe.mod_stride);
  const bool sweep = strides.size() > 1;

  for (int stride : strides) {
    Config run_cfg = cfg;
    run_cfg.pipe.mod_stride = stride;
    run_cfg.validate();
    std::uint64_t digest = config_digest(run_cfg);

    char suffix[32] = "";
    if (sweep) std::snprintf(suffix, sizeof suffix, "_stride%03d", stride);

    TrainOptions topt;
    topt.pipe = run_cfg.pipe;
    topt.lr = run_cfg.lr;
    topt.batch_size = run_cfg.batch_size;
    topt.max_epochs = run_cfg.max_epochs;
    topt.lr_patience = run_cfg.lr_patience;
    topt.stop_patience = run_cfg.stop_patience;
    topt.seed = run_cfg.seed;
    topt.freeze_frontend = run_cfg.freeze_frontend;
    topt.on_epoch = [stride](const HistoryRow& row) {
      std::printf("stride %d epoch %d: val loss %.6f roc %.4f pr %.4f lr %.2g\n", stride,
                  row.epoch, row.loss, row.roc_auc, row.pr_auc, row.lr);
      std::fflush(stdout);
    };
    TrainResult result = train(topt, data);
    std::printf("stride %d done: epochs %d best %d test acc %.4f roc %.4f pr %.4f\n", stride,
                result.epochs_run, result.best_epoch, result.test.accuracy, result.test.roc_auc,
                result.test.pr_auc);

    save_config(run_cfg, join(opt.out_dir, std::string("config") + suffix + ".txt"));
    write_checkpoint(join(opt.out_dir, std::string("checkpoint") + suffix + ".bin"),
                     result.best, digest, run_cfg.pipe);
    write_text_file(join(opt.out_dir, std::string("history") + suffix + ".csv"),
                    history_csv(result.history));

    nlohmann::json rec;
    rec["config_digest"] = to_hex(digest);
    rec["mod_stride"] = stride;
    rec["epochs_run"] = result.epochs_run;
    rec["best_epoch"] = result.best_epoch;
    rec["aborted"] = result.aborted;
    rec["abort_reason"] = result.abort_reason;
    rec["test_loss"] = result.test.loss;
    rec["test_roc_auc"] = result.test.roc_auc;
    rec["test_pr_auc"] = result.test.pr_auc;
    rec["test_accuracy"] = result.test.accuracy;
    rec["test_count"] = result.test.count;
    std::string metrics_path = join(opt.out_dir, "metrics.jsonl");
    std::string existing;
    if (fs::exists(metrics_path)) existing = read_text_file(metrics_path);
    write_text_file(metrics_path, existing + rec.dump() + "\n");

    // Artifacts above are kept for postmortem; the failure still surfaces as
    // a numeric error so the process exits nonzero.
    if (result.aborted) throw NumericError("training aborted: " + result.abort_reason);
  }
}

EvalReport cmd_eval(const EvalOptions& opt) {
  ensure_dir(opt.out_dir);
  PredictionTable table = read_prediction_pair(opt.scores_path, opt.labels_path);
  EvalReport report;
  report.roc = macro_average(table, MetricKind::roc);
  report.pr = macro_average(table, MetricKind::pr);

  std::ostringstream ss;
  ss << "class,roc_auc,pr_auc,defined\n";
  for (std::size_t c = 0; c < table.class_names.size(); ++c) {
    const ClassMetric& r = report.roc.per_class[c];
    const ClassMetric& p = report.pr.per_class[c];
    ss << table.class_names[c] << ',' << (r.defined ? format_g(r.value) : "nan") << ','
       << (p.defined ? format_g(p.value) : "nan") << ','
       << ((r.defined || p.defined) ? 1 : 0) << '\n';
  }
  ss << "macro," << format_g(report.roc.value) << ',' << format_g(report.pr.value) << ",1\n";
  write_text_file(join(opt.out_dir, "eval_summary.csv"), ss.str());
  return report;
}

void cmd_init_config(const std::string& path) {
  Config cfg;
  save_config(cfg, path);
}

}  // namespace modfront
