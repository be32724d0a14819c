#include "modfront/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "modfront/errors.hpp"

namespace modfront {

namespace {

// Little-endian scalar packing. The host here is little-endian x86 but the
// byte-level loops keep the formats well defined anyway.

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

// Cursor over a loaded file; every get_* checks remaining length.
struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  std::string path;

  void need(std::size_t n, const char* what) const {
    if (pos + n > buf.size())
      throw IoError(path + ": truncated file while reading " + what);
  }
  std::uint16_t get_u16(const char* what) {
    need(2, what);
    auto b = reinterpret_cast<const unsigned char*>(buf.data() + pos);
    pos += 2;
    return std::uint16_t(b[0] | (b[1] << 8));
  }
  std::uint32_t get_u32(const char* what) {
    need(4, what);
    auto b = reinterpret_cast<const unsigned char*>(buf.data() + pos);
    pos += 4;
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
  }
  std::uint64_t get_u64(const char* what) {
    std::uint64_t lo = get_u32(what);
    std::uint64_t hi = get_u32(what);
    return lo | (hi << 32);
  }
  float get_f32(const char* what) {
    std::uint32_t bits = get_u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double get_f64(const char* what) {
    std::uint64_t bits = get_u64(what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string get_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

std::string axis_unit_name(AxisUnit u) {
  switch (u) {
    case AxisUnit::index: return "index";
    case AxisUnit::hertz: return "hertz";
    case AxisUnit::seconds: return "seconds";
  }
  return "index";
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw IoError("read error: " + path);
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open file for writing: " + path);
  f.write(content.data(), std::streamsize(content.size()));
  if (!f) throw IoError("write error: " + path);
}

// ---- WAV -------------------------------------------------------------------

Waveform read_wav(const std::string& path) {
  std::string buf = read_text_file(path);
  Reader r{buf, 0, path};

  if (r.get_bytes(4, "RIFF header") != "RIFF")
    throw IoError(path + ": not a RIFF file");
  r.get_u32("RIFF size");
  if (r.get_bytes(4, "WAVE tag") != "WAVE")
    throw IoError(path + ": not a WAVE file");

  // Chunk walk. fmt must precede data; unknown chunks are skipped (with the
  // spec'd pad byte on odd sizes).
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (r.pos + 8 <= buf.size()) {
    std::string id = r.get_bytes(4, "chunk id");
    std::uint32_t size = r.get_u32("chunk size");
    if (id == "fmt ") {
      if (size < 16) throw IoError(path + ": fmt chunk too small");
      std::size_t chunk_end = r.pos + size;
      format = r.get_u16("format tag");
      channels = r.get_u16("channel count");
      rate = r.get_u32("sample rate");
      r.get_u32("byte rate");
      r.get_u16("block align");
      bits = r.get_u16("bits per sample");
      if (chunk_end > buf.size()) throw IoError(path + ": truncated fmt chunk");
      r.pos = chunk_end + (size & 1);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw IoError(path + ": data chunk before fmt chunk");
      if (r.pos + size > buf.size())
        throw IoError(path + ": data chunk extends past end of file");
      if (channels != 1 && channels != 2)
        throw IoError(path + ": unsupported channel count " + std::to_string(channels) +
                      " (mono or stereo only)");
      if (rate == 0) throw IoError(path + ": zero sample rate");

      std::size_t bytes_per = 0;
      if (format == 1 && bits == 16) bytes_per = 2;
      else if (format == 3 && bits == 32) bytes_per = 4;
      else
        throw IoError(path + ": unsupported sample format (tag " + std::to_string(format) +
                      ", " + std::to_string(bits) + " bits); need 16-bit PCM or 32-bit float");

      std::size_t frame_bytes = bytes_per * channels;
      std::size_t frames = size / frame_bytes;
      Waveform w;
      w.sample_rate = int(rate);
      w.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (int c = 0; c < channels; ++c) {
          if (bytes_per == 2) {
            std::uint16_t u = r.get_u16("sample data");
            acc += double(std::int16_t(u)) / 32768.0;
          } else {
            acc += double(r.get_f32("sample data"));
          }
        }
        w.samples[i] = channels == 2 ? acc * 0.5 : acc;
      }
      return w;
    } else {
      // skip unknown chunk
      if (r.pos + size > buf.size())
        throw IoError(path + ": truncated '" + id + "' chunk");
      r.pos += size + (size & 1);
    }
  }
  throw IoError(path + ": no data chunk found");
}

std::vector<double> resample_linear(const std::vector<double>& in, int src_rate, int dst_rate) {
  if (src_rate < 1 || dst_rate < 1)
    throw ConfigError("resample_linear: sample rates must be positive");
  if (in.empty()) return {};
  if (src_rate == dst_rate) return in;
  if (in.size() == 1) return in;

  // Output grid covers the same time span; last input sample maps exactly to
  // the last output sample.
  std::size_t out_len =
      std::size_t((double(in.size() - 1) * dst_rate) / src_rate) + 1;
  std::vector<double> out(out_len);
  double scale = double(src_rate) / double(dst_rate);
  for (std::size_t i = 0; i < out_len; ++i) {
    double pos = double(i) * scale;
    std::size_t lo = std::size_t(pos);
    if (lo >= in.size() - 1) {
      out[i] = in.back();
      continue;
    }
    double frac = pos - double(lo);
    out[i] = in[lo] * (1.0 - frac) + in[lo + 1] * frac;
  }
  return out;
}

Waveform load_audio(const std::string& path, int expect_rate, bool resample) {
  Waveform w = read_wav(path);
  if (w.sample_rate == expect_rate) return w;
  if (!resample)
    throw ConfigError(path + ": sample rate " + std::to_string(w.sample_rate) +
                      " does not match configured rate " + std::to_string(expect_rate) +
                      " (pass --resample-linear to convert)");
  w.samples = resample_linear(w.samples, w.sample_rate, expect_rate);
  w.sample_rate = expect_rate;
  return w;
}

namespace {

void write_wav(const std::string& path, const Waveform& w, bool as_float) {
  if (w.sample_rate < 1) throw ConfigError("write_wav: sample rate must be positive");
  std::string out;
  std::uint32_t bytes_per = as_float ? 4 : 2;
  std::uint32_t data_size = std::uint32_t(w.samples.size()) * bytes_per;
  out.reserve(44 + data_size);
  out += "RIFF";
  put_u32(out, 36 + data_size);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, as_float ? 3 : 1);
  put_u16(out, 1);  // mono
  put_u32(out, std::uint32_t(w.sample_rate));
  put_u32(out, std::uint32_t(w.sample_rate) * bytes_per);
  put_u16(out, std::uint16_t(bytes_per));
  put_u16(out, std::uint16_t(bytes_per * 8));
  out += "data";
  put_u32(out, data_size);
  for (double s : w.samples) {
    if (as_float) {
      put_f32(out, float(s));
    } else {
      double clipped = std::clamp(s, -1.0, 32767.0 / 32768.0);
      put_u16(out, std::uint16_t(std::int16_t(std::lround(clipped * 32768.0))));
    }
  }
  write_text_file(path, out);
}

}  // namespace

void write_wav_pcm16(const std::string& path, const Waveform& w) { write_wav(path, w, false); }
void write_wav_float32(const std::string& path, const Waveform& w) { write_wav(path, w, true); }

// ---- Matrix artifacts ------------------------------------------------------

void write_matrix_csv(const std::string& path, const MatrixArtifact& a) {
  std::ostringstream ss;
  char buf[64];
  ss << "# config_digest " << to_hex(a.config_digest) << "\n";
  ss << "# rows " << a.values.rows << " cols " << a.values.cols << "\n";
  ss << "# db_scaled " << (a.db_scaled ? 1 : 0) << "\n";
  std::snprintf(buf, sizeof buf, "# row_axis %s %.17g %.17g\n",
                axis_unit_name(a.row_axis.unit).c_str(), a.row_axis.start, a.row_axis.step);
  ss << buf;
  std::snprintf(buf, sizeof buf, "# col_axis %s %.17g %.17g\n",
                axis_unit_name(a.col_axis.unit).c_str(), a.col_axis.start, a.col_axis.step);
  ss << buf;
  for (std::size_t r = 0; r < a.values.rows; ++r) {
    for (std::size_t c = 0; c < a.values.cols; ++c) {
      if (c) ss << ',';
      std::snprintf(buf, sizeof buf, "%.17g", a.values(r, c));
      ss << buf;
    }
    ss << '\n';
  }
  write_text_file(path, ss.str());
}

Matrix read_matrix_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str())
        throw IoError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path + ": no data rows");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = rows[r][c];
  return m;
}

void write_matrix_raw(const std::string& path, const MatrixArtifact& a) {
  std::string out;
  out.reserve(60 + a.values.data.size() * 4);
  out += "MFA1";
  put_u32(out, 1);
  put_u64(out, a.config_digest);
  put_u32(out, std::uint32_t(a.values.rows));
  put_u32(out, std::uint32_t(a.values.cols));
  out.push_back(char(a.db_scaled ? 1 : 0));
  out.push_back(char(std::uint8_t(a.row_axis.unit)));
  out.push_back(char(std::uint8_t(a.col_axis.unit)));
  out.push_back(char(0));
  put_f64(out, a.row_axis.start);
  put_f64(out, a.row_axis.step);
  put_f64(out, a.col_axis.start);
  put_f64(out, a.col_axis.step);
  for (double v : a.values.data) put_f32(out, float(v));
  write_text_file(path, out);
}

MatrixArtifact read_matrix_raw(const std::string& path) {
  std::string buf = read_text_file(path);
  Reader r{buf, 0, path};
  if (r.get_bytes(4, "magic") != "MFA1")
    throw IoError(path + ": not a matrix artifact (bad magic)");
  std::uint32_t ver = r.get_u32("version");
  if (ver != 1)
    throw IoError(path + ": unsupported matrix artifact version " + std::to_string(ver));
  MatrixArtifact a;
  a.config_digest = r.get_u64("config digest");
  std::uint32_t rows = r.get_u32("rows");
  std::uint32_t cols = r.get_u32("cols");
  a.db_scaled = r.get_bytes(1, "db flag")[0] != 0;
  auto unit = [&](const char* what) {
    std::uint8_t u = std::uint8_t(r.get_bytes(1, what)[0]);
    if (u > 2) throw IoError(path + ": bad axis unit code " + std::to_string(u));
    return AxisUnit(u);
  };
  a.row_axis.unit = unit("row axis unit");
  a.col_axis.unit = unit("col axis unit");
  r.get_bytes(1, "reserved byte");
  a.row_axis.start = r.get_f64("row axis start");
  a.row_axis.step = r.get_f64("row axis step");
  a.col_axis.start = r.get_f64("col axis start");
  a.col_axis.step = r.get_f64("col axis step");
  a.values = Matrix(rows, cols);
  for (std::size_t i = 0; i < a.values.data.size(); ++i)
    a.values.data[i] = double(r.get_f32("matrix payload"));
  return a;
}

void write_matrix_pgm(const std::string& path, const MatrixArtifact& a) {
  const Matrix& m = a.values;
  std::vector<double> db(m.data.size());
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    db[i] = a.db_scaled ? m.data[i]
                        : 10.0 * std::log10(std::max(m.data[i], 0.0) + 1e-10);
  }
  double lo = db.empty() ? 0.0 : *std::min_element(db.begin(), db.end());
  double hi = db.empty() ? 0.0 : *std::max_element(db.begin(), db.end());

  std::ostringstream ss;
  ss << "P5\n";
  ss << "# config_digest " << to_hex(a.config_digest) << "\n";
  if (a.db_scaled)
    ss << "# mapping linear over values already in dB\n";
  else
    ss << "# mapping 10*log10(max(v,0) + 1e-10), linear to 0..255\n";
  char buf[96];
  std::snprintf(buf, sizeof buf, "# db_range %.6g %.6g\n", lo, hi);
  ss << buf;
  ss << m.cols << " " << m.rows << "\n255\n";
  std::string body;
  body.reserve(m.data.size());
  double span = hi - lo;
  for (double v : db) {
    int g = span > 0.0 ? int(std::lround((v - lo) / span * 255.0)) : 0;
    body.push_back(char(std::uint8_t(std::clamp(g, 0, 255))));
  }
  write_text_file(path, ss.str() + body);
}

// ---- Checkpoints -----------------------------------------------------------

namespace {

constexpr char kCkptMagic[9] = "MODFRNT1";

std::uint32_t mod_block_kind(const PipelineConfig& cfg) {
  if (cfg.max_pool) return 0;
  return cfg.mod_variant == ModVariant::fir ? 1 : 2;
}

}  // namespace

void write_checkpoint(const std::string& path, const TrainState& state,
                      std::uint64_t config_digest, const PipelineConfig& cfg) {
  std::vector<double> flat = state.params.flatten();
  if (state.adam_m.size() != flat.size() || state.adam_v.size() != flat.size())
    throw InternalError("write_checkpoint: moment buffers do not match parameter count");
  std::string out;
  out.reserve(48 + 8 + flat.size() * 24 + 48);
  out.append(kCkptMagic, 8);
  put_u32(out, 1);
  put_u32(out, 0);
  put_u64(out, config_digest);
  put_u32(out, std::uint32_t(cfg.num_tf_filters));
  put_u32(out, mod_block_kind(cfg));
  put_u32(out, std::uint32_t(cfg.num_mod_filters));
  put_u32(out, std::uint32_t(cfg.mod_kernel_len));
  put_u32(out, std::uint32_t(cfg.num_classes));
  put_u32(out, std::uint32_t(cfg.feature_dim()));
  put_u64(out, std::uint64_t(flat.size()));
  for (double v : flat) put_f64(out, v);
  for (double v : state.adam_m) put_f64(out, v);
  for (double v : state.adam_v) put_f64(out, v);
  put_u64(out, state.step);
  put_f64(out, state.beta1_pow);
  put_f64(out, state.beta2_pow);
  put_f64(out, state.lr);
  put_f64(out, state.best_val_loss);
  put_u32(out, std::uint32_t(state.epochs_since_improve));
  put_u32(out, std::uint32_t(state.plateau_count));
  write_text_file(path, out);
}

TrainState read_checkpoint(const std::string& path, const PipelineConfig& cfg,
                           std::uint64_t expect_digest) {
  std::string buf = read_text_file(path);
  Reader r{buf, 0, path};
  if (r.get_bytes(8, "magic") != std::string(kCkptMagic, 8))
    throw IoError(path + ": not a checkpoint file (bad magic)");
  std::uint32_t ver = r.get_u32("version");
  if (ver != 1)
    throw IoError(path + ": unsupported checkpoint version " + std::to_string(ver));
  r.get_u32("reserved");
  std::uint64_t digest = r.get_u64("config digest");
  if (digest != expect_digest)
    throw ConfigError(path + ": checkpoint was written under config digest " + to_hex(digest) +
                      " but the current config digest is " + to_hex(expect_digest));

  auto check_dim = [&](const char* what, std::uint32_t got, std::uint32_t want) {
    if (got != want)
      throw ConfigError(path + ": checkpoint " + what + " is " + std::to_string(got) +
                        " but the config requires " + std::to_string(want));
  };
  check_dim("time-frequency filter count", r.get_u32("tf filter count"),
            std::uint32_t(cfg.num_tf_filters));
  check_dim("modulation block kind", r.get_u32("mod block kind"), mod_block_kind(cfg));
  check_dim("modulation filter count", r.get_u32("mod filter count"),
            std::uint32_t(cfg.num_mod_filters));
  check_dim("modulation kernel length", r.get_u32("mod kernel len"),
            std::uint32_t(cfg.mod_kernel_len));
  check_dim("class count", r.get_u32("class count"), std::uint32_t(cfg.num_classes));
  check_dim("feature dimension", r.get_u32("feature dim"), std::uint32_t(cfg.feature_dim()));

  TrainState state;
  state.params = init_params(cfg, 0);  // shapes only; overwritten below
  std::uint64_t count = r.get_u64("parameter count");
  if (count != state.params.flat_size())
    throw ConfigError(path + ": checkpoint holds " + std::to_string(count) +
                      " parameters but the config requires " +
                      std::to_string(state.params.flat_size()));
  std::vector<double> flat(count);
  for (auto& v : flat) v = r.get_f64("parameters");
  state.params = ParamVector::unflatten(flat, cfg);
  state.adam_m.resize(count);
  for (auto& v : state.adam_m) v = r.get_f64("first moments");
  state.adam_v.resize(count);
  for (auto& v : state.adam_v) v = r.get_f64("second moments");
  state.step = r.get_u64("step");
  state.beta1_pow = r.get_f64("beta1 power");
  state.beta2_pow = r.get_f64("beta2 power");
  state.lr = r.get_f64("learning rate");
  state.best_val_loss = r.get_f64("best val loss");
  state.epochs_since_improve = int(r.get_u32("epochs since improve"));
  state.plateau_count = int(r.get_u32("plateau count"));
  return state;
}

// ---- CSV tables ------------------------------------------------------------

std::string history_csv(const std::vector<HistoryRow>& rows) {
  std::ostringstream ss;
  ss << "epoch,split,loss,roc_auc,pr_auc,lr\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                  r.split.c_str(), r.loss, r.roc_auc, r.pr_auc, r.lr);
    ss << buf;
  }
  return ss.str();
}

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv_table(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  CsvTable t;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string cell;
    if (!have_header) {
      while (std::getline(ls, cell, ',')) t.header.push_back(cell);
      if (t.header.empty()) throw IoError(path + ": empty header row");
      have_header = true;
      continue;
    }
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str())
        throw IoError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      row.push_back(v);
    }
    if (row.size() != t.header.size())
      throw IoError(path + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(t.header.size()) + " columns, got " +
                    std::to_string(row.size()));
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw IoError(path + ": empty file");
  return t;
}

}  // namespace

PredictionTable read_prediction_pair(const std::string& scores_path,
                                     const std::string& labels_path) {
  CsvTable scores = read_csv_table(scores_path);
  CsvTable labels = read_csv_table(labels_path);
  if (scores.header != labels.header) {
    std::string msg = "score/label header mismatch:";
    std::size_t n = std::max(scores.header.size(), labels.header.size());
    for (std::size_t i = 0; i < n; ++i) {
      std::string s = i < scores.header.size() ? scores.header[i] : "<missing>";
      std::string l = i < labels.header.size() ? labels.header[i] : "<missing>";
      if (s != l) msg += " column " + std::to_string(i) + " is '" + s + "' vs '" + l + "';";
    }
    throw ConfigError(msg);
  }
  if (scores.rows.size() != labels.rows.size())
    throw ConfigError("score file has " + std::to_string(scores.rows.size()) +
                      " rows but label file has " + std::to_string(labels.rows.size()));
  if (scores.rows.empty()) throw ConfigError(scores_path + ": no data rows");

  PredictionTable t;
  t.class_names = scores.header;
  t.scores = Matrix(scores.rows.size(), scores.header.size());
  t.labels = Matrix(labels.rows.size(), labels.header.size());
  for (std::size_t r = 0; r < scores.rows.size(); ++r) {
    for (std::size_t c = 0; c < scores.header.size(); ++c) {
      t.scores(r, c) = scores.rows[r][c];
      double lv = labels.rows[r][c];
      if (lv != 0.0 && lv != 1.0)
        throw ConfigError(labels_path + ": labels must be 0 or 1, row " + std::to_string(r + 1) +
                          " column '" + labels.header[c] + "' is " + std::to_string(lv));
      t.labels(r, c) = lv;
    }
  }
  return t;
}

void write_prediction_csv(const std::string& path, const Matrix& values,
                          const std::vector<std::string>& class_names) {
  if (values.cols != class_names.size())
    throw InternalError("write_prediction_csv: column count does not match class names");
  std::ostringstream ss;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    if (c) ss << ',';
    ss << class_names[c];
  }
  ss << '\n';
  char buf[64];
  for (std::size_t r = 0; r < values.rows; ++r) {
    for (std::size_t c = 0; c < values.cols; ++c) {
      if (c) ss << ',';
      std::snprintf(buf, sizeof buf, "%.17g", values(r, c));
      ss << buf;
    }
    ss << '\n';
  }
  write_text_file(path, ss.str());
}

}  // namespace modfront
