#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "modfront/core.hpp"
#include "modfront/filterbank.hpp"
#include "modfront/learn.hpp"
#include "modfront/metrics.hpp"

namespace modfront {

// ---- WAV -------------------------------------------------------------------
//
// RIFF/WAVE reader for 16-bit PCM and 32-bit IEEE float, mono or stereo.
// Stereo is averaged to mono; PCM samples are scaled by 1/32768.

Waveform read_wav(const std::string& path);

// read_wav plus the sample-rate contract: a file at a different rate is an
// error naming both rates unless resample is set, in which case the signal is
// linearly interpolated to expect_rate.
Waveform load_audio(const std::string& path, int expect_rate, bool resample);

std::vector<double> resample_linear(const std::vector<double>& in, int src_rate, int dst_rate);

void write_wav_pcm16(const std::string& path, const Waveform& w);
void write_wav_float32(const std::string& path, const Waveform& w);

// ---- Matrix artifacts ------------------------------------------------------
//
// One matrix, three serializations sharing metadata: CSV (doubles, comment
// header), raw binary (float32 payload), and an 8-bit PGM rendering.
//
// Raw binary layout, all little-endian:
//   offset  0  4 bytes  magic "MFA1"
//   offset  4  u32      format version (1)
//   offset  8  u64      config digest
//   offset 16  u32 u32  rows, cols
//   offset 24  u8       db_scaled flag
//   offset 25  u8 u8    row axis unit, col axis unit (0 index, 1 Hz, 2 s)
//   offset 27  u8       reserved (0)
//   offset 28  4 x f64  row axis start/step, col axis start/step
//   offset 60  f32[]    rows*cols values, row-major
//
// The PGM maps 10*log10(max(v,0) + 1e-10) linearly onto 0..255 over the
// matrix's own dB range (a constant matrix renders uniformly black); the
// mapping and range are recorded in its comment lines.

enum class AxisUnit : std::uint8_t { index = 0, hertz = 1, seconds = 2 };

struct AxisInfo {
  AxisUnit unit = AxisUnit::index;
  double start = 0.0;
  double step = 1.0;
};

struct MatrixArtifact {
  Matrix values;
  AxisInfo row_axis, col_axis;
  bool db_scaled = false;  // values already in dB (skips the PGM's dB mapping)
  std::uint64_t config_digest = 0;
};

void write_matrix_csv(const std::string& path, const MatrixArtifact& a);
void write_matrix_raw(const std::string& path, const MatrixArtifact& a);
MatrixArtifact read_matrix_raw(const std::string& path);
Matrix read_matrix_csv(const std::string& path);
void write_matrix_pgm(const std::string& path, const MatrixArtifact& a);

// ---- Checkpoints -----------------------------------------------------------
//
// Training state as a little-endian binary:
//   offset  0  8 bytes  magic "MODFRNT1"
//   offset  8  u32      format version (1)
//   offset 12  u32      reserved (0)
//   offset 16  u64      config digest
//   offset 24  u32 x 6  num_tf_filters, mod block kind (0 none / 1 taps /
//                       2 cutoffs), num_mod_filters, mod_kernel_len,
//                       num_classes, feature dim
//   offset 48  u64      parameter count P
//   then       f64 x P  parameters (flat), f64 x P adam first moments,
//              f64 x P  adam second moments
//   then       u64 step, f64 beta1_pow, f64 beta2_pow, f64 lr,
//              f64 best_val_loss, u32 epochs_since_improve, u32 plateau_count
//
// Loading verifies magic, version, the config digest, and the dimensions
// against the supplied configuration.

void write_checkpoint(const std::string& path, const TrainState& state,
                      std::uint64_t config_digest, const PipelineConfig& cfg);
TrainState read_checkpoint(const std::string& path, const PipelineConfig& cfg,
                           std::uint64_t expect_digest);

// ---- CSV tables ------------------------------------------------------------

std::string history_csv(const std::vector<HistoryRow>& rows);

// Score/label CSV pair with identical class-name headers; labels must be 0 or
// 1. Mismatched headers or shapes are errors naming the offending columns.
PredictionTable read_prediction_pair(const std::string& scores_path,
                                     const std::string& labels_path);
void write_prediction_csv(const std::string& path, const Matrix& values,
                          const std::vector<std::string>& class_names);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace modfront
