#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "modfront/core.hpp"
#include "modfront/filterbank.hpp"
#include "modfront/modulation.hpp"

namespace modfront {

// Everything the forward pass needs to know, minus the parameter values.
// Frequencies are in Hz here; parameters store them normalized.
struct PipelineConfig {
  int sample_rate = 16000;

  int num_tf_filters = 80;
  int tf_kernel_len = 256;
  int tf_stride = 10;
  double tf_fmin_hz = 30.0;
  double tf_fmax_hz = 8000.0;
  Window window = Window::hamming;

  Rectifier r1 = Rectifier::relu;         // after the TF stage
  Rectifier r2 = Rectifier::abs_squared;  // after the modulation stage

  ModVariant mod_variant = ModVariant::sinc;
  bool max_pool = false;  // replace the modulation bank with strided max pooling
  int num_mod_filters = 20;
  int mod_kernel_len = 128;
  int mod_stride = 160;
  double mod_fmin_hz = 0.0;
  double mod_fmax_hz = 800.0;
  int pool_kernel_len = 128;
  int pool_stride = 128;

  Normalization normalization = Normalization::instance;
  double norm_epsilon = 1e-5;

  int num_classes = 2;

  double frame_rate() const { return static_cast<double>(sample_rate) / tf_stride; }
  int feature_channels() const { return max_pool ? 1 : num_mod_filters; }
  int feature_dim() const { return feature_channels() * num_tf_filters; }

  void validate() const;  // throws ConfigError
};

// Learnable state. Cutoff pairs are stored interleaved (f1_0, f2_0, f1_1, ...)
// in cycles/sample (TF) or cycles/frame (modulation). Exactly one of mod_taps
// and mod_cutoffs is populated, per variant; neither under max pooling.
struct ParamVector {
  std::vector<double> tf_cutoffs;
  Matrix mod_taps;
  std::vector<double> mod_cutoffs;
  Matrix head_w;  // num_classes x feature_dim
  std::vector<double> head_b;

  std::size_t flat_size() const;
  std::vector<double> flatten() const;
  static ParamVector unflatten(const std::vector<double>& flat, const PipelineConfig& cfg);
  // Human-readable name of the block a flat index falls in, for diagnostics.
  static std::string block_name(std::size_t flat_index, const PipelineConfig& cfg);
};

// Mel-spaced TF bank, Hamming-bump FIR or linearly spaced sinc modulation
// bank, small uniform head; deterministic in the seed.
ParamVector init_params(const PipelineConfig& cfg, std::uint64_t seed);

// Intermediates retained by forward() for the hand-derived backward pass.
struct ForwardCache {
  std::vector<double> x;
  Matrix y;   // TF output, pre-r1
  Matrix z;   // post-r1
  Tensor3 u;  // modulation (or pooling) output, pre-r2
  Tensor3 v;  // post-r2
  Tensor3 w;  // post-instance-norm; empty unless instance norm is active
  InstanceNormStats norm_stats;
  Matrix mod_kernels;  // effective kernels convolved (weight-normalized if configured)
  std::vector<double> mod_norms;        // weight norm only
  std::vector<std::uint8_t> mod_zero;   // weight norm only
  Matrix pool_argmax;                   // max-pool baseline only
  Matrix pooled;                        // channels x bands, mean over frames
  std::vector<double> logits;
  std::uint64_t param_digest = 0;
};

ForwardCache forward(const Waveform& x, const ParamVector& params, const PipelineConfig& cfg);

// Gradient of a scalar with respect to every parameter, given its gradient
// with respect to the logits. The cache must come from forward() on the same
// params; a digest mismatch is an internal consistency error.
ParamVector backward(const ForwardCache& cache, const std::vector<double>& dlogits,
                     const ParamVector& params, const PipelineConfig& cfg);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> dlogits;
};

// Mean over classes of per-class sigmoid cross-entropy against 0/1 targets.
LossGrad sigmoid_bce(const std::vector<double>& logits, const std::vector<double>& targets);

std::vector<double> one_hot(int label, int num_classes);

struct TrainState {
  ParamVector params;
  std::vector<double> adam_m, adam_v;  // flat, ParamVector order
  double beta1_pow = 1.0, beta2_pow = 1.0;
  std::int64_t step = 0;
  double lr = 1e-3;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int epochs_since_improve = 0;
  int plateau_count = 0;
};

// Clamps every cutoff pair to 0 <= f1 < f2 <= 0.5 (both TF and modulation):
// f1 <- clamp(|f1|, 0, 0.5 - delta), f2 <- clamp(|f2|, f1 + delta, 0.5),
// delta = 1e-4. Other blocks pass through. Idempotent.
void project_constraints(ParamVector& params);

// One Adam update (beta1 0.9, beta2 0.999, eps 1e-8, bias correction),
// followed by the constraint projection. Non-finite gradient entries abort
// with the offending block named.
void adam_step(TrainState& state, const ParamVector& grads, const PipelineConfig& cfg);

// Reduce-on-plateau: halves lr after `patience` epochs without val-loss
// improvement, then restarts the plateau count. Tracks best_val_loss and
// epochs_since_improve. Returns whether this epoch improved.
bool lr_schedule(TrainState& state, double val_loss, int patience = 5);

bool early_stop(const TrainState& state, int patience = 15);

enum class Carrier { noise, tone };

struct LabeledExample {
  Waveform audio;
  int label = 0;
};

struct Dataset {
  std::vector<LabeledExample> train, val, test;
  int num_classes = 0;
  std::vector<double> class_rates_hz;
};

// Synthetic amplitude-modulation classification set: one class per rate,
// carrier * (1 + 0.9 cos(2 pi rate t + phi)) with random phase per example,
// split 70/15/15 per class. Deterministic in the seed.
Dataset make_am_dataset(std::uint64_t seed, int per_class, const std::vector<double>& rates_hz,
                        double duration_s, Carrier carrier, int sample_rate,
                        double carrier_hz = 1000.0);

struct HistoryRow {
  int epoch = 0;
  std::string split;  // "train" or "val"
  double loss = 0.0, roc_auc = 0.0, pr_auc = 0.0, lr = 0.0;
};

struct TrainOptions {
  PipelineConfig pipe;
  double lr = 1e-3;
  int batch_size = 4;
  int max_epochs = 200;
  int lr_patience = 5;
  int stop_patience = 15;
  std::uint64_t seed = 7;
  bool freeze_frontend = false;  // train the linear head only
  // Replaces init_params() when set; useful for seeding specific banks.
  const ParamVector* init_override = nullptr;
  // Called after each epoch's validation pass; purely observational.
  std::function<void(const HistoryRow&)> on_epoch;
};

struct EvalMetrics {
  double loss = 0.0;
  double roc_auc = 0.0;
  double pr_auc = 0.0;
  double accuracy = 0.0;
  int count = 0;
};

struct TrainResult {
  TrainState best;  // state snapshot from the best-val epoch
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<HistoryRow> history;
  EvalMetrics test;
  bool aborted = false;          // non-finite loss or gradient; best holds the
  std::string abort_reason;      // last good snapshot
};

EvalMetrics evaluate(const ParamVector& params, const PipelineConfig& cfg,
                     const std::vector<LabeledExample>& examples);

// Adam + reduce-on-plateau + early stopping over seeded shuffled batches.
// Batch gradients are the mean of per-example gradients. Single-threaded and
// bit-deterministic for a given options/dataset pair.
TrainResult train(const TrainOptions& opts, const Dataset& data);

}  // namespace modfront
