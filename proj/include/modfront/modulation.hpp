#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "modfront/core.hpp"
#include "modfront/filterbank.hpp"

namespace modfront {

enum class ModVariant { fir, sinc };

enum class Normalization { instance, weight, none };

struct ModFilterInfo {
  int index = 0;
  ModVariant variant = ModVariant::fir;
  // Band description in Hz, valid for the sinc variant only (NaN otherwise);
  // fir filters are described by their tap row in the layer.
  double f1_hz = 0, f2_hz = 0, center_hz = 0;
};

// Bank of temporal envelope filters applied along the frame axis of a
// time-frequency map. The same taps are shared by every frequency band.
// Sinc-variant cutoffs are normalized to the incoming frame rate.
struct ModulationLayer {
  ModVariant variant = ModVariant::fir;
  int kernel_len = 128;
  int stride = 160;
  double frame_rate = 1600.0;  // Hz of the incoming map
  Window window = Window::hamming;  // shared with the TF stage's window switch
  Matrix fir_taps;                                 // M x kernel_len (fir)
  std::vector<std::pair<double, double>> cutoffs;  // M pairs, cycles/frame (sinc)

  std::size_t num_filters() const {
    return variant == ModVariant::fir ? fir_taps.rows : cutoffs.size();
  }

  // Taps actually convolved for filter m: the stored row (fir) or a kernel
  // materialized from the cutoffs (sinc).
  std::vector<double> materialize(std::size_t m) const;
};

struct ModulationTensor {
  Tensor3 values;         // M x K x frames
  double frame_rate = 0;  // Hz after striding
  std::vector<ModFilterInfo> meta;
};

// FIR bank initialized with one unit-peak Hamming bump per filter. The kernel
// is divided into 5 equally spaced slots of floor(kernel_len/5) taps; slot s
// starts at tap floor(s*kernel_len/5) (this rounding keeps slots disjoint and
// spread across the whole kernel). Filter m gets slot m mod 5, so banks wider
// than 5 repeat shapes.
ModulationLayer hamming_fir_init(int num_filters, int kernel_len, double frame_rate = 1600.0,
                                 int stride = 160, Window window = Window::hamming);

// Sinc bank with edges equally spaced in Hz: M+1 points over [f_lo, f_hi],
// filter m spanning [edge_m, edge_{m+1}], stored normalized to frame_rate.
ModulationLayer linear_sinc_init(int num_filters, double frame_rate, double f_lo_hz = 0.0,
                                 double f_hi_hz = -1.0, int kernel_len = 128, int stride = 160,
                                 Window window = Window::hamming);

// Valid-mode strided convolution along frames, same flip convention as
// tf_decompose, applied per (filter, band) pair.
ModulationTensor mod_filter(const TimeFrequencyMap& map, const ModulationLayer& layer);

// One-filter pooling stand-in for the modulation bank: a strided max over
// frames per band. When argmax is non-null it receives, per (band, frame),
// the input frame index of the (first) maximum, for gradient routing.
ModulationTensor max_pool_baseline(const TimeFrequencyMap& map, int kernel_len, int stride,
                                   Matrix* argmax = nullptr);

struct InstanceNormStats {
  std::vector<double> mean;     // per channel
  std::vector<double> inv_std;  // 1 / sqrt(var + epsilon), population variance
};

// Standardizes each channel m over all its (band, frame) entries, in place.
// No affine parameters.
InstanceNormStats instance_norm(Tensor3& values, double epsilon = 1e-5);

struct WeightNormResult {
  std::vector<double> norms;           // pre-normalization L2 norm per row
  std::vector<std::uint8_t> zero_row;  // rows left unchanged because ||row|| == 0
};

// Scales each row of taps to unit L2 norm, in place. Zero rows are left
// unchanged and flagged.
WeightNormResult weight_norm(Matrix& taps);

struct FreqResponse {
  std::vector<double> freq_hz;
  std::vector<double> magnitude_db;  // re: peak, floored at -300 dB
};

// Magnitude response on n_points frequencies from 0 to frame_rate/2
// inclusive, evaluated from the taps (equivalent to a zero-padded DFT),
// in dB relative to the peak.
FreqResponse freq_response(const std::vector<double>& taps, double frame_rate, int n_points);
FreqResponse freq_response(double f1, double f2, int kernel_len, Window window,
                           double frame_rate, int n_points);

}  // namespace modfront
