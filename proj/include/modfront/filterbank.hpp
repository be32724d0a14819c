#pragma once

#include <utility>
#include <vector>

#include "modfront/core.hpp"

namespace modfront {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;  // Hz

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

enum class Window { none, hamming };

enum class Rectifier { relu, abs_squared, none };

// Bank of sinc band-pass FIR filters applied as a strided convolution.
// Cutoffs are normalized frequencies in cycles/sample, so Nyquist is 0.5
// regardless of sample rate; sample_rate is carried only for Hz conversion
// at API boundaries.
struct SincFilterBank {
  std::vector<std::pair<double, double>> cutoffs;  // (f1, f2), 0 <= f1 <= f2 <= 0.5
  int kernel_len = 256;
  int stride = 10;
  Window window = Window::hamming;
  int sample_rate = 16000;

  std::size_t num_filters() const { return cutoffs.size(); }
  double frame_rate() const { return static_cast<double>(sample_rate) / stride; }
};

struct TimeFrequencyMap {
  Matrix values;          // num_filters x num_frames
  double frame_rate = 0;  // Hz
  std::vector<std::pair<double, double>> band_hz;  // per-band (f1, f2) in Hz
};

double mel_from_hz(double hz);
double hz_from_mel(double mel);

// Band-pass bank with edges equally spaced on the mel scale between f_min_hz
// and f_max_hz (f_max_hz <= 0 selects Nyquist). With K filters the grid has
// K+1 edges; filter k spans [edge_k, edge_{k+2}], i.e. adjacent bands overlap
// by one edge. The top filter's upper edge continues the grid one step past
// f_max and is clipped to Nyquist.
SincFilterBank mel_init(int num_filters, int sample_rate, double f_min_hz = 30.0,
                        double f_max_hz = 0.0, int kernel_len = 256, int stride = 10,
                        Window window = Window::hamming);

// Band-pass kernel g[n] = 2*f2*sinc(2*pi*f2*t) - 2*f1*sinc(2*pi*f1*t) with
// sinc(x) = sin(x)/x, sinc(0) = 1 and t = n - (kernel_len-1)/2. The center
// falls on a half-integer for even lengths, which keeps the kernel exactly
// symmetric (linear phase). f1 == f2 is allowed and yields the zero kernel;
// f1 > f2 is an error.
std::vector<double> sinc_kernel(double f1, double f2, int kernel_len, Window window);

// Valid-mode strided convolution of x with every filter in the bank (kernels
// are applied time-reversed). Output frame count is
// floor((len - kernel_len) / stride) + 1; inputs shorter than one kernel are
// an error.
TimeFrequencyMap tf_decompose(const Waveform& x, const SincFilterBank& bank);

void rectify(std::vector<double>& v, Rectifier mode);
void rectify(Matrix& m, Rectifier mode);
void rectify(Tensor3& t, Rectifier mode);

}  // namespace modfront
