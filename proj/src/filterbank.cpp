#include "modfront/filterbank.hpp"

#include <cmath>
#include <string>

#include "modfront/errors.hpp"

namespace modfront {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

double mel_from_hz(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double hz_from_mel(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

SincFilterBank mel_init(int num_filters, int sample_rate, double f_min_hz, double f_max_hz,
                        int kernel_len, int stride, Window window) {
  if (num_filters < 1) throw ConfigError("mel_init: num_filters must be >= 1");
  if (sample_rate < 1) throw ConfigError("mel_init: sample_rate must be positive");
  if (kernel_len < 2) throw ConfigError("mel_init: kernel_len must be >= 2");
  if (stride < 1) throw ConfigError("mel_init: stride must be >= 1");
  const double nyquist = sample_rate / 2.0;
  if (f_max_hz <= 0.0) f_max_hz = nyquist;
  if (f_min_hz < 0.0 || f_min_hz >= f_max_hz || f_max_hz > nyquist) {
    throw ConfigError("mel_init: need 0 <= f_min < f_max <= Nyquist, got [" + fmt(f_min_hz) +
                      ", " + fmt(f_max_hz) + "] Hz at " + std::to_string(sample_rate) + " Hz");
  }

  const double m_lo = mel_from_hz(f_min_hz);
  const double m_step = (mel_from_hz(f_max_hz) - m_lo) / num_filters;

  SincFilterBank bank;
  bank.kernel_len = kernel_len;
  bank.stride = stride;
  bank.window = window;
  bank.sample_rate = sample_rate;
  bank.cutoffs.reserve(static_cast<std::size_t>(num_filters));
  for (int k = 0; k < num_filters; ++k) {
    double lo_hz = hz_from_mel(m_lo + k * m_step);
    double hi_hz = std::min(hz_from_mel(m_lo + (k + 2) * m_step), nyquist);
    bank.cutoffs.emplace_back(lo_hz / sample_rate, hi_hz / sample_rate);
  }
  return bank;
}

std::vector<double> sinc_kernel(double f1, double f2, int kernel_len, Window window) {
  if (kernel_len < 1) throw ConfigError("sinc_kernel: kernel_len must be >= 1");
  if (!(f1 >= 0.0) || !(f2 <= 0.5) || f1 > f2) {
    throw ConfigError("sinc_kernel: need 0 <= f1 <= f2 <= 0.5, got (" + fmt(f1) + ", " +
                      fmt(f2) + ")");
  }

  std::vector<double> g(static_cast<std::size_t>(kernel_len));
  const double center = (kernel_len - 1) / 2.0;
  for (int n = 0; n < kernel_len; ++n) {
    const double t = n - center;
    g[n] = 2.0 * f2 * sinc(kTwoPi * f2 * t) - 2.0 * f1 * sinc(kTwoPi * f1 * t);
  }
  if (window == Window::hamming) {
    const std::vector<double> w = hamming_window(kernel_len);
    for (int n = 0; n < kernel_len; ++n) g[n] *= w[n];
  }
  return g;
}

TimeFrequencyMap tf_decompose(const Waveform& x, const SincFilterBank& bank) {
  const std::size_t len = x.samples.size();
  const int kl = bank.kernel_len;
  const int stride = bank.stride;
  if (len < static_cast<std::size_t>(kl)) {
    throw ConfigError("tf_decompose: input of " + std::to_string(len) +
                      " samples is shorter than the " + std::to_string(kl) + "-tap kernel");
  }
  if (bank.cutoffs.empty()) throw ConfigError("tf_decompose: empty filter bank");

  const std::size_t frames = strided_frames(len, kl, stride);
  const std::size_t num_filters = bank.num_filters();

  TimeFrequencyMap map;
  map.values = Matrix(num_filters, frames);
  map.frame_rate = static_cast<double>(x.sample_rate) / stride;
  map.band_hz.reserve(num_filters);

  std::vector<double> flipped(static_cast<std::size_t>(kl));
  const double* in = x.samples.data();
  for (std::size_t k = 0; k < num_filters; ++k) {
    const auto [f1, f2] = bank.cutoffs[k];
    map.band_hz.emplace_back(f1 * x.sample_rate, f2 * x.sample_rate);
    const std::vector<double> g = sinc_kernel(f1, f2, kl, bank.window);
    for (int n = 0; n < kl; ++n) flipped[n] = g[kl - 1 - n];

    double* out = &map.values(k, 0);
    for (std::size_t t = 0; t < frames; ++t) {
      const double* seg = in + t * static_cast<std::size_t>(stride);
      double acc = 0.0;
      for (int n = 0; n < kl; ++n) acc += seg[n] * flipped[n];
      out[t] = acc;
    }
  }
  return map;
}

void rectify(std::vector<double>& v, Rectifier mode) {
  switch (mode) {
    case Rectifier::relu:
      for (double& x : v) x = x > 0.0 ? x : 0.0;
      break;
    case Rectifier::abs_squared:
      for (double& x : v) x = x * x;
      break;
    case Rectifier::none:
      break;
  }
}

void rectify(Matrix& m, Rectifier mode) { rectify(m.data, mode); }

void rectify(Tensor3& t, Rectifier mode) { rectify(t.data, mode); }

}  // namespace modfront
