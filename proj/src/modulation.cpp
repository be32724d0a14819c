#include "modfront/modulation.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "modfront/errors.hpp"

namespace modfront {

std::vector<double> ModulationLayer::materialize(std::size_t m) const {
  if (variant == ModVariant::fir) {
    const double* row = &fir_taps(m, 0);
    return std::vector<double>(row, row + fir_taps.cols);
  }
  return sinc_kernel(cutoffs[m].first, cutoffs[m].second, kernel_len, window);
}

ModulationLayer hamming_fir_init(int num_filters, int kernel_len, double frame_rate, int stride,
                                 Window window) {
  if (num_filters < 1) throw ConfigError("hamming_fir_init: num_filters must be >= 1");
  if (kernel_len < 10) {
    throw ConfigError("hamming_fir_init: kernel_len must be >= 10 to fit 5 slots, got " +
                      std::to_string(kernel_len));
  }

  ModulationLayer layer;
  layer.variant = ModVariant::fir;
  layer.kernel_len = kernel_len;
  layer.stride = stride;
  layer.frame_rate = frame_rate;
  layer.window = window;
  layer.fir_taps = Matrix(static_cast<std::size_t>(num_filters),
                          static_cast<std::size_t>(kernel_len));

  const int slot_len = kernel_len / 5;
  const std::vector<double> bump = hamming_window(slot_len);
  for (int m = 0; m < num_filters; ++m) {
    const int slot = m % 5;
    const int start = slot * kernel_len / 5;
    for (int i = 0; i < slot_len; ++i) layer.fir_taps(m, start + i) = bump[i];
  }
  return layer;
}

ModulationLayer linear_sinc_init(int num_filters, double frame_rate, double f_lo_hz,
                                 double f_hi_hz, int kernel_len, int stride, Window window) {
  if (num_filters < 1) throw ConfigError("linear_sinc_init: num_filters must be >= 1");
  if (frame_rate <= 0.0) throw ConfigError("linear_sinc_init: frame_rate must be positive");
  const double nyquist = frame_rate / 2.0;
  if (f_hi_hz < 0.0) f_hi_hz = nyquist;
  if (f_lo_hz < 0.0 || f_lo_hz >= f_hi_hz || f_hi_hz > nyquist) {
    throw ConfigError("linear_sinc_init: need 0 <= f_lo < f_hi <= frame_rate/2");
  }

  ModulationLayer layer;
  layer.variant = ModVariant::sinc;
  layer.kernel_len = kernel_len;
  layer.stride = stride;
  layer.frame_rate = frame_rate;
  layer.window = window;
  layer.cutoffs.reserve(static_cast<std::size_t>(num_filters));
  const double width = (f_hi_hz - f_lo_hz) / num_filters;
  for (int m = 0; m < num_filters; ++m) {
    const double lo = f_lo_hz + m * width;
    const double hi = f_lo_hz + (m + 1) * width;
    layer.cutoffs.emplace_back(lo / frame_rate, hi / frame_rate);
  }
  return layer;
}

namespace {

void check_mod_input(const TimeFrequencyMap& map, int kernel_len, double layer_rate) {
  if (map.values.rows == 0 || map.values.cols == 0) {
    throw ConfigError("mod_filter: empty time-frequency map");
  }
  if (map.values.cols < static_cast<std::size_t>(kernel_len)) {
    throw ConfigError("mod_filter: map with " + std::to_string(map.values.cols) +
                      " frames is shorter than the " + std::to_string(kernel_len) +
                      "-tap kernel");
  }
  if (layer_rate > 0.0 && map.frame_rate > 0.0) {
    const double rel = std::abs(layer_rate - map.frame_rate) / map.frame_rate;
    if (rel > 1e-9) {
      throw ConfigError("mod_filter: layer built for " + std::to_string(layer_rate) +
                        " Hz frames, map is at " + std::to_string(map.frame_rate) + " Hz");
    }
  }
}

}  // namespace

ModulationTensor mod_filter(const TimeFrequencyMap& map, const ModulationLayer& layer) {
  check_mod_input(map, layer.kernel_len, layer.frame_rate);
  const std::size_t num_filters = layer.num_filters();
  if (num_filters == 0) throw ConfigError("mod_filter: empty modulation layer");

  const int kl = layer.kernel_len;
  const int stride = layer.stride;
  const std::size_t bands = map.values.rows;
  const std::size_t frames = strided_frames(map.values.cols, kl, stride);

  ModulationTensor out;
  out.values = Tensor3(num_filters, bands, frames);
  out.frame_rate = map.frame_rate / stride;
  out.meta.reserve(num_filters);

  std::vector<double> flipped(static_cast<std::size_t>(kl));
  for (std::size_t m = 0; m < num_filters; ++m) {
    ModFilterInfo info;
    info.index = static_cast<int>(m);
    info.variant = layer.variant;
    if (layer.variant == ModVariant::sinc) {
      info.f1_hz = layer.cutoffs[m].first * layer.frame_rate;
      info.f2_hz = layer.cutoffs[m].second * layer.frame_rate;
      info.center_hz = 0.5 * (info.f1_hz + info.f2_hz);
    } else {
      info.f1_hz = info.f2_hz = info.center_hz = std::numeric_limits<double>::quiet_NaN();
    }
    out.meta.push_back(info);

    const std::vector<double> taps = layer.materialize(m);
    for (int n = 0; n < kl; ++n) flipped[n] = taps[kl - 1 - n];

    for (std::size_t k = 0; k < bands; ++k) {
      const double* in = &map.values(k, 0);
      double* dst = &out.values(m, k, 0);
      for (std::size_t t = 0; t < frames; ++t) {
        const double* seg = in + t * static_cast<std::size_t>(stride);
        double acc = 0.0;
        for (int n = 0; n < kl; ++n) acc += seg[n] * flipped[n];
        dst[t] = acc;
      }
    }
  }
  return out;
}

ModulationTensor max_pool_baseline(const TimeFrequencyMap& map, int kernel_len, int stride,
                                   Matrix* argmax) {
  check_mod_input(map, kernel_len, 0.0);
  const std::size_t bands = map.values.rows;
  const std::size_t frames = strided_frames(map.values.cols, kernel_len, stride);

  ModulationTensor out;
  out.values = Tensor3(1, bands, frames);
  out.frame_rate = map.frame_rate / stride;
  ModFilterInfo info;
  info.index = 0;
  info.variant = ModVariant::fir;
  info.f1_hz = info.f2_hz = info.center_hz = std::numeric_limits<double>::quiet_NaN();
  out.meta.push_back(info);
  if (argmax != nullptr) *argmax = Matrix(bands, frames);

  for (std::size_t k = 0; k < bands; ++k) {
    const double* in = &map.values(k, 0);
    for (std::size_t t = 0; t < frames; ++t) {
      const std::size_t base = t * static_cast<std::size_t>(stride);
      double best = in[base];
      std::size_t best_n = 0;
      for (int n = 1; n < kernel_len; ++n) {
        if (in[base + n] > best) {  // first maximum wins on ties
          best = in[base + n];
          best_n = static_cast<std::size_t>(n);
        }
      }
      out.values(0, k, t) = best;
      if (argmax != nullptr) (*argmax)(k, t) = static_cast<double>(base + best_n);
    }
  }
  return out;
}

InstanceNormStats instance_norm(Tensor3& values, double epsilon) {
  if (values.empty()) throw ConfigError("instance_norm: empty tensor");
  if (!(epsilon > 0.0)) throw ConfigError("instance_norm: epsilon must be positive");

  const std::size_t channels = values.d0;
  const std::size_t n = values.d1 * values.d2;
  InstanceNormStats stats;
  stats.mean.resize(channels);
  stats.inv_std.resize(channels);

  for (std::size_t m = 0; m < channels; ++m) {
    double* p = &values(m, 0, 0);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += p[i];
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = p[i] - mean;
      sq += d * d;
    }
    const double inv_std = 1.0 / std::sqrt(sq / static_cast<double>(n) + epsilon);
    for (std::size_t i = 0; i < n; ++i) p[i] = (p[i] - mean) * inv_std;
    stats.mean[m] = mean;
    stats.inv_std[m] = inv_std;
  }
  return stats;
}

WeightNormResult weight_norm(Matrix& taps) {
  WeightNormResult res;
  res.norms.resize(taps.rows);
  res.zero_row.assign(taps.rows, 0);
  for (std::size_t m = 0; m < taps.rows; ++m) {
    double* row = &taps(m, 0);
    double sq = 0.0;
    for (std::size_t i = 0; i < taps.cols; ++i) sq += row[i] * row[i];
    const double norm = std::sqrt(sq);
    res.norms[m] = norm;
    if (norm == 0.0) {
      res.zero_row[m] = 1;
      continue;
    }
    for (std::size_t i = 0; i < taps.cols; ++i) row[i] /= norm;
  }
  return res;
}

FreqResponse freq_response(const std::vector<double>& taps, double frame_rate, int n_points) {
  if (taps.empty()) throw ConfigError("freq_response: empty taps");
  if (frame_rate <= 0.0) throw ConfigError("freq_response: frame_rate must be positive");
  if (n_points < 64) throw ConfigError("freq_response: n_points must be >= 64");

  constexpr double kTwoPi = 6.283185307179586476925287;
  FreqResponse r;
  r.freq_hz.resize(static_cast<std::size_t>(n_points));
  r.magnitude_db.resize(static_cast<std::size_t>(n_points));

  std::vector<double> mag(static_cast<std::size_t>(n_points));
  double peak = 0.0;
  for (int i = 0; i < n_points; ++i) {
    const double norm_freq = 0.5 * i / (n_points - 1);  // cycles/frame
    double re = 0.0, im = 0.0;
    for (std::size_t n = 0; n < taps.size(); ++n) {
      const double phase = kTwoPi * norm_freq * static_cast<double>(n);
      re += taps[n] * std::cos(phase);
      im -= taps[n] * std::sin(phase);
    }
    mag[i] = std::hypot(re, im);
    peak = std::max(peak, mag[i]);
    r.freq_hz[i] = norm_freq * frame_rate;
  }
  if (peak == 0.0) throw NumericError("freq_response: all-zero taps have no peak to reference");
  for (int i = 0; i < n_points; ++i) {
    const double rel = mag[i] / peak;
    r.magnitude_db[i] = rel > 1e-15 ? 20.0 * std::log10(rel) : -300.0;
  }
  return r;
}

FreqResponse freq_response(double f1, double f2, int kernel_len, Window window,
                           double frame_rate, int n_points) {
  return freq_response(sinc_kernel(f1, f2, kernel_len, window), frame_rate, n_points);
}

}  // namespace modfront
