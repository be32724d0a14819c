#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "modfront/errors.hpp"
#include "modfront/filterbank.hpp"
#include "modfront/modulation.hpp"
#include "oracles.hpp"

using namespace modfront;

namespace {

TimeFrequencyMap random_map(Rng& rng, std::size_t bands, std::size_t frames,
                            double frame_rate = 1600.0) {
  TimeFrequencyMap map;
  map.frame_rate = frame_rate;
  map.values = Matrix(bands, frames);
  for (auto& v : map.values.data) v = rng.uniform(-1.0, 1.0);
  map.band_hz.assign(bands, {0.0, frame_rate / 2.0});
  return map;
}

std::size_t first_nonzero(const Matrix& m, std::size_t row) {
  for (std::size_t c = 0; c < m.cols; ++c)
    if (m(row, c) != 0.0) return c;
  return m.cols;
}

std::size_t last_nonzero(const Matrix& m, std::size_t row) {
  for (std::size_t c = m.cols; c-- > 0;)
    if (m(row, c) != 0.0) return c;
  return m.cols;
}

double channel_energy(const Tensor3& t, std::size_t m) {
  double acc = 0.0;
  for (std::size_t k = 0; k < t.d1; ++k)
    for (std::size_t j = 0; j < t.d2; ++j) acc += t(m, k, j) * t(m, k, j);
  return acc;
}

}  // namespace

TEST_CASE("hamming tap init places 25-tap bumps at the five slot offsets") {
  Matrix taps = hamming_fir_init(5, 128).fir_taps;
  REQUIRE(taps.rows == 5);
  REQUIRE(taps.cols == 128);
  const std::size_t expect_start[5] = {0, 25, 51, 76, 102};
  for (std::size_t m = 0; m < 5; ++m) {
    CHECK(first_nonzero(taps, m) == expect_start[m]);
    CHECK(last_nonzero(taps, m) == expect_start[m] + 24);
    std::size_t nonzero = 0;
    double peak = 0.0;
    for (std::size_t c = 0; c < 128; ++c) {
      if (taps(m, c) != 0.0) ++nonzero;
      peak = std::max(peak, taps(m, c));
    }
    CHECK(nonzero == 25);
    CHECK(peak == doctest::Approx(1.0).epsilon(1e-12));  // unit-peak window
  }
}

TEST_CASE("single hamming tap filter occupies the first slot") {
  Matrix taps = hamming_fir_init(1, 128).fir_taps;
  REQUIRE(taps.rows == 1);
  CHECK(first_nonzero(taps, 0) == 0);
  CHECK(last_nonzero(taps, 0) == 24);
}

TEST_CASE("hamming tap slots cycle with period five") {
  Matrix taps = hamming_fir_init(20, 128).fir_taps;
  for (std::size_t m = 5; m < 20; ++m)
    for (std::size_t c = 0; c < 128; ++c) CHECK(taps(m, c) == taps(m % 5, c));
}

TEST_CASE("hamming tap init rejects kernels shorter than the slot grid") {
  CHECK_THROWS_AS(hamming_fir_init(5, 9), ConfigError);
}

TEST_CASE("linear sinc init spaces band edges evenly in hertz") {
  std::vector<std::pair<double, double>> cut = linear_sinc_init(20, 1600.0, 0.0, 800.0).cutoffs;
  REQUIRE(cut.size() == 20);
  for (std::size_t m = 0; m < 20; ++m) {
    CHECK(cut[m].first * 1600.0 == doctest::Approx(40.0 * double(m)).epsilon(1e-12));
    CHECK(cut[m].second * 1600.0 == doctest::Approx(40.0 * double(m + 1)).epsilon(1e-12));
  }

  std::vector<std::pair<double, double>> five = linear_sinc_init(5, 1600.0, 0.0, 800.0).cutoffs;
  for (auto [f1, f2] : five) CHECK((f2 - f1) * 1600.0 == doctest::Approx(160.0).epsilon(1e-12));

  // default upper edge is the frame-rate Nyquist
  std::vector<std::pair<double, double>> dflt = linear_sinc_init(4, 1600.0).cutoffs;
  CHECK(dflt.back().second == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("linear sinc init rejects bad ranges") {
  CHECK_THROWS_AS(linear_sinc_init(4, 1600.0, 500.0, 400.0), ConfigError);
  CHECK_THROWS_AS(linear_sinc_init(4, 1600.0, 0.0, 801.0), ConfigError);
  CHECK_THROWS_AS(linear_sinc_init(0, 1600.0, 0.0, 800.0), ConfigError);
}

TEST_CASE("an impulse at the last tap copies the input rows") {
  Rng rng(31);
  TimeFrequencyMap map = random_map(rng, 3, 90);

  ModulationLayer layer;
  layer.variant = ModVariant::fir;
  layer.kernel_len = 16;
  layer.stride = 1;
  layer.frame_rate = map.frame_rate;
  layer.fir_taps = Matrix(1, 16);
  layer.fir_taps(0, 15) = 1.0;

  ModulationTensor out = mod_filter(map, layer);
  REQUIRE(out.values.d0 == 1);
  REQUIRE(out.values.d2 == 90 - 16 + 1);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t t = 0; t < out.values.d2; ++t) CHECK(out.values(0, k, t) == map.values(k, t));
}

TEST_CASE("default modulation geometry yields 50 frames from 7975") {
  Rng rng(37);
  TimeFrequencyMap map = random_map(rng, 2, 7975);
  ModulationLayer layer;
  layer.variant = ModVariant::sinc;
  layer.kernel_len = 128;
  layer.stride = 160;
  layer.frame_rate = 1600.0;
  layer.cutoffs = linear_sinc_init(3, 1600.0, 0.0, 800.0).cutoffs;
  ModulationTensor out = mod_filter(map, layer);
  CHECK(out.values.d0 == 3);
  CHECK(out.values.d1 == 2);
  CHECK(out.values.d2 == 50);
}

TEST_CASE("a 40 Hz amplitude modulation lands in the filter that covers 40 Hz") {
  // Envelope of a narrow noise band: slowly varying positive level (moving
  // average keeps it under ~8 Hz wide) amplitude-modulated at 40 Hz.
  Rng rng(41);
  const std::size_t frames = 6400;  // 4 s at 1600 Hz
  std::vector<double> slow(frames + 200);
  for (auto& v : slow) v = std::fabs(rng.gaussian());
  TimeFrequencyMap map;
  map.frame_rate = 1600.0;
  map.values = Matrix(1, frames);
  for (std::size_t t = 0; t < frames; ++t) {
    double u = 0.0;
    for (std::size_t j = 0; j < 200; ++j) u += slow[t + j];
    u = 0.5 + u / 200.0;
    map.values(0, t) = u * (1.0 + 0.9 * std::cos(2.0 * M_PI * 40.0 * double(t) / 1600.0));
  }
  map.band_hz.assign(1, {0.0, 800.0});

  ModulationLayer layer;
  layer.variant = ModVariant::sinc;
  layer.kernel_len = 128;
  layer.stride = 16;
  layer.frame_rate = 1600.0;
  layer.cutoffs = {{30.0 / 1600.0, 50.0 / 1600.0}, {300.0 / 1600.0, 400.0 / 1600.0}};

  ModulationTensor out = mod_filter(map, layer);
  double onband = channel_energy(out.values, 0);
  double offband = channel_energy(out.values, 1);
  CHECK(onband >= 10.0 * offband);
}

TEST_CASE("instance norm zeroes constant channels") {
  Tensor3 t(2, 3, 4);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < 4; ++j) {
      t(0, k, j) = 5.5;
      t(1, k, j) = -2.0;
    }
  instance_norm(t);
  for (double v : t.data) CHECK(v == 0.0);
}

TEST_CASE("instance norm standardizes a two-point channel") {
  Tensor3 t(1, 1, 2);
  t(0, 0, 0) = 0.0;
  t(0, 0, 1) = 2.0;
  instance_norm(t);
  CHECK(t(0, 0, 0) == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(t(0, 0, 1) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("instance norm output has zero mean and unit variance per channel") {
  Rng rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t m = 1 + rng.index(4), k = 1 + rng.index(6), frames = 8 + rng.index(40);
    Tensor3 t(m, k, frames);
    double scale = rng.uniform(0.5, 10.0), shift = rng.uniform(-5.0, 5.0);
    for (auto& v : t.data) v = shift + scale * rng.gaussian();
    instance_norm(t);
    const std::size_t per = k * frames;
    for (std::size_t c = 0; c < m; ++c) {
      double mean = 0.0;
      for (std::size_t k2 = 0; k2 < k; ++k2)
        for (std::size_t j = 0; j < frames; ++j) mean += t(c, k2, j);
      mean /= double(per);
      double var = 0.0;
      for (std::size_t k2 = 0; k2 < k; ++k2)
        for (std::size_t j = 0; j < frames; ++j)
          var += (t(c, k2, j) - mean) * (t(c, k2, j) - mean);
      var /= double(per);
      CHECK(std::fabs(mean) <= 1e-9);
      CHECK(std::fabs(var - 1.0) <= 1e-4);
    }
  }
}

TEST_CASE("weight norm scales rows to unit length and flags zero rows") {
  Matrix taps(3, 2);
  taps(0, 0) = 3.0;
  taps(0, 1) = 4.0;
  taps(1, 0) = 0.6;
  taps(1, 1) = 0.8;
  // row 2 stays all-zero
  WeightNormResult res = weight_norm(taps);
  CHECK(taps(0, 0) == 0.6);
  CHECK(taps(0, 1) == 0.8);
  CHECK(res.norms[0] == 5.0);
  CHECK(std::fabs(taps(1, 0) - 0.6) <= 1e-12);  // unit rows stay put
  CHECK(std::fabs(taps(1, 1) - 0.8) <= 1e-12);
  CHECK(taps(2, 0) == 0.0);
  CHECK_FALSE(res.zero_row[0]);
  CHECK(res.zero_row[2]);

  // idempotence
  Matrix again = taps;
  weight_norm(again);
  for (std::size_t i = 0; i < again.data.size(); ++i)
    CHECK(std::fabs(again.data[i] - taps.data[i]) <= 1e-12);
}

TEST_CASE("max pooling over 7975 frames with kernel 128 gives 62 outputs") {
  Rng rng(47);
  TimeFrequencyMap map = random_map(rng, 2, 7975);
  ModulationTensor out = max_pool_baseline(map, 128, 128);
  CHECK(out.values.d0 == 1);
  CHECK(out.values.d1 == 2);
  CHECK(out.values.d2 == 62);
}

TEST_CASE("max pooling maps constants to constants and ramps to window ends") {
  TimeFrequencyMap map;
  map.frame_rate = 100.0;
  map.values = Matrix(2, 40);
  for (std::size_t t = 0; t < 40; ++t) {
    map.values(0, t) = 3.25;
    map.values(1, t) = double(t);
  }
  map.band_hz.assign(2, {0.0, 50.0});
  ModulationTensor out = max_pool_baseline(map, 8, 8);
  REQUIRE(out.values.d2 == 5);
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK(out.values(0, 0, t) == 3.25);
    CHECK(out.values(0, 1, t) == double(8 * t + 7));
  }
}

TEST_CASE("max pooling commutes with relu") {
  Rng rng(53);
  TimeFrequencyMap map = random_map(rng, 3, 100);
  ModulationTensor pooled_raw = max_pool_baseline(map, 16, 4);
  rectify(pooled_raw.values, Rectifier::relu);

  TimeFrequencyMap pre = map;
  rectify(pre.values, Rectifier::relu);
  ModulationTensor pooled_pre = max_pool_baseline(pre, 16, 4);

  for (std::size_t i = 0; i < pooled_raw.values.data.size(); ++i)
    CHECK(pooled_raw.values.data[i] == pooled_pre.values.data[i]);
}

TEST_CASE("sinc variant output equals fir variant on materialized kernels") {
  Rng rng(59);
  TimeFrequencyMap map = random_map(rng, 4, 300);

  ModulationLayer sinc_layer;
  sinc_layer.variant = ModVariant::sinc;
  sinc_layer.kernel_len = 32;
  sinc_layer.stride = 7;
  sinc_layer.frame_rate = map.frame_rate;
  sinc_layer.cutoffs = linear_sinc_init(5, map.frame_rate, 10.0, 700.0).cutoffs;

  ModulationLayer fir_layer = sinc_layer;
  fir_layer.variant = ModVariant::fir;
  fir_layer.cutoffs.clear();
  fir_layer.fir_taps = Matrix(5, 32);
  for (std::size_t m = 0; m < 5; ++m) {
    std::vector<double> g = sinc_kernel(sinc_layer.cutoffs[m].first, sinc_layer.cutoffs[m].second,
                                        32, sinc_layer.window);
    std::copy(g.begin(), g.end(), fir_layer.fir_taps.data.begin() + long(m * 32));
  }

  ModulationTensor a = mod_filter(map, sinc_layer);
  ModulationTensor b = mod_filter(map, fir_layer);
  for (std::size_t i = 0; i < a.values.data.size(); ++i)
    CHECK(a.values.data[i] == b.values.data[i]);
}

TEST_CASE("modulation filtering shares weights across bands") {
  Rng rng(61);
  TimeFrequencyMap map = random_map(rng, 6, 200);
  ModulationLayer layer;
  layer.variant = ModVariant::sinc;
  layer.kernel_len = 24;
  layer.stride = 5;
  layer.frame_rate = map.frame_rate;
  layer.cutoffs = linear_sinc_init(3, map.frame_rate, 20.0, 600.0).cutoffs;

  ModulationTensor base = mod_filter(map, layer);

  std::vector<std::size_t> perm = {4, 0, 5, 2, 1, 3};
  TimeFrequencyMap permuted = map;
  for (std::size_t k = 0; k < 6; ++k)
    for (std::size_t t = 0; t < 200; ++t) permuted.values(k, t) = map.values(perm[k], t);

  ModulationTensor out = mod_filter(permuted, layer);
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t k = 0; k < 6; ++k)
      for (std::size_t t = 0; t < base.values.d2; ++t)
        CHECK(out.values(m, k, t) == base.values(m, perm[k], t));
}

TEST_CASE("strided modulation filtering equals subsampled stride-one output") {
  Rng rng(67);
  for (int trial = 0; trial < 5; ++trial) {
    TimeFrequencyMap map = random_map(rng, 3, 150);
    ModulationLayer layer;
    layer.variant = ModVariant::sinc;
    layer.kernel_len = 20;
    layer.stride = 1;
    layer.frame_rate = map.frame_rate;
    layer.cutoffs = linear_sinc_init(2, map.frame_rate, 30.0, 700.0).cutoffs;
    ModulationTensor dense = mod_filter(map, layer);

    int s = 2 + int(rng.index(7));
    layer.stride = s;
    ModulationTensor strided = mod_filter(map, layer);
    for (std::size_t m = 0; m < strided.values.d0; ++m)
      for (std::size_t k = 0; k < strided.values.d1; ++k)
        for (std::size_t t = 0; t < strided.values.d2; ++t)
          CHECK(strided.values(m, k, t) == dense.values(m, k, t * std::size_t(s)));
  }
}

TEST_CASE("modulation filtering rejects short input and frame-rate mismatch") {
  Rng rng(71);
  TimeFrequencyMap map = random_map(rng, 2, 30);
  ModulationLayer layer;
  layer.variant = ModVariant::sinc;
  layer.kernel_len = 31;
  layer.stride = 1;
  layer.frame_rate = map.frame_rate;
  layer.cutoffs = linear_sinc_init(1, map.frame_rate, 10.0, 700.0).cutoffs;

  TimeFrequencyMap short_map = random_map(rng, 2, 30);
  layer.kernel_len = 30;
  CHECK_NOTHROW(mod_filter(short_map, layer));
  layer.kernel_len = 31;
  CHECK_THROWS_AS(mod_filter(short_map, layer), ConfigError);

  layer.kernel_len = 8;
  layer.frame_rate = map.frame_rate * 2.0;
  CHECK_THROWS_AS(mod_filter(map, layer), ConfigError);
}

TEST_CASE("frequency response of an impulse is flat") {
  std::vector<double> taps(16, 0.0);
  taps[5] = 1.0;
  FreqResponse fr = freq_response(taps, 1600.0, 128);
  REQUIRE(fr.freq_hz.size() == 128);
  CHECK(fr.freq_hz.front() == 0.0);
  CHECK(fr.freq_hz.back() == doctest::Approx(800.0));
  for (double db : fr.magnitude_db) CHECK(std::fabs(db) <= 1e-9);
}

TEST_CASE("frequency response of a sinc band peaks inside the band") {
  FreqResponse fr =
      freq_response(60.0 / 1600.0, 220.0 / 1600.0, 128, Window::hamming, 1600.0, 512);
  std::size_t peak = 0;
  for (std::size_t i = 1; i < fr.magnitude_db.size(); ++i)
    if (fr.magnitude_db[i] > fr.magnitude_db[peak]) peak = i;
  CHECK(fr.freq_hz[peak] > 60.0);
  CHECK(fr.freq_hz[peak] < 220.0);
  CHECK(fr.magnitude_db[peak] == 0.0);  // dB relative to maximum
}

TEST_CASE("moving average response has its first null at frame rate over length") {
  std::vector<double> taps(128, 1.0 / 128.0);
  FreqResponse fr = freq_response(taps, 1600.0, 257);
  // grid step 800/256 = 3.125 Hz puts 1600/128 = 12.5 Hz exactly on a point
  std::size_t null_idx = 4;
  REQUIRE(fr.freq_hz[null_idx] == doctest::Approx(12.5).epsilon(1e-12));
  CHECK(fr.magnitude_db[null_idx] <= -100.0);
  CHECK(fr.magnitude_db[null_idx - 1] >= -40.0);  // genuinely the first null
  CHECK(fr.magnitude_db[null_idx + 1] >= -40.0);
}
