#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "modfront/errors.hpp"
#include "modfront/filterbank.hpp"
#include "oracles.hpp"

using namespace modfront;

namespace {

double mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

double row_rms(const Matrix& m, std::size_t r) {
  double acc = 0.0;
  for (std::size_t c = 0; c < m.cols; ++c) acc += m(r, c) * m(r, c);
  return std::sqrt(acc / double(m.cols));
}

}  // namespace

TEST_CASE("sinc kernel with equal cutoffs is identically zero") {
  for (int len : {17, 256}) {
    std::vector<double> g = sinc_kernel(0.1, 0.1, len, Window::none);
    REQUIRE(g.size() == std::size_t(len));
    for (double v : g) CHECK(v == 0.0);
  }
}

TEST_CASE("sinc kernel center tap equals twice the bandwidth") {
  std::vector<double> g = sinc_kernel(0.0, 0.25, 257, Window::none);
  CHECK(g[128] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("sinc kernel is symmetric about its center for even and odd lengths") {
  Rng rng(11);
  for (int len : {255, 256}) {
    for (auto window : {Window::none, Window::hamming}) {
      for (int trial = 0; trial < 8; ++trial) {
        double f1 = rng.uniform(0.0, 0.4);
        double f2 = f1 + rng.uniform(0.01, 0.5 - f1 - 0.01);
        std::vector<double> g = sinc_kernel(f1, f2, len, window);
        for (int n = 0; n < len; ++n)
          CHECK(std::fabs(g[std::size_t(n)] - g[std::size_t(len - 1 - n)]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("windowed band 0.05-0.15 passes its band and rejects past the margins") {
  std::vector<double> g = sinc_kernel(0.05, 0.15, 256, Window::hamming);
  std::vector<double> mag = oracle::dft_mag(g, 4096);
  double peak = *std::max_element(mag.begin(), mag.end());
  REQUIRE(peak > 0.0);
  for (std::size_t k = 0; k < mag.size(); ++k) {
    double f = double(k) / 4096.0;
    double db = 20.0 * std::log10(mag[k] / peak);
    if (f > 0.06 && f < 0.14) CHECK(db >= -3.0);
    if (f < 0.03 || f > 0.17) CHECK(db <= -20.0);
  }
}

TEST_CASE("sinc kernel rejects inverted or out-of-range cutoffs") {
  CHECK_THROWS_AS(sinc_kernel(0.3, 0.2, 64, Window::none), ConfigError);
  CHECK_THROWS_AS(sinc_kernel(-0.01, 0.2, 64, Window::none), ConfigError);
  CHECK_THROWS_AS(sinc_kernel(0.1, 0.51, 64, Window::none), ConfigError);
}

TEST_CASE("single mel filter spans the full requested range") {
  SincFilterBank bank = mel_init(1, 16000, 0.0, 8000.0);
  REQUIRE(bank.num_filters() == 1);
  CHECK(bank.cutoffs[0].first == 0.0);
  CHECK(bank.cutoffs[0].second == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("mel bank edges match the mel formula evaluated directly") {
  const int k_filters = 80;
  SincFilterBank bank = mel_init(k_filters, 16000, 30.0, 8000.0);
  REQUIRE(bank.num_filters() == k_filters);

  double m_lo = mel(30.0), m_hi = mel(8000.0);
  double step = (m_hi - m_lo) / k_filters;
  for (int k = 0; k < k_filters; ++k) {
    double lo_hz = mel_to_hz(m_lo + k * step);
    double hi_hz = std::min(mel_to_hz(m_lo + (k + 2) * step), 8000.0);
    CHECK(bank.cutoffs[std::size_t(k)].first * 16000.0 == doctest::Approx(lo_hz).epsilon(1e-9));
    CHECK(bank.cutoffs[std::size_t(k)].second * 16000.0 == doctest::Approx(hi_hz).epsilon(1e-9));
  }
  CHECK(bank.cutoffs[0].first * 16000.0 == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(bank.cutoffs[79].second == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("mel bank always satisfies the cutoff ordering invariant") {
  for (int k : {1, 2, 7, 80}) {
    SincFilterBank bank = mel_init(k, 16000, 30.0, 8000.0);
    for (auto [f1, f2] : bank.cutoffs) {
      CHECK(f1 >= 0.0);
      CHECK(f1 < f2);
      CHECK(f2 <= 0.5);
    }
  }
}

TEST_CASE("mel init rejects bad frequency ranges") {
  CHECK_THROWS_AS(mel_init(8, 16000, 4000.0, 4000.0), ConfigError);
  CHECK_THROWS_AS(mel_init(8, 16000, 5000.0, 4000.0), ConfigError);
  CHECK_THROWS_AS(mel_init(8, 16000, 30.0, 8001.0), ConfigError);
  CHECK_THROWS_AS(mel_init(0, 16000, 30.0, 8000.0), ConfigError);
}

TEST_CASE("unit impulse input recovers each kernel through the convolution") {
  SincFilterBank bank = mel_init(3, 8000, 100.0, 3000.0);
  bank.kernel_len = 64;
  bank.stride = 1;

  Waveform x;
  x.sample_rate = 8000;
  x.samples.assign(160, 0.0);
  x.samples[63] = 1.0;  // impulse at kernel_len - 1

  TimeFrequencyMap map = tf_decompose(x, bank);
  REQUIRE(map.values.cols == 160 - 64 + 1);
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> g =
        sinc_kernel(bank.cutoffs[k].first, bank.cutoffs[k].second, 64, bank.window);
    for (std::size_t t = 0; t < map.values.cols; ++t) {
      double expect = t < 64 ? g[t] : 0.0;
      CHECK(map.values(k, t) == expect);
    }
  }
}

TEST_CASE("default geometry yields 7975 frames at 1600 Hz from five seconds") {
  SincFilterBank bank = mel_init(4, 16000, 30.0, 8000.0);
  REQUIRE(bank.kernel_len == 256);
  REQUIRE(bank.stride == 10);
  Rng rng(3);
  Waveform x = oracle::random_waveform(rng, 80000, 16000);
  TimeFrequencyMap map = tf_decompose(x, bank);
  CHECK(map.values.rows == 4);
  CHECK(map.values.cols == 7975);
  CHECK(map.frame_rate == doctest::Approx(1600.0));
}

TEST_CASE("a tone dominates the band containing it by 10 dB over excluding bands") {
  SincFilterBank bank = mel_init(16, 16000, 100.0, 6000.0);
  bank.kernel_len = 512;  // sharper transitions so edge bands genuinely exclude
  const std::size_t target = 7;
  double center_hz =
      0.5 * (bank.cutoffs[target].first + bank.cutoffs[target].second) * 16000.0;

  Waveform x;
  x.sample_rate = 16000;
  x.samples.resize(16000);
  for (std::size_t n = 0; n < x.samples.size(); ++n)
    x.samples[n] = std::sin(2.0 * M_PI * center_hz * double(n) / 16000.0);

  TimeFrequencyMap map = tf_decompose(x, bank);
  double target_rms = row_rms(map.values, target);
  std::size_t best = 0;
  for (std::size_t k = 1; k < map.values.rows; ++k)
    if (row_rms(map.values, k) > row_rms(map.values, best)) best = k;

  // The loudest band must contain the tone; bands excluding it sit >= 10 dB
  // below the target band.
  CHECK(bank.cutoffs[best].first * 16000.0 <= center_hz);
  CHECK(bank.cutoffs[best].second * 16000.0 >= center_hz);
  for (std::size_t k = 0; k < map.values.rows; ++k) {
    bool contains = bank.cutoffs[k].first * 16000.0 <= center_hz &&
                    bank.cutoffs[k].second * 16000.0 >= center_hz;
    if (!contains) CHECK(target_rms / row_rms(map.values, k) >= std::pow(10.0, 0.5));
  }
}

TEST_CASE("decomposition is linear in its input") {
  SincFilterBank bank = mel_init(5, 8000, 50.0, 3500.0);
  bank.kernel_len = 96;
  bank.stride = 3;
  Rng rng(17);
  Waveform x1 = oracle::random_waveform(rng, 1000, 8000);
  Waveform x2 = oracle::random_waveform(rng, 1000, 8000);
  const double a = 0.7, b = -1.3;
  Waveform mix;
  mix.sample_rate = 8000;
  mix.samples.resize(1000);
  for (std::size_t n = 0; n < 1000; ++n) mix.samples[n] = a * x1.samples[n] + b * x2.samples[n];

  Matrix lhs = tf_decompose(mix, bank).values;
  Matrix m1 = tf_decompose(x1, bank).values;
  Matrix m2 = tf_decompose(x2, bank).values;
  for (std::size_t i = 0; i < lhs.data.size(); ++i) {
    double rhs = a * m1.data[i] + b * m2.data[i];
    double denom = std::max({std::fabs(lhs.data[i]), std::fabs(rhs), 1.0});
    CHECK(std::fabs(lhs.data[i] - rhs) / denom <= 1e-9);
  }
}

TEST_CASE("strided decomposition equals subsampled stride-one output exactly") {
  Rng rng(23);
  for (int trial = 0; trial < 6; ++trial) {
    SincFilterBank bank = mel_init(3, 8000, 100.0, 3000.0);
    bank.kernel_len = 48;
    bank.stride = 1;
    Waveform x = oracle::random_waveform(rng, 400, 8000);
    Matrix dense = tf_decompose(x, bank).values;

    int s = 2 + int(rng.index(6));
    bank.stride = s;
    Matrix strided = tf_decompose(x, bank).values;
    REQUIRE(strided.cols == (400 - 48) / std::size_t(s) + 1);
    for (std::size_t k = 0; k < strided.rows; ++k)
      for (std::size_t t = 0; t < strided.cols; ++t)
        CHECK(strided(k, t) == dense(k, t * std::size_t(s)));
  }
}

TEST_CASE("input shorter than the kernel is rejected") {
  SincFilterBank bank = mel_init(2, 8000, 100.0, 3000.0);
  bank.kernel_len = 64;
  Waveform x;
  x.sample_rate = 8000;
  x.samples.assign(63, 0.0);
  CHECK_THROWS_AS(tf_decompose(x, bank), ConfigError);
}

TEST_CASE("rectifier modes compute relu, square, and identity") {
  std::vector<double> relu_in = {-1.0, 0.0, 2.0};
  rectify(relu_in, Rectifier::relu);
  CHECK(relu_in == std::vector<double>{0.0, 0.0, 2.0});

  std::vector<double> sq_in = {-3.0, 0.5};
  rectify(sq_in, Rectifier::abs_squared);
  CHECK(sq_in == std::vector<double>{9.0, 0.25});

  Rng rng(5);
  std::vector<double> noop(64);
  for (auto& v : noop) v = rng.uniform(-2.0, 2.0);
  std::vector<double> copy = noop;
  rectify(noop, Rectifier::none);
  CHECK(noop == copy);
}
