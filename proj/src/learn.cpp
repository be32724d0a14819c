#include "modfront/learn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "modfront/errors.hpp"
#include "modfront/metrics.hpp"

namespace modfront {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;
constexpr double kMinBandwidth = 1e-4;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::uint64_t params_digest(const ParamVector& p) {
  const std::vector<double> flat = p.flatten();
  return fnv1a64(flat.data(), flat.size() * sizeof(double));
}

void check_params_shape(const ParamVector& p, const PipelineConfig& cfg) {
  const std::size_t k2 = 2 * static_cast<std::size_t>(cfg.num_tf_filters);
  bool ok = p.tf_cutoffs.size() == k2 &&
            p.head_w.rows == static_cast<std::size_t>(cfg.num_classes) &&
            p.head_w.cols == static_cast<std::size_t>(cfg.feature_dim()) &&
            p.head_b.size() == static_cast<std::size_t>(cfg.num_classes);
  if (cfg.max_pool) {
    ok = ok && p.mod_taps.empty() && p.mod_cutoffs.empty();
  } else if (cfg.mod_variant == ModVariant::fir) {
    ok = ok && p.mod_taps.rows == static_cast<std::size_t>(cfg.num_mod_filters) &&
         p.mod_taps.cols == static_cast<std::size_t>(cfg.mod_kernel_len) &&
         p.mod_cutoffs.empty();
  } else {
    ok = ok && p.mod_cutoffs.size() == 2 * static_cast<std::size_t>(cfg.num_mod_filters) &&
         p.mod_taps.empty();
  }
  if (!ok) throw InternalError("parameters do not match the pipeline configuration");
}

// In place: upstream[i] *= d rectify / d input, evaluated at the pre-activation.
void apply_rectifier_grad(std::vector<double>& upstream, const std::vector<double>& pre,
                          Rectifier mode) {
  switch (mode) {
    case Rectifier::relu:
      for (std::size_t i = 0; i < upstream.size(); ++i) {
        if (!(pre[i] > 0.0)) upstream[i] = 0.0;
      }
      break;
    case Rectifier::abs_squared:
      for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] *= 2.0 * pre[i];
      break;
    case Rectifier::none:
      break;
  }
}

// Chain from a kernel gradient to the cutoff pair. With t = n - (len-1)/2 and
// window w, the kernel is (2 f2 sinc(2 pi f2 t) - 2 f1 sinc(2 pi f1 t)) w[n],
// whose cutoff derivatives collapse to cosines:
//   d/d f2 = 2 cos(2 pi f2 t) w[n],  d/d f1 = -2 cos(2 pi f1 t) w[n].
void accumulate_cutoff_grad(const std::vector<double>& dkernel, double f1, double f2,
                            Window window, double& df1, double& df2) {
  const int len = static_cast<int>(dkernel.size());
  const double center = (len - 1) / 2.0;
  const std::vector<double> w =
      window == Window::hamming ? hamming_window(len) : std::vector<double>(len, 1.0);
  double a1 = 0.0, a2 = 0.0;
  for (int n = 0; n < len; ++n) {
    const double t = n - center;
    a2 += dkernel[n] * 2.0 * std::cos(kTwoPi * f2 * t) * w[n];
    a1 -= dkernel[n] * 2.0 * std::cos(kTwoPi * f1 * t) * w[n];
  }
  df1 += a1;
  df2 += a2;
}

void project_pairs(std::vector<double>& cutoffs) {
  for (std::size_t i = 0; i + 1 < cutoffs.size(); i += 2) {
    const double f1 = clampd(std::abs(cutoffs[i]), 0.0, 0.5 - kMinBandwidth);
    cutoffs[i] = f1;
    cutoffs[i + 1] = clampd(std::abs(cutoffs[i + 1]), f1 + kMinBandwidth, 0.5);
  }
}

}  // namespace

void PipelineConfig::validate() const {
  if (sample_rate < 1) throw ConfigError("config: sample_rate must be positive");
  if (num_tf_filters < 1) throw ConfigError("config: num_tf_filters must be >= 1");
  if (tf_kernel_len < 2) throw ConfigError("config: tf_kernel_len must be >= 2");
  if (tf_stride < 1) throw ConfigError("config: tf_stride must be >= 1");
  const double nyq = sample_rate / 2.0;
  if (!(tf_fmin_hz >= 0.0) || !(tf_fmin_hz < tf_fmax_hz) || tf_fmax_hz > nyq) {
    throw ConfigError("config: need 0 <= tf_fmin_hz < tf_fmax_hz <= sample_rate/2");
  }
  if (max_pool) {
    if (pool_kernel_len < 1 || pool_stride < 1) {
      throw ConfigError("config: pool_kernel_len and pool_stride must be >= 1");
    }
  } else {
    if (num_mod_filters < 1) throw ConfigError("config: num_mod_filters must be >= 1");
    if (mod_kernel_len < 2) throw ConfigError("config: mod_kernel_len must be >= 2");
    if (mod_stride < 1) throw ConfigError("config: mod_stride must be >= 1");
    if (mod_variant == ModVariant::sinc) {
      const double mod_nyq = frame_rate() / 2.0;
      if (!(mod_fmin_hz >= 0.0) || !(mod_fmin_hz < mod_fmax_hz) || mod_fmax_hz > mod_nyq) {
        throw ConfigError("config: need 0 <= mod_fmin_hz < mod_fmax_hz <= frame_rate/2");
      }
    }
  }
  if (!(norm_epsilon > 0.0)) throw ConfigError("config: norm_epsilon must be positive");
  if (num_classes < 1) throw ConfigError("config: num_classes must be >= 1");
}

std::size_t ParamVector::flat_size() const {
  return tf_cutoffs.size() + mod_taps.size() + mod_cutoffs.size() + head_w.size() +
         head_b.size();
}

std::vector<double> ParamVector::flatten() const {
  std::vector<double> flat;
  flat.reserve(flat_size());
  flat.insert(flat.end(), tf_cutoffs.begin(), tf_cutoffs.end());
  flat.insert(flat.end(), mod_taps.data.begin(), mod_taps.data.end());
  flat.insert(flat.end(), mod_cutoffs.begin(), mod_cutoffs.end());
  flat.insert(flat.end(), head_w.data.begin(), head_w.data.end());
  flat.insert(flat.end(), head_b.begin(), head_b.end());
  return flat;
}

ParamVector ParamVector::unflatten(const std::vector<double>& flat, const PipelineConfig& cfg) {
  ParamVector p;
  std::size_t i = 0;
  auto take = [&](std::size_t n) {
    if (i + n > flat.size()) throw InternalError("unflatten: flat parameter vector too short");
    std::vector<double> out(flat.begin() + i, flat.begin() + i + n);
    i += n;
    return out;
  };

  p.tf_cutoffs = take(2 * static_cast<std::size_t>(cfg.num_tf_filters));
  if (!cfg.max_pool) {
    if (cfg.mod_variant == ModVariant::fir) {
      p.mod_taps = Matrix(static_cast<std::size_t>(cfg.num_mod_filters),
                          static_cast<std::size_t>(cfg.mod_kernel_len));
      p.mod_taps.data = take(p.mod_taps.rows * p.mod_taps.cols);
    } else {
      p.mod_cutoffs = take(2 * static_cast<std::size_t>(cfg.num_mod_filters));
    }
  }
  p.head_w = Matrix(static_cast<std::size_t>(cfg.num_classes),
                    static_cast<std::size_t>(cfg.feature_dim()));
  p.head_w.data = take(p.head_w.rows * p.head_w.cols);
  p.head_b = take(static_cast<std::size_t>(cfg.num_classes));
  if (i != flat.size()) throw InternalError("unflatten: flat parameter vector too long");
  return p;
}

std::string ParamVector::block_name(std::size_t flat_index, const PipelineConfig& cfg) {
  std::size_t end = 2 * static_cast<std::size_t>(cfg.num_tf_filters);
  if (flat_index < end) return "tf_cutoffs";
  if (!cfg.max_pool) {
    if (cfg.mod_variant == ModVariant::fir) {
      end += static_cast<std::size_t>(cfg.num_mod_filters) *
             static_cast<std::size_t>(cfg.mod_kernel_len);
      if (flat_index < end) return "mod_taps";
    } else {
      end += 2 * static_cast<std::size_t>(cfg.num_mod_filters);
      if (flat_index < end) return "mod_cutoffs";
    }
  }
  end += static_cast<std::size_t>(cfg.num_classes) * static_cast<std::size_t>(cfg.feature_dim());
  if (flat_index < end) return "head_weights";
  return "head_bias";
}

ParamVector init_params(const PipelineConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamVector p;

  const SincFilterBank bank =
      mel_init(cfg.num_tf_filters, cfg.sample_rate, cfg.tf_fmin_hz, cfg.tf_fmax_hz,
               cfg.tf_kernel_len, cfg.tf_stride, cfg.window);
  p.tf_cutoffs.reserve(2 * bank.num_filters());
  for (const auto& [f1, f2] : bank.cutoffs) {
    p.tf_cutoffs.push_back(f1);
    p.tf_cutoffs.push_back(f2);
  }

  if (!cfg.max_pool) {
    if (cfg.mod_variant == ModVariant::fir) {
      p.mod_taps = hamming_fir_init(cfg.num_mod_filters, cfg.mod_kernel_len, cfg.frame_rate(),
                                    cfg.mod_stride, cfg.window)
                       .fir_taps;
    } else {
      const ModulationLayer layer =
          linear_sinc_init(cfg.num_mod_filters, cfg.frame_rate(), cfg.mod_fmin_hz,
                           cfg.mod_fmax_hz, cfg.mod_kernel_len, cfg.mod_stride, cfg.window);
      p.mod_cutoffs.reserve(2 * layer.cutoffs.size());
      for (const auto& [f1, f2] : layer.cutoffs) {
        p.mod_cutoffs.push_back(f1);
        p.mod_cutoffs.push_back(f2);
      }
    }
  }

  Rng rng(seed);
  const std::size_t fd = static_cast<std::size_t>(cfg.feature_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(fd));
  p.head_w = Matrix(static_cast<std::size_t>(cfg.num_classes), fd);
  for (double& w : p.head_w.data) w = rng.uniform(-scale, scale);
  p.head_b.assign(static_cast<std::size_t>(cfg.num_classes), 0.0);
  return p;
}

ForwardCache forward(const Waveform& x, const ParamVector& params, const PipelineConfig& cfg) {
  cfg.validate();
  check_params_shape(params, cfg);
  if (x.sample_rate != cfg.sample_rate) {
    throw ConfigError("forward: waveform at " + std::to_string(x.sample_rate) +
                      " Hz but config expects " + std::to_string(cfg.sample_rate) + " Hz");
  }

  ForwardCache c;
  c.x = x.samples;
  c.param_digest = params_digest(params);

  SincFilterBank bank;
  bank.kernel_len = cfg.tf_kernel_len;
  bank.stride = cfg.tf_stride;
  bank.window = cfg.window;
  bank.sample_rate = cfg.sample_rate;
  bank.cutoffs.reserve(static_cast<std::size_t>(cfg.num_tf_filters));
  for (std::size_t k = 0; k + 1 < params.tf_cutoffs.size(); k += 2) {
    bank.cutoffs.emplace_back(params.tf_cutoffs[k], params.tf_cutoffs[k + 1]);
  }

  TimeFrequencyMap map = tf_decompose(x, bank);
  c.y = map.values;
  rectify(map.values, cfg.r1);
  c.z = map.values;

  ModulationTensor mt;
  if (cfg.max_pool) {
    mt = max_pool_baseline(map, cfg.pool_kernel_len, cfg.pool_stride, &c.pool_argmax);
  } else {
    const std::size_t m_count = static_cast<std::size_t>(cfg.num_mod_filters);
    const int kl = cfg.mod_kernel_len;
    if (cfg.mod_variant == ModVariant::fir) {
      c.mod_kernels = params.mod_taps;
    } else {
      c.mod_kernels = Matrix(m_count, static_cast<std::size_t>(kl));
      for (std::size_t m = 0; m < m_count; ++m) {
        const std::vector<double> g = sinc_kernel(params.mod_cutoffs[2 * m],
                                                  params.mod_cutoffs[2 * m + 1], kl, cfg.window);
        std::copy(g.begin(), g.end(), &c.mod_kernels(m, 0));
      }
    }
    if (cfg.normalization == Normalization::weight) {
      WeightNormResult wn = weight_norm(c.mod_kernels);
      c.mod_norms = std::move(wn.norms);
      c.mod_zero = std::move(wn.zero_row);
    }
    ModulationLayer layer;
    layer.variant = ModVariant::fir;  // kernels are already materialized
    layer.kernel_len = kl;
    layer.stride = cfg.mod_stride;
    layer.frame_rate = map.frame_rate;
    layer.window = cfg.window;
    layer.fir_taps = c.mod_kernels;
    mt = mod_filter(map, layer);
  }

  c.u = mt.values;
  rectify(mt.values, cfg.r2);
  c.v = std::move(mt.values);

  const Tensor3* act = &c.v;
  if (cfg.normalization == Normalization::instance) {
    c.w = c.v;
    c.norm_stats = instance_norm(c.w, cfg.norm_epsilon);
    act = &c.w;
  }

  const std::size_t channels = act->d0, bands = act->d1, frames = act->d2;
  c.pooled = Matrix(channels, bands);
  for (std::size_t m = 0; m < channels; ++m) {
    for (std::size_t k = 0; k < bands; ++k) {
      const double* p = &(*act)(m, k, 0);
      double sum = 0.0;
      for (std::size_t t = 0; t < frames; ++t) sum += p[t];
      c.pooled(m, k) = sum / static_cast<double>(frames);
    }
  }

  const std::size_t n_classes = static_cast<std::size_t>(cfg.num_classes);
  c.logits.assign(n_classes, 0.0);
  for (std::size_t cls = 0; cls < n_classes; ++cls) {
    double acc = params.head_b[cls];
    const double* wrow = &params.head_w(cls, 0);
    for (std::size_t i = 0; i < c.pooled.size(); ++i) acc += wrow[i] * c.pooled.data[i];
    c.logits[cls] = acc;
  }
  return c;
}

ParamVector backward(const ForwardCache& cache, const std::vector<double>& dlogits,
                     const ParamVector& params, const PipelineConfig& cfg) {
  cfg.validate();
  check_params_shape(params, cfg);
  if (cache.param_digest != params_digest(params)) {
    throw InternalError("backward: cache was built from different parameters");
  }
  if (dlogits.size() != static_cast<std::size_t>(cfg.num_classes)) {
    throw ConfigError("backward: expected " + std::to_string(cfg.num_classes) +
                      " logit gradients, got " + std::to_string(dlogits.size()));
  }

  ParamVector g;
  g.tf_cutoffs.assign(params.tf_cutoffs.size(), 0.0);
  if (!cfg.max_pool) {
    if (cfg.mod_variant == ModVariant::fir) {
      g.mod_taps = Matrix(params.mod_taps.rows, params.mod_taps.cols);
    } else {
      g.mod_cutoffs.assign(params.mod_cutoffs.size(), 0.0);
    }
  }
  g.head_w = Matrix(params.head_w.rows, params.head_w.cols);
  g.head_b.assign(params.head_b.size(), 0.0);

  const std::size_t channels = cache.pooled.rows;
  const std::size_t bands = cache.pooled.cols;
  const std::size_t frames = cache.u.d2;

  // Linear head.
  Matrix dpooled(channels, bands);
  for (std::size_t cls = 0; cls < dlogits.size(); ++cls) {
    const double dl = dlogits[cls];
    g.head_b[cls] = dl;
    double* gw = &g.head_w(cls, 0);
    const double* w = &params.head_w(cls, 0);
    for (std::size_t i = 0; i < dpooled.size(); ++i) {
      gw[i] = dl * cache.pooled.data[i];
      dpooled.data[i] += dl * w[i];
    }
  }

  // Mean over frames.
  Tensor3 dact(channels, bands, frames);
  for (std::size_t m = 0; m < channels; ++m) {
    for (std::size_t k = 0; k < bands; ++k) {
      const double d = dpooled(m, k) / static_cast<double>(frames);
      double* p = &dact(m, k, 0);
      for (std::size_t t = 0; t < frames; ++t) p[t] = d;
    }
  }

  // Instance norm: with xhat the normalized values and s = 1/sqrt(var + eps),
  // dx_i = s * (dxhat_i - mean(dxhat) - xhat_i * mean(dxhat * xhat)).
  Tensor3 du;
  if (cfg.normalization == Normalization::instance) {
    du = Tensor3(channels, bands, frames);
    const std::size_t n = bands * frames;
    for (std::size_t m = 0; m < channels; ++m) {
      const double* up = &dact(m, 0, 0);
      const double* xhat = &cache.w(m, 0, 0);
      double* out = &du(m, 0, 0);
      double up_mean = 0.0, upx_mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        up_mean += up[i];
        upx_mean += up[i] * xhat[i];
      }
      up_mean /= static_cast<double>(n);
      upx_mean /= static_cast<double>(n);
      const double s = cache.norm_stats.inv_std[m];
      for (std::size_t i = 0; i < n; ++i) {
        out[i] = s * (up[i] - up_mean - xhat[i] * upx_mean);
      }
    }
  } else {
    du = std::move(dact);
  }

  apply_rectifier_grad(du.data, cache.u.data, cfg.r2);

  // Modulation stage (or pooling) back to the TF map and the kernel taps.
  Matrix dz(cache.z.rows, cache.z.cols);
  if (cfg.max_pool) {
    for (std::size_t k = 0; k < bands; ++k) {
      for (std::size_t t = 0; t < frames; ++t) {
        const std::size_t src = static_cast<std::size_t>(cache.pool_argmax(k, t));
        dz(k, src) += du(0, k, t);
      }
    }
  } else {
    const int kl = cfg.mod_kernel_len;
    const std::size_t stride = static_cast<std::size_t>(cfg.mod_stride);
    // Gradient with respect to the flipped taps; unflipped below.
    Matrix dkern_flipped(channels, static_cast<std::size_t>(kl));
    for (std::size_t m = 0; m < channels; ++m) {
      const double* kern = &cache.mod_kernels(m, 0);
      double* dkf = &dkern_flipped(m, 0);
      for (std::size_t k = 0; k < bands; ++k) {
        const double* zrow = &cache.z(k, 0);
        double* dzrow = &dz(k, 0);
        for (std::size_t t = 0; t < frames; ++t) {
          const double d = du(m, k, t);
          if (d == 0.0) continue;
          const std::size_t base = t * stride;
          for (int j = 0; j < kl; ++j) {
            dzrow[base + j] += d * kern[kl - 1 - j];
            dkf[j] += d * zrow[base + j];
          }
        }
      }
    }

    Matrix dkern(channels, static_cast<std::size_t>(kl));
    for (std::size_t m = 0; m < channels; ++m) {
      for (int n = 0; n < kl; ++n) dkern(m, n) = dkern_flipped(m, kl - 1 - n);
    }

    if (cfg.normalization == Normalization::weight) {
      // Chain through khat = k / ||k||: dk = (dkhat - khat (khat . dkhat)) / ||k||.
      for (std::size_t m = 0; m < channels; ++m) {
        if (cache.mod_zero[m]) continue;  // row passed through unnormalized
        const double* khat = &cache.mod_kernels(m, 0);
        double* dk = &dkern(m, 0);
        double dot = 0.0;
        for (int n = 0; n < kl; ++n) dot += khat[n] * dk[n];
        const double inv_norm = 1.0 / cache.mod_norms[m];
        for (int n = 0; n < kl; ++n) dk[n] = (dk[n] - khat[n] * dot) * inv_norm;
      }
    }

    if (cfg.mod_variant == ModVariant::fir) {
      g.mod_taps = std::move(dkern);
    } else {
      for (std::size_t m = 0; m < channels; ++m) {
        const double* dk = &dkern(m, 0);
        accumulate_cutoff_grad(std::vector<double>(dk, dk + kl), params.mod_cutoffs[2 * m],
                               params.mod_cutoffs[2 * m + 1], cfg.window, g.mod_cutoffs[2 * m],
                               g.mod_cutoffs[2 * m + 1]);
      }
    }
  }

  Matrix dy = std::move(dz);
  apply_rectifier_grad(dy.data, cache.y.data, cfg.r1);

  // TF stage: accumulate the kernel gradient per filter, then chain to cutoffs.
  const int kl = cfg.tf_kernel_len;
  const std::size_t stride = static_cast<std::size_t>(cfg.tf_stride);
  const std::size_t tf_frames = cache.y.cols;
  std::vector<double> dgf(static_cast<std::size_t>(kl));
  std::vector<double> dg(static_cast<std::size_t>(kl));
  for (std::size_t k = 0; k < cache.y.rows; ++k) {
    std::fill(dgf.begin(), dgf.end(), 0.0);
    const double* dyrow = &dy(k, 0);
    for (std::size_t t = 0; t < tf_frames; ++t) {
      const double d = dyrow[t];
      if (d == 0.0) continue;
      const double* seg = cache.x.data() + t * stride;
      for (int n = 0; n < kl; ++n) dgf[n] += d * seg[n];
    }
    for (int n = 0; n < kl; ++n) dg[n] = dgf[kl - 1 - n];
    accumulate_cutoff_grad(dg, params.tf_cutoffs[2 * k], params.tf_cutoffs[2 * k + 1],
                           cfg.window, g.tf_cutoffs[2 * k], g.tf_cutoffs[2 * k + 1]);
  }
  return g;
}

LossGrad sigmoid_bce(const std::vector<double>& logits, const std::vector<double>& targets) {
  if (logits.empty() || logits.size() != targets.size()) {
    throw ConfigError("sigmoid_bce: logits and targets must be non-empty and equal-sized");
  }
  const double inv_c = 1.0 / static_cast<double>(logits.size());
  LossGrad lg;
  lg.dlogits.resize(logits.size());
  double loss = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    const double l = logits[c], y = targets[c];
    loss += std::max(l, 0.0) - l * y + std::log1p(std::exp(-std::abs(l)));
    lg.dlogits[c] = (sigmoid(l) - y) * inv_c;
  }
  lg.loss = loss * inv_c;
  return lg;
}

std::vector<double> one_hot(int label, int num_classes) {
  if (label < 0 || label >= num_classes) {
    throw ConfigError("one_hot: label " + std::to_string(label) + " outside [0, " +
                      std::to_string(num_classes) + ")");
  }
  std::vector<double> v(static_cast<std::size_t>(num_classes), 0.0);
  v[static_cast<std::size_t>(label)] = 1.0;
  return v;
}

void project_constraints(ParamVector& params) {
  project_pairs(params.tf_cutoffs);
  project_pairs(params.mod_cutoffs);
}

void adam_step(TrainState& state, const ParamVector& grads, const PipelineConfig& cfg) {
  std::vector<double> p = state.params.flatten();
  const std::vector<double> g = grads.flatten();
  if (g.size() != p.size()) throw InternalError("adam_step: gradient/parameter size mismatch");
  if (state.adam_m.empty() && state.adam_v.empty()) {
    state.adam_m.assign(p.size(), 0.0);
    state.adam_v.assign(p.size(), 0.0);
  }
  if (state.adam_m.size() != p.size() || state.adam_v.size() != p.size()) {
    throw InternalError("adam_step: moment/parameter size mismatch");
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      throw NumericError("adam_step: non-finite gradient in " +
                         ParamVector::block_name(i, cfg));
    }
  }

  state.step += 1;
  state.beta1_pow *= kAdamBeta1;
  state.beta2_pow *= kAdamBeta2;
  const double c1 = 1.0 - state.beta1_pow;
  const double c2 = 1.0 - state.beta2_pow;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = state.adam_m[i] = kAdamBeta1 * state.adam_m[i] + (1.0 - kAdamBeta1) * g[i];
    const double v = state.adam_v[i] = kAdamBeta2 * state.adam_v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
    p[i] -= state.lr * (m / c1) / (std::sqrt(v / c2) + kAdamEps);
  }
  state.params = ParamVector::unflatten(p, cfg);
  project_constraints(state.params);
}

bool lr_schedule(TrainState& state, double val_loss, int patience) {
  if (!std::isfinite(val_loss)) throw NumericError("lr_schedule: non-finite validation loss");
  if (patience < 1) throw ConfigError("lr_schedule: patience must be >= 1");
  if (val_loss < state.best_val_loss) {
    state.best_val_loss = val_loss;
    state.epochs_since_improve = 0;
    state.plateau_count = 0;
    return true;
  }
  ++state.epochs_since_improve;
  if (++state.plateau_count >= patience) {
    state.lr *= 0.5;
    state.plateau_count = 0;
  }
  return false;
}

bool early_stop(const TrainState& state, int patience) {
  return state.epochs_since_improve >= patience;
}

Dataset make_am_dataset(std::uint64_t seed, int per_class, const std::vector<double>& rates_hz,
                        double duration_s, Carrier carrier, int sample_rate,
                        double carrier_hz) {
  if (per_class < 1) throw ConfigError("make_am_dataset: per_class must be >= 1");
  if (rates_hz.empty()) throw ConfigError("make_am_dataset: need at least one class rate");
  if (sample_rate < 2) throw ConfigError("make_am_dataset: sample_rate must be >= 2");
  if (duration_s < 1.0) throw ConfigError("make_am_dataset: duration must be >= 1 s");
  for (double r : rates_hz) {
    if (!(r > 0.0) || r >= sample_rate / 2.0) {
      throw ConfigError("make_am_dataset: modulation rate must lie in (0, sample_rate/2)");
    }
  }
  if (carrier == Carrier::tone && (carrier_hz <= 0.0 || carrier_hz >= sample_rate / 2.0)) {
    throw ConfigError("make_am_dataset: tone carrier must lie in (0, sample_rate/2)");
  }

  const std::size_t len = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  const int n_val = per_class * 15 / 100;
  const int n_test = n_val;
  const int n_train = per_class - n_val - n_test;

  Rng rng(seed);
  Dataset data;
  data.num_classes = static_cast<int>(rates_hz.size());
  data.class_rates_hz = rates_hz;
  const double dt = 1.0 / sample_rate;
  for (std::size_t c = 0; c < rates_hz.size(); ++c) {
    const double rate = rates_hz[c];
    for (int i = 0; i < per_class; ++i) {
      const double phi = rng.uniform(0.0, kTwoPi);
      const double psi = rng.uniform(0.0, kTwoPi);  // carrier phase (tone only)
      LabeledExample ex;
      ex.label = static_cast<int>(c);
      ex.audio.sample_rate = sample_rate;
      ex.audio.samples.resize(len);
      for (std::size_t j = 0; j < len; ++j) {
        const double t = static_cast<double>(j) * dt;
        const double envelope = 1.0 + 0.9 * std::cos(kTwoPi * rate * t + phi);
        const double cv = carrier == Carrier::tone
                              ? 0.5 * std::sin(kTwoPi * carrier_hz * t + psi)
                              : rng.gaussian();
        ex.audio.samples[j] = cv * envelope;
      }
      if (i < n_train) data.train.push_back(std::move(ex));
      else if (i < n_train + n_val) data.val.push_back(std::move(ex));
      else data.test.push_back(std::move(ex));
    }
  }
  return data;
}

EvalMetrics evaluate(const ParamVector& params, const PipelineConfig& cfg,
                     const std::vector<LabeledExample>& examples) {
  if (examples.empty()) throw ConfigError("evaluate: no examples");
  const int n_classes = cfg.num_classes;
  PredictionTable table;
  table.scores = Matrix(examples.size(), static_cast<std::size_t>(n_classes));
  table.labels = Matrix(examples.size(), static_cast<std::size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) table.class_names.push_back("class_" + std::to_string(c));

  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const LabeledExample& ex = examples[i];
    const ForwardCache cache = forward(ex.audio, params, cfg);
    const LossGrad lg = sigmoid_bce(cache.logits, one_hot(ex.label, n_classes));
    loss_sum += lg.loss;
    std::size_t best = 0;
    for (std::size_t c = 0; c < cache.logits.size(); ++c) {
      if (cache.logits[c] > cache.logits[best]) best = c;
      table.scores(i, c) = sigmoid(cache.logits[c]);
      table.labels(i, c) = c == static_cast<std::size_t>(ex.label) ? 1.0 : 0.0;
    }
    if (best == static_cast<std::size_t>(ex.label)) ++correct;
  }

  EvalMetrics m;
  m.count = static_cast<int>(examples.size());
  m.loss = loss_sum / static_cast<double>(examples.size());
  m.accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
  // A split missing a class leaves that class's metric undefined; the macro
  // average skips it, and with no defined class at all we record NaN.
  try {
    m.roc_auc = macro_average(table, MetricKind::roc).value;
  } catch (const ConfigError&) {
    m.roc_auc = std::numeric_limits<double>::quiet_NaN();
  }
  try {
    m.pr_auc = macro_average(table, MetricKind::pr).value;
  } catch (const ConfigError&) {
    m.pr_auc = std::numeric_limits<double>::quiet_NaN();
  }
  return m;
}

TrainResult train(const TrainOptions& opts, const Dataset& data) {
  opts.pipe.validate();
  if (opts.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (opts.max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (!(opts.lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (data.train.empty() || data.val.empty()) {
    throw ConfigError("train: need non-empty train and val splits");
  }
  if (data.num_classes != opts.pipe.num_classes) {
    throw ConfigError("train: dataset has " + std::to_string(data.num_classes) +
                      " classes but config expects " + std::to_string(opts.pipe.num_classes));
  }
  const double mod_nyq = opts.pipe.frame_rate() / 2.0;
  for (double r : data.class_rates_hz) {
    if (r >= mod_nyq) {
      throw ConfigError("train: modulation rate above the frame-rate Nyquist of " +
                        std::to_string(mod_nyq) + " Hz");
    }
  }

  TrainState state;
  state.lr = opts.lr;
  state.params = opts.init_override != nullptr ? *opts.init_override
                                               : init_params(opts.pipe, opts.seed);
  check_params_shape(state.params, opts.pipe);
  project_constraints(state.params);
  state.adam_m.assign(state.params.flat_size(), 0.0);
  state.adam_v.assign(state.params.flat_size(), 0.0);

  TrainResult res;
  res.best = state;  // replaced at the first improving epoch

  Rng shuffle_rng(opts.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = static_cast<std::size_t>(opts.batch_size);

  for (int epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    res.epochs_run = epoch;
    fisher_yates_shuffle(order, shuffle_rng);

    for (std::size_t start = 0; start < order.size() && !res.aborted; start += batch) {
      const std::size_t bsz = std::min(batch, order.size() - start);
      std::vector<double> acc;
      for (std::size_t b = 0; b < bsz; ++b) {
        const LabeledExample& ex = data.train[order[start + b]];
        const ForwardCache cache = forward(ex.audio, state.params, opts.pipe);
        const LossGrad lg = sigmoid_bce(cache.logits, one_hot(ex.label, opts.pipe.num_classes));
        if (!std::isfinite(lg.loss)) {
          res.aborted = true;
          res.abort_reason = "non-finite training loss at epoch " + std::to_string(epoch);
          break;
        }
        ParamVector g = backward(cache, lg.dlogits, state.params, opts.pipe);
        if (opts.freeze_frontend) {
          std::fill(g.tf_cutoffs.begin(), g.tf_cutoffs.end(), 0.0);
          std::fill(g.mod_taps.data.begin(), g.mod_taps.data.end(), 0.0);
          std::fill(g.mod_cutoffs.begin(), g.mod_cutoffs.end(), 0.0);
        }
        std::vector<double> gf = g.flatten();
        if (acc.empty()) {
          acc = std::move(gf);
        } else {
          for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += gf[i];
        }
      }
      if (res.aborted) break;
      for (double& v : acc) v /= static_cast<double>(bsz);
      try {
        adam_step(state, ParamVector::unflatten(acc, opts.pipe), opts.pipe);
      } catch (const NumericError& e) {
        res.aborted = true;
        res.abort_reason = e.what();
      }
    }
    if (res.aborted) break;

    const double lr_this_epoch = state.lr;
    const EvalMetrics tr = evaluate(state.params, opts.pipe, data.train);
    const EvalMetrics va = evaluate(state.params, opts.pipe, data.val);
    res.history.push_back({epoch, "train", tr.loss, tr.roc_auc, tr.pr_auc, lr_this_epoch});
    res.history.push_back({epoch, "val", va.loss, va.roc_auc, va.pr_auc, lr_this_epoch});
    if (opts.on_epoch) opts.on_epoch(res.history.back());

    if (lr_schedule(state, va.loss, opts.lr_patience)) {
      res.best = state;
      res.best_epoch = epoch;
    }
    if (early_stop(state, opts.stop_patience)) break;
  }

  if (!data.test.empty()) {
    res.test = evaluate(res.best.params, opts.pipe, data.test);
  }
  return res;
}

}  // namespace modfront
