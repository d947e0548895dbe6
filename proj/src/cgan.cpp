#include "kinesynth/cgan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <ostream>
#include <sstream>

#include "kinesynth/adam.hpp"
#include "kinesynth/errors.hpp"
#include "kinesynth/ksn1.hpp"
#include "kinesynth/losses.hpp"
#include "kinesynth/signal.hpp"
#include "sidecar.hpp"

namespace kinesynth::cgan {

namespace {

using data::kChannels;
using data::kConditionCount;
using data::kSampleRate;
using data::kTrialLength;

constexpr std::size_t kSpectrumBins = 512;
constexpr std::size_t kGenerateChunk = 64;

void require_positive(std::size_t v, const char* name) {
  if (v == 0) throw ConfigError(std::string("gan config: ") + name + " must be positive");
}

// Sample b of a [B x C x T] batch as a [C x T] matrix.
Tensor sample_of(const Tensor& batch, std::size_t b) {
  return batch.rows(b, 1).reshaped({batch.dim(1), batch.dim(2)});
}

void set_sample(Tensor& batch, std::size_t b, const Tensor& sample) {
  std::copy(sample.values().begin(), sample.values().end(), batch.data() + b * sample.size());
}

double mean_of(const Tensor& t) {
  return std::accumulate(t.values().begin(), t.values().end(), 0.0) / static_cast<double>(t.size());
}

double magnitude(signal::Complex z) { return std::sqrt(z.real() * z.real() + z.imag() * z.imag()); }

std::pair<double, double> range_of(const Tensor& t) {
  const auto [lo, hi] = std::minmax_element(t.values().begin(), t.values().end());
  return {*lo, *hi};
}

}  // namespace

std::string_view spectral_mode_name(SpectralMode mode) {
  return mode == SpectralMode::BatchMean ? "batch_mean" : "paired";
}

std::optional<SpectralMode> parse_spectral_mode(std::string_view text) {
  if (text == "batch_mean") return SpectralMode::BatchMean;
  if (text == "paired") return SpectralMode::Paired;
  return std::nullopt;
}

std::string format_field(SpectralMode mode) { return std::string(spectral_mode_name(mode)); }

void parse_field(std::string_view key, std::string_view text, SpectralMode& out) {
  const auto mode = parse_spectral_mode(text);
  if (!mode) {
    throw ConfigError("config key '" + std::string(key) + "': '" + std::string(text) +
                      "' is not batch_mean or paired");
  }
  out = *mode;
}

void validate(const GanConfig& c) {
  require_positive(c.noise_dim, "noise_dim");
  require_positive(c.gen_coarse_channels, "gen_coarse_channels");
  require_positive(c.gen_filters1, "gen_filters1");
  require_positive(c.gen_filters2, "gen_filters2");
  require_positive(c.gen_kernel, "gen_kernel");
  require_positive(c.disc_filters1, "disc_filters1");
  require_positive(c.disc_filters2, "disc_filters2");
  require_positive(c.disc_kernel, "disc_kernel");
  require_positive(c.disc_features, "disc_features");
  require_positive(c.mbd_kernels, "mbd_kernels");
  require_positive(c.mbd_kernel_dim, "mbd_kernel_dim");
  require_positive(c.epochs, "epochs");
  require_positive(c.probe_size, "probe_size");
  if (c.batch_size < 2) throw ConfigError("gan config: batch_size must be at least 2");
  if (!(c.lambda_spec >= 0.0)) throw ConfigError("gan config: lambda_spec must be >= 0");
  if (!(c.leaky_slope >= 0.0 && c.leaky_slope < 1.0)) throw ConfigError("gan config: leaky_slope must be in [0, 1)");
  if (!(c.real_label > 0.0 && c.real_label <= 1.0)) throw ConfigError("gan config: real_label must be in (0, 1]");
  if (!(c.lr_generator > 0.0) || !(c.lr_discriminator > 0.0)) throw ConfigError("gan config: learning rates must be positive");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0)) {
    throw ConfigError("gan config: betas must be in [0, 1)");
  }
  if (kCoarseLength * 3 * 4 != kTrialLength) throw ConfigError("gan config: upsampling does not reach 300 samples");
}

std::size_t generator_parameter_count(const GanConfig& c) {
  const std::size_t in = c.noise_dim + kConditionCount;
  const std::size_t coarse = c.gen_coarse_channels * kCoarseLength;
  return in * coarse + coarse +
         c.gen_coarse_channels * c.gen_filters1 * c.gen_kernel + c.gen_filters1 +
         c.gen_filters1 * c.gen_filters2 * c.gen_kernel + c.gen_filters2 +
         c.gen_filters2 * kChannels * c.gen_kernel + kChannels;
}

std::size_t discriminator_parameter_count(const GanConfig& c) {
  const std::size_t flat = c.disc_filters2 * (kTrialLength / 4);
  return kDiscInputChannels * c.disc_filters1 * c.disc_kernel + c.disc_filters1 +
         c.disc_filters1 * c.disc_filters2 * c.disc_kernel + c.disc_filters2 +
         flat * c.disc_features + c.disc_features +
         c.disc_features * c.mbd_kernels * c.mbd_kernel_dim +
         (c.disc_features + c.mbd_kernels) + 1;
}

Tensor one_hot(std::span<const std::size_t> classes) {
  if (classes.empty()) throw DimensionError("one_hot: empty class list");
  Tensor out({classes.size(), kConditionCount});
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] >= kConditionCount) {
      throw IndexError("class index " + std::to_string(classes[i]) + " outside [0, 30)");
    }
    out.at(i, classes[i]) = 1.0;
  }
  return out;
}

Generator::Generator(const GanConfig& c, SeededRng& rng)
    : fc_("generator.fc", c.noise_dim + kConditionCount, c.gen_coarse_channels * kCoarseLength, rng),
      conv1_("generator.conv1", c.gen_coarse_channels, c.gen_filters1, c.gen_kernel, Padding::Same, rng),
      act1_(c.leaky_slope),
      conv2_("generator.conv2", c.gen_filters1, c.gen_filters2, c.gen_kernel, Padding::Same, rng),
      act2_(c.leaky_slope),
      out_("generator.out", c.gen_filters2, kChannels, c.gen_kernel, Padding::Same, rng),
      coarse_channels_(c.gen_coarse_channels) {}

Tensor Generator::forward(const Tensor& noise, std::span<const std::size_t> classes) {
  require_rank(noise, 2, "generator noise");
  if (noise.dim(0) != classes.size()) {
    throw DimensionError("generator: " + std::to_string(noise.dim(0)) + " noise rows for " +
                         std::to_string(classes.size()) + " classes");
  }
  const std::size_t batch = noise.dim(0), nd = noise.dim(1);
  const Tensor cond = one_hot(classes);
  Tensor input({batch, nd + kConditionCount});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(noise.data() + b * nd, nd, input.data() + b * (nd + kConditionCount));
    std::copy_n(cond.data() + b * kConditionCount, kConditionCount,
                input.data() + b * (nd + kConditionCount) + nd);
  }
  Tensor h = fc_.forward(input).reshaped({batch, coarse_channels_, kCoarseLength});
  h = act1_.forward(conv1_.forward(up1_.forward(h)));
  h = act2_.forward(conv2_.forward(up2_.forward(h)));
  return out_.forward(h);
}

void Generator::backward(const Tensor& grad_out) {
  Tensor g = out_.backward(grad_out);
  g = up2_.backward(conv2_.backward(act2_.backward(g)));
  g = up1_.backward(conv1_.backward(act1_.backward(g)));
  fc_.backward(g.reshaped({g.dim(0), g.dim(1) * g.dim(2)}));
}

ParameterList Generator::parameters() {
  ParameterList out;
  fc_.append_parameters(out);
  conv1_.append_parameters(out);
  conv2_.append_parameters(out);
  out_.append_parameters(out);
  return out;
}

Discriminator::Discriminator(const GanConfig& c, SeededRng& rng)
    : conv1_("discriminator.conv1", kDiscInputChannels, c.disc_filters1, c.disc_kernel, Padding::Same, rng),
      act1_(c.leaky_slope),
      conv2_("discriminator.conv2", c.disc_filters1, c.disc_filters2, c.disc_kernel, Padding::Same, rng),
      act2_(c.leaky_slope),
      features_("discriminator.features", c.disc_filters2 * (kTrialLength / 4), c.disc_features, rng),
      act3_(c.leaky_slope),
      mbd_("discriminator.mbd", c.disc_features, c.mbd_kernels, c.mbd_kernel_dim, rng),
      head_("discriminator.head", c.disc_features + c.mbd_kernels, 1, rng),
      mbd_kernels_(c.mbd_kernels) {}

Tensor Discriminator::forward(const Tensor& signals, std::span<const std::size_t> classes) {
  require_rank(signals, 3, "discriminator input");
  if (signals.dim(1) != kChannels || signals.dim(2) != kTrialLength) {
    throw DimensionError("discriminator: expected [B x 9 x 300], got " + shape_to_string(signals.shape()));
  }
  const std::size_t batch = signals.dim(0);
  if (classes.size() != batch) throw DimensionError("discriminator: class count differs from batch size");
  one_hot(classes);  // validates the labels
  Tensor input({batch, kDiscInputChannels, kTrialLength});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(signals.data() + b * kChannels * kTrialLength, kChannels * kTrialLength,
                input.data() + b * kDiscInputChannels * kTrialLength);
    double* onehot = input.data() + (b * kDiscInputChannels + kChannels + classes[b]) * kTrialLength;
    std::fill_n(onehot, kTrialLength, 1.0);
  }
  Tensor h = pool1_.forward(act1_.forward(conv1_.forward(input)));
  h = pool2_.forward(act2_.forward(conv2_.forward(h)));
  flat_from_ = h.shape();
  h = act3_.forward(features_.forward(h.reshaped({batch, h.dim(1) * h.dim(2)})));
  return head_.forward(scale_similarity(mbd_.forward(h)));
}

Tensor Discriminator::backward(const Tensor& grad_logits, bool need_input_grad) {
  Tensor g = features_.backward(act3_.backward(mbd_.backward(scale_similarity(head_.backward(grad_logits)))));
  g = conv2_.backward(act2_.backward(pool2_.backward(g.reshaped(flat_from_))));
  g = conv1_.backward(act1_.backward(pool1_.backward(g)), need_input_grad);
  if (!need_input_grad) return {};
  const std::size_t batch = g.dim(0);
  Tensor out({batch, kChannels, kTrialLength});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(g.data() + b * kDiscInputChannels * kTrialLength, kChannels * kTrialLength,
                out.data() + b * kChannels * kTrialLength);
  }
  return out;
}

Tensor Discriminator::scale_similarity(Tensor x) const {
  const std::size_t batch = x.dim(0), width = x.dim(1);
  const std::size_t first = width - mbd_kernels_;
  const double factor = 1.0 / static_cast<double>(batch - 1);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = first; j < width; ++j) x.at(b, j) *= factor;
  }
  return x;
}

ParameterList Discriminator::parameters() {
  ParameterList out;
  conv1_.append_parameters(out);
  conv2_.append_parameters(out);
  features_.append_parameters(out);
  mbd_.append_parameters(out);
  head_.append_parameters(out);
  return out;
}

SpectralLoss spectral_loss(const Tensor& real, const Tensor& fake, SpectralMode mode) {
  require_rank(real, 3, "spectral_loss real batch");
  require_rank(fake, 3, "spectral_loss fake batch");
  if (!real.same_shape(fake)) {
    throw DimensionError("spectral_loss: " + shape_to_string(real.shape()) + " vs " +
                         shape_to_string(fake.shape()));
  }
  const std::size_t batch = real.dim(0), channels = real.dim(1), length = real.dim(2);
  const std::size_t n_fft = std::max(kSpectrumBins, signal::next_power_of_two(length));
  const std::size_t bins = n_fft / 2 + 1;
  const double scale = 1.0 / std::sqrt(static_cast<double>(length));
  const double inv_batch = 1.0 / static_cast<double>(batch);

  // Spectra of every (sample, channel) row.
  auto spectra = [&](const Tensor& x) {
    std::vector<std::vector<signal::Complex>> out(batch * channels);
    for (std::size_t r = 0; r < batch * channels; ++r) {
      out[r] = signal::fft_real(std::span<const double>(x.data() + r * length, length), n_fft);
    }
    return out;
  };
  const auto real_spec = spectra(real);
  const auto fake_spec = spectra(fake);

  SpectralLoss result;
  result.grad_fake = Tensor(fake.shape());
  std::vector<signal::Complex> grad_bins(bins);
  auto push_grad = [&](std::size_t row, const std::vector<double>& dmag) {
    for (std::size_t k = 0; k < bins; ++k) {
      const signal::Complex x = fake_spec[row][k];
      const double m = magnitude(x);
      grad_bins[k] = m > 0.0 ? dmag[k] * scale * x / m : signal::Complex{};
    }
    const auto g = signal::fft_real_backward(grad_bins, length, n_fft);
    std::copy(g.begin(), g.end(), result.grad_fake.data() + row * length);
  };

  const double norm = 1.0 / static_cast<double>(channels * bins);
  std::vector<double> dmag(bins);
  if (mode == SpectralMode::BatchMean) {
    std::vector<double> diff(bins);
    for (std::size_t c = 0; c < channels; ++c) {
      std::fill(diff.begin(), diff.end(), 0.0);
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t row = b * channels + c;
        for (std::size_t k = 0; k < bins; ++k) {
          diff[k] += (magnitude(fake_spec[row][k]) - magnitude(real_spec[row][k])) * scale * inv_batch;
        }
      }
      for (std::size_t k = 0; k < bins; ++k) {
        result.value += diff[k] * diff[k] * norm;
        dmag[k] = 2.0 * diff[k] * norm * inv_batch;
      }
      for (std::size_t b = 0; b < batch; ++b) push_grad(b * channels + c, dmag);
    }
  } else {
    for (std::size_t row = 0; row < batch * channels; ++row) {
      for (std::size_t k = 0; k < bins; ++k) {
        const double diff = (magnitude(fake_spec[row][k]) - magnitude(real_spec[row][k])) * scale;
        result.value += diff * diff * norm * inv_batch;
        dmag[k] = 2.0 * diff * norm * inv_batch;
      }
      push_grad(row, dmag);
    }
  }
  return result;
}

void write_train_log_csv(const TrainLog& log, std::ostream& out) {
  out << "epoch,d_loss,g_adv_loss,spectral_loss,d_real,d_fake,probe_hf_ratio\n";
  for (const auto& e : log.epochs) {
    out << e.epoch << ',' << format_double(e.d_loss) << ',' << format_double(e.g_adv_loss) << ','
        << format_double(e.spectral_loss) << ',' << format_double(e.d_real) << ','
        << format_double(e.d_fake) << ',' << format_double(e.probe_hf_ratio) << '\n';
  }
}

Tensor sample_noise(std::size_t n, std::size_t noise_dim, std::uint64_t seed) {
  if (n == 0) return {};
  Tensor out({n, noise_dim});
  const SeededRng root(seed);
  for (std::size_t i = 0; i < n; ++i) {
    SeededRng rng = root.derive(i);
    for (std::size_t j = 0; j < noise_dim; ++j) out.at(i, j) = rng.normal();
  }
  return out;
}

namespace {

Tensor generate_scaled(Generator& gen, const data::ChannelScaler& scaler, const Tensor& noise,
                       std::span<const std::size_t> classes) {
  const std::size_t n = noise.dim(0);
  Tensor out({n, kChannels, kTrialLength});
  for (std::size_t first = 0; first < n; first += kGenerateChunk) {
    const std::size_t count = std::min(kGenerateChunk, n - first);
    const Tensor batch = gen.forward(noise.rows(first, count), classes.subspan(first, count));
    for (std::size_t b = 0; b < count; ++b) set_sample(out, first + b, scaler.invert(sample_of(batch, b)));
  }
  return out;
}

double probe_ratio(Generator& gen, const data::ChannelScaler& scaler, const Tensor& noise,
                   std::span<const std::size_t> classes) {
  const Tensor out = generate_scaled(gen, scaler, noise, classes);
  double sum = 0.0;
  for (std::size_t b = 0; b < out.dim(0); ++b) {
    sum += signal::high_frequency_power_ratio(sample_of(out, b), kSampleRate);
  }
  return sum / static_cast<double>(out.dim(0));
}

[[noreturn]] void non_finite(std::size_t epoch, std::size_t step, std::span<const std::size_t> batch_trials,
                             const Tensor& real, const Tensor& noise, const Tensor& fake,
                             double d_real, double d_fake, double adv, double spec) {
  std::ostringstream msg;
  msg << "gan training produced a non-finite loss at epoch " << epoch << " step " << step
      << ": d_loss_real=" << d_real << " d_loss_fake=" << d_fake << " g_adv=" << adv
      << " spectral=" << spec << "; batch trials [";
  for (std::size_t i = 0; i < batch_trials.size(); ++i) msg << (i ? "," : "") << batch_trials[i];
  const auto [rlo, rhi] = range_of(real);
  const auto [nlo, nhi] = range_of(noise);
  msg << "]; real range [" << rlo << ", " << rhi << "]; noise range [" << nlo << ", " << nhi << "]";
  if (fake.all_finite()) {
    const auto [flo, fhi] = range_of(fake);
    msg << "; fake range [" << flo << ", " << fhi << "]";
  } else {
    msg << "; fake batch contains non-finite values";
  }
  throw TrainingError(msg.str());
}

}  // namespace

TrainResult train(const data::Dataset& dataset, const GanConfig& config) {
  validate(config);
  const std::size_t n = dataset.size();
  if (n < 2) throw ConfigError("gan training needs at least 2 trials");

  TrainResult result;
  GanModel& model = result.model;
  model.config = config;
  model.scaler = config.standardize ? data::ChannelScaler::fit(dataset.trials) : data::ChannelScaler::identity();
  std::vector<Tensor> signals;
  std::vector<std::size_t> labels;
  signals.reserve(n);
  for (const auto& t : dataset.trials) {
    signals.push_back(model.scaler.apply(t.signal));
    labels.push_back(t.condition_class());
  }
  model.trained_classes = labels;
  std::sort(model.trained_classes.begin(), model.trained_classes.end());
  model.trained_classes.erase(std::unique(model.trained_classes.begin(), model.trained_classes.end()),
                              model.trained_classes.end());

  const SeededRng root(config.seed);
  SeededRng gen_init = root.derive(1), disc_init = root.derive(2);
  SeededRng shuffle_rng = root.derive(3), noise_rng = root.derive(4);
  model.generator = Generator(config, gen_init);
  model.discriminator = Discriminator(config, disc_init);
  Generator& gen = model.generator;
  Discriminator& disc = model.discriminator;
  const ParameterList gen_params = gen.parameters();
  const ParameterList disc_params = disc.parameters();
  Adam opt_g({config.lr_generator, config.beta1, config.beta2, 1e-8});
  Adam opt_d({config.lr_discriminator, config.beta1, config.beta2, 1e-8});

  const Tensor probe_noise = sample_noise(config.probe_size, config.noise_dim, mix_seed(config.seed, 5));
  std::vector<std::size_t> probe_classes(config.probe_size);
  for (std::size_t i = 0; i < config.probe_size; ++i) {
    probe_classes[i] = model.trained_classes[i % model.trained_classes.size()];
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch_size = std::min(config.batch_size, n);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    EpochLog log;
    log.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t first = 0; first + 1 < n; first += batch_size) {
      const std::size_t count = std::min(batch_size, n - first);
      if (count < 2) break;
      ++step;
      const std::span<const std::size_t> idx(order.data() + first, count);
      std::vector<Tensor> rows;
      std::vector<std::size_t> cls;
      for (std::size_t i : idx) {
        rows.push_back(signals[i]);
        cls.push_back(labels[i]);
      }
      const Tensor real = stack(rows);

      // Discriminator step.
      Tensor noise({count, config.noise_dim});
      for (double& v : noise.values()) v = noise_rng.normal();
      const Tensor fake = gen.forward(noise, cls);
      const Tensor real_logits = disc.forward(real, cls);
      const Loss loss_real = binary_cross_entropy_with_logits(real_logits, Tensor(real_logits.shape(), config.real_label));
      disc.backward(loss_real.grad, false);
      const Tensor fake_logits = disc.forward(fake, cls);
      const Loss loss_fake = binary_cross_entropy_with_logits(fake_logits, Tensor(fake_logits.shape(), 0.0));
      disc.backward(loss_fake.grad, false);
      if (!std::isfinite(loss_real.value) || !std::isfinite(loss_fake.value)) {
        non_finite(epoch, step, idx, real, noise, fake, loss_real.value, loss_fake.value, NAN, NAN);
      }
      opt_d.step(disc_params);

      // Generator step.
      for (double& v : noise.values()) v = noise_rng.normal();
      const Tensor fake2 = gen.forward(noise, cls);
      const Tensor logits = disc.forward(fake2, cls);
      const Loss adv = binary_cross_entropy_with_logits(logits, Tensor(logits.shape(), 1.0));
      Tensor grad = disc.backward(adv.grad, true);
      const SpectralLoss spec = spectral_loss(real, fake2, config.spectral_mode);
      if (!std::isfinite(adv.value) || !std::isfinite(spec.value)) {
        non_finite(epoch, step, idx, real, noise, fake2, loss_real.value, loss_fake.value, adv.value, spec.value);
      }
      if (config.lambda_spec > 0.0) {
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += config.lambda_spec * spec.grad_fake[i];
      }
      gen.backward(grad);
      zero_grads(disc_params);
      opt_g.step(gen_params);

      log.d_loss += loss_real.value + loss_fake.value;
      log.g_adv_loss += adv.value;
      log.spectral_loss += spec.value;
      log.d_real += mean_of(sigmoid(real_logits));
      log.d_fake += mean_of(sigmoid(fake_logits));
      ++batches;
    }
    const double inv = 1.0 / static_cast<double>(batches);
    log.d_loss *= inv;
    log.g_adv_loss *= inv;
    log.spectral_loss *= inv;
    log.d_real *= inv;
    log.d_fake *= inv;
    log.probe_hf_ratio = probe_ratio(gen, model.scaler, probe_noise, probe_classes);
    result.log.epochs.push_back(log);
  }
  return result;
}

Tensor generate_raw(GanModel& model, const Tensor& noise, std::span<const std::size_t> classes) {
  require_rank(noise, 2, "generator noise");
  if (noise.dim(1) != model.config.noise_dim) {
    throw DimensionError("generator: noise width " + std::to_string(noise.dim(1)) + ", expected " +
                         std::to_string(model.config.noise_dim));
  }
  return generate_scaled(model.generator, model.scaler, noise, classes);
}

std::vector<data::Trial> generate(GanModel& model, std::size_t class_index, std::size_t n,
                                  std::uint64_t seed, bool apply_filter) {
  const auto [task, impairment] = data::condition_from_index(class_index);
  std::vector<data::Trial> out;
  if (n == 0) return out;
  const Tensor noise = sample_noise(n, model.config.noise_dim, seed);
  const std::vector<std::size_t> classes(n, class_index);
  const Tensor raw = generate_raw(model, noise, classes);
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    data::Trial t;
    t.subject_id = "synthetic";
    t.task = task;
    t.impairment = impairment;
    t.provenance = data::Provenance::Synthetic;
    t.signal = sample_of(raw, i);
    if (apply_filter) t.signal = signal::lowpass(t.signal, kSampleRate);
    out.push_back(std::move(t));
  }
  return out;
}

std::array<std::size_t, kConditionCount> allocate_counts(
    const std::array<std::size_t, kConditionCount>& class_counts, std::size_t total) {
  const std::size_t sum = std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0});
  std::array<std::size_t, kConditionCount> out{};
  if (total == 0) return out;
  if (sum == 0) throw ConfigError("allocate_counts: no classes to allocate over");
  std::array<std::size_t, kConditionCount> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kConditionCount; ++c) {
    out[c] = class_counts[c] * total / sum;
    remainder[c] = class_counts[c] * total % sum;
    assigned += out[c];
  }
  std::array<std::size_t, kConditionCount> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++out[order[i]];
  return out;
}

data::Dataset generate_like(GanModel& model, const std::array<std::size_t, kConditionCount>& class_counts,
                            std::size_t total, std::uint64_t seed, bool apply_filter) {
  const auto counts = allocate_counts(class_counts, total);
  data::Dataset out;
  for (std::size_t c = 0; c < kConditionCount; ++c) {
    auto trials = generate(model, c, counts[c], mix_seed(seed, c), apply_filter);
    std::move(trials.begin(), trials.end(), std::back_inserter(out.trials));
  }
  return out;
}

void save(GanModel& model, const std::filesystem::path& path) {
  std::vector<NamedTensor> entries = snapshot(model.generator.parameters());
  const auto disc = snapshot(model.discriminator.parameters());
  entries.insert(entries.end(), disc.begin(), disc.end());
  save_ksn1(path, entries);
  detail::Sidecar side{"gan", to_fields(model.config), model.scaler};
  side.extra["trained_classes"] = model.trained_classes;
  detail::write_sidecar(path, side);
}

GanModel load(const std::filesystem::path& path) {
  const detail::Sidecar side = detail::read_sidecar(path, "gan");
  GanModel model;
  model.config = detail::config_from_fields<GanConfig>(side.config, path);
  validate(model.config);
  model.scaler = side.scaler;
  try {
    model.trained_classes = side.extra.at("trained_classes").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(detail::sidecar_path(path).string() + ": " + e.what());
  }
  SeededRng rng(0);
  model.generator = Generator(model.config, rng);
  model.discriminator = Discriminator(model.config, rng);
  const auto entries = load_ksn1(path);
  ParameterList params = model.generator.parameters();
  const ParameterList disc = model.discriminator.parameters();
  params.insert(params.end(), disc.begin(), disc.end());
  restore(params, entries);
  return model;
}

}  // namespace kinesynth::cgan
