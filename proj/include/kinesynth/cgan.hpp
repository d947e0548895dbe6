#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "kinesynth/data.hpp"
#include "kinesynth/fields.hpp"
#include "kinesynth/layers.hpp"
#include "kinesynth/tensor.hpp"

namespace kinesynth::cgan {

enum class SpectralMode {
  BatchMean,  // squared difference of batch-mean magnitude spectra
  Paired,     // mean over aligned pairs of per-sample squared differences
};
std::string_view spectral_mode_name(SpectralMode mode);
std::optional<SpectralMode> parse_spectral_mode(std::string_view text);

struct GanConfig {
  std::size_t noise_dim = 64;
  // Generator: dense to [coarse_channels x 25], then upsample x3 and x4,
  // each followed by conv + leaky relu, then a final conv to 9 channels.
  std::size_t gen_coarse_channels = 9;
  std::size_t gen_filters1 = 64;
  std::size_t gen_filters2 = 32;
  std::size_t gen_kernel = 5;
  // Discriminator: two conv + leaky relu + maxpool(2) stages, a dense
  // feature layer, minibatch discrimination and a scalar output.
  std::size_t disc_filters1 = 32;
  std::size_t disc_filters2 = 64;
  std::size_t disc_kernel = 5;
  std::size_t disc_features = 64;
  std::size_t mbd_kernels = 16;
  std::size_t mbd_kernel_dim = 8;
  double leaky_slope = 0.2;

  double lambda_spec = 1.0;
  SpectralMode spectral_mode = SpectralMode::BatchMean;
  std::size_t batch_size = 32;
  std::size_t epochs = 2000;
  double lr_generator = 2e-4;
  double lr_discriminator = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double real_label = 0.9;  // one-sided label smoothing
  bool standardize = true;
  std::size_t probe_size = 16;
  std::uint64_t seed = 0;
};

// Throws ConfigError on inconsistent settings.
void validate(const GanConfig& config);

std::string format_field(SpectralMode mode);
void parse_field(std::string_view key, std::string_view text, SpectralMode& out);

template <typename Config, typename Visitor>
  requires std::is_same_v<std::remove_const_t<Config>, GanConfig>
void visit_fields(Config& c, Visitor&& v) {
  v("noise_dim", c.noise_dim);
  v("gen_coarse_channels", c.gen_coarse_channels);
  v("gen_filters1", c.gen_filters1);
  v("gen_filters2", c.gen_filters2);
  v("gen_kernel", c.gen_kernel);
  v("disc_filters1", c.disc_filters1);
  v("disc_filters2", c.disc_filters2);
  v("disc_kernel", c.disc_kernel);
  v("disc_features", c.disc_features);
  v("mbd_kernels", c.mbd_kernels);
  v("mbd_kernel_dim", c.mbd_kernel_dim);
  v("leaky_slope", c.leaky_slope);
  v("lambda_spec", c.lambda_spec);
  v("spectral_mode", c.spectral_mode);
  v("batch_size", c.batch_size);
  v("epochs", c.epochs);
  v("lr_generator", c.lr_generator);
  v("lr_discriminator", c.lr_discriminator);
  v("beta1", c.beta1);
  v("beta2", c.beta2);
  v("real_label", c.real_label);
  v("standardize", c.standardize);
  v("probe_size", c.probe_size);
  v("seed", c.seed);
}

inline constexpr std::size_t kCoarseLength = 25;
inline constexpr std::size_t kDiscInputChannels = data::kChannels + data::kConditionCount;

std::size_t generator_parameter_count(const GanConfig& config);
std::size_t discriminator_parameter_count(const GanConfig& config);

// One-hot condition rows [B x 30].
Tensor one_hot(std::span<const std::size_t> classes);

class Generator {
 public:
  Generator() = default;
  Generator(const GanConfig& config, SeededRng& rng);

  // noise [B x noise_dim], classes per row -> [B x 9 x 300].
  Tensor forward(const Tensor& noise, std::span<const std::size_t> classes);
  // Accumulates parameter gradients; nothing flows back to the noise.
  void backward(const Tensor& grad_out);
  ParameterList parameters();

 private:
  Dense fc_;
  Upsample1d up1_{3};
  Conv1d conv1_;
  LeakyRelu act1_;
  Upsample1d up2_{4};
  Conv1d conv2_;
  LeakyRelu act2_;
  Conv1d out_;
  std::size_t coarse_channels_ = 0;
};

class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const GanConfig& config, SeededRng& rng);

  // signals [B x 9 x 300] -> logits [B x 1]; B >= 2.
  Tensor forward(const Tensor& signals, std::span<const std::size_t> classes);
  // Returns the gradient with respect to the 9 signal channels, or an empty
  // tensor when need_input_grad is false.
  Tensor backward(const Tensor& grad_logits, bool need_input_grad);
  ParameterList parameters();

 private:
  // Divides the similarity block of the minibatch features by B - 1, making
  // it a mean over the other rows so its scale does not grow with the batch.
  Tensor scale_similarity(Tensor x) const;

  Conv1d conv1_;
  LeakyRelu act1_;
  MaxPool1d pool1_{2};
  Conv1d conv2_;
  LeakyRelu act2_;
  MaxPool1d pool2_{2};
  Dense features_;
  LeakyRelu act3_;
  MinibatchDiscrimination mbd_;
  Dense head_;
  std::size_t mbd_kernels_ = 0;
  Shape flat_from_;
};

struct SpectralLoss {
  double value = 0.0;
  Tensor grad_fake;  // same shape as the batches
};

// Magnitudes are one-sided 512-point spectra scaled by 1/sqrt(T), so the
// loss is on the scale of the signal power. Shapes must match: [B x C x T].
SpectralLoss spectral_loss(const Tensor& real, const Tensor& fake,
                           SpectralMode mode = SpectralMode::BatchMean);

struct EpochLog {
  std::size_t epoch = 0;
  double d_loss = 0.0;         // BCE(real) + BCE(fake), epoch mean
  double g_adv_loss = 0.0;     // -log D(fake), epoch mean
  double spectral_loss = 0.0;  // epoch mean
  double d_real = 0.0;         // mean D(real)
  double d_fake = 0.0;         // mean D(fake)
  double probe_hf_ratio = 0.0; // mean over the probe batch, unfiltered

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

void write_train_log_csv(const TrainLog& log, std::ostream& out);

struct GanModel {
  GanConfig config;
  Generator generator;
  Discriminator discriminator;
  data::ChannelScaler scaler = data::ChannelScaler::identity();
  std::vector<std::size_t> trained_classes;  // sorted
};

struct TrainResult {
  GanModel model;
  TrainLog log;
};

// Alternates one discriminator step and one generator step per minibatch.
// Throws TrainingError naming the step and its inputs if a loss turns NaN.
TrainResult train(const data::Dataset& dataset, const GanConfig& config);

// Unfiltered generator output in data units for explicit noise rows.
Tensor generate_raw(GanModel& model, const Tensor& noise, std::span<const std::size_t> classes);

// Noise row i is drawn from a stream derived from (seed, i), so a request is
// reproducible independently of batch composition.
Tensor sample_noise(std::size_t n, std::size_t noise_dim, std::uint64_t seed);

std::vector<data::Trial> generate(GanModel& model, std::size_t class_index, std::size_t n,
                                  std::uint64_t seed, bool apply_filter = true);

// Class-proportional counts summing to total (largest remainder; ties go to
// the lower class index).
std::array<std::size_t, data::kConditionCount> allocate_counts(
    const std::array<std::size_t, data::kConditionCount>& class_counts, std::size_t total);

// `total` synthetic trials allocated over classes in proportion to class_counts.
data::Dataset generate_like(GanModel& model,
                            const std::array<std::size_t, data::kConditionCount>& class_counts,
                            std::size_t total, std::uint64_t seed, bool apply_filter = true);

// "<path>" holds the KSN1 weights and "<path>.json" the config and scaler.
void save(GanModel& model, const std::filesystem::path& path);
GanModel load(const std::filesystem::path& path);

}  // namespace kinesynth::cgan
