#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "kinesynth/cgan.hpp"
#include "kinesynth/errors.hpp"
#include "kinesynth/losses.hpp"
#include "kinesynth/signal.hpp"
#include "kinesynth/toy.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace kinesynth;
using namespace kinesynth::cgan;
using namespace kinesynth::testing;

namespace {

GanConfig tiny_config() {
  GanConfig c;
  c.noise_dim = 3;
  c.gen_coarse_channels = 2;
  c.gen_filters1 = 2;
  c.gen_filters2 = 2;
  c.gen_kernel = 3;
  c.disc_filters1 = 2;
  c.disc_filters2 = 2;
  c.disc_kernel = 3;
  c.disc_features = 4;
  c.mbd_kernels = 3;
  c.mbd_kernel_dim = 2;
  c.batch_size = 4;
  c.epochs = 2;
  c.probe_size = 3;
  return c;
}

data::Dataset small_toy() {
  data::ToyConfig t;
  t.trials_per_class = 4;
  return data::make_toy_dataset(t);
}

// [B x C x T] batch of sines at `freq` Hz with per-row phases.
Tensor sine_batch(std::size_t batch, std::size_t channels, double freq, double phase_step) {
  Tensor out({batch, channels, 300});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const auto s = sine(freq, 60.0, 300, phase_step * static_cast<double>(b * channels + c));
      std::copy(s.begin(), s.end(), out.data() + (b * channels + c) * 300);
    }
  }
  return out;
}

double direct_spectral_loss(const Tensor& real, const Tensor& fake) {
  const std::size_t batch = real.dim(0), channels = real.dim(1), length = real.dim(2);
  const std::size_t bins = 257;
  double total = 0.0;
  for (std::size_t c = 0; c < channels; ++c) {
    std::vector<double> mr(bins, 0.0), mf(bins, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      std::vector<double> xr(real.data() + (b * channels + c) * length, real.data() + (b * channels + c + 1) * length);
      std::vector<double> xf(fake.data() + (b * channels + c) * length, fake.data() + (b * channels + c + 1) * length);
      const auto dr = naive_dft(xr, 512);
      const auto df = naive_dft(xf, 512);
      for (std::size_t k = 0; k < bins; ++k) {
        mr[k] += std::abs(dr[k]) / std::sqrt(300.0) / static_cast<double>(batch);
        mf[k] += std::abs(df[k]) / std::sqrt(300.0) / static_cast<double>(batch);
      }
    }
    for (std::size_t k = 0; k < bins; ++k) total += (mf[k] - mr[k]) * (mf[k] - mr[k]);
  }
  return total / static_cast<double>(channels * bins);
}

}  // namespace

TEST_CASE("parameter counts follow the configuration") {
  SeededRng rng(1);
  const GanConfig def;
  Generator g(def, rng);
  Discriminator d(def, rng);
  // dense 94*225+225, conv 9*64*5+64, conv 64*32*5+32, conv 32*9*5+9
  CHECK(generator_parameter_count(def) == 36040);
  CHECK(parameter_count(g.parameters()) == 36040);
  // conv 39*32*5+32, conv 32*64*5+64, dense 4800*64+64, mbd 64*128, dense 80+1
  CHECK(discriminator_parameter_count(def) == 332113);
  CHECK(parameter_count(d.parameters()) == 332113);

  const GanConfig tiny = tiny_config();
  Generator gt(tiny, rng);
  Discriminator dt(tiny, rng);
  CHECK(parameter_count(gt.parameters()) == generator_parameter_count(tiny));
  CHECK(parameter_count(dt.parameters()) == discriminator_parameter_count(tiny));
}

TEST_CASE("invalid configurations are rejected") {
  GanConfig c;
  c.noise_dim = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = GanConfig{};
  c.lambda_spec = -1.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = GanConfig{};
  c.batch_size = 1;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("config fields round trip through text") {
  GanConfig c;
  c.lambda_spec = 0.3;
  c.spectral_mode = SpectralMode::Paired;
  c.seed = 12345678901234ULL;
  c.standardize = false;
  GanConfig back;
  for (const auto& [key, value] : to_fields(c)) CHECK(set_field(back, key, value));
  CHECK(to_fields(back) == to_fields(c));
  CHECK_FALSE(set_field(back, "no_such_key", "1"));
  CHECK_THROWS_AS(set_field(back, "spectral_mode", "complex"), ConfigError);
  CHECK_THROWS_AS(set_field(back, "epochs", "-3"), ConfigError);
}

TEST_CASE("generator output contract") {
  const GanConfig c = tiny_config();
  SeededRng rng(2);
  Generator g(c, rng);
  const Tensor z = sample_noise(3, c.noise_dim, 5);
  const std::vector<std::size_t> cls{0, 17, 29};
  const Tensor a = g.forward(z, cls);
  CHECK(a.shape() == Shape{3, 9, 300});
  CHECK(a.all_finite());
  CHECK(g.forward(z, cls) == a);
  const std::vector<std::size_t> bad{0, 30, 1};
  CHECK_THROWS_AS(g.forward(z, bad), IndexError);
}

TEST_CASE("noise rows depend only on seed and row index") {
  const Tensor a = sample_noise(5, 4, 9);
  const Tensor b = sample_noise(2, 4, 9);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(a[i] == b[i]);
  CHECK(sample_noise(0, 4, 9).empty());
}

TEST_CASE("untrained discriminator is near chance on a balanced batch") {
  const GanConfig c;
  const data::Dataset ds = small_toy();
  const data::ChannelScaler scaler = data::ChannelScaler::fit(ds.trials);
  double mean_loss = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SeededRng rng(seed);
    Generator g(c, rng);
    Discriminator d(c, rng);
    std::vector<Tensor> rows;
    std::vector<std::size_t> cls;
    for (std::size_t i = 0; i < 8; ++i) {
      const auto& t = ds.trials[(i * 5 + seed) % ds.size()];
      rows.push_back(scaler.apply(t.signal));
      cls.push_back(t.condition_class());
    }
    const Tensor real = stack(rows);
    const Tensor fake = g.forward(sample_noise(8, c.noise_dim, seed), cls);
    const Tensor pr = sigmoid(d.forward(real, cls));
    const Tensor pf = sigmoid(d.forward(fake, cls));
    for (double p : pr.values()) CHECK((p > 0.0 && p < 1.0));
    double loss = 0.0;
    for (double p : pr.values()) loss -= std::log(p);
    for (double p : pf.values()) loss -= std::log(1.0 - p);
    mean_loss += loss / 16.0 / 10.0;
  }
  CHECK(std::abs(mean_loss - std::numbers::ln2) < 0.2);
}

TEST_CASE("discriminator gradients match central differences") {
  const GanConfig c = tiny_config();
  SeededRng rng(3);
  Discriminator d(c, rng);
  Tensor x = random_tensor({3, 9, 300}, rng);
  const std::vector<std::size_t> cls{1, 1, 28};
  const Tensor targets = Tensor::matrix({{0.9}, {0.0}, {1.0}});
  auto loss = [&] { return binary_cross_entropy_with_logits(d.forward(x, cls), targets).value; };
  const Loss l = binary_cross_entropy_with_logits(d.forward(x, cls), targets);
  const Tensor gx = d.backward(l.grad, true);
  const ParameterList params = d.parameters();
  std::vector<Tensor> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);

  CHECK(relative_error(gx, numeric_gradient(loss, x)) < 1e-5);
  for (std::size_t i = 0; i < params.size(); ++i) {
    INFO(params[i]->name);
    CHECK(relative_error(analytic[i], numeric_gradient(loss, params[i]->value)) < 1e-5);
  }
  CHECK(d.backward(l.grad, false).empty());
}

TEST_CASE("generator gradients match central differences") {
  const GanConfig c = tiny_config();
  SeededRng rng(4);
  Generator g(c, rng);
  const Tensor z = random_tensor({2, c.noise_dim}, rng);
  const std::vector<std::size_t> cls{4, 12};
  const Tensor w = random_tensor({2, 9, 300}, rng);
  auto loss = [&] { return weighted_sum(g.forward(z, cls), w); };
  g.forward(z, cls);
  g.backward(w);
  for (Parameter* p : g.parameters()) {
    INFO(p->name);
    const Tensor analytic = p->grad;
    CHECK(relative_error(analytic, numeric_gradient(loss, p->value)) < 1e-5);
  }
}

TEST_CASE("spectral loss examples") {
  const Tensor real = sine_batch(3, 2, 1.0, 0.0);
  CHECK(spectral_loss(real, real).value == 0.0);
  CHECK(spectral_loss(real, real, SpectralMode::Paired).value == 0.0);

  const Tensor shifted = sine_batch(3, 2, 1.0, 0.7);
  const Tensor fast = sine_batch(3, 2, 5.0, 0.0);
  const double phase_only = spectral_loss(real, shifted).value;
  const double wrong_freq = spectral_loss(real, fast).value;
  CHECK(wrong_freq > phase_only);
  CHECK(direct_spectral_loss(real, fast) > direct_spectral_loss(real, shifted));
  CHECK(wrong_freq == doctest::Approx(direct_spectral_loss(real, fast)).epsilon(1e-9));
  CHECK(phase_only == doctest::Approx(direct_spectral_loss(real, shifted)).epsilon(1e-9));

  CHECK_THROWS_AS(spectral_loss(real, sine_batch(2, 2, 1.0, 0.0)), DimensionError);
}

TEST_CASE("spectral loss is symmetric and non-negative") {
  SeededRng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor a = random_tensor({2, 3, 300}, rng);
    const Tensor b = random_tensor({2, 3, 300}, rng);
    for (SpectralMode mode : {SpectralMode::BatchMean, SpectralMode::Paired}) {
      const double ab = spectral_loss(a, b, mode).value;
      CHECK(ab >= 0.0);
      CHECK(ab == doctest::Approx(spectral_loss(b, a, mode).value).epsilon(1e-12));
    }
  }
}

TEST_CASE("spectral loss gradients match central differences") {
  SeededRng rng(6);
  const Tensor real = random_tensor({2, 2, 300}, rng);
  Tensor fake = random_tensor({2, 2, 300}, rng);
  for (SpectralMode mode : {SpectralMode::BatchMean, SpectralMode::Paired}) {
    auto loss = [&] { return spectral_loss(real, fake, mode).value; };
    const Tensor analytic = spectral_loss(real, fake, mode).grad_fake;
    CHECK(relative_error(analytic, numeric_gradient(loss, fake)) < 1e-5);
  }
}

TEST_CASE("class-proportional allocation") {
  std::array<std::size_t, data::kConditionCount> counts{};
  counts[0] = 10;
  counts[4] = 10;
  counts[8] = 10;
  auto out = allocate_counts(counts, 38);
  CHECK(out[0] == 13);
  CHECK(out[4] == 13);
  CHECK(out[8] == 12);
  counts[4] = 20;
  out = allocate_counts(counts, 40);
  CHECK(out[0] == 10);
  CHECK(out[4] == 20);
  CHECK(out[8] == 10);
  std::size_t total = 0;
  for (std::size_t v : allocate_counts(counts, 7)) total += v;
  CHECK(total == 7);
}

TEST_CASE("training is deterministic and persisted models reproduce generation") {
  const data::Dataset ds = small_toy();
  const GanConfig c = tiny_config();
  TrainResult a = train(ds, c);
  const TrainResult b = train(ds, c);
  CHECK(a.log == b.log);
  REQUIRE(a.log.epochs.size() == 2);
  for (const auto& e : a.log.epochs) {
    CHECK(std::isfinite(e.d_loss));
    CHECK((e.d_real > 0.0 && e.d_real < 1.0));
    CHECK((e.probe_hf_ratio >= 0.0 && e.probe_hf_ratio <= 1.0));
  }
  CHECK(a.model.trained_classes == std::vector<std::size_t>{0, 4, 8});

  const auto dir = std::filesystem::temp_directory_path() / "kinesynth_test_cgan";
  std::filesystem::create_directories(dir);
  save(a.model, dir / "gan.ksn");
  GanModel loaded = load(dir / "gan.ksn");
  const auto x = generate(a.model, 4, 3, 11);
  const auto y = generate(loaded, 4, 3, 11);
  REQUIRE(x.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(x[i] == y[i]);
  std::filesystem::remove_all(dir);
}

TEST_CASE("generation contract") {
  const data::Dataset ds = small_toy();
  TrainResult r = train(ds, tiny_config());
  CHECK(generate(r.model, 0, 0, 1).empty());
  CHECK_THROWS_AS(generate(r.model, 30, 1, 1), IndexError);

  const auto trials = generate(r.model, data::parse_condition("T16/ModerateSevere"), 4, 3);
  const auto raw = generate(r.model, data::parse_condition("T16/ModerateSevere"), 4, 3, false);
  REQUIRE(trials.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(trials[i].signal == signal::lowpass(raw[i].signal, 60.0));
    CHECK(signal::high_frequency_power_ratio(trials[i].signal, 60.0) <
          signal::high_frequency_power_ratio(raw[i].signal, 60.0));
  }
  for (const auto& t : trials) {
    CHECK(t.task == data::Task::T16);
    CHECK(t.impairment == data::Impairment::ModerateSevere);
    CHECK(t.subject_id == "synthetic");
    CHECK(t.provenance == data::Provenance::Synthetic);
    CHECK(t.signal.shape() == Shape{9, 300});
    CHECK(t.signal.all_finite());
  }

  // Same noise, different condition.
  const std::vector<std::size_t> one{0}, other{8};
  const Tensor z = sample_noise(1, r.model.config.noise_dim, 3);
  CHECK(generate_raw(r.model, z, one) != generate_raw(r.model, z, other));
}

TEST_CASE("non-finite losses abort training with a diagnostic") {
  data::Dataset ds = small_toy();
  ds.trials[2].signal[17] = std::nan("");
  GanConfig c = tiny_config();
  c.standardize = false;
  try {
    train(ds, c);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
}
