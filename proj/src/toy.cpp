#include "kinesynth/toy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "kinesynth/errors.hpp"
#include "kinesynth/rng.hpp"

namespace kinesynth::data {

namespace {

constexpr std::array<double, kChannels> kChannelScale{6.0, 6.0, 4.0, 0.15, 0.8, 0.6, 0.7, 0.9, 0.9};
constexpr std::array<double, kImpairmentCount> kTrunkGain{1.0, 1.8, 2.8};
constexpr std::array<double, kImpairmentCount> kArmGain{1.0, 0.75, 0.5};
constexpr std::array<double, kImpairmentCount> kDurationGain{1.0, 1.2, 1.45};
constexpr double kBaseDuration = 2.4;  // seconds

bool is_trunk(std::size_t channel) { return channel <= 3; }

// Task waveform coefficients for sin^2(pi u), sin(pi u) sin(2 pi u), sin^2(2 pi u).
std::array<double, 3> task_coefficients(std::size_t task, std::size_t channel) {
  SeededRng rng(mix_seed(0x70C0FFEEULL, task * 16 + channel));
  std::array<double, 3> a{};
  for (double& v : a) v = rng.uniform(-1.0, 1.0);
  return a;
}

double waveform(const std::array<double, 3>& a, double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  const double s1 = std::sin(std::numbers::pi * u);
  const double s2 = std::sin(2.0 * std::numbers::pi * u);
  return a[0] * s1 * s1 + a[1] * s1 * s2 + a[2] * s2 * s2;
}

int subject_score(Impairment impairment, std::size_t subject) {
  if (impairment == Impairment::Mild) return 43 + static_cast<int>((subject * 5) % 20);
  return 10 + static_cast<int>((subject * 8) % 33);
}

}  // namespace

Dataset make_toy_dataset(const ToyConfig& config) {
  if (config.classes.empty()) throw ConfigError("toy fixture needs at least one class");
  if (config.trials_per_class == 0) throw ConfigError("toy fixture needs trials_per_class >= 1");
  if (config.subjects_per_group == 0) throw ConfigError("toy fixture needs subjects_per_group >= 1");
  Dataset dataset;
  SeededRng rng(config.seed);
  for (std::size_t cls : config.classes) {
    const auto [task, impairment] = condition_from_index(cls);
    const auto imp = static_cast<std::size_t>(impairment);
    std::array<std::array<double, 3>, kChannels> base{};
    for (std::size_t c = 0; c < kChannels; ++c) base[c] = task_coefficients(task_index(task), c);

    for (std::size_t n = 0; n < config.trials_per_class; ++n) {
      const std::size_t subject = n % config.subjects_per_group;
      SeededRng subject_rng(mix_seed(config.seed, 1000 * (imp + 1) + subject));
      const double subject_gain = 1.0 + 0.1 * subject_rng.normal();

      Trial trial;
      trial.task = task;
      trial.impairment = impairment;
      trial.subject_id = "toy-" + std::string(impairment_name(impairment)) + "-" + std::to_string(subject);
      if (impairment != Impairment::Control) trial.fmma_ue = subject_score(impairment, subject);

      const double duration = kBaseDuration * kDurationGain[imp] * rng.uniform(0.9, 1.1);
      const double onset = rng.uniform(0.3, 0.9);
      Tensor signal({kChannels, kTrialLength});
      for (std::size_t c = 0; c < kChannels; ++c) {
        const double gain = kChannelScale[c] * (is_trunk(c) ? kTrunkGain[imp] : kArmGain[imp]) *
                            subject_gain * std::max(0.5, 1.0 + 0.15 * rng.normal());
        std::array<double, 3> coeff = base[c];
        for (double& v : coeff) v += 0.15 * rng.normal();
        for (std::size_t t = 0; t < kTrialLength; ++t) {
          const double seconds = static_cast<double>(t) / kSampleRate;
          const double u = (seconds - onset) / duration;
          signal.at(c, t) = gain * waveform(coeff, u) +
                            config.noise_level * kChannelScale[c] * rng.normal();
        }
      }
      trial.signal = normalize_units(signal, Units{});
      dataset.trials.push_back(std::move(trial));
    }
  }
  return dataset;
}

}  // namespace kinesynth::data
