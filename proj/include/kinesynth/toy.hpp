#pragma once

#include <cstdint>
#include <vector>

#include "kinesynth/data.hpp"

namespace kinesynth::data {

// Deterministic stand-in for the clinical recordings: each trial is an
// out-and-back reach built from smooth sin^2 envelopes. The task fixes the
// per-channel waveform; impairment enlarges trunk (T8) excursions, shrinks
// arm ranges and slows the movement. Trials vary in timing and amplitude
// and carry a small amount of sensor noise.
struct ToyConfig {
  std::vector<std::size_t> classes{condition_index(Task::T02, Impairment::Control),
                                   condition_index(Task::T03, Impairment::Mild),
                                   condition_index(Task::T04, Impairment::ModerateSevere)};
  std::size_t trials_per_class = 20;
  std::size_t subjects_per_group = 4;
  double noise_level = 0.01;  // white noise as a fraction of channel amplitude
  std::uint64_t seed = 7;
};

Dataset make_toy_dataset(const ToyConfig& config);

}  // namespace kinesynth::data
