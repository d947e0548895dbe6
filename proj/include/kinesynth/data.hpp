#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kinesynth/tensor.hpp"

namespace kinesynth::data {

inline constexpr std::size_t kTaskCount = 10;
inline constexpr std::size_t kImpairmentCount = 3;
inline constexpr std::size_t kConditionCount = kTaskCount * kImpairmentCount;
inline constexpr std::size_t kChannels = 9;
inline constexpr std::size_t kTrialLength = 300;
inline constexpr double kSampleRate = 60.0;
inline constexpr int kFmmaMax = 66;
inline constexpr int kMildThreshold = 42;  // scores above are Mild

// Sorted task ids; the enumerator value is the task class index.
enum class Task { T02, T03, T04, T06, T08, T10, T16, T18, T19, T28 };
enum class Impairment { Control, Mild, ModerateSevere };
enum class Provenance { Real, Synthetic };

// Fixed channel order of a trial signal.
inline constexpr std::array<std::string_view, kChannels> kChannelNames{
    "t8_pos_x_cm",   "t8_pos_y_cm",   "t8_pos_z_cm",     "t8_orient_z_rad", "shoulder_x_rad",
    "shoulder_y_rad", "shoulder_z_rad", "elbow_x_rad",     "elbow_y_rad"};
inline constexpr std::size_t kPositionChannels = 3;  // channels [0, 3) are T8 positions

std::string_view task_name(Task task);
std::optional<Task> parse_task(std::string_view text);
std::string_view impairment_name(Impairment impairment);
std::optional<Impairment> parse_impairment(std::string_view text);
std::string_view provenance_name(Provenance provenance);

inline std::size_t task_index(Task task) { return static_cast<std::size_t>(task); }
inline std::size_t condition_index(Task task, Impairment impairment) {
  return task_index(task) * kImpairmentCount + static_cast<std::size_t>(impairment);
}
Task task_from_index(std::size_t index);
std::pair<Task, Impairment> condition_from_index(std::size_t index);
// "T16/ModerateSevere"
std::string condition_name(std::size_t index);
std::size_t parse_condition(std::string_view text);

// Control when the score is absent, Mild above 42, ModerateSevere otherwise.
Impairment categorize_impairment(std::optional<int> fmma_ue);

struct Trial {
  std::string subject_id;
  Task task = Task::T02;
  Impairment impairment = Impairment::Control;
  std::optional<int> fmma_ue;
  Tensor signal;  // [9 x 300], cm and rad
  double sample_rate = kSampleRate;
  Provenance provenance = Provenance::Real;

  std::size_t task_class() const { return task_index(task); }
  std::size_t condition_class() const { return condition_index(task, impairment); }

  friend bool operator==(const Trial&, const Trial&) = default;
};

struct Dataset {
  std::vector<Trial> trials;

  std::size_t size() const noexcept { return trials.size(); }
  std::array<std::size_t, kConditionCount> condition_counts() const;
  Dataset subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Head-anchored crop to `length` samples, or extension by repeating the last column.
Tensor crop_or_pad(const Tensor& raw, std::size_t length = kTrialLength);

enum class PositionUnit { Meter, Centimeter };
enum class AngleUnit { Degree, Radian };
struct Units {
  PositionUnit position = PositionUnit::Centimeter;
  AngleUnit angle = AngleUnit::Radian;
};
std::optional<PositionUnit> parse_position_unit(std::string_view text);
std::optional<AngleUnit> parse_angle_unit(std::string_view text);

// Position channels become centimetres relative to their first sample; the
// angle channels become radians. Applying it to its own output with
// Units{cm, rad} is the identity.
Tensor normalize_units(const Tensor& raw, Units units);

struct IngestResult {
  Dataset dataset;
  std::size_t skipped_unknown_task = 0;
  std::size_t rows_read = 0;
};

// Wide interchange CSV. Header:
//   subject_id,task,fmma_ue,sample_rate,unit_pos,unit_ang,n_samples,
//   ch0_t0..ch0_t{L-1},ch1_t0,...,ch8_t{L-1}
// One row per trial; cells beyond n_samples are empty. fmma_ue holds an
// integer score, is empty for controls, or names the impairment group for
// trials without a score (synthetic data).
IngestResult ingest(std::istream& in);
IngestResult ingest(const std::filesystem::path& path);
void export_csv(const Dataset& dataset, std::ostream& out);
void export_csv(const Dataset& dataset, const std::filesystem::path& path);

// Per-channel affine standardisation fitted over a set of trials.
struct ChannelScaler {
  std::array<double, kChannels> mean{};
  std::array<double, kChannels> scale{};

  static ChannelScaler identity();
  static ChannelScaler fit(std::span<const Trial> trials);
  Tensor apply(const Tensor& signal) const;   // (x - mean) / scale
  Tensor invert(const Tensor& signal) const;  // x * scale + mean

  friend bool operator==(const ChannelScaler&, const ChannelScaler&) = default;
};

enum class FoldStrategy { TrialStratified, SubjectWise };
std::string_view fold_strategy_name(FoldStrategy strategy);
std::optional<FoldStrategy> parse_fold_strategy(std::string_view text);
std::string format_field(FoldStrategy strategy);
void parse_field(std::string_view key, std::string_view text, FoldStrategy& out);

struct SplitPlan {
  std::size_t n_folds = 5;
  std::vector<std::size_t> fold_of;  // per trial
  FoldStrategy strategy = FoldStrategy::TrialStratified;
  std::uint64_t seed = 0;

  std::vector<std::size_t> test_indices(std::size_t fold) const;
  std::vector<std::size_t> train_indices(std::size_t fold) const;

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

// TrialStratified shuffles each (task, impairment) class and deals it
// round-robin over the folds; SubjectWise assigns whole subjects greedily to
// the fold with the fewest trials.
SplitPlan make_folds(const Dataset& dataset, std::size_t n_folds, FoldStrategy strategy,
                     std::uint64_t seed);

}  // namespace kinesynth::data
