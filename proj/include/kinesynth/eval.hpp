#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "kinesynth/cgan.hpp"
#include "kinesynth/classifier.hpp"
#include "kinesynth/data.hpp"
#include "kinesynth/fields.hpp"

namespace kinesynth::eval {

// Square count matrix: rows are true classes, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = data::kTaskCount);

  std::size_t classes() const noexcept { return n_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const;
  void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t column_sum(std::size_t predicted) const;
  std::uint64_t trace() const;
  std::uint64_t total() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

inline constexpr std::array<std::string_view, 4> kMetricNames{"precision", "recall", "f1", "accuracy"};
double metric_value(const Metrics& m, std::string_view name);

// Per-class precision, recall and F1 (0 when a denominator is 0), averaged
// with weights equal to each class's row sum; accuracy is trace / total.
// Throws DegenerateInputError on an empty matrix.
Metrics metrics(const ConfusionMatrix& cm);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);
// Student-t cumulative distribution with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

struct TTest {
  double t = 0.0;
  double p = 1.0;  // two-tailed
  std::size_t dof = 0;
};

// Paired test on a - b. Throws DimensionError for fewer than 2 pairs or
// unequal lengths and DegenerateInputError when every difference is equal.
TTest paired_t_test(std::span<const double> a, std::span<const double> b);

// Sample mean and standard deviation (n - 1 denominator).
double mean_of(std::span<const double> values);
double sample_std(std::span<const double> values);

enum class Condition { RealOnly, Augmented };
std::string_view condition_label(Condition condition);

struct ExperimentConfig {
  std::size_t n_folds = 5;
  data::FoldStrategy strategy = data::FoldStrategy::TrialStratified;
  // Per-class cap on real training trials in each fold; 0 keeps them all.
  std::size_t train_cap_per_class = 0;
  bool filter_synthetic = true;
  // Root of the split, subsampling, GAN, synthesis and classifier seeds.
  std::uint64_t seed = 0;
};

template <typename Config, typename Visitor>
  requires std::is_same_v<std::remove_const_t<Config>, ExperimentConfig>
void visit_fields(Config& c, Visitor&& v) {
  v("n_folds", c.n_folds);
  v("strategy", c.strategy);
  v("train_cap_per_class", c.train_cap_per_class);
  v("filter_synthetic", c.filter_synthetic);
  v("seed", c.seed);
}

// Seeds actually used for one fold; both conditions share them.
struct FoldSeeds {
  std::uint64_t subsample = 0;
  std::uint64_t classifier = 0;
  std::uint64_t gan = 0;
  std::uint64_t synthesis = 0;
};
FoldSeeds fold_seeds(std::uint64_t experiment_seed, std::size_t fold);

// Synthetic trials added to a fold with `train_size` real training trials:
// the full dataset size when that keeps the augmented set at
// 1 + n/(n-1) times the real one (2.25 for five folds) within rounding,
// otherwise that multiple of train_size rounded.
std::size_t synthetic_count(std::size_t train_size, std::size_t dataset_size, std::size_t n_folds);

// Real training indices of a fold after the per-class cap (sorted).
std::vector<std::size_t> fold_training_indices(const data::Dataset& dataset, const data::SplitPlan& plan,
                                               std::size_t fold, std::size_t cap_per_class,
                                               std::uint64_t subsample_seed);

struct FoldResult {
  std::size_t fold = 0;
  std::size_t train_real = 0;
  std::size_t train_synthetic = 0;
  std::size_t test = 0;
  FoldSeeds seeds;
  Metrics metrics;
  ConfusionMatrix confusion;
};

struct ConditionResult {
  Condition condition = Condition::RealOnly;
  std::vector<FoldResult> folds;
  Metrics mean;
  Metrics sd;  // sample standard deviation over folds
  ConfusionMatrix confusion;  // pooled over folds
};

using Progress = std::function<void(const std::string&)>;

// Five-fold (or n-fold) cross-validation of one condition. In the augmented
// condition each fold trains its own GAN on that fold's real training trials
// only. Throws TrainingError naming the fold if a sub-step fails.
ConditionResult run_experiment(const data::Dataset& dataset, const data::SplitPlan& plan,
                               const ExperimentConfig& experiment, const cgan::GanConfig& gan,
                               const classifier::FcnConfig& fcn, Condition condition,
                               const Progress& progress = {});

struct PairedTest {
  std::optional<TTest> test;
  std::string reason;  // why the test is absent
};

struct CvReport {
  ExperimentConfig experiment;
  cgan::GanConfig gan;
  classifier::FcnConfig fcn;
  std::size_t dataset_size = 0;
  ConditionResult real_only;
  ConditionResult augmented;
  std::array<PairedTest, 4> paired;  // in kMetricNames order, augmented vs real-only
};

// Both conditions on the same folds and classifier seeds, plus paired t-tests.
CvReport run_cross_validation(const data::Dataset& dataset, const ExperimentConfig& experiment,
                              const cgan::GanConfig& gan, const classifier::FcnConfig& fcn,
                              const Progress& progress = {});

inline constexpr int kReportSchema = 1;
void write_report_json(const CvReport& report, std::ostream& out);
void write_report_json(const CvReport& report, const std::filesystem::path& path);
CvReport read_report_json(std::istream& in);
CvReport read_report_json(const std::filesystem::path& path);

// Header row of predicted labels, one row per true label.
void write_confusion_csv(const ConfusionMatrix& cm, std::span<const std::string> labels, std::ostream& out);

// Task or condition names for a classifier target.
std::vector<std::string> class_labels(classifier::Target target);

}  // namespace kinesynth::eval
