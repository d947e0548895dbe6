#pragma once

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

namespace kinesynth::classifier {

enum class Target {
  Task,       // 10 task classes
  Condition,  // 30 (task, impairment) classes
};
std::string_view target_name(Target target);
std::optional<Target> parse_target(std::string_view text);
std::string format_field(Target target);
void parse_field(std::string_view key, std::string_view text, Target& out);

struct FcnConfig {
  std::size_t conv1_filters = 32;
  std::size_t conv1_kernel = 7;
  std::size_t conv2_filters = 64;
  std::size_t conv2_kernel = 5;
  std::size_t pool = 2;
  std::size_t dense_width = 128;
  double dropout = 0.5;
  Target target = Target::Task;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  bool standardize = true;
  std::uint64_t seed = 0;
};

template <typename Config, typename Visitor>
  requires std::is_same_v<std::remove_const_t<Config>, FcnConfig>
void visit_fields(Config& c, Visitor&& v) {
  v("conv1_filters", c.conv1_filters);
  v("conv1_kernel", c.conv1_kernel);
  v("conv2_filters", c.conv2_filters);
  v("conv2_kernel", c.conv2_kernel);
  v("pool", c.pool);
  v("dense_width", c.dense_width);
  v("dropout", c.dropout);
  v("target", c.target);
  v("learning_rate", c.learning_rate);
  v("batch_size", c.batch_size);
  v("epochs", c.epochs);
  v("standardize", c.standardize);
  v("seed", c.seed);
}

// Throws ConfigError on inconsistent settings.
void validate(const FcnConfig& config);
std::size_t class_count(Target target);
std::size_t label_of(const data::Trial& trial, Target target);
std::size_t parameter_count(const FcnConfig& config);

// conv(relu) -> maxpool -> conv(relu) -> maxpool -> flatten -> dense(relu)
// -> dropout -> dense -> softmax, on [B x 9 x 300] inputs.
class Fcn {
 public:
  Fcn() = default;
  Fcn(const FcnConfig& config, SeededRng& rng);

  // Probability rows [B x classes]. Dropout is active only when training.
  Tensor forward(const Tensor& x, SeededRng& rng, bool training);
  // Gradient of the loss with respect to the probabilities; accumulates
  // parameter gradients and returns the input gradient.
  Tensor backward(const Tensor& grad_probs);
  ParameterList parameters();

 private:
  Conv1d conv1_;
  LeakyRelu relu1_;
  MaxPool1d pool1_;
  Conv1d conv2_;
  LeakyRelu relu2_;
  MaxPool1d pool2_;
  Dense hidden_;
  LeakyRelu relu3_;
  Dropout dropout_;
  Dense out_;
  Softmax softmax_;
  Shape flat_from_;
};

struct FcnModel {
  FcnConfig config;
  Fcn net;
  data::ChannelScaler scaler = data::ChannelScaler::identity();
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;      // mean minibatch loss
  double accuracy = 0.0;  // fraction of training samples classified correctly in their minibatch

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainResult {
  FcnModel model;
  std::vector<EpochStats> log;
};

// Seeded shuffling and dropout; throws TrainingError on a non-finite loss.
TrainResult train_classifier(const data::Dataset& train_set, const FcnConfig& config);

void write_train_log_csv(std::span<const EpochStats> log, std::ostream& out);

// Lowest index wins exact ties.
std::size_t argmax(std::span<const double> row);

struct Prediction {
  std::vector<std::size_t> classes;
  Tensor probabilities;  // [N x classes]
};

// Inference-mode predictions; every trial must be 9 x 300.
Prediction predict(FcnModel& model, std::span<const data::Trial> trials);

// "<path>" holds the KSN1 weights and "<path>.json" the config and scaler.
void save(FcnModel& model, const std::filesystem::path& path);
FcnModel load(const std::filesystem::path& path);

}  // namespace kinesynth::classifier
