#include "kinesynth/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "kinesynth/adam.hpp"
#include "kinesynth/errors.hpp"
#include "kinesynth/ksn1.hpp"
#include "kinesynth/losses.hpp"
#include "sidecar.hpp"

namespace kinesynth::classifier {

namespace {

using data::kChannels;
using data::kTrialLength;

constexpr std::size_t kPredictChunk = 64;

std::size_t pooled_length(const FcnConfig& c) { return kTrialLength / c.pool / c.pool; }

Tensor stack_signals(std::span<const data::Trial> trials, std::span<const std::size_t> idx,
                     const data::ChannelScaler& scaler) {
  Tensor out({idx.size(), kChannels, kTrialLength});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const data::Trial& t = trials[idx[b]];
    if (t.signal.shape() != Shape{kChannels, kTrialLength}) {
      throw DimensionError("classifier input must be 9 x 300, got " + shape_to_string(t.signal.shape()));
    }
    const Tensor scaled = scaler.apply(t.signal);
    std::copy(scaled.values().begin(), scaled.values().end(), out.data() + b * scaled.size());
  }
  return out;
}

}  // namespace

std::string_view target_name(Target target) { return target == Target::Task ? "task" : "condition"; }

std::optional<Target> parse_target(std::string_view text) {
  if (text == "task") return Target::Task;
  if (text == "condition") return Target::Condition;
  return std::nullopt;
}

std::string format_field(Target target) { return std::string(target_name(target)); }

void parse_field(std::string_view key, std::string_view text, Target& out) {
  const auto target = parse_target(text);
  if (!target) {
    throw ConfigError("config key '" + std::string(key) + "': '" + std::string(text) +
                      "' is not task or condition");
  }
  out = *target;
}

void validate(const FcnConfig& c) {
  const std::pair<std::size_t, const char*> dims[] = {
      {c.conv1_filters, "conv1_filters"}, {c.conv1_kernel, "conv1_kernel"},
      {c.conv2_filters, "conv2_filters"}, {c.conv2_kernel, "conv2_kernel"},
      {c.pool, "pool"},                   {c.dense_width, "dense_width"},
      {c.batch_size, "batch_size"},       {c.epochs, "epochs"}};
  for (const auto& [value, name] : dims) {
    if (value == 0) throw ConfigError(std::string("fcn config: ") + name + " must be positive");
  }
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ConfigError("fcn config: dropout must be in [0, 1)");
  if (!(c.learning_rate > 0.0)) throw ConfigError("fcn config: learning_rate must be positive");
  if (pooled_length(c) == 0) throw ConfigError("fcn config: pooling leaves no time steps");
}

std::size_t class_count(Target target) {
  return target == Target::Task ? data::kTaskCount : data::kConditionCount;
}

std::size_t label_of(const data::Trial& trial, Target target) {
  return target == Target::Task ? trial.task_class() : trial.condition_class();
}

std::size_t parameter_count(const FcnConfig& c) {
  const std::size_t flat = c.conv2_filters * pooled_length(c);
  const std::size_t classes = class_count(c.target);
  return kChannels * c.conv1_filters * c.conv1_kernel + c.conv1_filters +
         c.conv1_filters * c.conv2_filters * c.conv2_kernel + c.conv2_filters +
         flat * c.dense_width + c.dense_width + c.dense_width * classes + classes;
}

Fcn::Fcn(const FcnConfig& c, SeededRng& rng)
    : conv1_("fcn.conv1", kChannels, c.conv1_filters, c.conv1_kernel, Padding::Same, rng),
      pool1_(c.pool),
      conv2_("fcn.conv2", c.conv1_filters, c.conv2_filters, c.conv2_kernel, Padding::Same, rng),
      pool2_(c.pool),
      hidden_("fcn.hidden", c.conv2_filters * pooled_length(c), c.dense_width, rng),
      dropout_(c.dropout),
      out_("fcn.out", c.dense_width, class_count(c.target), rng) {}

Tensor Fcn::forward(const Tensor& x, SeededRng& rng, bool training) {
  require_rank(x, 3, "fcn input");
  if (x.dim(1) != kChannels || x.dim(2) != kTrialLength) {
    throw DimensionError("fcn input must be [B x 9 x 300], got " + shape_to_string(x.shape()));
  }
  Tensor h = pool1_.forward(relu1_.forward(conv1_.forward(x)));
  h = pool2_.forward(relu2_.forward(conv2_.forward(h)));
  flat_from_ = h.shape();
  h = relu3_.forward(hidden_.forward(h.reshaped({h.dim(0), h.dim(1) * h.dim(2)})));
  h = dropout_.forward(h, rng, training);
  return softmax_.forward(out_.forward(h));
}

Tensor Fcn::backward(const Tensor& grad_probs) {
  Tensor g = hidden_.backward(relu3_.backward(dropout_.backward(out_.backward(softmax_.backward(grad_probs)))));
  g = conv2_.backward(relu2_.backward(pool2_.backward(g.reshaped(flat_from_))));
  return conv1_.backward(relu1_.backward(pool1_.backward(g)));
}

ParameterList Fcn::parameters() {
  ParameterList out;
  conv1_.append_parameters(out);
  conv2_.append_parameters(out);
  hidden_.append_parameters(out);
  out_.append_parameters(out);
  return out;
}

std::size_t argmax(std::span<const double> row) {
  if (row.empty()) throw DimensionError("argmax of an empty row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

TrainResult train_classifier(const data::Dataset& train_set, const FcnConfig& config) {
  validate(config);
  const std::size_t n = train_set.size();
  if (n == 0) throw ConfigError("classifier training set is empty");
  const std::size_t classes = class_count(config.target);

  TrainResult result;
  FcnModel& model = result.model;
  model.config = config;
  model.scaler = config.standardize ? data::ChannelScaler::fit(train_set.trials) : data::ChannelScaler::identity();
  const SeededRng root(config.seed);
  SeededRng init = root.derive(1), shuffle_rng = root.derive(2), dropout_rng = root.derive(3);
  model.net = Fcn(config, init);
  const ParameterList params = model.net.parameters();
  Adam opt({config.learning_rate, 0.9, 0.999, 1e-8});

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(label_of(train_set.trials[i], config.target));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    EpochStats stats;
    stats.epoch = epoch;
    std::size_t batches = 0, correct = 0;
    for (std::size_t first = 0; first < n; first += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - first);
      const std::span<const std::size_t> idx(order.data() + first, count);
      const Tensor x = stack_signals(train_set.trials, idx, model.scaler);
      std::vector<int> y(count);
      for (std::size_t b = 0; b < count; ++b) y[b] = labels[idx[b]];
      const Tensor probs = model.net.forward(x, dropout_rng, true);
      const Loss loss = sparse_categorical_cross_entropy(probs, y);
      if (!std::isfinite(loss.value)) {
        std::ostringstream msg;
        msg << "classifier training produced a non-finite loss at epoch " << epoch << " batch "
            << batches + 1 << "; trials [";
        for (std::size_t b = 0; b < count; ++b) msg << (b ? "," : "") << idx[b];
        msg << "]; input finite: " << (x.all_finite() ? "yes" : "no");
        throw TrainingError(msg.str());
      }
      model.net.backward(loss.grad);
      opt.step(params);
      for (std::size_t b = 0; b < count; ++b) {
        if (argmax(std::span<const double>(probs.data() + b * classes, classes)) ==
            static_cast<std::size_t>(y[b])) {
          ++correct;
        }
      }
      stats.loss += loss.value;
      ++batches;
    }
    stats.loss /= static_cast<double>(batches);
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    result.log.push_back(stats);
  }
  return result;
}

void write_train_log_csv(std::span<const EpochStats> log, std::ostream& out) {
  out << "epoch,loss,accuracy\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.accuracy) << '\n';
  }
}

Prediction predict(FcnModel& model, std::span<const data::Trial> trials) {
  Prediction out;
  const std::size_t classes = class_count(model.config.target);
  if (trials.empty()) return out;
  out.probabilities = Tensor({trials.size(), classes});
  SeededRng unused(0);
  std::vector<std::size_t> idx;
  for (std::size_t first = 0; first < trials.size(); first += kPredictChunk) {
    const std::size_t count = std::min(kPredictChunk, trials.size() - first);
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), first);
    const Tensor probs = model.net.forward(stack_signals(trials, idx, model.scaler), unused, false);
    std::copy(probs.values().begin(), probs.values().end(), out.probabilities.data() + first * classes);
  }
  out.classes.resize(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    out.classes[i] = argmax(std::span<const double>(out.probabilities.data() + i * classes, classes));
  }
  return out;
}

void save(FcnModel& model, const std::filesystem::path& path) {
  save_ksn1(path, snapshot(model.net.parameters()));
  detail::write_sidecar(path, detail::Sidecar{"fcn", to_fields(model.config), model.scaler});
}

FcnModel load(const std::filesystem::path& path) {
  const detail::Sidecar side = detail::read_sidecar(path, "fcn");
  FcnModel model;
  model.config = detail::config_from_fields<FcnConfig>(side.config, path);
  validate(model.config);
  model.scaler = side.scaler;
  SeededRng rng(0);
  model.net = Fcn(model.config, rng);
  restore(model.net.parameters(), load_ksn1(path));
  return model;
}

}  // namespace kinesynth::classifier
