#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "kinesynth/classifier.hpp"
#include "kinesynth/errors.hpp"
#include "kinesynth/losses.hpp"
#include "kinesynth/toy.hpp"
#include "support/gradcheck.hpp"

using namespace kinesynth;
using namespace kinesynth::classifier;
using namespace kinesynth::testing;

namespace {

FcnConfig small_config() {
  FcnConfig c;
  c.conv1_filters = 4;
  c.conv1_kernel = 5;
  c.conv2_filters = 6;
  c.conv2_kernel = 3;
  c.pool = 4;
  c.dense_width = 16;
  c.dropout = 0.0;
  c.batch_size = 8;
  c.epochs = 10;
  return c;
}

// White-noise trials with labels cycling over the ten tasks.
data::Dataset noise_trials(std::size_t n, std::uint64_t seed) {
  SeededRng rng(seed);
  data::Dataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    data::Trial t;
    t.subject_id = "s" + std::to_string(i);
    t.task = data::task_from_index(i % data::kTaskCount);
    t.signal = random_tensor({data::kChannels, data::kTrialLength}, rng);
    ds.trials.push_back(std::move(t));
  }
  return ds;
}

double accuracy(FcnModel& model, const data::Dataset& ds) {
  const Prediction p = predict(model, ds.trials);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) ok += p.classes[i] == label_of(ds.trials[i], model.config.target);
  return static_cast<double>(ok) / static_cast<double>(ds.size());
}

}  // namespace

TEST_CASE("parameter count has the closed form") {
  CHECK(parameter_count(FcnConfig{}) == 628170);
  for (const FcnConfig& c : {FcnConfig{}, small_config()}) {
    SeededRng rng(1);
    Fcn net(c, rng);
    CHECK(kinesynth::parameter_count(net.parameters()) == parameter_count(c));
  }
  FcnConfig cond = small_config();
  cond.target = Target::Condition;
  SeededRng rng(1);
  Fcn net(cond, rng);
  CHECK(net.forward(Tensor({2, 9, 300}), rng, false).shape() == Shape{2, 30});
}

TEST_CASE("invalid configurations are rejected") {
  FcnConfig c = small_config();
  c.dropout = 1.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = small_config();
  c.pool = 20;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = small_config();
  c.dense_width = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = small_config();
  CHECK(set_field(c, "target", "condition"));
  CHECK(c.target == Target::Condition);
  CHECK_THROWS_AS(set_field(c, "target", "subject"), ConfigError);
  CHECK_FALSE(set_field(c, "momentum", "0.9"));
}

TEST_CASE("probability rows sum to one and inference is deterministic") {
  const data::Dataset ds = noise_trials(70, 2);
  FcnConfig c = small_config();
  c.dropout = 0.5;
  c.epochs = 1;
  FcnModel model = train_classifier(ds, c).model;
  const Prediction a = predict(model, ds.trials);
  const Prediction b = predict(model, ds.trials);
  CHECK(a.probabilities == b.probabilities);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < 10; ++k) s += a.probabilities.at(i, k);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("predictions do not depend on batch composition") {
  const data::Dataset ds = noise_trials(70, 3);
  FcnModel model = train_classifier(ds, small_config()).model;
  const Prediction forward = predict(model, ds.trials);
  std::vector<data::Trial> reversed(ds.trials.rbegin(), ds.trials.rend());
  const Prediction backward = predict(model, reversed);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(forward.classes[i] == backward.classes[ds.size() - 1 - i]);
    for (std::size_t k = 0; k < 10; ++k) {
      CHECK(forward.probabilities.at(i, k) == doctest::Approx(backward.probabilities.at(ds.size() - 1 - i, k)).epsilon(1e-12));
    }
  }
  const Prediction single = predict(model, std::span(ds.trials).subspan(5, 1));
  CHECK(single.classes[0] == forward.classes[5]);
}

TEST_CASE("argmax breaks ties towards the lowest index") {
  CHECK(argmax(std::vector<double>{0.1, 0.9}) == 1);
  CHECK(argmax(std::vector<double>{0.1, 0.2, 0.3, 0.1, 0.0, 0.3}) == 2);
  CHECK(argmax(std::vector<double>{0.5, 0.5}) == 0);
  CHECK_THROWS_AS(argmax(std::vector<double>{}), DimensionError);
}

TEST_CASE("end-to-end gradients match central differences") {
  FcnConfig c = small_config();
  c.dropout = 0.3;
  SeededRng init(5);
  Fcn net(c, init);
  SeededRng rng(6);
  Tensor x = random_tensor({2, 9, 300}, rng);
  const std::vector<int> labels{3, 7};
  // Same dropout mask on every evaluation.
  auto loss = [&] {
    SeededRng mask(9);
    return sparse_categorical_cross_entropy(net.forward(x, mask, true), labels).value;
  };
  SeededRng mask(9);
  const Loss l = sparse_categorical_cross_entropy(net.forward(x, mask, true), labels);
  const Tensor gx = net.backward(l.grad);
  std::vector<Tensor> analytic;
  for (Parameter* p : net.parameters()) analytic.push_back(p->grad);
  CHECK(relative_error(gx, numeric_gradient(loss, x)) < 1e-5);
  const ParameterList params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    INFO(params[i]->name);
    CHECK(relative_error(analytic[i], numeric_gradient(loss, params[i]->value)) < 1e-5);
  }
}

TEST_CASE("a small network memorises 32 samples") {
  const data::Dataset ds = noise_trials(32, 4);
  FcnConfig c = small_config();
  c.epochs = 200;
  c.learning_rate = 3e-3;
  TrainResult r = train_classifier(ds, c);
  CHECK(accuracy(r.model, ds) == 1.0);
  CHECK(r.log.size() == 200);
  CHECK(r.log.back().loss < r.log.front().loss);
}

TEST_CASE("labels unrelated to the signals give chance accuracy on held-out data") {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const data::Dataset train = noise_trials(100, 100 + seed);
    const data::Dataset test = noise_trials(200, 200 + seed);
    FcnConfig c = small_config();
    c.seed = seed;
    FcnModel m = train_classifier(train, c).model;
    total += accuracy(m, test);
  }
  CHECK(std::fabs(total / 5.0 - 0.1) <= 0.05);
}

TEST_CASE("training is deterministic and the toy tasks are learnable") {
  const data::Dataset ds = data::make_toy_dataset({});
  FcnConfig c = small_config();
  c.dropout = 0.5;
  c.epochs = 15;
  c.seed = 12;
  TrainResult a = train_classifier(ds, c);
  TrainResult b = train_classifier(ds, c);
  CHECK(a.log == b.log);
  CHECK(predict(a.model, ds.trials).probabilities == predict(b.model, ds.trials).probabilities);
  CHECK(accuracy(a.model, ds) >= 0.9);
  c.seed = 13;
  CHECK(train_classifier(ds, c).log != a.log);
}

TEST_CASE("saved models reproduce predictions") {
  const data::Dataset ds = data::make_toy_dataset({});
  FcnConfig c = small_config();
  c.epochs = 2;
  c.target = Target::Condition;
  FcnModel model = train_classifier(ds, c).model;
  const auto path = std::filesystem::temp_directory_path() / "kinesynth_test_fcn.ksn1";
  save(model, path);
  FcnModel back = load(path);
  CHECK(back.scaler == model.scaler);
  CHECK(back.config.target == Target::Condition);
  CHECK(predict(back, ds.trials).probabilities == predict(model, ds.trials).probabilities);
  std::filesystem::remove(path.string() + ".json");
  CHECK_THROWS_AS(load(path), SchemaError);
  std::filesystem::remove(path);
}

TEST_CASE("non-finite inputs abort training") {
  data::Dataset ds = noise_trials(10, 1);
  ds.trials[4].signal[17] = std::numeric_limits<double>::quiet_NaN();
  FcnConfig c = small_config();
  c.standardize = false;
  CHECK_THROWS_WITH_AS(train_classifier(ds, c), doctest::Contains("epoch 1"), TrainingError);
  CHECK_THROWS_AS(train_classifier(data::Dataset{}, c), ConfigError);
}
