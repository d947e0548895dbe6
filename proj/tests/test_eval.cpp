#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "kinesynth/errors.hpp"
#include "kinesynth/eval.hpp"
#include "kinesynth/rng.hpp"
#include "kinesynth/toy.hpp"

using namespace kinesynth;
using namespace kinesynth::eval;

namespace {

// Expands the matrix into (truth, prediction) pairs and scores each class by
// counting pairs, then weights by support.
Metrics oracle_metrics(const ConfusionMatrix& cm) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t r = 0; r < cm.classes(); ++r)
    for (std::size_t c = 0; c < cm.classes(); ++c)
      for (std::uint64_t k = 0; k < cm.at(r, c); ++k) pairs.emplace_back(r, c);
  Metrics m;
  std::size_t correct = 0;
  for (const auto& [t, p] : pairs) correct += (t == p);
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    double tp = 0, fp = 0, fn = 0;
    for (const auto& [t, p] : pairs) {
      if (t == k && p == k) ++tp;
      if (t != k && p == k) ++fp;
      if (t == k && p != k) ++fn;
    }
    const double support = tp + fn;
    if (support == 0) continue;
    const double prec = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
    const double rec = tp / support;
    const double f1 = (prec + rec) > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    m.precision += support * prec;
    m.recall += support * rec;
    m.f1 += support * f1;
  }
  const double n = static_cast<double>(pairs.size());
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  m.accuracy = correct / n;
  return m;
}

ConfusionMatrix random_matrix(SeededRng& rng, std::size_t classes) {
  ConfusionMatrix cm(classes);
  for (std::size_t r = 0; r < classes; ++r) {
    if (rng.uniform() < 0.15) continue;  // class absent from the test set
    for (std::size_t c = 0; c < classes; ++c) {
      if (rng.uniform() < 0.4) cm.add(r, c, rng.uniform_int(r == c ? 30 : 8));
    }
  }
  if (cm.total() == 0) cm.add(0, 1);
  return cm;
}

cgan::GanConfig tiny_gan() {
  cgan::GanConfig g;
  g.noise_dim = 8;
  g.gen_coarse_channels = 2;
  g.gen_filters1 = 4;
  g.gen_filters2 = 4;
  g.gen_kernel = 3;
  g.disc_filters1 = 4;
  g.disc_filters2 = 4;
  g.disc_kernel = 3;
  g.disc_features = 8;
  g.mbd_kernels = 2;
  g.mbd_kernel_dim = 2;
  g.batch_size = 8;
  g.epochs = 2;
  g.probe_size = 2;
  return g;
}

classifier::FcnConfig tiny_fcn() {
  classifier::FcnConfig f;
  f.conv1_filters = 4;
  f.conv1_kernel = 5;
  f.conv2_filters = 4;
  f.conv2_kernel = 3;
  f.pool = 4;
  f.dense_width = 8;
  f.epochs = 3;
  f.batch_size = 16;
  return f;
}

}  // namespace

TEST_CASE("confusion matrix bookkeeping") {
  ConfusionMatrix cm(3);
  cm.add(0, 0, 4);
  cm.add(0, 2);
  cm.add(2, 1, 3);
  CHECK(cm.total() == 8);
  CHECK(cm.trace() == 4);
  CHECK(cm.row_sum(0) == 5);
  CHECK(cm.column_sum(1) == 3);
  ConfusionMatrix sum = cm;
  sum += cm;
  CHECK(sum.at(2, 1) == 6);
  CHECK_THROWS_AS(cm.add(3, 0), IndexError);
  CHECK_THROWS_AS(sum += ConfusionMatrix(4), DimensionError);
}

TEST_CASE("metrics of a perfect diagonal are all one") {
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < cm.classes(); ++i) cm.add(i, i, i + 1);
  const Metrics m = metrics(cm);
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == 1.0);
  CHECK(m.accuracy == 1.0);
}

TEST_CASE("uniform predictions over ten balanced classes score one tenth") {
  ConfusionMatrix cm;
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t c = 0; c < 10; ++c) cm.add(r, c, 5);
  const Metrics m = metrics(cm);
  CHECK(m.accuracy == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(m.precision == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(m.recall == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(m.f1 == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("metrics match a per-pair brute-force oracle") {
  SeededRng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const ConfusionMatrix cm = random_matrix(rng, trial % 3 == 0 ? 30 : 10);
    const Metrics m = metrics(cm), o = oracle_metrics(cm);
    CHECK(std::fabs(m.precision - o.precision) <= 1e-12);
    CHECK(std::fabs(m.recall - o.recall) <= 1e-12);
    CHECK(std::fabs(m.f1 - o.f1) <= 1e-12);
    CHECK(std::fabs(m.accuracy - o.accuracy) <= 1e-12);
  }
}

TEST_CASE("weighted recall equals accuracy to machine precision") {
  SeededRng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const Metrics m = metrics(random_matrix(rng, 10));
    CHECK(std::fabs(m.recall - m.accuracy) <= 4 * std::numeric_limits<double>::epsilon());
  }
}

TEST_CASE("zero denominators score zero and an empty matrix is an error") {
  ConfusionMatrix cm(3);
  cm.add(0, 1, 2);  // class 0 never predicted correctly, class 1 never present
  cm.add(2, 2, 2);
  const Metrics m = metrics(cm);
  CHECK(m.accuracy == 0.5);
  CHECK(m.recall == 0.5);
  CHECK(m.precision == 0.5);  // class 0: 0/0 -> 0; class 2: 1
  CHECK(m.f1 == 0.5);
  CHECK_THROWS_AS(metrics(ConfusionMatrix(10)), DegenerateInputError);
}

TEST_CASE("incomplete beta and Student t against high-precision references") {
  CHECK(std::fabs(incomplete_beta(2, 3, 0.4) - 0.52480000000000003837) < 1e-13);
  CHECK(std::fabs(incomplete_beta(0.5, 0.5, 0.9) - 0.79516723530086657191) < 1e-13);
  CHECK(std::fabs(incomplete_beta(10, 0.5, 0.95) - 0.31715157546554505738) < 1e-13);
  CHECK(std::fabs(incomplete_beta(1.5, 4.5, 0.01) - 0.0075991729935654798807) < 1e-15);
  CHECK(std::fabs(student_t_cdf(2.5, 3) - 0.95614667649596722637) < 1e-13);
  CHECK(student_t_cdf(0.0, 7) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::fabs(student_t_cdf(-2.5, 3) + student_t_cdf(2.5, 3) - 1.0) < 1e-15);
  CHECK_THROWS_AS(incomplete_beta(1, 1, 1.5), ParameterError);
}

TEST_CASE("paired t-test against high-precision references") {
  struct Case {
    std::vector<double> a, b;
    double t, p;
  };
  const std::vector<Case> cases{
      {{1, 2, 3, 4, 5}, {0, 0, 0, 0, 0}, 4.2426406871192851464, 0.01323559956368268952},
      {{0.80, 0.82, 0.79, 0.85, 0.81}, {0.63, 0.66, 0.60, 0.65, 0.62}, 24.76706295480768966,
       0.000015774219566891526991},
      {{0.5, -0.2, 0.3, 0.1, 0.0, 0.4, -0.1, 0.2, 0.6, 0.05, 0.15, -0.3}, std::vector<double>(12, 0.0),
       1.7820842224272611124, 0.10232556202955106326},
      {{2, 1}, {0, 0}, 3.0, 0.20483276469913345165},
  };
  for (const auto& c : cases) {
    const TTest r = paired_t_test(c.a, c.b);
    CHECK(std::fabs(r.t - c.t) <= 1e-9);
    CHECK(std::fabs(r.p - c.p) <= 1e-6);
    CHECK(std::fabs(r.p - c.p) <= 1e-12);
    CHECK(r.dof == c.a.size() - 1);
  }
}

TEST_CASE("paired t-test on symmetric differences gives t = 0 and p = 1") {
  const std::vector<double> d{1, -1, 1, -1}, zero(4, 0.0);
  const TTest r = paired_t_test(d, zero);
  CHECK(r.t == 0.0);
  CHECK(r.p == 1.0);
}

TEST_CASE("paired t-test direction and degenerate inputs") {
  SeededRng rng(3);
  std::vector<double> a(5), b(5);
  for (std::size_t i = 0; i < 5; ++i) {
    b[i] = rng.uniform();
    a[i] = b[i] + 0.2 + 1e-3 * rng.normal();
  }
  const TTest r = paired_t_test(a, b);
  CHECK(r.t > 0);
  CHECK(r.p < 1e-3);
  CHECK(r.p >= 0.0);
  CHECK_THROWS_AS(paired_t_test(b, b), DegenerateInputError);
  std::vector<double> constant_diff(5, 1.0), zero(5, 0.0);
  CHECK_THROWS_AS(paired_t_test(constant_diff, zero), DegenerateInputError);
  CHECK_THROWS_AS(paired_t_test(std::vector<double>{1.0}, std::vector<double>{0.0}), DimensionError);
  CHECK_THROWS_AS(paired_t_test(a, std::vector<double>{1, 2}), DimensionError);
}

TEST_CASE("sample statistics use the n - 1 denominator") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(mean_of(v) == 2.5);
  CHECK(sample_std(v) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK_THROWS_AS(sample_std(std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("synthetic count keeps the augmented set at 2.25 times the real one") {
  CHECK(synthetic_count(48, 60, 5) == 60);
  CHECK(synthetic_count(477, 596, 5) == 596);
  CHECK(synthetic_count(476, 596, 5) == 596);
  CHECK(synthetic_count(30, 60, 5) == 38);
  for (std::size_t n = 25; n < 800; n += 7) {
    for (std::size_t train : {n * 4 / 5, (n * 4 + 4) / 5}) {
      const std::size_t s = synthetic_count(train, n, 5);
      CHECK(s == n);
      CHECK(std::fabs(static_cast<double>(train + s) / static_cast<double>(train) - 2.25) <=
            1.25 / static_cast<double>(train));
    }
  }
}

TEST_CASE("per-class cap subsamples each fold's training set") {
  const data::Dataset ds = data::make_toy_dataset({});
  const data::SplitPlan plan = data::make_folds(ds, 5, data::FoldStrategy::TrialStratified, 2);
  for (std::size_t fold = 0; fold < 5; ++fold) {
    const auto all = plan.train_indices(fold);
    const auto capped = fold_training_indices(ds, plan, fold, 10, 99);
    CHECK(capped.size() == 30);
    CHECK(capped == fold_training_indices(ds, plan, fold, 10, 99));
    const std::set<std::size_t> pool(all.begin(), all.end());
    std::map<std::size_t, std::size_t> per_class;
    for (std::size_t i : capped) {
      CHECK(pool.count(i) == 1);
      ++per_class[ds.trials[i].condition_class()];
    }
    for (const auto& [cls, count] : per_class) CHECK(count == 10);
    CHECK(fold_training_indices(ds, plan, fold, 0, 99) == all);
  }
}

TEST_CASE("cross-validation sizes, pairing and aggregation") {
  const data::Dataset ds = data::make_toy_dataset({});
  ExperimentConfig ex;
  ex.seed = 4;
  const CvReport r = run_cross_validation(ds, ex, tiny_gan(), tiny_fcn());
  REQUIRE(r.real_only.folds.size() == 5);
  REQUIRE(r.augmented.folds.size() == 5);
  for (std::size_t f = 0; f < 5; ++f) {
    const auto& real = r.real_only.folds[f];
    const auto& aug = r.augmented.folds[f];
    CHECK(real.train_real == 48);
    CHECK(real.train_synthetic == 0);
    CHECK(real.test == 12);
    CHECK(aug.train_real == 48);
    CHECK(aug.train_synthetic == 60);
    CHECK(static_cast<double>(aug.train_real + aug.train_synthetic) / static_cast<double>(real.train_real) == 2.25);
    CHECK(aug.seeds.classifier == real.seeds.classifier);
    CHECK(real.confusion.total() == real.test);
    CHECK(std::fabs(real.metrics.recall - real.metrics.accuracy) <= 4 * std::numeric_limits<double>::epsilon());
  }
  CHECK(r.real_only.confusion.total() == 60);
  for (std::size_t i = 0; i < data::kTaskCount; ++i) {
    CHECK(r.real_only.confusion.row_sum(i) == r.augmented.confusion.row_sum(i));
  }
  std::vector<double> acc;
  for (const auto& f : r.augmented.folds) acc.push_back(f.metrics.accuracy);
  CHECK(r.augmented.mean.accuracy == mean_of(acc));
  CHECK(r.augmented.sd.accuracy == sample_std(acc));
  for (const auto& p : r.paired) {
    if (p.test) {
      CHECK(p.test->p >= 0.0);
      CHECK(p.test->p <= 1.0);
    } else {
      CHECK(!p.reason.empty());
    }
  }
}

TEST_CASE("real-only cross-validation is deterministic") {
  const data::Dataset ds = data::make_toy_dataset({});
  ExperimentConfig ex;
  ex.seed = 9;
  ex.train_cap_per_class = 10;
  const auto plan = data::make_folds(ds, 5, ex.strategy, ex.seed);
  const auto a = run_experiment(ds, plan, ex, tiny_gan(), tiny_fcn(), Condition::RealOnly);
  const auto b = run_experiment(ds, plan, ex, tiny_gan(), tiny_fcn(), Condition::RealOnly);
  REQUIRE(a.folds.size() == b.folds.size());
  for (std::size_t f = 0; f < a.folds.size(); ++f) {
    CHECK(a.folds[f].metrics == b.folds[f].metrics);
    CHECK(a.folds[f].confusion == b.folds[f].confusion);
    CHECK(a.folds[f].train_real == 30);
  }
  const auto aug = run_experiment(ds, plan, ex, tiny_gan(), tiny_fcn(), Condition::Augmented);
  for (const auto& f : aug.folds) {
    CHECK(f.train_synthetic == 38);
    CHECK(std::fabs(static_cast<double>(f.train_real + f.train_synthetic) / 30.0 - 2.25) <= 1.25 / 30.0);
  }
}

TEST_CASE("synthetic trials are refused as cross-validation input") {
  data::Dataset ds = data::make_toy_dataset({});
  ds.trials[3].provenance = data::Provenance::Synthetic;
  const auto plan = data::make_folds(ds, 5, data::FoldStrategy::TrialStratified, 1);
  CHECK_THROWS_AS(run_experiment(ds, plan, {}, tiny_gan(), tiny_fcn(), Condition::RealOnly), ConfigError);
}

TEST_CASE("report JSON round trip and schema") {
  const data::Dataset ds = data::make_toy_dataset({});
  ExperimentConfig ex;
  ex.seed = 1;
  ex.train_cap_per_class = 10;
  const CvReport r = run_cross_validation(ds, ex, tiny_gan(), tiny_fcn());
  std::ostringstream first;
  write_report_json(r, first);
  std::istringstream in(first.str());
  const CvReport back = read_report_json(in);
  std::ostringstream second;
  write_report_json(back, second);
  CHECK(first.str() == second.str());

  const auto doc = nlohmann::ordered_json::parse(first.str());
  CHECK(doc.at("schema_version") == kReportSchema);
  for (const char* cond : {"real_only", "augmented"}) {
    const auto& mean = doc.at("conditions").at(cond).at("mean");
    std::vector<std::string> keys;
    for (const auto& [k, v] : mean.items()) {
      keys.push_back(k);
      CHECK(v.get<double>() >= 0.0);
      CHECK(v.get<double>() <= 1.0);
    }
    CHECK(keys == std::vector<std::string>{"precision", "recall", "f1", "accuracy"});
  }
  std::istringstream bad(R"({"schema_version": 2, "kind": "cv_report"})");
  CHECK_THROWS_AS(read_report_json(bad), SchemaError);
}

TEST_CASE("confusion CSV layout") {
  ConfusionMatrix cm(2);
  cm.add(0, 0, 3);
  cm.add(1, 0, 1);
  std::ostringstream out;
  const std::vector<std::string> labels{"A", "B"};
  write_confusion_csv(cm, labels, out);
  CHECK(out.str() == "true\\predicted,A,B\nA,3,0\nB,1,0\n");
  CHECK(class_labels(classifier::Target::Task).front() == "T02");
  CHECK(class_labels(classifier::Target::Condition).size() == 30);
}
