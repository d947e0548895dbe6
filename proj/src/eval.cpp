#include "kinesynth/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "kinesynth/errors.hpp"
#include "kinesynth/rng.hpp"

namespace kinesynth::eval {

namespace {

using nlohmann::ordered_json;

constexpr int kBetaMaxIterations = 500;
constexpr double kBetaEpsilon = 1e-16;
constexpr double kTiny = 1e-300;

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kBetaMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kBetaEpsilon) return h;
  }
  throw ParameterError("incomplete beta: continued fraction did not converge for a=" + format_double(a) +
                       " b=" + format_double(b) + " x=" + format_double(x));
}

std::array<double, 4> as_array(const Metrics& m) { return {m.precision, m.recall, m.f1, m.accuracy}; }

Metrics from_array(const std::array<double, 4>& v) { return {v[0], v[1], v[2], v[3]}; }

ordered_json metrics_json(const Metrics& m) {
  ordered_json out;
  const auto v = as_array(m);
  for (std::size_t i = 0; i < kMetricNames.size(); ++i) out[std::string(kMetricNames[i])] = v[i];
  return out;
}

Metrics metrics_from_json(const ordered_json& j) {
  std::array<double, 4> v{};
  for (std::size_t i = 0; i < kMetricNames.size(); ++i) v[i] = j.at(std::string(kMetricNames[i])).get<double>();
  return from_array(v);
}

ordered_json confusion_json(const ConfusionMatrix& cm) {
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < cm.classes(); ++r) {
    ordered_json row = ordered_json::array();
    for (std::size_t c = 0; c < cm.classes(); ++c) row.push_back(cm.at(r, c));
    rows.push_back(row);
  }
  return rows;
}

ConfusionMatrix confusion_from_json(const ordered_json& j) {
  ConfusionMatrix cm(j.size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != j.size()) throw SchemaError("confusion matrix is not square");
    for (std::size_t c = 0; c < j.size(); ++c) cm.add(r, c, j[r][c].get<std::uint64_t>());
  }
  return cm;
}

ordered_json fields_json(const Fields& fields) {
  ordered_json out = ordered_json::object();
  for (const auto& [key, value] : fields) out[key] = value;
  return out;
}

template <typename Config>
Config config_from_json(const ordered_json& j, std::string_view what) {
  Config config;
  for (const auto& [key, value] : j.items()) {
    if (!set_field(config, key, value.template get<std::string>())) {
      throw SchemaError("report " + std::string(what) + " config: unknown key '" + key + "'");
    }
  }
  return config;
}

ordered_json condition_json(const ConditionResult& c) {
  ordered_json folds = ordered_json::array();
  for (const auto& f : c.folds) {
    ordered_json fj;
    fj["fold"] = f.fold;
    fj["train_real"] = f.train_real;
    fj["train_synthetic"] = f.train_synthetic;
    fj["test"] = f.test;
    fj["seeds"] = {{"subsample", f.seeds.subsample},
                   {"classifier", f.seeds.classifier},
                   {"gan", f.seeds.gan},
                   {"synthesis", f.seeds.synthesis}};
    fj["metrics"] = metrics_json(f.metrics);
    fj["confusion"] = confusion_json(f.confusion);
    folds.push_back(fj);
  }
  ordered_json out;
  out["folds"] = folds;
  out["mean"] = metrics_json(c.mean);
  out["std"] = metrics_json(c.sd);
  out["confusion"] = confusion_json(c.confusion);
  return out;
}

ConditionResult condition_from_json(const ordered_json& j, Condition condition) {
  ConditionResult c;
  c.condition = condition;
  for (const auto& fj : j.at("folds")) {
    FoldResult f;
    f.fold = fj.at("fold").get<std::size_t>();
    f.train_real = fj.at("train_real").get<std::size_t>();
    f.train_synthetic = fj.at("train_synthetic").get<std::size_t>();
    f.test = fj.at("test").get<std::size_t>();
    const auto& s = fj.at("seeds");
    f.seeds = {s.at("subsample").get<std::uint64_t>(), s.at("classifier").get<std::uint64_t>(),
               s.at("gan").get<std::uint64_t>(), s.at("synthesis").get<std::uint64_t>()};
    f.metrics = metrics_from_json(fj.at("metrics"));
    f.confusion = confusion_from_json(fj.at("confusion"));
    c.folds.push_back(std::move(f));
  }
  c.mean = metrics_from_json(j.at("mean"));
  c.sd = metrics_from_json(j.at("std"));
  c.confusion = confusion_from_json(j.at("confusion"));
  return c;
}

void summarize(ConditionResult& result, std::size_t classes) {
  result.confusion = ConfusionMatrix(classes);
  std::array<std::vector<double>, 4> per_metric;
  for (const auto& f : result.folds) {
    result.confusion += f.confusion;
    const auto v = as_array(f.metrics);
    for (std::size_t i = 0; i < 4; ++i) per_metric[i].push_back(v[i]);
  }
  std::array<double, 4> mean{}, sd{};
  for (std::size_t i = 0; i < 4; ++i) {
    mean[i] = mean_of(per_metric[i]);
    sd[i] = sample_std(per_metric[i]);
  }
  result.mean = from_array(mean);
  result.sd = from_array(sd);
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : n_(classes), counts_(classes * classes, 0) {}

std::uint64_t ConfusionMatrix::at(std::size_t truth, std::size_t predicted) const {
  if (truth >= n_ || predicted >= n_) {
    throw IndexError("confusion matrix index (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                     ") outside " + std::to_string(n_) + " classes");
  }
  return counts_[truth * n_ + predicted];
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
  if (truth >= n_ || predicted >= n_) {
    throw IndexError("confusion matrix index (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                     ") outside " + std::to_string(n_) + " classes");
  }
  counts_[truth * n_ + predicted] += count;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t c = 0; c < n_; ++c) s += at(truth, c);
  return s;
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t predicted) const {
  std::uint64_t s = 0;
  for (std::size_t r = 0; r < n_; ++r) s += at(r, predicted);
  return s;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < n_; ++i) s += at(i, i);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.n_ != n_) {
    throw DimensionError("cannot add a " + std::to_string(other.n_) + "-class confusion matrix to a " +
                         std::to_string(n_) + "-class one");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

double metric_value(const Metrics& m, std::string_view name) {
  const auto v = as_array(m);
  for (std::size_t i = 0; i < kMetricNames.size(); ++i) {
    if (kMetricNames[i] == name) return v[i];
  }
  throw IndexError("unknown metric '" + std::string(name) + "'");
}

Metrics metrics(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw DegenerateInputError("metrics of an empty confusion matrix");
  Metrics out;
  for (std::size_t i = 0; i < cm.classes(); ++i) {
    const std::uint64_t support = cm.row_sum(i);
    if (support == 0) continue;
    const auto tp = static_cast<double>(cm.at(i, i));
    const std::uint64_t predicted = cm.column_sum(i);
    const double precision = predicted == 0 ? 0.0 : tp / static_cast<double>(predicted);
    const double recall = tp / static_cast<double>(support);
    const double f1 = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    const auto w = static_cast<double>(support);
    out.precision += w * precision;
    out.recall += w * recall;
    out.f1 += w * f1;
  }
  const auto n = static_cast<double>(total);
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  out.accuracy = static_cast<double>(cm.trace()) / n;
  return out;
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ParameterError("incomplete beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw ParameterError("incomplete beta: x must lie in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double front =
      std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw ParameterError("student t: degrees of freedom must be positive");
  if (std::isnan(t)) throw ParameterError("student t: t is NaN");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
  return t > 0 ? 1.0 - tail : tail;
}

double mean_of(std::span<const double> values) {
  if (values.empty()) throw DimensionError("mean of no values");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) {
  if (values.size() < 2) throw DimensionError("sample standard deviation needs at least 2 values");
  const double m = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

TTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("paired t-test: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                         " values");
  }
  if (a.size() < 2) throw DimensionError("paired t-test needs at least 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  if (std::all_of(d.begin(), d.end(), [&](double v) { return v == d.front(); })) {
    throw DegenerateInputError("paired t-test: all differences equal " + format_double(d.front()) +
                               ", so their variance is zero");
  }
  const auto n = static_cast<double>(d.size());
  TTest out;
  out.dof = d.size() - 1;
  out.t = mean_of(d) / (sample_std(d) / std::sqrt(n));
  const double dof = static_cast<double>(out.dof);
  out.p = incomplete_beta(0.5 * dof, 0.5, dof / (dof + out.t * out.t));
  return out;
}

std::string_view condition_label(Condition condition) {
  return condition == Condition::RealOnly ? "real_only" : "augmented";
}

FoldSeeds fold_seeds(std::uint64_t experiment_seed, std::size_t fold) {
  const std::uint64_t base = 4 * static_cast<std::uint64_t>(fold);
  return {mix_seed(experiment_seed, base + 1), mix_seed(experiment_seed, base + 2),
          mix_seed(experiment_seed, base + 3), mix_seed(experiment_seed, base + 4)};
}

std::size_t synthetic_count(std::size_t train_size, std::size_t dataset_size, std::size_t n_folds) {
  if (n_folds < 2) throw ParameterError("synthetic count: need at least 2 folds");
  const double multiple = static_cast<double>(n_folds) / static_cast<double>(n_folds - 1);
  const double expected = static_cast<double>(train_size) * multiple;
  if (std::fabs(static_cast<double>(dataset_size) - expected) <= multiple) return dataset_size;
  return static_cast<std::size_t>(std::llround(expected));
}

std::vector<std::size_t> fold_training_indices(const data::Dataset& dataset, const data::SplitPlan& plan,
                                               std::size_t fold, std::size_t cap_per_class,
                                               std::uint64_t subsample_seed) {
  std::vector<std::size_t> train = plan.train_indices(fold);
  if (cap_per_class == 0) return train;
  std::array<std::vector<std::size_t>, data::kConditionCount> members;
  for (std::size_t idx : train) members[dataset.trials.at(idx).condition_class()].push_back(idx);
  SeededRng rng(subsample_seed);
  std::vector<std::size_t> kept;
  for (auto& group : members) {
    rng.shuffle(std::span<std::size_t>(group));
    kept.insert(kept.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(std::min(cap_per_class, group.size())));
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

ConditionResult run_experiment(const data::Dataset& dataset, const data::SplitPlan& plan,
                               const ExperimentConfig& experiment, const cgan::GanConfig& gan,
                               const classifier::FcnConfig& fcn, Condition condition,
                               const Progress& progress) {
  if (plan.fold_of.size() != dataset.size()) {
    throw DimensionError("split plan covers " + std::to_string(plan.fold_of.size()) + " trials but the dataset has " +
                         std::to_string(dataset.size()));
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.trials[i].provenance != data::Provenance::Real) {
      throw ConfigError("cross-validation input must be real trials; trial " + std::to_string(i) + " is synthetic");
    }
  }
  const std::string label(condition_label(condition));
  const std::size_t classes = classifier::class_count(fcn.target);
  ConditionResult result;
  result.condition = condition;
  for (std::size_t fold = 0; fold < plan.n_folds; ++fold) {
    const std::string where = "fold " + std::to_string(fold + 1) + "/" + std::to_string(plan.n_folds) + " " + label;
    FoldResult f;
    f.fold = fold;
    f.seeds = fold_seeds(experiment.seed, fold);
    f.confusion = ConfusionMatrix(classes);
    try {
      data::Dataset train = dataset.subset(
          fold_training_indices(dataset, plan, fold, experiment.train_cap_per_class, f.seeds.subsample));
      const data::Dataset test = dataset.subset(plan.test_indices(fold));
      if (train.size() == 0 || test.size() == 0) throw DimensionError("empty training or test set");
      f.train_real = train.size();
      f.test = test.size();
      if (condition == Condition::Augmented) {
        cgan::GanConfig g = gan;
        g.seed = f.seeds.gan;
        if (progress) progress(where + ": training GAN on " + std::to_string(train.size()) + " trials");
        cgan::GanModel model = cgan::train(train, g).model;
        const std::size_t count = synthetic_count(train.size(), dataset.size(), plan.n_folds);
        const data::Dataset synthetic =
            cgan::generate_like(model, train.condition_counts(), count, f.seeds.synthesis, experiment.filter_synthetic);
        const double multiple = static_cast<double>(plan.n_folds) / static_cast<double>(plan.n_folds - 1);
        if (synthetic.size() != count ||
            std::fabs(static_cast<double>(count) - multiple * static_cast<double>(f.train_real)) > multiple) {
          throw TrainingError("augmented training set of " + std::to_string(f.train_real + synthetic.size()) +
                              " trials is not " + format_double(1.0 + multiple) + " times the " +
                              std::to_string(f.train_real) + " real trials");
        }
        f.train_synthetic = synthetic.size();
        train.trials.insert(train.trials.end(), synthetic.trials.begin(), synthetic.trials.end());
      }
      for (const auto& t : test.trials) {
        if (t.provenance != data::Provenance::Real) throw TrainingError("a synthetic trial reached the test set");
      }
      classifier::FcnConfig c = fcn;
      c.seed = f.seeds.classifier;
      if (progress) progress(where + ": training classifier on " + std::to_string(train.size()) + " trials");
      classifier::FcnModel model = classifier::train_classifier(train, c).model;
      const classifier::Prediction pred = classifier::predict(model, test.trials);
      for (std::size_t i = 0; i < test.size(); ++i) {
        f.confusion.add(classifier::label_of(test.trials[i], fcn.target), pred.classes[i]);
      }
      f.metrics = metrics(f.confusion);
    } catch (const std::exception& e) {
      throw TrainingError(where + ": " + e.what());
    }
    if (progress) progress(where + ": accuracy " + format_double(f.metrics.accuracy));
    result.folds.push_back(std::move(f));
  }
  summarize(result, classes);
  return result;
}

CvReport run_cross_validation(const data::Dataset& dataset, const ExperimentConfig& experiment,
                              const cgan::GanConfig& gan, const classifier::FcnConfig& fcn,
                              const Progress& progress) {
  cgan::validate(gan);
  classifier::validate(fcn);
  CvReport report;
  report.experiment = experiment;
  report.gan = gan;
  report.fcn = fcn;
  report.dataset_size = dataset.size();
  const data::SplitPlan plan = data::make_folds(dataset, experiment.n_folds, experiment.strategy, experiment.seed);
  report.real_only = run_experiment(dataset, plan, experiment, gan, fcn, Condition::RealOnly, progress);
  report.augmented = run_experiment(dataset, plan, experiment, gan, fcn, Condition::Augmented, progress);
  for (std::size_t i = 0; i < report.real_only.confusion.classes(); ++i) {
    if (report.real_only.confusion.row_sum(i) != report.augmented.confusion.row_sum(i)) {
      throw TrainingError("conditions were tested on different trials");
    }
  }
  for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
    std::vector<double> aug, real;
    for (const auto& f : report.augmented.folds) aug.push_back(metric_value(f.metrics, kMetricNames[m]));
    for (const auto& f : report.real_only.folds) real.push_back(metric_value(f.metrics, kMetricNames[m]));
    try {
      report.paired[m].test = paired_t_test(aug, real);
    } catch (const DegenerateInputError& e) {
      report.paired[m].reason = e.what();
    }
  }
  return report;
}

void write_report_json(const CvReport& report, std::ostream& out) {
  ordered_json doc;
  doc["schema_version"] = kReportSchema;
  doc["kind"] = "cv_report";
  doc["dataset_size"] = report.dataset_size;
  doc["config"]["experiment"] = fields_json(to_fields(report.experiment));
  doc["config"]["gan"] = fields_json(to_fields(report.gan));
  doc["config"]["fcn"] = fields_json(to_fields(report.fcn));
  doc["conditions"]["real_only"] = condition_json(report.real_only);
  doc["conditions"]["augmented"] = condition_json(report.augmented);
  ordered_json tests;
  for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
    ordered_json t;
    if (report.paired[m].test) {
      t["t"] = report.paired[m].test->t;
      t["p"] = report.paired[m].test->p;
      t["dof"] = report.paired[m].test->dof;
    } else {
      t["t"] = nullptr;
      t["p"] = nullptr;
      t["reason"] = report.paired[m].reason;
    }
    tests[std::string(kMetricNames[m])] = t;
  }
  doc["paired_t_test"] = tests;
  out << doc.dump(2) << '\n';
}

void write_report_json(const CvReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write " + path.string());
  write_report_json(report, out);
}

CvReport read_report_json(std::istream& in) {
  try {
    const auto doc = ordered_json::parse(in);
    if (doc.at("schema_version").get<int>() != kReportSchema) throw SchemaError("unsupported report schema_version");
    if (doc.at("kind").get<std::string>() != "cv_report") throw SchemaError("file is not a cv_report");
    CvReport r;
    r.dataset_size = doc.at("dataset_size").get<std::size_t>();
    r.experiment = config_from_json<ExperimentConfig>(doc.at("config").at("experiment"), "experiment");
    r.gan = config_from_json<cgan::GanConfig>(doc.at("config").at("gan"), "gan");
    r.fcn = config_from_json<classifier::FcnConfig>(doc.at("config").at("fcn"), "fcn");
    r.real_only = condition_from_json(doc.at("conditions").at("real_only"), Condition::RealOnly);
    r.augmented = condition_from_json(doc.at("conditions").at("augmented"), Condition::Augmented);
    for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
      const auto& t = doc.at("paired_t_test").at(std::string(kMetricNames[m]));
      if (t.at("t").is_null()) {
        r.paired[m].reason = t.at("reason").get<std::string>();
      } else {
        r.paired[m].test = TTest{t.at("t").get<double>(), t.at("p").get<double>(), t.at("dof").get<std::size_t>()};
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("cv report: ") + e.what());
  }
}

CvReport read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot read " + path.string());
  try {
    return read_report_json(in);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_confusion_csv(const ConfusionMatrix& cm, std::span<const std::string> labels, std::ostream& out) {
  if (labels.size() != cm.classes()) {
    throw DimensionError(std::to_string(labels.size()) + " labels for a " + std::to_string(cm.classes()) +
                         "-class confusion matrix");
  }
  out << "true\\predicted";
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (std::size_t r = 0; r < cm.classes(); ++r) {
    out << labels[r];
    for (std::size_t c = 0; c < cm.classes(); ++c) out << ',' << cm.at(r, c);
    out << '\n';
  }
}

std::vector<std::string> class_labels(classifier::Target target) {
  std::vector<std::string> out;
  if (target == classifier::Target::Task) {
    for (std::size_t i = 0; i < data::kTaskCount; ++i) out.emplace_back(data::task_name(data::task_from_index(i)));
  } else {
    for (std::size_t i = 0; i < data::kConditionCount; ++i) out.push_back(data::condition_name(i));
  }
  return out;
}

}  // namespace kinesynth::eval
