#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kinesynth/cgan.hpp"
#include "kinesynth/classifier.hpp"
#include "kinesynth/config.hpp"
#include "kinesynth/data.hpp"
#include "kinesynth/embed.hpp"
#include "kinesynth/errors.hpp"
#include "kinesynth/eval.hpp"
#include "kinesynth/report.hpp"
#include "kinesynth/signal.hpp"
#include "kinesynth/toy.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace kinesynth;

namespace {

constexpr int kSchemaVersion = 1;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

// An input the user has to produce with an earlier command.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out_dir;
};

void add_common(CLI::App& cmd, Common& common) {
  cmd.add_option("--config", common.config_file, "key=value config file");
  cmd.add_option("--set", common.overrides, "override one config key (key=value), repeatable");
  cmd.add_option("--out", common.out_dir, "output directory")->required();
}

// Precedence: defaults, config file, KINESYNTH_SEED, --set.
RunConfig resolve_config(const Common& common) {
  RunConfig config;
  if (!common.config_file.empty()) {
    if (!fs::is_regular_file(common.config_file)) throw ConfigError("config file not found: " + common.config_file);
    read_config_file(config, common.config_file);
  }
  if (const auto seed = seed_from_environment()) apply_seed(config, *seed);
  for (const std::string& assignment : common.overrides) apply_assignment(config, assignment, "--set");
  return config;
}

fs::path require_artifact(const fs::path& path, std::string_view producer) {
  if (!fs::is_regular_file(path)) {
    throw MissingArtifact("missing " + path.string() + "; run `kinesynth " + std::string(producer) + "` first");
  }
  return path;
}

// A directory written by `producer` holding `file`, or a file given directly.
fs::path locate(const std::string& given, std::string_view file, std::string_view producer) {
  const fs::path path(given);
  if (fs::is_directory(path)) return require_artifact(path / file, producer);
  return require_artifact(path, producer);
}

data::Dataset load_dataset(const std::string& given) {
  return data::ingest(locate(given, "dataset.csv", "ingest")).dataset;
}

data::Dataset load_synthetic(const std::string& given) {
  return data::ingest(locate(given, "synthetic.csv", "generate")).dataset;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  writer(out);
}

// Echoes the resolved configuration next to the outputs.
class OutputDir {
 public:
  OutputDir(const Common& common, std::string command, const RunConfig& config)
      : root_(common.out_dir), command_(std::move(command)), config_(config) {
    fs::create_directories(root_);
  }

  fs::path path(const std::string& name, int schema_version = kSchemaVersion) {
    artifacts_[name] = schema_version;
    return root_ / name;
  }

  void argument(const std::string& key, const std::string& value) { arguments_[key] = value; }

  void finish() {
    write_file(root_ / "resolved.cfg", [&](std::ostream& out) { write_config(config_, out); });
    ordered_json run;
    run["schema_version"] = kSchemaVersion;
    run["command"] = command_;
    run["arguments"] = arguments_;
    ordered_json cfg = ordered_json::object();
    for (const auto& [key, value] : resolved_fields(config_)) cfg[key] = value;
    run["config"] = cfg;
    run["artifacts"] = artifacts_;
    write_text(root_ / "run.json", run.dump(2) + "\n");
  }

 private:
  fs::path root_;
  std::string command_;
  RunConfig config_;
  std::map<std::string, std::string> arguments_;
  std::map<std::string, int> artifacts_;
};

std::string join(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
  return out;
}

ordered_json class_counts_json(const data::Dataset& ds) {
  ordered_json out = ordered_json::object();
  const auto counts = ds.condition_counts();
  for (std::size_t c = 0; c < data::kConditionCount; ++c) {
    if (counts[c] > 0) out[data::condition_name(c)] = counts[c];
  }
  return out;
}

// ---- make-toy-fixture ----

struct ToyOptions {
  Common common;
  std::size_t trials_per_class = 20;
  double noise = 0.01;
  std::uint64_t fixture_seed = 7;
  std::vector<std::string> classes;
};

void run_make_toy(const ToyOptions& o) {
  const RunConfig config = resolve_config(o.common);
  data::ToyConfig toy;
  toy.trials_per_class = o.trials_per_class;
  toy.noise_level = o.noise;
  toy.seed = o.fixture_seed;
  if (!o.classes.empty()) {
    toy.classes.clear();
    for (const std::string& name : o.classes) toy.classes.push_back(data::parse_condition(name));
  }
  const data::Dataset ds = data::make_toy_dataset(toy);
  OutputDir out(o.common, "make-toy-fixture", config);
  out.argument("trials_per_class", std::to_string(o.trials_per_class));
  out.argument("noise", format_double(o.noise));
  out.argument("fixture_seed", std::to_string(o.fixture_seed));
  out.argument("classes", join(toy.classes));
  data::export_csv(ds, out.path("toy.csv"));
  out.finish();
  std::cout << "wrote " << ds.size() << " toy trials to " << (fs::path(o.common.out_dir) / "toy.csv").string() << '\n';
}

// ---- ingest ----

struct IngestOptions {
  Common common;
  std::string input;
  std::optional<std::size_t> expect_trials;
};

void run_ingest(const IngestOptions& o) {
  const RunConfig config = resolve_config(o.common);
  if (!fs::is_regular_file(o.input)) throw MissingArtifact("input CSV not found: " + o.input);
  const data::IngestResult r = data::ingest(fs::path(o.input));
  if (o.expect_trials && r.dataset.size() != *o.expect_trials) {
    throw SchemaError("ingested " + std::to_string(r.dataset.size()) + " trials, expected " +
                      std::to_string(*o.expect_trials));
  }
  OutputDir out(o.common, "ingest", config);
  out.argument("input", o.input);
  if (o.expect_trials) out.argument("expect_trials", std::to_string(*o.expect_trials));
  data::export_csv(r.dataset, out.path("dataset.csv"));
  ordered_json summary;
  summary["schema_version"] = kSchemaVersion;
  summary["kind"] = "ingest_summary";
  summary["rows_read"] = r.rows_read;
  summary["trials"] = r.dataset.size();
  summary["skipped_unknown_task"] = r.skipped_unknown_task;
  summary["per_class"] = class_counts_json(r.dataset);
  write_text(out.path("summary.json"), summary.dump(2) + "\n");
  out.finish();
  std::cout << "ingested " << r.dataset.size() << " trials (" << r.rows_read << " rows, "
            << r.skipped_unknown_task << " skipped for unknown task)\n";
  for (const auto& [name, count] : summary["per_class"].items()) std::cout << "  " << name << ": " << count << '\n';
}

// ---- train-gan ----

struct DataOptions {
  Common common;
  std::string data;
};

void run_train_gan(const DataOptions& o) {
  const RunConfig config = resolve_config(o.common);
  cgan::validate(config.gan);
  const data::Dataset ds = load_dataset(o.data);
  std::cerr << "training cGAN on " << ds.size() << " trials for " << config.gan.epochs << " epochs\n";
  cgan::TrainResult r = cgan::train(ds, config.gan);
  OutputDir out(o.common, "train-gan", config);
  out.argument("data", o.data);
  const fs::path model = out.path("gan.ksn1");
  out.path("gan.ksn1.json");
  cgan::save(r.model, model);
  write_file(out.path("train_log.csv"), [&](std::ostream& s) { cgan::write_train_log_csv(r.log, s); });
  out.finish();
  const cgan::EpochLog& last = r.log.epochs.back();
  std::cout << "final epoch " << last.epoch << ": d_loss " << last.d_loss << ", g_adv " << last.g_adv_loss
            << ", spectral " << last.spectral_loss << '\n';
}

// ---- generate ----

struct GenerateOptions {
  Common common;
  std::string model;
  std::vector<std::string> classes;
  std::size_t n = 10;
};

void run_generate(const GenerateOptions& o) {
  const RunConfig config = resolve_config(o.common);
  if (o.n == 0) throw ParameterError("--n must be positive");
  cgan::GanModel model = cgan::load(locate(o.model, "gan.ksn1", "train-gan"));
  std::vector<std::size_t> classes;
  for (const std::string& name : o.classes) classes.push_back(data::parse_condition(name));
  if (classes.empty()) classes = model.trained_classes;
  for (std::size_t c : classes) {
    if (!std::binary_search(model.trained_classes.begin(), model.trained_classes.end(), c)) {
      throw ParameterError("class " + data::condition_name(c) + " was not in the GAN's training data");
    }
  }
  const std::uint64_t seed = config.gan.seed;
  data::Dataset synthetic;
  ordered_json per_class = ordered_json::array();
  double raw_total = 0.0, filtered_total = 0.0;
  for (std::size_t c : classes) {
    const std::uint64_t class_seed = mix_seed(seed, c);
    const std::vector<data::Trial> raw = cgan::generate(model, c, o.n, class_seed, false);
    std::vector<data::Trial> filtered = cgan::generate(model, c, o.n, class_seed, true);
    double raw_sum = 0.0, filtered_sum = 0.0, filtered_max = 0.0;
    for (std::size_t i = 0; i < o.n; ++i) {
      raw_sum += signal::high_frequency_power_ratio(raw[i].signal, raw[i].sample_rate);
      const double f = signal::high_frequency_power_ratio(filtered[i].signal, filtered[i].sample_rate);
      filtered_sum += f;
      filtered_max = std::max(filtered_max, f);
    }
    raw_total += raw_sum;
    filtered_total += filtered_sum;
    ordered_json entry;
    entry["class"] = data::condition_name(c);
    entry["n"] = o.n;
    entry["unfiltered_mean"] = raw_sum / static_cast<double>(o.n);
    entry["filtered_mean"] = filtered_sum / static_cast<double>(o.n);
    entry["filtered_max"] = filtered_max;
    per_class.push_back(entry);
    for (data::Trial& t : filtered) synthetic.trials.push_back(std::move(t));
  }
  OutputDir out(o.common, "generate", config);
  out.argument("model", o.model);
  out.argument("n", std::to_string(o.n));
  out.argument("classes", join(classes));
  data::export_csv(synthetic, out.path("synthetic.csv"));
  const double total = static_cast<double>(synthetic.size());
  ordered_json hf;
  hf["schema_version"] = kSchemaVersion;
  hf["kind"] = "hf_report";
  hf["cutoff_hz"] = 2.0;
  hf["trials"] = synthetic.size();
  hf["unfiltered_mean"] = raw_total / total;
  hf["filtered_mean"] = filtered_total / total;
  hf["classes"] = per_class;
  write_text(out.path("hf_report.json"), hf.dump(2) + "\n");
  out.finish();
  std::cout << "generated " << synthetic.size() << " trials; power above 2 Hz: unfiltered "
            << raw_total / total << ", filtered " << filtered_total / total << '\n';
}

// ---- train-clf ----

struct TrainClfOptions {
  Common common;
  std::string data;
  std::string synthetic;
};

void run_train_clf(const TrainClfOptions& o) {
  const RunConfig config = resolve_config(o.common);
  classifier::validate(config.fcn);
  data::Dataset ds = load_dataset(o.data);
  if (!o.synthetic.empty()) {
    data::Dataset extra = load_synthetic(o.synthetic);
    for (data::Trial& t : extra.trials) ds.trials.push_back(std::move(t));
  }
  std::cerr << "training FCN on " << ds.size() << " trials for " << config.fcn.epochs << " epochs\n";
  classifier::TrainResult r = classifier::train_classifier(ds, config.fcn);
  OutputDir out(o.common, "train-clf", config);
  out.argument("data", o.data);
  if (!o.synthetic.empty()) out.argument("synthetic", o.synthetic);
  const fs::path model = out.path("fcn.ksn1");
  out.path("fcn.ksn1.json");
  classifier::save(r.model, model);
  write_file(out.path("train_log.csv"), [&](std::ostream& s) { classifier::write_train_log_csv(r.log, s); });
  out.finish();
  std::cout << "final epoch " << r.log.back().epoch << ": loss " << r.log.back().loss << ", accuracy "
            << r.log.back().accuracy << '\n';
}

// ---- evaluate ----

void run_evaluate(const DataOptions& o) {
  const RunConfig config = resolve_config(o.common);
  const data::Dataset ds = load_dataset(o.data);
  const eval::CvReport report = eval::run_cross_validation(
      ds, config.experiment, config.gan, config.fcn, [](const std::string& line) { std::cerr << line << '\n'; });
  OutputDir out(o.common, "evaluate", config);
  out.argument("data", o.data);
  eval::write_report_json(report, out.path("cv_report.json", eval::kReportSchema));
  const std::vector<std::string> labels = eval::class_labels(config.fcn.target);
  for (const eval::ConditionResult* c : {&report.real_only, &report.augmented}) {
    const std::string stem = "confusion_" + std::string(eval::condition_label(c->condition));
    write_file(out.path(stem + ".csv"), [&](std::ostream& s) { eval::write_confusion_csv(c->confusion, labels, s); });
    const std::string title = std::string(eval::condition_label(c->condition)) + " confusion matrix";
    write_text(out.path(stem + ".svg"), report::confusion_heatmap_svg(c->confusion, labels, title));
  }
  out.finish();
  std::cout << report::metrics_table_markdown(report);
}

// ---- tsne ----

struct TsneOptions {
  Common common;
  std::string data;
  std::string synthetic;
};

void run_tsne(const TsneOptions& o) {
  const RunConfig config = resolve_config(o.common);
  data::Dataset ds = load_dataset(o.data);
  if (!o.synthetic.empty()) {
    data::Dataset extra = load_synthetic(o.synthetic);
    for (data::Trial& t : extra.trials) ds.trials.push_back(std::move(t));
  }
  embed::validate(config.embed, ds.size());
  std::cerr << "embedding " << ds.size() << " trials\n";
  const embed::TsneResult r = embed::tsne(embed::flatten_trials(ds.trials), config.embed);
  OutputDir out(o.common, "tsne", config);
  out.argument("data", o.data);
  if (!o.synthetic.empty()) out.argument("synthetic", o.synthetic);
  write_file(out.path("embedding.csv"), [&](std::ostream& s) { embed::write_embedding_csv(r.embedding, ds.trials, s); });
  write_file(out.path("kl.csv"), [&](std::ostream& s) {
    s << "iteration,kl\n";
    for (std::size_t i = 0; i < r.kl.size(); ++i) s << i + 1 << ',' << format_double(r.kl[i]) << '\n';
  });
  write_text(out.path("tsne.svg"), report::embedding_scatter_svg(r.embedding, ds.trials, "t-SNE of real and synthetic trials"));
  out.finish();
  std::cout << "final KL divergence " << (r.kl.empty() ? 0.0 : r.kl.back()) << '\n';
}

// ---- report ----

struct ReportOptions {
  Common common;
  std::string evaluation;
  std::string data;
  std::string synthetic;
  std::string class_name;
  std::vector<std::size_t> channels{0, 4, 7};
  std::size_t max_trials = 8;
};

void run_report(const ReportOptions& o) {
  const RunConfig config = resolve_config(o.common);
  const bool table = !o.evaluation.empty();
  const bool overlay = !o.synthetic.empty() || !o.class_name.empty();
  if (!table && !overlay) throw ParameterError("give --evaluation for the metric table or --data, --synthetic and --class for trajectory plots");
  if (overlay && (o.data.empty() || o.synthetic.empty() || o.class_name.empty())) {
    throw ParameterError("trajectory plots need --data, --synthetic and --class");
  }
  for (std::size_t ch : o.channels) {
    if (ch >= data::kChannels) throw ParameterError("channel index " + std::to_string(ch) + " out of range [0, 9)");
  }
  std::optional<eval::CvReport> cv;
  if (table) cv = eval::read_report_json(locate(o.evaluation, "cv_report.json", "evaluate"));
  std::vector<report::Panel> panels;
  std::size_t condition = 0;
  if (overlay) {
    condition = data::parse_condition(o.class_name);
    const data::Dataset real = load_dataset(o.data);
    const data::Dataset synthetic = load_synthetic(o.synthetic);
    panels = report::overlay_panels(real.trials, synthetic.trials, condition, o.channels, o.max_trials);
  }
  OutputDir out(o.common, "report", config);
  if (table) {
    out.argument("evaluation", o.evaluation);
    write_text(out.path("metrics_table.md"), report::metrics_table_markdown(*cv));
    write_file(out.path("metrics_table.csv"), [&](std::ostream& s) { report::write_metrics_table_csv(*cv, s); });
    std::cout << report::metrics_table_markdown(*cv);
  }
  if (overlay) {
    out.argument("data", o.data);
    out.argument("synthetic", o.synthetic);
    out.argument("class", data::condition_name(condition));
    out.argument("channels", join(o.channels));
    const std::string title = data::condition_name(condition) + ": real (solid) vs synthetic (dashed)";
    write_text(out.path("trajectories.svg"), report::line_panels_svg(panels, data::kSampleRate, title));
  }
  out.finish();
}

int run(int argc, char** argv) {
  CLI::App app{"Conditional GAN augmentation of reaching kinematics"};
  app.require_subcommand(1);

  ToyOptions toy;
  auto* toy_cmd = app.add_subcommand("make-toy-fixture", "write the deterministic toy dataset as interchange CSV");
  add_common(*toy_cmd, toy.common);
  toy_cmd->add_option("--trials-per-class", toy.trials_per_class)->check(CLI::PositiveNumber);
  toy_cmd->add_option("--noise", toy.noise)->check(CLI::NonNegativeNumber);
  toy_cmd->add_option("--fixture-seed", toy.fixture_seed);
  toy_cmd->add_option("--classes", toy.classes, "TASK/IMPAIRMENT classes to generate")->delimiter(',');

  IngestOptions ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "validate an interchange CSV and cache the dataset");
  add_common(*ingest_cmd, ingest.common);
  ingest_cmd->add_option("--input", ingest.input, "interchange CSV")->required();
  ingest_cmd->add_option("--expect-trials", ingest.expect_trials, "fail unless exactly this many trials are read");

  DataOptions gan;
  auto* gan_cmd = app.add_subcommand("train-gan", "train the conditional GAN");
  add_common(*gan_cmd, gan.common);
  gan_cmd->add_option("--data", gan.data, "ingest output directory or CSV")->required();

  GenerateOptions gen;
  auto* gen_cmd = app.add_subcommand("generate", "sample filtered synthetic trials");
  add_common(*gen_cmd, gen.common);
  gen_cmd->add_option("--model", gen.model, "train-gan output directory or model file")->required();
  gen_cmd->add_option("--class", gen.classes, "TASK/IMPAIRMENT, repeatable; default: every trained class");
  gen_cmd->add_option("--n", gen.n, "trials per class");

  TrainClfOptions clf;
  auto* clf_cmd = app.add_subcommand("train-clf", "train the FCN classifier");
  add_common(*clf_cmd, clf.common);
  clf_cmd->add_option("--data", clf.data, "ingest output directory or CSV")->required();
  clf_cmd->add_option("--synthetic", clf.synthetic, "generate output directory or CSV to add to training");

  DataOptions ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "cross-validate real-only against augmented training");
  add_common(*ev_cmd, ev.common);
  ev_cmd->add_option("--data", ev.data, "ingest output directory or CSV")->required();

  TsneOptions ts;
  auto* ts_cmd = app.add_subcommand("tsne", "embed real and synthetic trials in two dimensions");
  add_common(*ts_cmd, ts.common);
  ts_cmd->add_option("--data", ts.data, "ingest output directory or CSV")->required();
  ts_cmd->add_option("--synthetic", ts.synthetic, "generate output directory or CSV");

  ReportOptions rep;
  auto* rep_cmd = app.add_subcommand("report", "metric table and real vs synthetic trajectory plots");
  add_common(*rep_cmd, rep.common);
  rep_cmd->add_option("--evaluation", rep.evaluation, "evaluate output directory or cv_report.json");
  rep_cmd->add_option("--data", rep.data, "ingest output directory or CSV");
  rep_cmd->add_option("--synthetic", rep.synthetic, "generate output directory or CSV");
  rep_cmd->add_option("--class", rep.class_name, "TASK/IMPAIRMENT to plot");
  rep_cmd->add_option("--channels", rep.channels, "channel indices to plot")->delimiter(',');
  rep_cmd->add_option("--max-trials", rep.max_trials, "trials drawn per provenance")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }

  if (*toy_cmd) run_make_toy(toy);
  else if (*ingest_cmd) run_ingest(ingest);
  else if (*gan_cmd) run_train_gan(gan);
  else if (*gen_cmd) run_generate(gen);
  else if (*clf_cmd) run_train_clf(clf);
  else if (*ev_cmd) run_evaluate(ev);
  else if (*ts_cmd) run_tsne(ts);
  else if (*rep_cmd) run_report(rep);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const MissingArtifact& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {  // ConfigError, ParameterError, DimensionError
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::out_of_range& e) {  // IndexError, RangeError
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const StratificationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
