#include "kinesynth/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "kinesynth/errors.hpp"
#include "kinesynth/rng.hpp"

namespace kinesynth::data {

namespace {

constexpr std::array<std::string_view, kTaskCount> kTaskNames{"T02", "T03", "T04", "T06", "T08",
                                                              "T10", "T16", "T18", "T19", "T28"};
constexpr std::array<std::string_view, kImpairmentCount> kImpairmentNames{"Control", "Mild",
                                                                          "ModerateSevere"};
constexpr std::array<std::string_view, 7> kMetaColumns{
    "subject_id", "task", "fmma_ue", "sample_rate", "unit_pos", "unit_ang", "n_samples"};

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

template <typename T>
std::optional<T> parse_number(std::string_view text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

struct Header {
  std::array<std::size_t, kMetaColumns.size()> meta{};
  std::size_t max_samples = 0;
  // column index of ch<k>_t<j> at [k * max_samples + j]
  std::vector<std::size_t> channel_columns;
  std::size_t width = 0;
};

Header parse_header(std::string_view line) {
  const auto cells = split_commas(line);
  std::unordered_map<std::string_view, std::size_t> by_name;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!by_name.emplace(cells[i], i).second) {
      throw SchemaError("duplicate column '" + std::string(cells[i]) + "'");
    }
  }
  Header h;
  h.width = cells.size();
  for (std::size_t m = 0; m < kMetaColumns.size(); ++m) {
    auto it = by_name.find(kMetaColumns[m]);
    if (it == by_name.end()) throw SchemaError("missing required column '" + std::string(kMetaColumns[m]) + "'");
    h.meta[m] = it->second;
  }
  while (by_name.count("ch0_t" + std::to_string(h.max_samples))) ++h.max_samples;
  if (h.max_samples == 0) throw SchemaError("missing required column 'ch0_t0'");
  h.channel_columns.resize(kChannels * h.max_samples);
  for (std::size_t k = 0; k < kChannels; ++k) {
    for (std::size_t j = 0; j < h.max_samples; ++j) {
      const std::string name = "ch" + std::to_string(k) + "_t" + std::to_string(j);
      auto it = by_name.find(name);
      if (it == by_name.end()) throw SchemaError("missing required column '" + name + "'");
      h.channel_columns[k * h.max_samples + j] = it->second;
    }
  }
  const std::size_t expected = kMetaColumns.size() + kChannels * h.max_samples;
  if (cells.size() != expected) {
    throw SchemaError("header has " + std::to_string(cells.size()) + " columns, expected " +
                      std::to_string(expected));
  }
  return h;
}

}  // namespace

std::string_view task_name(Task task) { return kTaskNames.at(task_index(task)); }

std::optional<Task> parse_task(std::string_view text) {
  for (std::size_t i = 0; i < kTaskNames.size(); ++i) {
    if (kTaskNames[i] == text) return static_cast<Task>(i);
  }
  return std::nullopt;
}

std::string_view impairment_name(Impairment impairment) {
  return kImpairmentNames.at(static_cast<std::size_t>(impairment));
}

std::optional<Impairment> parse_impairment(std::string_view text) {
  for (std::size_t i = 0; i < kImpairmentNames.size(); ++i) {
    if (kImpairmentNames[i] == text) return static_cast<Impairment>(i);
  }
  return std::nullopt;
}

std::string_view provenance_name(Provenance provenance) {
  return provenance == Provenance::Real ? "real" : "synthetic";
}

Task task_from_index(std::size_t index) {
  if (index >= kTaskCount) {
    throw IndexError("task index " + std::to_string(index) + " outside [0, " + std::to_string(kTaskCount) + ")");
  }
  return static_cast<Task>(index);
}

std::pair<Task, Impairment> condition_from_index(std::size_t index) {
  if (index >= kConditionCount) {
    throw IndexError("class index " + std::to_string(index) + " outside [0, " +
                     std::to_string(kConditionCount) + ")");
  }
  return {static_cast<Task>(index / kImpairmentCount),
          static_cast<Impairment>(index % kImpairmentCount)};
}

std::string condition_name(std::size_t index) {
  const auto [task, impairment] = condition_from_index(index);
  return std::string(task_name(task)) + "/" + std::string(impairment_name(impairment));
}

std::size_t parse_condition(std::string_view text) {
  const std::size_t slash = text.find('/');
  if (slash == std::string_view::npos) {
    throw IndexError("class '" + std::string(text) + "' is not of the form TASK/IMPAIRMENT");
  }
  const auto task = parse_task(text.substr(0, slash));
  const auto impairment = parse_impairment(text.substr(slash + 1));
  if (!task || !impairment) throw IndexError("unknown class '" + std::string(text) + "'");
  return condition_index(*task, *impairment);
}

Impairment categorize_impairment(std::optional<int> fmma_ue) {
  if (!fmma_ue) return Impairment::Control;
  if (*fmma_ue < 0 || *fmma_ue > kFmmaMax) {
    throw RangeError("FMMA-UE score " + std::to_string(*fmma_ue) + " outside [0, 66]");
  }
  return *fmma_ue > kMildThreshold ? Impairment::Mild : Impairment::ModerateSevere;
}

std::array<std::size_t, kConditionCount> Dataset::condition_counts() const {
  std::array<std::size_t, kConditionCount> counts{};
  for (const auto& t : trials) ++counts[t.condition_class()];
  return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.trials.reserve(indices.size());
  for (std::size_t i : indices) out.trials.push_back(trials.at(i));
  return out;
}

Tensor crop_or_pad(const Tensor& raw, std::size_t length) {
  require_rank(raw, 2, "crop_or_pad input");
  const std::size_t channels = raw.dim(0), have = raw.dim(1);
  Tensor out({channels, length});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < length; ++t) out.at(c, t) = raw.at(c, std::min(t, have - 1));
  }
  return out;
}

std::optional<PositionUnit> parse_position_unit(std::string_view text) {
  if (text == "m") return PositionUnit::Meter;
  if (text == "cm") return PositionUnit::Centimeter;
  return std::nullopt;
}

std::optional<AngleUnit> parse_angle_unit(std::string_view text) {
  if (text == "deg") return AngleUnit::Degree;
  if (text == "rad") return AngleUnit::Radian;
  return std::nullopt;
}

Tensor normalize_units(const Tensor& raw, Units units) {
  require_rank(raw, 2, "normalize_units input");
  if (raw.dim(0) != kChannels) {
    throw DimensionError("normalize_units: expected " + std::to_string(kChannels) +
                         " channels on axis 0, got " + std::to_string(raw.dim(0)));
  }
  const std::size_t length = raw.dim(1);
  Tensor out = raw;
  const double pos_scale = units.position == PositionUnit::Meter ? 100.0 : 1.0;
  for (std::size_t c = 0; c < kPositionChannels; ++c) {
    const double origin = raw.at(c, 0) * pos_scale;
    for (std::size_t t = 0; t < length; ++t) out.at(c, t) = raw.at(c, t) * pos_scale - origin;
  }
  if (units.angle == AngleUnit::Degree) {
    for (std::size_t c = kPositionChannels; c < kChannels; ++c) {
      for (std::size_t t = 0; t < length; ++t) out.at(c, t) = raw.at(c, t) * (std::numbers::pi / 180.0);
    }
  }
  return out;
}

IngestResult ingest(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty interchange file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const Header header = parse_header(line);

  IngestResult result;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++result.rows_read;
    const auto cells = split_commas(line);
    if (cells.size() != header.width) {
      throw ParseError(line_no, "expected " + std::to_string(header.width) + " fields, got " +
                                    std::to_string(cells.size()));
    }
    auto meta = [&](std::size_t m) { return cells[header.meta[m]]; };

    const auto task = parse_task(meta(1));
    if (!task) {
      ++result.skipped_unknown_task;
      continue;
    }
    Trial trial;
    trial.task = *task;
    trial.subject_id = std::string(meta(0));
    if (trial.subject_id.empty()) throw ParseError(line_no, "empty subject_id");
    trial.provenance = trial.subject_id.rfind("synthetic", 0) == 0 ? Provenance::Synthetic : Provenance::Real;

    const std::string_view fmma = meta(2);
    if (fmma.empty()) {
      trial.impairment = Impairment::Control;
    } else if (auto label = parse_impairment(fmma)) {
      trial.impairment = *label;
    } else if (auto score = parse_number<int>(fmma)) {
      try {
        trial.impairment = categorize_impairment(*score);
      } catch (const RangeError& e) {
        throw ParseError(line_no, e.what());
      }
      trial.fmma_ue = *score;
    } else {
      throw ParseError(line_no, "fmma_ue '" + std::string(fmma) + "' is neither a score nor a group");
    }

    const auto rate = parse_number<double>(meta(3));
    if (!rate) throw ParseError(line_no, "sample_rate '" + std::string(meta(3)) + "' is not a number");
    if (*rate != kSampleRate) {
      throw ParseError(line_no, "sample_rate " + std::string(meta(3)) + " Hz differs from 60 Hz; resampling is not supported");
    }

    Units units;
    const auto pos_unit = parse_position_unit(meta(4));
    const auto ang_unit = parse_angle_unit(meta(5));
    if (!pos_unit) throw SchemaError("line " + std::to_string(line_no) + ": undeclared position unit '" + std::string(meta(4)) + "' (expected m or cm)");
    if (!ang_unit) throw SchemaError("line " + std::to_string(line_no) + ": undeclared angle unit '" + std::string(meta(5)) + "' (expected deg or rad)");
    units.position = *pos_unit;
    units.angle = *ang_unit;

    const auto n_samples = parse_number<std::size_t>(meta(6));
    if (!n_samples) throw ParseError(line_no, "n_samples '" + std::string(meta(6)) + "' is not an integer");
    if (*n_samples == 0) throw ParseError(line_no, "empty trial (n_samples = 0)");
    if (*n_samples > header.max_samples) {
      throw ParseError(line_no, "n_samples " + std::to_string(*n_samples) + " exceeds the " +
                                    std::to_string(header.max_samples) + " sample columns");
    }
    Tensor raw({kChannels, *n_samples});
    for (std::size_t k = 0; k < kChannels; ++k) {
      for (std::size_t j = 0; j < header.max_samples; ++j) {
        const std::string_view cell = cells[header.channel_columns[k * header.max_samples + j]];
        if (j >= *n_samples) {
          if (!cell.empty()) {
            throw ParseError(line_no, "ch" + std::to_string(k) + "_t" + std::to_string(j) + " set beyond n_samples");
          }
          continue;
        }
        const auto v = parse_number<double>(cell);
        if (!v || !std::isfinite(*v)) {
          throw ParseError(line_no, "ch" + std::to_string(k) + "_t" + std::to_string(j) + " value '" +
                                        std::string(cell) + "' is not a finite number");
        }
        raw.at(k, j) = *v;
      }
    }
    trial.signal = crop_or_pad(normalize_units(raw, units));
    result.dataset.trials.push_back(std::move(trial));
  }
  return result;
}

IngestResult ingest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return ingest(in);
}

void export_csv(const Dataset& dataset, std::ostream& out) {
  std::string line;
  for (std::size_t m = 0; m < kMetaColumns.size(); ++m) {
    if (m) line += ',';
    line += kMetaColumns[m];
  }
  for (std::size_t k = 0; k < kChannels; ++k) {
    for (std::size_t j = 0; j < kTrialLength; ++j) {
      line += ",ch" + std::to_string(k) + "_t" + std::to_string(j);
    }
  }
  out << line << '\n';
  for (const Trial& t : dataset.trials) {
    if (t.subject_id.find_first_of(",\n\r") != std::string::npos || t.subject_id.empty()) {
      throw SchemaError("subject_id '" + t.subject_id + "' cannot be written to CSV");
    }
    if (t.signal.shape() != Shape{kChannels, kTrialLength}) {
      throw DimensionError("export: trial signal " + shape_to_string(t.signal.shape()) + " is not 9x300");
    }
    line.clear();
    line += t.subject_id;
    line += ',';
    line += task_name(t.task);
    line += ',';
    if (t.fmma_ue) {
      line += std::to_string(*t.fmma_ue);
    } else if (t.impairment != Impairment::Control) {
      line += impairment_name(t.impairment);
    }
    line += ',';
    append_double(line, t.sample_rate);
    line += ",cm,rad,";
    line += std::to_string(kTrialLength);
    for (double v : t.signal.values()) {
      line += ',';
      append_double(line, v);
    }
    out << line << '\n';
  }
}

void export_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  export_csv(dataset, out);
}

ChannelScaler ChannelScaler::identity() {
  ChannelScaler s;
  s.mean.fill(0.0);
  s.scale.fill(1.0);
  return s;
}

ChannelScaler ChannelScaler::fit(std::span<const Trial> trials) {
  ChannelScaler s = identity();
  if (trials.empty()) return s;
  for (std::size_t c = 0; c < kChannels; ++c) {
    double sum = 0.0, count = 0.0;
    for (const auto& t : trials) {
      const std::size_t length = t.signal.dim(1);
      for (std::size_t j = 0; j < length; ++j) sum += t.signal.at(c, j);
      count += static_cast<double>(length);
    }
    const double mean = sum / count;
    double var = 0.0;
    for (const auto& t : trials) {
      const std::size_t length = t.signal.dim(1);
      for (std::size_t j = 0; j < length; ++j) var += (t.signal.at(c, j) - mean) * (t.signal.at(c, j) - mean);
    }
    const double sd = std::sqrt(var / count);
    s.mean[c] = mean;
    s.scale[c] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Tensor ChannelScaler::apply(const Tensor& signal) const {
  Tensor out = signal;
  const std::size_t length = signal.dim(1);
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (std::size_t j = 0; j < length; ++j) out.at(c, j) = (signal.at(c, j) - mean[c]) / scale[c];
  }
  return out;
}

Tensor ChannelScaler::invert(const Tensor& signal) const {
  Tensor out = signal;
  const std::size_t length = signal.dim(1);
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (std::size_t j = 0; j < length; ++j) out.at(c, j) = signal.at(c, j) * scale[c] + mean[c];
  }
  return out;
}

std::string_view fold_strategy_name(FoldStrategy strategy) {
  return strategy == FoldStrategy::TrialStratified ? "trial_stratified" : "subject_wise";
}

std::optional<FoldStrategy> parse_fold_strategy(std::string_view text) {
  if (text == "trial_stratified") return FoldStrategy::TrialStratified;
  if (text == "subject_wise") return FoldStrategy::SubjectWise;
  return std::nullopt;
}

std::vector<std::size_t> SplitPlan::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> SplitPlan::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

std::string format_field(FoldStrategy strategy) { return std::string(fold_strategy_name(strategy)); }

void parse_field(std::string_view key, std::string_view text, FoldStrategy& out) {
  const auto strategy = parse_fold_strategy(text);
  if (!strategy) {
    throw ConfigError("config key '" + std::string(key) + "': unknown fold strategy '" + std::string(text) + "'");
  }
  out = *strategy;
}

SplitPlan make_folds(const Dataset& dataset, std::size_t n_folds, FoldStrategy strategy,
                     std::uint64_t seed) {
  if (n_folds < 2) throw ParameterError("make_folds: need at least 2 folds");
  SplitPlan plan;
  plan.n_folds = n_folds;
  plan.strategy = strategy;
  plan.seed = seed;
  plan.fold_of.assign(dataset.size(), 0);
  SeededRng rng(seed);

  if (strategy == FoldStrategy::TrialStratified) {
    std::array<std::vector<std::size_t>, kConditionCount> members;
    for (std::size_t i = 0; i < dataset.size(); ++i) members[dataset.trials[i].condition_class()].push_back(i);
    std::string deficient;
    for (std::size_t c = 0; c < kConditionCount; ++c) {
      if (!members[c].empty() && members[c].size() < n_folds) {
        deficient += (deficient.empty() ? "" : ", ") + condition_name(c) + " (" +
                     std::to_string(members[c].size()) + ")";
      }
    }
    if (!deficient.empty()) {
      throw StratificationError("classes with fewer than " + std::to_string(n_folds) +
                                " trials: " + deficient);
    }
    std::size_t next = 0;
    for (auto& group : members) {
      rng.shuffle(std::span<std::size_t>(group));
      for (std::size_t idx : group) {
        plan.fold_of[idx] = next;
        next = (next + 1) % n_folds;
      }
    }
    return plan;
  }

  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_subject[dataset.trials[i].subject_id].push_back(i);
  if (by_subject.size() < n_folds) {
    throw StratificationError("subject-wise split needs at least " + std::to_string(n_folds) +
                              " subjects, found " + std::to_string(by_subject.size()));
  }
  std::vector<const std::vector<std::size_t>*> subjects;
  for (const auto& [name, indices] : by_subject) subjects.push_back(&indices);
  rng.shuffle(std::span<const std::vector<std::size_t>*>(subjects));
  std::stable_sort(subjects.begin(), subjects.end(),
                   [](const auto* a, const auto* b) { return a->size() > b->size(); });
  std::vector<std::size_t> load(n_folds, 0);
  for (const auto* indices : subjects) {
    const auto fold = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    for (std::size_t idx : *indices) plan.fold_of[idx] = fold;
    load[fold] += indices->size();
  }
  return plan;
}

}  // namespace kinesynth::data
