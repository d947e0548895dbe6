#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kinesynth/data.hpp"
#include "kinesynth/eval.hpp"
#include "kinesynth/tensor.hpp"

namespace kinesynth::report {

// Coordinates in every SVG are printed with two decimals.

// Row-normalised heatmap with the raw count in each cell.
std::string confusion_heatmap_svg(const eval::ConfusionMatrix& cm, std::span<const std::string> labels,
                                  std::string_view title);

// Colour encodes the task, the marker shape the impairment group, and the
// fill the provenance: filled for real trials, open for synthetic ones.
std::string embedding_scatter_svg(const Tensor& embedding, std::span<const data::Trial> trials,
                                  std::string_view title);

struct Series {
  std::string label;
  std::vector<double> values;
  std::string color;
  bool dashed = false;
};

struct Panel {
  std::string title;
  std::string y_label;
  std::vector<Series> series;
};

// Panels stacked vertically over a shared time axis in seconds.
std::string line_panels_svg(std::span<const Panel> panels, double sample_rate, std::string_view title);

// Real and synthetic trajectories of one (task, impairment) class, one panel
// per channel; at most `max_trials` of each provenance are drawn.
std::vector<Panel> overlay_panels(std::span<const data::Trial> real, std::span<const data::Trial> synthetic,
                                  std::size_t condition_class, std::span<const std::size_t> channels,
                                  std::size_t max_trials = 8);

// Metric rows in the order Precision, Recall, F1 Score, Accuracy.
inline constexpr std::array<std::string_view, 4> kTableRows{"Precision", "Recall", "F1 Score", "Accuracy"};

// Markdown table: metric, real-only mean ± sd, augmented mean ± sd, paired-t p.
std::string metrics_table_markdown(const eval::CvReport& report);
// Header metric,real_only_mean,real_only_std,augmented_mean,augmented_std,t,p;
// t and p are empty when the test is undefined.
void write_metrics_table_csv(const eval::CvReport& report, std::ostream& out);

}  // namespace kinesynth::report
