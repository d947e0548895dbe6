#include "kinesynth/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "kinesynth/errors.hpp"
#include "kinesynth/fields.hpp"

namespace kinesynth::report {

namespace {

constexpr std::array<const char*, 10> kTaskColors{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  if (std::fabs(v) < 0.005) v = 0.0;  // no "-0.00"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string open_svg(double width, double height) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\" font-family=\"sans-serif\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text(double x, double y, std::string_view content, int size, std::string_view anchor = "middle",
                 std::string_view extra = "") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + std::to_string(size) +
         "\" text-anchor=\"" + std::string(anchor) + "\"" + (extra.empty() ? "" : " " + std::string(extra)) + ">" +
         escape(content) + "</text>\n";
}

// White to dark blue.
std::string heat_color(double f) {
  f = std::clamp(f, 0.0, 1.0);
  const auto channel = [&](double lo, double hi) { return static_cast<int>(std::lround(lo + (hi - lo) * f)); };
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", channel(255, 8), channel(255, 48), channel(255, 107));
  return buf;
}

std::string marker(std::size_t impairment, double x, double y, const std::string& color, bool filled) {
  const std::string style = "stroke=\"" + color + "\" stroke-width=\"1.2\" fill=\"" + (filled ? color : "none") + "\"";
  const double r = 4.0;
  switch (impairment) {
    case 0:
      return "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) + "\" r=\"" + num(r) + "\" " + style + "/>\n";
    case 1:
      return "<rect x=\"" + num(x - r) + "\" y=\"" + num(y - r) + "\" width=\"" + num(2 * r) + "\" height=\"" +
             num(2 * r) + "\" " + style + "/>\n";
    default:
      return "<polygon points=\"" + num(x) + "," + num(y - r * 1.2) + " " + num(x - r * 1.1) + "," +
             num(y + r * 0.8) + " " + num(x + r * 1.1) + "," + num(y + r * 0.8) + "\" " + style + "/>\n";
  }
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
  }
  double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

std::string mean_sd(const eval::ConditionResult& c, std::string_view metric) {
  return fixed(eval::metric_value(c.mean, metric), 3) + " ± " + fixed(eval::metric_value(c.sd, metric), 3);
}

}  // namespace

std::string confusion_heatmap_svg(const eval::ConfusionMatrix& cm, std::span<const std::string> labels,
                                  std::string_view title) {
  const std::size_t n = cm.classes();
  if (labels.size() != n) {
    throw DimensionError(std::to_string(labels.size()) + " labels for a " + std::to_string(n) + "-class matrix");
  }
  const double cell = n > 12 ? 22.0 : 40.0, left = 130.0, top = 60.0;
  const double width = left + cell * static_cast<double>(n) + 30.0;
  const double height = top + cell * static_cast<double>(n) + 90.0;
  std::string svg = open_svg(width, height);
  svg += text(width / 2, 28, title, 16);
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint64_t row = cm.row_sum(r);
    for (std::size_t c = 0; c < n; ++c) {
      const double f = row == 0 ? 0.0 : static_cast<double>(cm.at(r, c)) / static_cast<double>(row);
      const double x = left + cell * static_cast<double>(c), y = top + cell * static_cast<double>(r);
      svg += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell) + "\" height=\"" + num(cell) +
             "\" fill=\"" + heat_color(f) + "\" stroke=\"#cccccc\"/>\n";
      if (cm.at(r, c) > 0) {
        svg += text(x + cell / 2, y + cell / 2 + 4, std::to_string(cm.at(r, c)), n > 12 ? 8 : 12, "middle",
                    f > 0.5 ? "fill=\"white\"" : "fill=\"black\"");
      }
    }
    svg += text(left - 6, top + cell * (static_cast<double>(r) + 0.5) + 4, labels[r], 10, "end");
  }
  for (std::size_t c = 0; c < n; ++c) {
    const double x = left + cell * (static_cast<double>(c) + 0.5), y = top + cell * static_cast<double>(n) + 8;
    svg += text(x, y, labels[c], 10, "end", "transform=\"rotate(-45 " + num(x) + " " + num(y) + ")\"");
  }
  svg += text(left + cell * static_cast<double>(n) / 2, height - 10, "Predicted label", 12);
  svg += text(16, top + cell * static_cast<double>(n) / 2, "True label", 12, "middle",
              "transform=\"rotate(-90 16 " + num(top + cell * static_cast<double>(n) / 2) + ")\"");
  svg += "</svg>\n";
  return svg;
}

std::string embedding_scatter_svg(const Tensor& embedding, std::span<const data::Trial> trials,
                                  std::string_view title) {
  if (embedding.rank() != 2 || embedding.dim(1) != 2 || embedding.dim(0) != trials.size()) {
    throw DimensionError("embedding " + shape_to_string(embedding.shape()) + " does not match " +
                         std::to_string(trials.size()) + " trials");
  }
  const double plot = 480.0, left = 40.0, top = 50.0, legend = 190.0;
  std::string svg = open_svg(left + plot + legend, top + plot + 40.0);
  svg += text((left + plot) / 2, 28, title, 16);
  svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(plot) + "\" height=\"" + num(plot) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  Range rx, ry;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    rx.add(embedding.at(i, 0));
    ry.add(embedding.at(i, 1));
  }
  rx.pad();
  ry.pad();
  std::array<bool, data::kTaskCount> tasks_seen{};
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const std::size_t task = trials[i].task_class();
    tasks_seen[task] = true;
    svg += marker(static_cast<std::size_t>(trials[i].impairment), rx.map(embedding.at(i, 0), left, left + plot),
                  ry.map(embedding.at(i, 1), top + plot, top), kTaskColors[task],
                  trials[i].provenance == data::Provenance::Real);
  }
  double y = top + 10;
  const double lx = left + plot + 20;
  for (std::size_t t = 0; t < data::kTaskCount; ++t) {
    if (!tasks_seen[t]) continue;
    svg += "<rect x=\"" + num(lx) + "\" y=\"" + num(y - 8) + "\" width=\"10\" height=\"10\" fill=\"" +
           kTaskColors[t] + "\"/>\n";
    svg += text(lx + 16, y + 1, data::task_name(data::task_from_index(t)), 11, "start");
    y += 16;
  }
  y += 8;
  for (std::size_t k = 0; k < data::kImpairmentCount; ++k) {
    svg += marker(k, lx + 5, y - 3, "black", true);
    svg += text(lx + 16, y + 1, data::impairment_name(static_cast<data::Impairment>(k)), 11, "start");
    y += 16;
  }
  y += 8;
  svg += marker(0, lx + 5, y - 3, "black", true) + text(lx + 16, y + 1, "real", 11, "start");
  y += 16;
  svg += marker(0, lx + 5, y - 3, "black", false) + text(lx + 16, y + 1, "synthetic (open)", 11, "start");
  svg += "</svg>\n";
  return svg;
}

std::string line_panels_svg(std::span<const Panel> panels, double sample_rate, std::string_view title) {
  if (panels.empty()) throw DimensionError("no panels to plot");
  if (!(sample_rate > 0.0)) throw ParameterError("sample rate must be positive");
  const double width = 640.0, left = 70.0, right = 150.0, panel_h = 160.0, gap = 40.0, top = 50.0;
  const double height = top + static_cast<double>(panels.size()) * (panel_h + gap) + 10.0;
  std::string svg = open_svg(width, height);
  svg += text(width / 2, 28, title, 16);
  const double x0 = left, x1 = width - right;
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const Panel& panel = panels[p];
    const double y0 = top + static_cast<double>(p) * (panel_h + gap), y1 = y0 + panel_h;
    std::size_t longest = 2;
    Range ry;
    for (const auto& s : panel.series) {
      longest = std::max(longest, s.values.size());
      for (double v : s.values) ry.add(v);
    }
    ry.pad();
    const double t_end = static_cast<double>(longest - 1) / sample_rate;
    svg += "<rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" + num(x1 - x0) + "\" height=\"" +
           num(panel_h) + "\" fill=\"none\" stroke=\"black\"/>\n";
    svg += text((x0 + x1) / 2, y0 - 6, panel.title, 12);
    svg += text(x0 - 6, y0 + 10, fixed(ry.hi, 2), 9, "end");
    svg += text(x0 - 6, y1, fixed(ry.lo, 2), 9, "end");
    svg += text(x0, y1 + 14, "0", 9);
    svg += text(x1, y1 + 14, fixed(t_end, 1) + " s", 9);
    svg += text(18, (y0 + y1) / 2, panel.y_label, 10, "middle",
                "transform=\"rotate(-90 18 " + num((y0 + y1) / 2) + ")\"");
    std::vector<std::string> legend_seen;
    for (const auto& s : panel.series) {
      if (s.values.empty()) continue;
      std::string points;
      for (std::size_t i = 0; i < s.values.size(); ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        points += (i ? " " : "") + num(x0 + t / t_end * (x1 - x0)) + "," + num(ry.map(s.values[i], y1, y0));
      }
      svg += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1\"" +
             (s.dashed ? " stroke-dasharray=\"4 3\"" : "") + " points=\"" + points + "\"/>\n";
      if (std::find(legend_seen.begin(), legend_seen.end(), s.label) == legend_seen.end()) {
        const double ly = y0 + 12 + 16 * static_cast<double>(legend_seen.size());
        svg += "<line x1=\"" + num(x1 + 10) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(x1 + 30) + "\" y2=\"" +
               num(ly - 4) + "\" stroke=\"" + s.color + "\"" + (s.dashed ? " stroke-dasharray=\"4 3\"" : "") +
               "/>\n";
        svg += text(x1 + 36, ly, s.label, 10, "start");
        legend_seen.push_back(s.label);
      }
    }
  }
  svg += "</svg>\n";
  return svg;
}

std::vector<Panel> overlay_panels(std::span<const data::Trial> real, std::span<const data::Trial> synthetic,
                                  std::size_t condition_class, std::span<const std::size_t> channels,
                                  std::size_t max_trials) {
  std::vector<Panel> panels;
  for (std::size_t ch : channels) {
    if (ch >= data::kChannels) throw IndexError("channel " + std::to_string(ch) + " out of range");
    Panel panel;
    panel.title = data::condition_name(condition_class) + ": " + std::string(data::kChannelNames[ch]);
    panel.y_label = ch < data::kPositionChannels ? "cm" : "rad";
    const auto add = [&](std::span<const data::Trial> trials, const char* label, const char* color, bool dashed) {
      std::size_t drawn = 0;
      for (const auto& t : trials) {
        if (t.condition_class() != condition_class || drawn == max_trials) continue;
        const double* row = t.signal.data() + ch * t.signal.dim(1);
        panel.series.push_back({label, std::vector<double>(row, row + t.signal.dim(1)), color, dashed});
        ++drawn;
      }
    };
    add(real, "real", "#1f77b4", false);
    add(synthetic, "synthetic", "#d62728", true);
    panels.push_back(std::move(panel));
  }
  return panels;
}

std::string metrics_table_markdown(const eval::CvReport& report) {
  std::ostringstream out;
  out << "| Metric | Real only | Real + synthetic | p (paired t) |\n";
  out << "|---|---|---|---|\n";
  for (std::size_t m = 0; m < kTableRows.size(); ++m) {
    const auto& test = report.paired[m].test;
    out << "| " << kTableRows[m] << " | " << mean_sd(report.real_only, eval::kMetricNames[m]) << " | "
        << mean_sd(report.augmented, eval::kMetricNames[m]) << " | "
        << (test ? fixed(test->p, 4) : std::string("n/a")) << " |\n";
  }
  return out.str();
}

void write_metrics_table_csv(const eval::CvReport& report, std::ostream& out) {
  out << "metric,real_only_mean,real_only_std,augmented_mean,augmented_std,t,p\n";
  for (std::size_t m = 0; m < kTableRows.size(); ++m) {
    const std::string_view key = eval::kMetricNames[m];
    const auto& test = report.paired[m].test;
    out << kTableRows[m] << ',' << format_double(eval::metric_value(report.real_only.mean, key)) << ','
        << format_double(eval::metric_value(report.real_only.sd, key)) << ','
        << format_double(eval::metric_value(report.augmented.mean, key)) << ','
        << format_double(eval::metric_value(report.augmented.sd, key)) << ','
        << (test ? format_double(test->t) : "") << ',' << (test ? format_double(test->p) : "") << '\n';
  }
}

}  // namespace kinesynth::report
