#include "kinesynth/embed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "kinesynth/errors.hpp"
#include "kinesynth/rng.hpp"

namespace kinesynth::embed {

namespace {

constexpr double kEntropyTolerance = 1e-4;
constexpr int kBisectionSteps = 200;
constexpr double kInitScale = 1e-4;
constexpr double kMinGain = 0.01;
constexpr double kTinyQ = 1e-300;

Tensor squared_distances(const Tensor& x) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    const double* a = x.data() + i * d;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double* b = x.data() + j * d;
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
      out.at(i, j) = s;
      out.at(j, i) = s;
    }
  }
  return out;
}

// Row i of the conditional affinities p_{j|i} for precision beta; returns the
// entropy in nats.
double conditional_row(const double* dist, std::size_t n, std::size_t i, double beta, double* row) {
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) dmin = std::min(dmin, dist[j]);
  }
  double sum = 0.0, weighted = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      row[j] = 0.0;
      continue;
    }
    const double shifted = dist[j] - dmin;
    row[j] = std::exp(-beta * shifted);
    sum += row[j];
    weighted += row[j] * shifted;
  }
  for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
  return std::log(sum) + beta * weighted / sum;
}

void require_embedding(const Tensor& p, const Tensor& y) {
  require_rank(y, 2, "embedding");
  if (y.dim(1) != 2 || p.shape() != Shape{y.dim(0), y.dim(0)}) {
    throw DimensionError("affinities " + shape_to_string(p.shape()) + " do not match embedding " +
                         shape_to_string(y.shape()));
  }
}

// Student-t kernel numerators (zero diagonal) and their sum.
double student_kernel(const Tensor& y, Tensor& num) {
  const std::size_t n = y.dim(0);
  num = Tensor({n, n});
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y.at(i, 0) - y.at(j, 0), dy = y.at(i, 1) - y.at(j, 1);
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      num.at(i, j) = v;
      num.at(j, i) = v;
      sum += 2.0 * v;
    }
  }
  return sum;
}

double kl_from_kernel(const Tensor& p, const Tensor& num, double sum) {
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) kl += p[k] * std::log(p[k] / std::max(num[k] / sum, kTinyQ));
  }
  return kl;
}

// 4 * sum_j (scale * p_ij - q_ij) * num_ij * (y_i - y_j)
void gradient_from_kernel(const Tensor& p, double scale, const Tensor& y, const Tensor& num, double sum,
                          Tensor& grad) {
  const std::size_t n = y.dim(0);
  grad.zero();
  for (std::size_t i = 0; i < n; ++i) {
    double gx = 0.0, gy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double w = (scale * p.at(i, j) - num.at(i, j) / sum) * num.at(i, j);
      gx += w * (y.at(i, 0) - y.at(j, 0));
      gy += w * (y.at(i, 1) - y.at(j, 1));
    }
    grad.at(i, 0) = 4.0 * gx;
    grad.at(i, 1) = 4.0 * gy;
  }
}

void center(Tensor& y) {
  const std::size_t n = y.dim(0);
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += y.at(i, c);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) y.at(i, c) -= mean;
  }
}

}  // namespace

void validate(const EmbedConfig& c, std::size_t n_points) {
  if (n_points < 5) throw ParameterError("t-SNE needs at least 5 points, got " + std::to_string(n_points));
  if (!(c.perplexity > 0.0)) throw ParameterError("t-SNE perplexity must be positive");
  const double limit = (static_cast<double>(n_points) - 1.0) / 3.0;
  if (!(c.perplexity < limit)) {
    throw ParameterError("t-SNE perplexity " + format_double(c.perplexity) + " is infeasible for " +
                         std::to_string(n_points) + " points; it must be below " + format_double(limit));
  }
  if (c.iterations == 0) throw ParameterError("t-SNE iterations must be positive");
  if (!(c.learning_rate > 0.0)) throw ParameterError("t-SNE learning rate must be positive");
  if (!(c.early_exaggeration >= 1.0)) throw ParameterError("t-SNE early exaggeration must be at least 1");
}

Tensor joint_affinities(const Tensor& points, double perplexity) {
  require_rank(points, 2, "t-SNE input");
  const std::size_t n = points.dim(0);
  const Tensor dist = squared_distances(points);
  const double target = std::log(perplexity);
  Tensor cond({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    const double* d = dist.data() + i * n;
    double* row = cond.data() + i * n;
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double h = conditional_row(d, n, i, beta, row);
    int step = 0;
    for (; step < kBisectionSteps && std::fabs(h - target) > kEntropyTolerance; ++step) {
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
      h = conditional_row(d, n, i, beta, row);
    }
    if (std::fabs(h - target) > kEntropyTolerance) {
      throw ParameterError("t-SNE: no bandwidth gives perplexity " + format_double(perplexity) + " for point " +
                           std::to_string(i));
    }
  }
  Tensor p({n, n});
  const double norm = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) p.at(i, j) = (cond.at(i, j) + cond.at(j, i)) / norm;
  }
  return p;
}

double kl_divergence(const Tensor& p, const Tensor& y) {
  require_embedding(p, y);
  Tensor num;
  const double sum = student_kernel(y, num);
  return kl_from_kernel(p, num, sum);
}

Tensor kl_gradient(const Tensor& p, const Tensor& y) {
  require_embedding(p, y);
  Tensor num;
  const double sum = student_kernel(y, num);
  Tensor grad(y.shape());
  gradient_from_kernel(p, 1.0, y, num, sum, grad);
  return grad;
}

TsneResult tsne(const Tensor& points, const EmbedConfig& config) {
  require_rank(points, 2, "t-SNE input");
  validate(config, points.dim(0));
  if (!points.all_finite()) throw ParameterError("t-SNE input contains non-finite values");
  const std::size_t n = points.dim(0);
  const Tensor p = joint_affinities(points, config.perplexity);

  TsneResult result;
  Tensor& y = result.embedding;
  y = Tensor({n, 2});
  SeededRng rng(config.seed);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = kInitScale * rng.normal();
  center(y);

  Tensor update({n, 2}), gains({n, 2}, 1.0), grad({n, 2}), num;
  result.kl.reserve(config.iterations);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const double scale = it < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
    const double momentum = it < config.momentum_switch ? config.initial_momentum : config.final_momentum;
    const double sum = student_kernel(y, num);
    result.kl.push_back(kl_from_kernel(p, num, sum));
    gradient_from_kernel(p, scale, y, num, sum, grad);
    for (std::size_t k = 0; k < y.size(); ++k) {
      const bool same_sign = (grad[k] > 0.0) == (update[k] > 0.0);
      gains[k] = same_sign ? std::max(gains[k] * 0.8, kMinGain) : gains[k] + 0.2;
      update[k] = momentum * update[k] - config.learning_rate * gains[k] * grad[k];
      y[k] += update[k];
    }
    center(y);
  }
  return result;
}

Tensor flatten_trials(std::span<const data::Trial> trials) {
  const std::size_t width = data::kChannels * data::kTrialLength;
  if (trials.empty()) throw DimensionError("no trials to embed");
  Tensor out({trials.size(), width});
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].signal.size() != width) {
      throw DimensionError("trial " + std::to_string(i) + " is " + shape_to_string(trials[i].signal.shape()) +
                           ", expected 9 x 300");
    }
    std::copy(trials[i].signal.values().begin(), trials[i].signal.values().end(), out.data() + i * width);
  }
  return out;
}

void write_embedding_csv(const Tensor& embedding, std::span<const data::Trial> trials, std::ostream& out) {
  if (embedding.rank() != 2 || embedding.dim(0) != trials.size() || embedding.dim(1) != 2) {
    throw DimensionError("embedding " + shape_to_string(embedding.shape()) + " does not match " +
                         std::to_string(trials.size()) + " trials");
  }
  out << "x,y,task,impairment,provenance\n";
  for (std::size_t i = 0; i < trials.size(); ++i) {
    out << format_double(embedding.at(i, 0)) << ',' << format_double(embedding.at(i, 1)) << ','
        << data::task_name(trials[i].task) << ',' << data::impairment_name(trials[i].impairment) << ','
        << data::provenance_name(trials[i].provenance) << '\n';
  }
}

}  // namespace kinesynth::embed
