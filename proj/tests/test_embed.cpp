#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "kinesynth/embed.hpp"
#include "kinesynth/errors.hpp"
#include "kinesynth/rng.hpp"
#include "kinesynth/toy.hpp"

using namespace kinesynth;
using namespace kinesynth::embed;

namespace {

Tensor gaussian_points(std::size_t n, std::size_t d, SeededRng& rng, double scale = 1.0) {
  Tensor x({n, d});
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = scale * rng.normal();
  return x;
}

// Two blobs of 30 points in 10 dimensions, centres 10 standard deviations apart.
Tensor blobs(std::vector<int>& labels) {
  SeededRng rng(21);
  Tensor x = gaussian_points(60, 10, rng);
  labels.assign(60, 0);
  for (std::size_t i = 30; i < 60; ++i) {
    labels[i] = 1;
    for (std::size_t k = 0; k < 10; ++k) x.at(i, k) += 10.0 / std::sqrt(10.0);
  }
  return x;
}

double dist2(const Tensor& y, std::size_t i, std::size_t j) {
  const double dx = y.at(i, 0) - y.at(j, 0), dy = y.at(i, 1) - y.at(j, 1);
  return dx * dx + dy * dy;
}

// Lloyd's 2-means seeded with the two mutually farthest points.
std::vector<int> two_means(const Tensor& y) {
  const std::size_t n = y.dim(0);
  std::size_t a = 0, b = 1;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (dist2(y, i, j) > dist2(y, a, b)) a = i, b = j;
  double c[2][2] = {{y.at(a, 0), y.at(a, 1)}, {y.at(b, 0), y.at(b, 1)}};
  std::vector<int> label(n, 0);
  for (int round = 0; round < 50; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      double d[2];
      for (int k = 0; k < 2; ++k) d[k] = std::hypot(y.at(i, 0) - c[k][0], y.at(i, 1) - c[k][1]);
      label[i] = d[1] < d[0] ? 1 : 0;
    }
    for (int k = 0; k < 2; ++k) {
      double sx = 0, sy = 0, m = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (label[i] == k) sx += y.at(i, 0), sy += y.at(i, 1), ++m;
      if (m > 0) c[k][0] = sx / m, c[k][1] = sy / m;
    }
  }
  return label;
}

EmbedConfig blob_config() {
  EmbedConfig c;
  c.perplexity = 10.0;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("perplexity feasibility") {
  SeededRng rng(1);
  const Tensor x = gaussian_points(60, 10, rng);
  EmbedConfig c;  // perplexity 30 needs more than 91 points
  CHECK_THROWS_AS(tsne(x, c), ParameterError);
  CHECK_THROWS_AS(validate(c, 4), ParameterError);
  CHECK_NOTHROW(validate(c, 92));
  CHECK_THROWS_AS(validate(c, 91), ParameterError);
}

TEST_CASE("joint affinities are symmetric and normalised") {
  SeededRng rng(2);
  const Tensor x = gaussian_points(40, 5, rng);
  const Tensor p = joint_affinities(x, 8.0);
  double total = 0.0;
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(p.at(i, i) == 0.0);
    for (std::size_t j = 0; j < 40; ++j) {
      CHECK(p.at(i, j) == p.at(j, i));
      CHECK(p.at(i, j) >= 0.0);
      total += p.at(i, j);
    }
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  const Tensor flat = joint_affinities(x, 12.0);
  CHECK(*std::max_element(flat.values().begin(), flat.values().end()) <
        *std::max_element(p.values().begin(), p.values().end()));
}

TEST_CASE("KL gradient matches central finite differences") {
  SeededRng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor x = gaussian_points(6, 3, rng);
    const Tensor p = joint_affinities(x, 1.5);
    Tensor y = gaussian_points(6, 2, rng);
    const Tensor g = kl_gradient(p, y);
    const double h = 1e-6;
    for (std::size_t k = 0; k < y.size(); ++k) {
      const double saved = y[k];
      y[k] = saved + h;
      const double up = kl_divergence(p, y);
      y[k] = saved - h;
      const double down = kl_divergence(p, y);
      y[k] = saved;
      const double fd = (up - down) / (2 * h);
      CHECK(std::fabs(fd - g[k]) / std::max({std::fabs(fd), std::fabs(g[k]), 1e-3}) < 1e-4);
    }
  }
}

TEST_CASE("two separated blobs are recovered by 2-means on the embedding") {
  std::vector<int> labels;
  const Tensor x = blobs(labels);
  const TsneResult r = tsne(x, blob_config());
  const std::vector<int> found = two_means(r.embedding);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) agree += (found[i] == labels[i]);
  const double recovery = std::max(agree, labels.size() - agree) / static_cast<double>(labels.size());
  CHECK(recovery >= 0.95);
}

TEST_CASE("KL is finite and non-increasing after exaggeration; output is centred") {
  std::vector<int> labels;
  const Tensor x = blobs(labels);
  const EmbedConfig c = blob_config();
  const TsneResult r = tsne(x, c);
  REQUIRE(r.kl.size() == c.iterations);
  for (double v : r.kl) CHECK(std::isfinite(v));
  for (std::size_t it = c.iterations - 100; it < c.iterations; ++it) CHECK(r.kl[it] <= r.kl[it - 1] + 1e-6);
  CHECK(r.kl.back() < r.kl[c.exaggeration_iterations]);
  for (std::size_t axis = 0; axis < 2; ++axis) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 60; ++i) mean += r.embedding.at(i, axis);
    CHECK(std::fabs(mean / 60.0) < 1e-9);
  }
}

TEST_CASE("t-SNE is deterministic given the seed") {
  std::vector<int> labels;
  const Tensor x = blobs(labels);
  EmbedConfig c = blob_config();
  c.iterations = 300;
  const TsneResult a = tsne(x, c), b = tsne(x, c);
  CHECK(a.embedding == b.embedding);
  CHECK(a.kl == b.kl);
  c.seed = 4;
  CHECK(tsne(x, c).embedding != a.embedding);
}

TEST_CASE("duplicated points embed closer than the median pairwise distance") {
  SeededRng rng(8);
  Tensor base = gaussian_points(20, 6, rng);
  Tensor x({40, 6});
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t k = 0; k < 6; ++k) x.at(2 * i, k) = x.at(2 * i + 1, k) = base.at(i, k);
  EmbedConfig c;
  c.perplexity = 5.0;
  c.seed = 1;
  const TsneResult r = tsne(x, c);
  std::vector<double> all;
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = i + 1; j < 40; ++j) all.push_back(dist2(r.embedding, i, j));
  std::nth_element(all.begin(), all.begin() + all.size() / 2, all.end());
  const double median = all[all.size() / 2];
  for (std::size_t i = 0; i < 20; ++i) CHECK(dist2(r.embedding, 2 * i, 2 * i + 1) < median);
}

TEST_CASE("flattened trials and embedding CSV") {
  data::Dataset ds = data::make_toy_dataset({});
  ds.trials.resize(3);
  ds.trials[1].provenance = data::Provenance::Synthetic;
  const Tensor flat = flatten_trials(ds.trials);
  CHECK(flat.shape() == Shape{3, 2700});
  CHECK(flat.at(1, 300) == ds.trials[1].signal.at(1, 0));
  const Tensor y = Tensor::matrix({{0.5, -1}, {2, 0.25}, {0, 0}});
  std::ostringstream out;
  write_embedding_csv(y, ds.trials, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "x,y,task,impairment,provenance");
  std::getline(in, line);
  CHECK(line.rfind("0.5,-1,", 0) == 0);
  CHECK(line.substr(line.rfind(',') + 1) == "real");
  std::getline(in, line);
  CHECK(line.substr(line.rfind(',') + 1) == "synthetic");
  CHECK_THROWS_AS(write_embedding_csv(y, std::span(ds.trials).first(2), out), DimensionError);
}
