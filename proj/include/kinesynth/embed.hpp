#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <type_traits>
#include <vector>

#include "kinesynth/data.hpp"
#include "kinesynth/fields.hpp"
#include "kinesynth/tensor.hpp"

namespace kinesynth::embed {

struct EmbedConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;
  std::uint64_t seed = 0;
};

template <typename Config, typename Visitor>
  requires std::is_same_v<std::remove_const_t<Config>, EmbedConfig>
void visit_fields(Config& c, Visitor&& v) {
  v("perplexity", c.perplexity);
  v("iterations", c.iterations);
  v("early_exaggeration", c.early_exaggeration);
  v("exaggeration_iterations", c.exaggeration_iterations);
  v("learning_rate", c.learning_rate);
  v("initial_momentum", c.initial_momentum);
  v("final_momentum", c.final_momentum);
  v("momentum_switch", c.momentum_switch);
  v("seed", c.seed);
}

// Throws ParameterError unless n_points >= 5 and perplexity < (n_points - 1) / 3.
void validate(const EmbedConfig& config, std::size_t n_points);

// Symmetric joint affinities [N x N] summing to 1. Each row's Gaussian
// bandwidth is bisected until its entropy is within 1e-4 of log(perplexity).
Tensor joint_affinities(const Tensor& points, double perplexity);

// KL(P || Q) with Q the Student-t affinities of the embedding y [N x 2].
double kl_divergence(const Tensor& p, const Tensor& y);
// Gradient of kl_divergence with respect to y.
Tensor kl_gradient(const Tensor& p, const Tensor& y);

struct TsneResult {
  Tensor embedding;         // [N x 2], centred
  std::vector<double> kl;   // KL(P || Q) before each update, without exaggeration
};

// Exact t-SNE with momentum and per-coordinate gains.
TsneResult tsne(const Tensor& points, const EmbedConfig& config);

// Flattened [N x 2700] signals, channel-major.
Tensor flatten_trials(std::span<const data::Trial> trials);

// Header x,y,task,impairment,provenance.
void write_embedding_csv(const Tensor& embedding, std::span<const data::Trial> trials, std::ostream& out);

}  // namespace kinesynth::embed
