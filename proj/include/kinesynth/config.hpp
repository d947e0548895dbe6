#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "kinesynth/cgan.hpp"
#include "kinesynth/classifier.hpp"
#include "kinesynth/embed.hpp"
#include "kinesynth/eval.hpp"
#include "kinesynth/fields.hpp"

namespace kinesynth {

// Every tunable of a pipeline run. Keys are "seed" plus "<section>.<field>"
// with sections gan, fcn, experiment and embed. Setting "seed" copies the
// value into every section's seed; a later section seed overrides it.
struct RunConfig {
  std::uint64_t seed = 0;
  cgan::GanConfig gan;
  classifier::FcnConfig fcn;
  eval::ExperimentConfig experiment;
  embed::EmbedConfig embed;
};

inline constexpr std::string_view kSeedEnvironmentVariable = "KINESYNTH_SEED";

// Applies one key=value assignment; throws ConfigError naming `origin` on
// unknown keys or unparsable values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value, std::string_view origin);
void apply_assignment(RunConfig& config, std::string_view assignment, std::string_view origin);
void apply_seed(RunConfig& config, std::uint64_t seed);

// key=value lines; blank lines and lines starting with '#' are skipped.
void read_config(RunConfig& config, std::istream& in, std::string_view origin);
void read_config_file(RunConfig& config, const std::filesystem::path& path);

// Fully resolved settings in a fixed order, readable by read_config.
Fields resolved_fields(const RunConfig& config);
void write_config(const RunConfig& config, std::ostream& out);

// Parses a KINESYNTH_SEED value, or nullopt when the variable is unset.
std::optional<std::uint64_t> seed_from_environment();

}  // namespace kinesynth
