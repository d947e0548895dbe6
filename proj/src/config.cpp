#include "kinesynth/config.hpp"

#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

#include "kinesynth/errors.hpp"

namespace kinesynth {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename Config>
bool set_section(Config& section, std::string_view field, std::string_view value, std::string_view origin) {
  try {
    return set_field(section, field, value);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(origin) + ": " + e.what());
  }
}

template <typename Config>
void append_section(Fields& out, std::string_view name, const Config& section) {
  for (auto& [key, value] : to_fields(section)) out.emplace_back(std::string(name) + "." + key, value);
}

}  // namespace

void apply_seed(RunConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.gan.seed = seed;
  config.fcn.seed = seed;
  config.experiment.seed = seed;
  config.embed.seed = seed;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value, std::string_view origin) {
  if (key == "seed") {
    try {
      apply_seed(config, parse_unsigned_field(key, value));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(origin) + ": " + e.what());
    }
    return;
  }
  const auto dot = key.find('.');
  bool known = false;
  if (dot != std::string_view::npos) {
    const std::string_view section = key.substr(0, dot), field = key.substr(dot + 1);
    if (section == "gan") known = set_section(config.gan, field, value, origin);
    else if (section == "fcn") known = set_section(config.fcn, field, value, origin);
    else if (section == "experiment") known = set_section(config.experiment, field, value, origin);
    else if (section == "embed") known = set_section(config.embed, field, value, origin);
  }
  if (!known) throw ConfigError(std::string(origin) + ": unknown config key '" + std::string(key) + "'");
}

void apply_assignment(RunConfig& config, std::string_view assignment, std::string_view origin) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(std::string(origin) + ": expected key=value, got '" + std::string(assignment) + "'");
  }
  apply_setting(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), origin);
}

void read_config(RunConfig& config, std::istream& in, std::string_view origin) {
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    const std::string_view content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    apply_assignment(config, content, std::string(origin) + ":" + std::to_string(number));
  }
}

void read_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  read_config(config, in, path.string());
}

Fields resolved_fields(const RunConfig& config) {
  Fields out{{"seed", format_field(config.seed)}};
  append_section(out, "experiment", config.experiment);
  append_section(out, "gan", config.gan);
  append_section(out, "fcn", config.fcn);
  append_section(out, "embed", config.embed);
  return out;
}

void write_config(const RunConfig& config, std::ostream& out) {
  for (const auto& [key, value] : resolved_fields(config)) out << key << '=' << value << '\n';
}

std::optional<std::uint64_t> seed_from_environment() {
  const char* value = std::getenv(std::string(kSeedEnvironmentVariable).c_str());
  if (value == nullptr) return std::nullopt;
  return parse_unsigned_field(kSeedEnvironmentVariable, value);
}

}  // namespace kinesynth
