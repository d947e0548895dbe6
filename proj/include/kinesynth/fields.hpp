#pragma once

// Text encoding of flat configuration structs. Each config exposes a
// visit_fields(config, visitor) that calls visitor(key, member) for every
// member; the helpers below turn that into key/value lists and back.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kinesynth {

using Fields = std::vector<std::pair<std::string, std::string>>;

// Shortest text that parses back to the same double.
std::string format_double(double value);

double parse_double_field(std::string_view key, std::string_view text);
std::uint64_t parse_unsigned_field(std::string_view key, std::string_view text);
bool parse_bool_field(std::string_view key, std::string_view text);

inline std::string format_field(double v) { return format_double(v); }
inline std::string format_field(std::uint64_t v) { return std::to_string(v); }
inline std::string format_field(bool v) { return v ? "true" : "false"; }

inline void parse_field(std::string_view key, std::string_view text, double& out) {
  out = parse_double_field(key, text);
}
inline void parse_field(std::string_view key, std::string_view text, std::uint64_t& out) {
  out = parse_unsigned_field(key, text);
}
inline void parse_field(std::string_view key, std::string_view text, bool& out) {
  out = parse_bool_field(key, text);
}

template <typename Config>
Fields to_fields(const Config& config) {
  Fields out;
  Config copy = config;
  visit_fields(copy, [&](std::string_view key, auto& member) {
    out.emplace_back(std::string(key), format_field(member));
  });
  return out;
}

// Returns false when `key` names no member of the config.
template <typename Config>
bool set_field(Config& config, std::string_view key, std::string_view text) {
  bool found = false;
  visit_fields(config, [&](std::string_view name, auto& member) {
    if (name == key) {
      parse_field(key, text, member);
      found = true;
    }
  });
  return found;
}

}  // namespace kinesynth
