#include "kinesynth/fields.hpp"

#include <charconv>
#include <cmath>

#include "kinesynth/errors.hpp"

namespace kinesynth {

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view text, const char* expected) {
  throw ConfigError("config key '" + std::string(key) + "': '" + std::string(text) + "' is not " +
                    expected);
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

double parse_double_field(std::string_view key, std::string_view text) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) bad_value(key, text, "a finite number");
  return value;
}

std::uint64_t parse_unsigned_field(std::string_view key, std::string_view text) {
  std::uint64_t value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) bad_value(key, text, "a non-negative integer");
  return value;
}

bool parse_bool_field(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  bad_value(key, text, "true or false");
}

}  // namespace kinesynth
