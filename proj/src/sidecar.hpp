#pragma once

// JSON sidecar written next to a KSN1 weight file: schema version, model
// kind, config fields, channel scaler and model-specific extras.

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "kinesynth/data.hpp"
#include "kinesynth/errors.hpp"
#include "kinesynth/fields.hpp"

namespace kinesynth::detail {

inline constexpr int kSidecarSchema = 1;

struct Sidecar {
  std::string kind;
  Fields config;
  data::ChannelScaler scaler = data::ChannelScaler::identity();
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

std::filesystem::path sidecar_path(const std::filesystem::path& weights);
void write_sidecar(const std::filesystem::path& weights, const Sidecar& sidecar);
Sidecar read_sidecar(const std::filesystem::path& weights, std::string_view kind);

template <typename Config>
Config config_from_fields(const Fields& fields, const std::filesystem::path& weights) {
  Config config;
  for (const auto& [key, value] : fields) {
    if (!set_field(config, key, value)) {
      throw SchemaError(sidecar_path(weights).string() + ": unknown config key '" + key + "'");
    }
  }
  return config;
}

}  // namespace kinesynth::detail
