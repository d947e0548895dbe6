#include "sidecar.hpp"

#include <fstream>

namespace kinesynth::detail {

std::filesystem::path sidecar_path(const std::filesystem::path& weights) {
  return std::filesystem::path(weights.string() + ".json");
}

void write_sidecar(const std::filesystem::path& weights, const Sidecar& sidecar) {
  nlohmann::ordered_json doc;
  doc["schema_version"] = kSidecarSchema;
  doc["kind"] = sidecar.kind;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [key, value] : sidecar.config) cfg[key] = value;
  doc["config"] = cfg;
  doc["scaler"]["mean"] = sidecar.scaler.mean;
  doc["scaler"]["scale"] = sidecar.scaler.scale;
  for (const auto& [key, value] : sidecar.extra.items()) doc[key] = value;
  const auto path = sidecar_path(weights);
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

Sidecar read_sidecar(const std::filesystem::path& weights, std::string_view kind) {
  const auto path = sidecar_path(weights);
  std::ifstream in(path);
  if (!in) throw SchemaError("missing model sidecar " + path.string());
  try {
    const auto doc = nlohmann::ordered_json::parse(in);
    if (doc.at("schema_version").get<int>() != kSidecarSchema) {
      throw SchemaError(path.string() + ": unsupported schema_version");
    }
    Sidecar out;
    out.kind = doc.at("kind").get<std::string>();
    if (out.kind != kind) {
      throw SchemaError(path.string() + ": holds a '" + out.kind + "' model, expected '" +
                        std::string(kind) + "'");
    }
    for (const auto& [key, value] : doc.at("config").items()) {
      out.config.emplace_back(key, value.get<std::string>());
    }
    out.scaler.mean = doc.at("scaler").at("mean").get<std::array<double, data::kChannels>>();
    out.scaler.scale = doc.at("scaler").at("scale").get<std::array<double, data::kChannels>>();
    for (const auto& [key, value] : doc.items()) {
      if (key != "schema_version" && key != "kind" && key != "config" && key != "scaler") {
        out.extra[key] = value;
      }
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

}  // namespace kinesynth::detail
