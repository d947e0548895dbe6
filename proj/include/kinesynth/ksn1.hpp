#pragma once

// KSN1 parameter container:
//
//   "KSN1"
//   repeated until end of stream:
//     u32 name_length | name bytes (UTF-8) | u32 rank | u32 dims[rank] |
//     f64 values[product(dims)]
//
// All integers and floats are little-endian regardless of host order.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "kinesynth/layers.hpp"
#include "kinesynth/tensor.hpp"

namespace kinesynth {

struct NamedTensor {
  std::string name;
  Tensor tensor;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

void write_ksn1(std::ostream& out, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> read_ksn1(std::istream& in);

void save_ksn1(const std::filesystem::path& path, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> load_ksn1(const std::filesystem::path& path);

std::vector<NamedTensor> snapshot(const ParameterList& params);
// Copies values by name; every parameter must be present with its shape.
void restore(const ParameterList& params, const std::vector<NamedTensor>& entries);

}  // namespace kinesynth
