#include "kinesynth/ksn1.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "kinesynth/errors.hpp"

namespace kinesynth {

namespace {

constexpr std::array<char, 4> kMagic{'K', 'S', 'N', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
bool get_le(std::istream& in, T& value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) return false;
  value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return true;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw DimensionError(std::string("ksn1: ") + what + " exceeds u32");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void write_ksn1(std::ostream& out, const std::vector<NamedTensor>& entries) {
  out.write(kMagic.data(), kMagic.size());
  for (const auto& entry : entries) {
    put_le(out, checked_u32(entry.name.size(), "name length"));
    out.write(entry.name.data(), static_cast<std::streamsize>(entry.name.size()));
    put_le(out, checked_u32(entry.tensor.rank(), "rank"));
    for (std::size_t d : entry.tensor.shape()) put_le(out, checked_u32(d, "dimension"));
    for (double v : entry.tensor.values()) put_le(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw std::runtime_error("ksn1: write failed");
}

std::vector<NamedTensor> read_ksn1(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4 || magic != kMagic) throw SchemaError("ksn1: bad magic bytes");
  std::vector<NamedTensor> entries;
  while (true) {
    std::uint32_t name_len = 0;
    if (!get_le(in, name_len)) {
      if (in.gcount() == 0) break;
      throw SchemaError("ksn1: truncated entry header");
    }
    NamedTensor entry;
    entry.name.resize(name_len);
    in.read(entry.name.data(), name_len);
    std::uint32_t rank = 0;
    if (in.gcount() != static_cast<std::streamsize>(name_len) || !get_le(in, rank)) {
      throw SchemaError("ksn1: truncated entry '" + entry.name + "'");
    }
    Shape shape(rank);
    for (auto& d : shape) {
      std::uint32_t dim = 0;
      if (!get_le(in, dim)) throw SchemaError("ksn1: truncated shape of '" + entry.name + "'");
      d = dim;
    }
    std::vector<double> values(shape_product(shape));
    for (double& v : values) {
      std::uint64_t bits = 0;
      if (!get_le(in, bits)) throw SchemaError("ksn1: truncated values of '" + entry.name + "'");
      v = std::bit_cast<double>(bits);
    }
    entry.tensor = Tensor(std::move(shape), std::move(values));
    entries.push_back(std::move(entry));
  }
  return entries;
}

void save_ksn1(const std::filesystem::path& path, const std::vector<NamedTensor>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("ksn1: cannot open " + path.string() + " for writing");
  write_ksn1(out, entries);
}

std::vector<NamedTensor> load_ksn1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ksn1: cannot open " + path.string());
  return read_ksn1(in);
}

std::vector<NamedTensor> snapshot(const ParameterList& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back({p->name, p->value});
  return out;
}

void restore(const ParameterList& params, const std::vector<NamedTensor>& entries) {
  for (Parameter* p : params) {
    const NamedTensor* found = nullptr;
    for (const auto& e : entries) {
      if (e.name == p->name) {
        found = &e;
        break;
      }
    }
    if (!found) throw SchemaError("ksn1: missing parameter '" + p->name + "'");
    if (!found->tensor.same_shape(p->value)) {
      throw DimensionError("ksn1: parameter '" + p->name + "' has shape " +
                           shape_to_string(found->tensor.shape()) + ", expected " +
                           shape_to_string(p->value.shape()));
    }
    p->value = found->tensor;
    p->zero_grad();
  }
}

}  // namespace kinesynth
