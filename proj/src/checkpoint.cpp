#include "hceds/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace hceds {

namespace {

constexpr std::array<char, 8> kMagic = {'H', 'C', 'E', 'D', 'S', 'C', 'K', '1'};

template <typename T>
void write_le(std::ostream& out, T v) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw FormatError("unexpected end of binary data");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T v;
  std::memcpy(&v, bytes.data(), sizeof(T));
  return v;
}

}  // namespace

namespace binio {
void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v); }
void write_f64(std::ostream& out, double v) { write_le(out, v); }
void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::uint32_t read_u32(std::istream& in) { return read_le<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_le<std::uint64_t>(in); }
double read_f64(std::istream& in) { return read_le<double>(in); }
std::string read_string(std::istream& in) {
  const auto n = read_u64(in);
  if (n > (1ull << 32)) throw FormatError("string length " + std::to_string(n) + " is implausible");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw FormatError("unexpected end of binary data");
  return s;
}
}  // namespace binio

const Tensor& Archive::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw FormatError("checkpoint has no tensor named '" + name + "'");
}

const std::string& Archive::text(const std::string& name) const {
  auto it = texts.find(name);
  if (it == texts.end()) throw FormatError("checkpoint has no section named '" + name + "'");
  return it->second;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  binio::write_u32(out, static_cast<std::uint32_t>(archive.texts.size()));
  for (const auto& [name, body] : archive.texts) {
    binio::write_string(out, name);
    binio::write_string(out, body);
  }
  binio::write_u64(out, archive.tensors.size());
  for (const auto& [name, t] : archive.tensors) {
    binio::write_string(out, name);
    binio::write_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) binio::write_u64(out, d);
    for (double v : t.values()) binio::write_f64(out, v);
  }
  if (!out) throw FormatError("failed writing " + path.string());
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError(path.string() + " is not a checkpoint archive");
  }
  Archive a;
  const auto ntexts = binio::read_u32(in);
  for (std::uint32_t i = 0; i < ntexts; ++i) {
    auto name = binio::read_string(in);
    a.texts[name] = binio::read_string(in);
  }
  const auto ntensors = binio::read_u64(in);
  for (std::uint64_t i = 0; i < ntensors; ++i) {
    auto name = binio::read_string(in);
    const auto rank = binio::read_u32(in);
    if (rank == 0 || rank > 8) throw FormatError("tensor '" + name + "' has invalid rank");
    std::vector<std::size_t> shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = binio::read_u64(in);
      count *= d;
    }
    if (count > (1ull << 31)) throw FormatError("tensor '" + name + "' is implausibly large");
    std::vector<double> data(count);
    for (auto& v : data) v = binio::read_f64(in);
    a.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return a;
}

}  // namespace hceds
