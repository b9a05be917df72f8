#include "dppn/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace dppn {

FormatError::FormatError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), message_(what), offset_(offset) {}

namespace {

constexpr char kMagic[4] = {'D', 'T', 'F', '1'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint64_t get_u64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
  return v;
}

float get_f32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.rank() == 0 || t.rank() > kMaxTensorRank) {
    throw FormatError("cannot store rank " + std::to_string(t.rank()) + " tensor", 4);
  }
  for (std::size_t e : t.shape()) {
    if (e == 0) throw FormatError("cannot store tensor with a zero extent " + shape_string(t.shape()), 5);
  }
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(5 + 8 * t.rank() + 4 * t.size());
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t e : t.shape()) put_u64(out, e);
  for (double v : t.values()) put_f32(out, static_cast<float>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("truncated header: missing magic", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("bad magic '" + std::string(bytes.begin(), bytes.begin() + 4) + "', expected 'DTF1'", 0);
  }
  if (bytes.size() < 5) throw FormatError("truncated header: missing rank", 4);
  const std::size_t rank = bytes[4];
  if (rank == 0 || rank > kMaxTensorRank) throw FormatError("invalid rank " + std::to_string(rank), 4);
  std::size_t at = 5;
  if (bytes.size() < at + 8 * rank) throw FormatError("truncated header: missing extents", bytes.size());
  Shape shape(rank);
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i, at += 8) {
    const std::uint64_t e = get_u64(bytes, at);
    if (e == 0) throw FormatError("zero extent in dimension " + std::to_string(i), at);
    if (e > (std::uint64_t{1} << 40) || count > (std::size_t{1} << 40) / e) {
      throw FormatError("extent product too large", at);
    }
    shape[i] = static_cast<std::size_t>(e);
    count *= shape[i];
  }
  const std::size_t expected = at + 4 * count;
  if (bytes.size() < expected) {
    throw FormatError("truncated payload: expected " + std::to_string(4 * count) + " bytes, found " +
                          std::to_string(bytes.size() - at),
                      bytes.size());
  }
  if (bytes.size() > expected) throw FormatError("trailing bytes after payload", expected);
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i, at += 4) values[i] = static_cast<double>(get_f32(bytes, at));
  return Tensor(std::move(shape), std::move(values));
}

void save_tensor(const Tensor& t, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " for reading");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.message(), e.offset());
  }
}

Tensor to_storage_precision(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.values()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

}  // namespace dppn
