#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dppn/tensor.hpp"

namespace dppn {

/// Malformed tensor file. `offset` is the byte position where decoding failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }
  const std::string& message() const { return message_; }

 private:
  std::string message_;
  std::size_t offset_;
};

// Layout, all little-endian:
//   "DTF1" | rank: u8 (1..8) | rank x u64 extents | product(extents) x f32, row-major
inline constexpr std::size_t kMaxTensorRank = 8;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

/// Rounds every value to the nearest float, i.e. what a save/load round
/// trip returns.
Tensor to_storage_precision(const Tensor& t);

}  // namespace dppn
