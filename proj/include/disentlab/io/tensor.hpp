#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace disentlab::io {

/// Dense row-major f32 tensor.
struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> values;

  Tensor() = default;
  Tensor(std::vector<std::uint64_t> d, std::vector<float> v);
  explicit Tensor(std::vector<std::uint64_t> d);

  std::uint64_t element_count() const;
  // First dimension; 0 for rank-0 tensors.
  std::uint64_t rows() const { return dims.empty() ? 0 : dims.front(); }
  // Elements per row (product of the trailing dims).
  std::uint64_t row_size() const;
  std::span<const float> row(std::uint64_t r) const;
  std::span<float> row(std::uint64_t r);

  bool operator==(const Tensor&) const = default;
};

// DTNS layout: "DTNS" | u8 version=1 | u8 dtype=1 (f32) | 2 zero bytes |
// u32 rank | rank x u64 dims | row-major f32 payload. All little-endian.
inline constexpr std::uint8_t kDtnsVersion = 1;
inline constexpr std::uint8_t kDtnsFloat32 = 1;

std::vector<std::uint8_t> encode_dtns(const Tensor& t);
Tensor decode_dtns(std::span<const std::uint8_t> bytes);

void write_dtns(const std::filesystem::path& path, const Tensor& t);
Tensor read_dtns(const std::filesystem::path& path);

}  // namespace disentlab::io
