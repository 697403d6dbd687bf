#include "disentlab/io/tensor.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "disentlab/common/error.hpp"

namespace disentlab::io {

namespace {

constexpr std::uint8_t kMagic[4] = {'D', 'T', 'N', 'S'};

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename U>
U get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[offset + i]) << (8 * i);
  return value;
}

std::uint64_t product(const std::vector<std::uint64_t>& dims) {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::uint64_t> d, std::vector<float> v) : dims(std::move(d)), values(std::move(v)) {
  if (values.size() != product(dims)) {
    throw ValidationError("tensor value count " + std::to_string(values.size()) + " does not match dims product " +
                          std::to_string(product(dims)));
  }
}

Tensor::Tensor(std::vector<std::uint64_t> d) : dims(std::move(d)), values(product(dims), 0.0f) {}

std::uint64_t Tensor::element_count() const { return product(dims); }

std::uint64_t Tensor::row_size() const {
  if (dims.empty()) return 1;
  std::uint64_t n = 1;
  for (std::size_t i = 1; i < dims.size(); ++i) n *= dims[i];
  return n;
}

std::span<const float> Tensor::row(std::uint64_t r) const {
  const auto n = row_size();
  return {values.data() + r * n, static_cast<std::size_t>(n)};
}

std::span<float> Tensor::row(std::uint64_t r) {
  const auto n = row_size();
  return {values.data() + r * n, static_cast<std::size_t>(n)};
}

std::vector<std::uint8_t> encode_dtns(const Tensor& t) {
  if (t.values.size() != t.element_count()) throw ValidationError("tensor payload does not match its dims");
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    if (!std::isfinite(t.values[i])) {
      throw ValidationError("refusing to write non-finite value at flat index " + std::to_string(i));
    }
  }
  std::vector<std::uint8_t> out;
  out.reserve(12 + 8 * t.dims.size() + 4 * t.values.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kDtnsVersion);
  out.push_back(kDtnsFloat32);
  out.push_back(0);
  out.push_back(0);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) put_le<std::uint64_t>(out, d);
  for (float v : t.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_dtns(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw ValidationError("not a DTNS tensor (bad magic)");
  }
  if (bytes[4] != kDtnsVersion) throw ValidationError("unsupported DTNS version " + std::to_string(bytes[4]));
  if (bytes[5] != kDtnsFloat32) throw ValidationError("unsupported DTNS dtype " + std::to_string(bytes[5]));
  if (bytes[6] != 0 || bytes[7] != 0) throw ValidationError("DTNS reserved bytes must be zero");
  const auto rank = get_le<std::uint32_t>(bytes, 8);
  const std::size_t header = 12 + 8 * static_cast<std::size_t>(rank);
  if (bytes.size() < header) throw ValidationError("DTNS header truncated");
  Tensor t;
  t.dims.resize(rank);
  for (std::uint32_t i = 0; i < rank; ++i) t.dims[i] = get_le<std::uint64_t>(bytes, 12 + 8 * i);
  const auto count = product(t.dims);
  if (bytes.size() - header != 4 * count) {
    throw ValidationError("DTNS payload has " + std::to_string(bytes.size() - header) + " bytes, dims require " +
                          std::to_string(4 * count));
  }
  t.values.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    t.values[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, header + 4 * i));
    if (!std::isfinite(t.values[i])) throw ValidationError("DTNS payload contains a non-finite value");
  }
  return t;
}

void write_dtns(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_dtns(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

Tensor read_dtns(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("missing tensor file: " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw Error("read failed: " + path.string());
  return decode_dtns(bytes);
}

}  // namespace disentlab::io
