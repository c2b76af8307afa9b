// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "aen/error.hpp"

namespace aen {

enum class DType : std::uint32_t { f32 = 1, f64 = 2 };

inline std::size_t dtype_size(DType t) { return t == DType::f32 ? 4 : 8; }

/// Dense row-major tensor. Values are held as doubles in memory; an f32
/// tensor only ever holds values exactly representable as float, so writing
/// and reading it back is bit-exact.
class Tensor {
 public:
  Tensor() = default;

  Tensor(std::vector<std::size_t> dims, DType dtype = DType::f64)
      : dims_(std::move(dims)), dtype_(dtype), data_(element_count(dims_), 0.0) {}

  Tensor(std::vector<std::size_t> dims, std::vector<double> data, DType dtype = DType::f64)
      : dims_(std::move(dims)), dtype_(dtype), data_(std::move(data)) {
    if (data_.size() != element_count(dims_)) {
      throw Error(ErrorKind::invalid_input, "tensor data length does not match dims");
    }
    if (dtype_ == DType::f32) {
      for (double& v : data_) v = static_cast<double>(static_cast<float>(v));
    }
  }

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  DType dtype() const noexcept { return dtype_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rank() const noexcept { return dims_.size(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  double at(std::size_t i, std::size_t j) const { return data_[i * dims_.at(1) + j]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * dims_.at(1) + j]; }

  bool operator==(const Tensor&) const = default;

  static std::size_t element_count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
  }

 private:
  std::vector<std::size_t> dims_;
  DType dtype_ = DType::f64;
  std::vector<double> data_;
};

namespace detail {

inline constexpr std::array<char, 4> kTensorMagic{'A', 'E', 'N', 'T'};
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::uint32_t kMaxRank = 16;

template <typename U>
void put_le(std::vector<unsigned char>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<unsigned char>(value >> (8 * i)));
}

template <typename U>
U get_le(std::span<const unsigned char> in, std::size_t& pos) {
  if (in.size() - pos < sizeof(U)) throw FormatError(FormatCode::truncated, "header");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(in[pos + i]) << (8 * i);
  pos += sizeof(U);
  return value;
}

}  // namespace detail

/// Serializes to the AENT layout: magic, u32 version, u32 ndim, u64 dims,
/// u32 dtype code, raw little-endian row-major payload.
inline std::vector<unsigned char> encode_tensor(const Tensor& t) {
  if (t.dims().empty()) throw FormatError(FormatCode::empty_dims, "");
  std::vector<unsigned char> out;
  out.reserve(16 + 8 * t.rank() + dtype_size(t.dtype()) * t.size());
  out.insert(out.end(), detail::kTensorMagic.begin(), detail::kTensorMagic.end());
  detail::put_le<std::uint32_t>(out, detail::kTensorVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.dims()) detail::put_le<std::uint64_t>(out, d);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dtype()));
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw FormatError(FormatCode::non_finite, "");
    if (t.dtype() == DType::f32) {
      detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  return out;
}

inline Tensor decode_tensor(std::span<const unsigned char> in) {
  if (in.size() < 4 || !std::equal(detail::kTensorMagic.begin(), detail::kTensorMagic.end(), in.begin())) {
    throw FormatError(in.size() < 4 ? FormatCode::truncated : FormatCode::bad_magic, "");
  }
  std::size_t pos = 4;
  const auto version = detail::get_le<std::uint32_t>(in, pos);
  if (version != detail::kTensorVersion) throw FormatError(FormatCode::bad_version, std::to_string(version));
  const auto ndim = detail::get_le<std::uint32_t>(in, pos);
  if (ndim == 0) throw FormatError(FormatCode::empty_dims, "");
  if (ndim > detail::kMaxRank) throw FormatError(FormatCode::dim_overflow, "rank " + std::to_string(ndim));

  std::vector<std::size_t> dims(ndim);
  std::uint64_t count = 1;
  for (auto& d : dims) {
    const auto raw = detail::get_le<std::uint64_t>(in, pos);
    if (raw == 0) throw FormatError(FormatCode::zero_dim, "");
    if (count > std::numeric_limits<std::uint64_t>::max() / raw) throw FormatError(FormatCode::dim_overflow, "");
    count *= raw;
    d = static_cast<std::size_t>(raw);
  }
  const auto code = detail::get_le<std::uint32_t>(in, pos);
  if (code != 1 && code != 2) throw FormatError(FormatCode::bad_dtype, std::to_string(code));
  const auto dtype = static_cast<DType>(code);

  const std::uint64_t width = dtype_size(dtype);
  if (count > std::numeric_limits<std::uint64_t>::max() / width) throw FormatError(FormatCode::dim_overflow, "");
  const std::uint64_t remaining = in.size() - pos;
  if (remaining < count * width) throw FormatError(FormatCode::truncated, "payload");
  if (remaining > count * width) throw FormatError(FormatCode::trailing_bytes, "");

  std::vector<double> data(static_cast<std::size_t>(count));
  for (auto& v : data) {
    v = dtype == DType::f32 ? static_cast<double>(std::bit_cast<float>(detail::get_le<std::uint32_t>(in, pos)))
                            : std::bit_cast<double>(detail::get_le<std::uint64_t>(in, pos));
    if (!std::isfinite(v)) throw FormatError(FormatCode::non_finite, "");
  }
  return Tensor(std::move(dims), std::move(data), dtype);
}

/// Writes bytes to a sibling temp file, then renames over the destination.
inline void write_file_atomic(const std::filesystem::path& dest, std::span<const unsigned char> bytes) {
  namespace fs = std::filesystem;
  if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
  fs::path tmp = dest;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorKind::io, "cannot open " + tmp.string() + " for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error(ErrorKind::io, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, dest, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorKind::io, "cannot rename into " + dest.string() + ": " + ec.message());
  }
}

inline void write_file_atomic(const std::filesystem::path& dest, const std::string& text) {
  write_file_atomic(dest, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& src) {
  std::ifstream is(src, std::ios::binary);
  if (!is) throw Error(ErrorKind::io, "cannot open " + src.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline void write_tensor(const Tensor& t, const std::filesystem::path& dest) {
  write_file_atomic(dest, encode_tensor(t));
}

inline Tensor read_tensor(const std::filesystem::path& src) {
  return decode_tensor(read_file_bytes(src));
}

}  // namespace aen
