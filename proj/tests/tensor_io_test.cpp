// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <limits>

#include "aen/rng.hpp"
#include "aen/tensor.hpp"

namespace aen {
namespace {

namespace fs = std::filesystem;

FormatCode decode_error(const std::vector<unsigned char>& bytes) {
  try {
    decode_tensor(bytes);
  } catch (const FormatError& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a format error";
  return FormatCode::bad_magic;
}

TEST(TensorFormat, ZerosFileSize) {
  const auto bytes = encode_tensor(Tensor({2, 3}));
  EXPECT_EQ(bytes.size(), 80u);
  EXPECT_EQ(std::memcmp(bytes.data(), "AENT", 4), 0);
  // version, ndim, dims[0], dims[1], dtype: all little-endian.
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[12], 2);
  EXPECT_EQ(bytes[20], 3);
  EXPECT_EQ(bytes[28], 2);
}

TEST(TensorFormat, KnownF32Bytes) {
  const auto bytes = encode_tensor(Tensor({1}, {1.0}, DType::f32));
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 8 + 4 + 4);
  EXPECT_EQ(bytes[20], 1);  // dtype f32
  // 1.0f == 0x3F800000
  EXPECT_EQ(bytes[24], 0x00);
  EXPECT_EQ(bytes[25], 0x00);
  EXPECT_EQ(bytes[26], 0x80);
  EXPECT_EQ(bytes[27], 0x3F);
}

TEST(TensorFormat, EmptyDimsRejected) {
  EXPECT_THROW(encode_tensor(Tensor({}, {0.0})), FormatError);
  auto bytes = encode_tensor(Tensor({1}));
  bytes[8] = 0;  // ndim = 0
  EXPECT_EQ(decode_error(bytes), FormatCode::empty_dims);
}

TEST(TensorFormat, RoundtripRandomF32) {
  SplitMix64 rng(3);
  std::vector<double> data(7 * 5 * 3);
  for (auto& v : data) v = rng.uniform(-1e3, 1e3);
  const Tensor t({7, 5, 3}, data, DType::f32);
  const auto bytes = encode_tensor(t);
  const Tensor back = decode_tensor(bytes);
  EXPECT_EQ(back, t);
  EXPECT_EQ(encode_tensor(back), bytes);
}

TEST(TensorFormat, RoundtripProperty) {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> dims(static_cast<std::size_t>(rng.uniform_int(1, 4)));
    for (auto& d : dims) d = static_cast<std::size_t>(rng.uniform_int(1, 6));
    std::vector<double> data(Tensor::element_count(dims));
    for (auto& v : data) v = std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.uniform_int(-60, 60)));
    const Tensor t(dims, data, rng.uniform_int(0, 1) ? DType::f32 : DType::f64);
    EXPECT_EQ(decode_tensor(encode_tensor(t)), t);
  }
}

TEST(TensorFormat, DistinctErrors) {
  const auto good = encode_tensor(Tensor({2, 2}, {1, 2, 3, 4}));

  auto bad = good;
  bad[0] = 'X';
  EXPECT_EQ(decode_error(bad), FormatCode::bad_magic);

  bad = good;
  bad[4] = 9;
  EXPECT_EQ(decode_error(bad), FormatCode::bad_version);

  bad = good;
  bad[28] = 7;
  EXPECT_EQ(decode_error(bad), FormatCode::bad_dtype);

  bad = good;
  bad.pop_back();
  EXPECT_EQ(decode_error(bad), FormatCode::truncated);

  bad = good;
  bad.resize(20);
  EXPECT_EQ(decode_error(bad), FormatCode::truncated);

  bad = good;
  bad.push_back(0);
  EXPECT_EQ(decode_error(bad), FormatCode::trailing_bytes);

  bad = good;
  bad[12] = 0;  // first dim = 0
  EXPECT_EQ(decode_error(bad), FormatCode::zero_dim);

  bad = good;
  for (int i = 12; i < 28; ++i) bad[static_cast<std::size_t>(i)] = 0xFF;
  EXPECT_EQ(decode_error(bad), FormatCode::dim_overflow);

  bad = good;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(&bad[32], &nan, 8);
  EXPECT_EQ(decode_error(bad), FormatCode::non_finite);
}

TEST(TensorFormat, NonFiniteRejectedOnWrite) {
  Tensor t({2});
  t[1] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(encode_tensor(t), FormatError);
}

TEST(TensorFile, AtomicWriteAndRead) {
  const fs::path dir = fs::temp_directory_path() / "aen_tensor_io_test";
  fs::remove_all(dir);
  const Tensor t({3, 2}, {1, 2, 3, 4, 5, 6});
  write_tensor(t, dir / "nested" / "t.aent");
  EXPECT_FALSE(fs::exists(dir / "nested" / "t.aent.tmp"));
  EXPECT_EQ(read_tensor(dir / "nested" / "t.aent"), t);
  EXPECT_THROW(read_tensor(dir / "missing.aent"), Error);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace aen
