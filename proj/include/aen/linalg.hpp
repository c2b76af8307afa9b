// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aen/error.hpp"
#include "aen/tensor.hpp"

namespace aen {

using Vec = std::vector<double>;

/// Row-major dense matrix of shape [rows, cols].
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  Tensor to_tensor() const { return Tensor({rows, cols}, data); }

  static Matrix from_tensor(const Tensor& t, const std::string& name) {
    if (t.rank() != 2) throw Error(ErrorKind::configuration, name + ": expected a rank-2 tensor");
    Matrix m(t.dims()[0], t.dims()[1]);
    std::copy(t.data().begin(), t.data().end(), m.data.begin());
    return m;
  }

  bool operator==(const Matrix&) const = default;
};

/// y = W x + b, with W of shape [out, in].
struct Affine {
  Matrix weight;
  Vec bias;

  std::size_t in_dim() const noexcept { return weight.cols; }
  std::size_t out_dim() const noexcept { return weight.rows; }

  Vec operator()(std::span<const double> x) const {
    if (x.size() != weight.cols) {
      throw Error(ErrorKind::configuration, "affine input has length " + std::to_string(x.size()) + ", expected " +
                                                std::to_string(weight.cols));
    }
    Vec y(bias);
    for (std::size_t r = 0; r < weight.rows; ++r) {
      double acc = 0.0;
      const double* row = &weight.data[r * weight.cols];
      for (std::size_t c = 0; c < weight.cols; ++c) acc += row[c] * x[c];
      y[r] += acc;
    }
    return y;
  }

  bool operator==(const Affine&) const = default;
};

inline void relu_inplace(Vec& v) {
  for (double& x : v) x = std::max(0.0, x);
}

/// Numerically stable softmax.
inline Vec softmax(std::span<const double> logits) {
  Vec out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double m = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& x : out) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : out) x /= sum;
  return out;
}

struct LayerNorm {
  Vec scale;
  Vec shift;
  double eps = 1e-5;

  Vec operator()(std::span<const double> x) const {
    const auto n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) * inv * scale[i] + shift[i];
    return y;
  }

  bool operator==(const LayerNorm&) const = default;
};

inline void add_inplace(Vec& a, std::span<const double> b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace aen
