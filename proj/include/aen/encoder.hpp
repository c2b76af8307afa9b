// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "aen/error.hpp"
#include "aen/linalg.hpp"

namespace aen {

struct EncoderLayer {
  LayerNorm attn_norm;
  Affine query, key, value, output;
  LayerNorm ff_norm;
  Affine ff_in, ff_out;

  bool operator==(const EncoderLayer&) const = default;
};

/// Pre-norm Transformer encoder stack with a final layer norm. There is no
/// positional encoding, so the stack is permutation-equivariant over tokens.
struct EncoderWeights {
  std::size_t d_model = 0;
  std::size_t num_heads = 1;
  std::vector<EncoderLayer> layers;
  LayerNorm final_norm;

  std::size_t num_layers() const noexcept { return layers.size(); }

  void check() const {
    if (d_model == 0 || num_heads == 0 || d_model % num_heads != 0) {
      throw Error(ErrorKind::configuration, "d_model must be a positive multiple of num_heads");
    }
    auto square = [&](const Affine& a, const char* what) {
      if (a.in_dim() != d_model || a.out_dim() != d_model || a.bias.size() != d_model) {
        throw Error(ErrorKind::configuration, std::string("encoder ") + what + " must be d_model x d_model");
      }
    };
    auto norm = [&](const LayerNorm& n) {
      if (n.scale.size() != d_model || n.shift.size() != d_model) {
        throw Error(ErrorKind::configuration, "encoder layer norm must have length d_model");
      }
    };
    for (const auto& l : layers) {
      square(l.query, "query");
      square(l.key, "key");
      square(l.value, "value");
      square(l.output, "output");
      norm(l.attn_norm);
      norm(l.ff_norm);
      if (l.ff_in.in_dim() != d_model || l.ff_out.out_dim() != d_model || l.ff_in.out_dim() != l.ff_out.in_dim() ||
          l.ff_in.bias.size() != l.ff_in.out_dim() || l.ff_out.bias.size() != d_model) {
        throw Error(ErrorKind::configuration, "encoder feed-forward dimensions do not chain");
      }
    }
    norm(final_norm);
  }

  bool operator==(const EncoderWeights&) const = default;
};

/// Debug hook: attention matrices indexed [layer][head], each [tokens, tokens]
/// with row i holding the weights token i puts on every key.
struct AttentionTrace {
  std::vector<std::vector<Matrix>> weights;
};

inline std::vector<Vec> attention_encoder(std::vector<Vec> tokens, const EncoderWeights& w,
                                          AttentionTrace* trace = nullptr) {
  if (tokens.empty()) throw Error(ErrorKind::invalid_input, "attention_encoder needs at least one token");
  for (const auto& t : tokens) {
    if (t.size() != w.d_model) throw Error(ErrorKind::configuration, "token length does not match d_model");
  }
  const std::size_t n = tokens.size();
  const std::size_t head_dim = w.d_model / w.num_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  if (trace) trace->weights.assign(w.layers.size(), {});

  for (std::size_t li = 0; li < w.layers.size(); ++li) {
    const auto& layer = w.layers[li];
    std::vector<Vec> q(n), k(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec h = layer.attn_norm(tokens[i]);
      q[i] = layer.query(h);
      k[i] = layer.key(h);
      v[i] = layer.value(h);
    }

    std::vector<Vec> mixed(n, Vec(w.d_model, 0.0));
    for (std::size_t head = 0; head < w.num_heads; ++head) {
      const std::size_t off = head * head_dim;
      Matrix attn(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        Vec scores(n);
        for (std::size_t j = 0; j < n; ++j) {
          double dot = 0.0;
          for (std::size_t c = 0; c < head_dim; ++c) dot += q[i][off + c] * k[j][off + c];
          scores[j] = dot * scale;
        }
        const Vec a = softmax(scores);
        for (std::size_t j = 0; j < n; ++j) {
          attn(i, j) = a[j];
          for (std::size_t c = 0; c < head_dim; ++c) mixed[i][off + c] += a[j] * v[j][off + c];
        }
      }
      if (trace) trace->weights[li].push_back(std::move(attn));
    }

    for (std::size_t i = 0; i < n; ++i) {
      add_inplace(tokens[i], layer.output(mixed[i]));
      Vec hidden = layer.ff_in(layer.ff_norm(tokens[i]));
      relu_inplace(hidden);
      add_inplace(tokens[i], layer.ff_out(hidden));
    }
  }

  for (auto& t : tokens) t = w.final_norm(t);
  return tokens;
}

}  // namespace aen
