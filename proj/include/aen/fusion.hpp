// SPDX-License-Identifier: Apache-2.0
#pragma once

// Agent-environment representation: one fused feature per snippet, built
// from a backbone feature map, the scene-level environment pathway, and an
// attention-pooled set of agent patches cut out with RoIAlign.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "aen/encoder.hpp"
#include "aen/error.hpp"
#include "aen/linalg.hpp"
#include "aen/manifest.hpp"
#include "aen/parallel.hpp"
#include "aen/rng.hpp"
#include "aen/tensor.hpp"
#include "aen/timeline.hpp"

namespace aen {

/// Backbone output S_N for one snippet, shape [C, H, W].
class FeatureMap {
 public:
  explicit FeatureMap(Tensor values) : values_(std::move(values)) {
    if (values_.rank() != 3) throw Error(ErrorKind::invalid_input, "feature map must have dims [C,H,W]");
    for (double v : values_.data()) {
      if (!std::isfinite(v)) throw Error(ErrorKind::invalid_input, "feature map has non-finite values");
    }
  }

  std::size_t channels() const noexcept { return values_.dims()[0]; }
  std::size_t height() const noexcept { return values_.dims()[1]; }
  std::size_t width() const noexcept { return values_.dims()[2]; }

  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return values_[(c * height() + y) * width() + x];
  }

  const Tensor& tensor() const noexcept { return values_; }

 private:
  Tensor values_;
};

enum class EnvOutput { softmax, logits };

struct FusionConfig {
  std::size_t channels = 16;
  std::size_t d_model = 64;
  std::size_t num_heads = 4;
  std::size_t num_layers = 1;
  std::size_t ff_dim = 128;
  std::vector<std::size_t> env_hidden{64};
  std::array<std::size_t, 2> roi_grid{4, 4};
  std::array<std::size_t, 2> roi_samples{2, 2};
  EnvOutput env_output = EnvOutput::softmax;

  /// Layer widths of the environment pathway: C, hidden..., d_model.
  std::vector<std::size_t> env_dims() const {
    std::vector<std::size_t> dims{channels};
    dims.insert(dims.end(), env_hidden.begin(), env_hidden.end());
    dims.push_back(d_model);
    return dims;
  }

  std::size_t patch_dim() const noexcept { return channels * roi_grid[0] * roi_grid[1]; }

  void check() const {
    if (channels == 0 || d_model == 0 || num_heads == 0 || ff_dim == 0 || roi_grid[0] == 0 || roi_grid[1] == 0 ||
        roi_samples[0] == 0 || roi_samples[1] == 0) {
      throw Error(ErrorKind::configuration, "fusion sizes must be positive");
    }
    if (d_model % num_heads != 0) throw Error(ErrorKind::configuration, "d_model must be divisible by num_heads");
    for (auto h : env_hidden) {
      if (h == 0) throw Error(ErrorKind::configuration, "environment hidden width must be positive");
    }
  }

  bool operator==(const FusionConfig&) const = default;
};

struct FusionWeights {
  FusionConfig config;
  std::vector<Affine> env_affine;
  Affine patch_proj;
  EncoderWeights agent_encoder;
  EncoderWeights fuse_encoder;

  std::size_t d_model() const noexcept { return config.d_model; }

  bool operator==(const FusionWeights&) const = default;
};

/// The three per-snippet vectors: environment, pooled agents (absent when no
/// agent was detected), and the fused feature.
struct SnippetFeature {
  Vec env;
  std::optional<Vec> agents;
  Vec fused;
};

namespace detail {

inline EncoderWeights encoder_skeleton(const FusionConfig& c) {
  EncoderWeights e;
  e.d_model = c.d_model;
  e.num_heads = c.num_heads;
  auto affine = [](std::size_t out, std::size_t in) { return Affine{Matrix(out, in), Vec(out, 0.0)}; };
  auto norm = [&] { return LayerNorm{Vec(c.d_model, 1.0), Vec(c.d_model, 0.0)}; };
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    e.layers.push_back({norm(), affine(c.d_model, c.d_model), affine(c.d_model, c.d_model),
                        affine(c.d_model, c.d_model), affine(c.d_model, c.d_model), norm(),
                        affine(c.ff_dim, c.d_model), affine(c.d_model, c.ff_dim)});
  }
  e.final_norm = norm();
  return e;
}

/// Zero-valued weights with every shape fixed by the config.
inline FusionWeights fusion_skeleton(const FusionConfig& c) {
  c.check();
  FusionWeights w;
  w.config = c;
  const auto dims = c.env_dims();
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    w.env_affine.push_back({Matrix(dims[i + 1], dims[i]), Vec(dims[i + 1], 0.0)});
  }
  w.patch_proj = {Matrix(c.d_model, c.patch_dim()), Vec(c.d_model, 0.0)};
  w.agent_encoder = encoder_skeleton(c);
  w.fuse_encoder = encoder_skeleton(c);
  return w;
}

enum class ParamRole { weight, bias, norm_scale, norm_shift };

using ParamVisitor = std::function<void(const std::string& name, std::vector<double>& values,
                                        std::vector<std::size_t> dims, ParamRole role)>;

inline void visit_encoder(EncoderWeights& e, const std::string& prefix, const ParamVisitor& fn) {
  auto affine = [&](Affine& a, const std::string& name) {
    fn(name + ".weight", a.weight.data, {a.weight.rows, a.weight.cols}, ParamRole::weight);
    fn(name + ".bias", a.bias, {a.bias.size()}, ParamRole::bias);
  };
  auto norm = [&](LayerNorm& n, const std::string& name) {
    fn(name + ".scale", n.scale, {n.scale.size()}, ParamRole::norm_scale);
    fn(name + ".shift", n.shift, {n.shift.size()}, ParamRole::norm_shift);
  };
  for (std::size_t l = 0; l < e.layers.size(); ++l) {
    auto& layer = e.layers[l];
    const std::string p = prefix + ".layer" + std::to_string(l);
    norm(layer.attn_norm, p + ".attn_norm");
    affine(layer.query, p + ".query");
    affine(layer.key, p + ".key");
    affine(layer.value, p + ".value");
    affine(layer.output, p + ".output");
    norm(layer.ff_norm, p + ".ff_norm");
    affine(layer.ff_in, p + ".ff_in");
    affine(layer.ff_out, p + ".ff_out");
  }
  norm(e.final_norm, prefix + ".final_norm");
}

/// Walks every learnable parameter in a fixed order under a stable name.
inline void visit_params(FusionWeights& w, const ParamVisitor& fn) {
  for (std::size_t i = 0; i < w.env_affine.size(); ++i) {
    auto& a = w.env_affine[i];
    fn("env." + std::to_string(i) + ".weight", a.weight.data, {a.weight.rows, a.weight.cols}, ParamRole::weight);
    fn("env." + std::to_string(i) + ".bias", a.bias, {a.bias.size()}, ParamRole::bias);
  }
  fn("patch_proj.weight", w.patch_proj.weight.data, {w.patch_proj.weight.rows, w.patch_proj.weight.cols},
     ParamRole::weight);
  fn("patch_proj.bias", w.patch_proj.bias, {w.patch_proj.bias.size()}, ParamRole::bias);
  visit_encoder(w.agent_encoder, "agent_encoder", fn);
  visit_encoder(w.fuse_encoder, "fuse_encoder", fn);
}

}  // namespace detail

/// Seeded weights: affine weights and biases uniform in
/// [-1/sqrt(d_model), 1/sqrt(d_model)], layer norms at identity.
inline FusionWeights init_fusion_weights(const FusionConfig& config, std::uint64_t seed) {
  FusionWeights w = detail::fusion_skeleton(config);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.d_model));
  detail::visit_params(w, [&](const std::string& name, std::vector<double>& values, auto, detail::ParamRole role) {
    if (role == detail::ParamRole::norm_scale || role == detail::ParamRole::norm_shift) return;
    const CounterStream stream(derive_key(seed, fnv1a64(name)));
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = stream.uniform(i, -bound, bound);
  });
  return w;
}

inline void check_weights(const FusionWeights& w) {
  const auto& c = w.config;
  c.check();
  const auto dims = c.env_dims();
  if (w.env_affine.size() + 1 != dims.size()) throw Error(ErrorKind::configuration, "environment layer count");
  for (std::size_t i = 0; i < w.env_affine.size(); ++i) {
    const auto& a = w.env_affine[i];
    if (a.in_dim() != dims[i] || a.out_dim() != dims[i + 1] || a.bias.size() != dims[i + 1]) {
      throw Error(ErrorKind::configuration, "environment layer " + std::to_string(i) + " dimensions do not chain");
    }
  }
  if (w.patch_proj.in_dim() != c.patch_dim() || w.patch_proj.out_dim() != c.d_model) {
    throw Error(ErrorKind::configuration, "patch projection must map C*gh*gw to d_model");
  }
  for (const auto* e : {&w.agent_encoder, &w.fuse_encoder}) {
    if (e->d_model != c.d_model || e->num_heads != c.num_heads) {
      throw Error(ErrorKind::configuration, "encoder shape disagrees with fusion config");
    }
    e->check();
  }
}

/// Stand-in for a backbone: a pseudo-random map in [-1, 1) that is a pure
/// function of (seed, video_id, snippet_index, dims).
inline FeatureMap stub_backbone(const std::string& video_id, std::int64_t snippet_index,
                                const std::array<std::size_t, 3>& dims, std::uint64_t seed) {
  if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0) {
    throw Error(ErrorKind::invalid_input, "backbone dims must be positive");
  }
  const CounterStream stream(derive_key(seed, fnv1a64(video_id), static_cast<std::uint64_t>(snippet_index)));
  std::vector<double> values(dims[0] * dims[1] * dims[2]);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = stream.uniform(i, -1.0, 1.0);
  return FeatureMap(Tensor({dims[0], dims[1], dims[2]}, std::move(values)));
}

/// Global average pool, fully connected layers with ReLU between them, then
/// softmax (or the raw logits when configured).
inline Vec environment_pathway(const FeatureMap& map, const FusionWeights& w) {
  if (w.env_affine.empty() || map.channels() != w.env_affine.front().in_dim()) {
    throw Error(ErrorKind::configuration, "feature map has " + std::to_string(map.channels()) +
                                              " channels, environment pathway expects " +
                                              std::to_string(w.env_affine.empty() ? 0 : w.env_affine.front().in_dim()));
  }
  const auto area = static_cast<double>(map.height() * map.width());
  Vec x(map.channels(), 0.0);
  for (std::size_t c = 0; c < map.channels(); ++c) {
    double sum = 0.0;
    for (std::size_t y = 0; y < map.height(); ++y) {
      for (std::size_t xx = 0; xx < map.width(); ++xx) sum += map.at(c, y, xx);
    }
    x[c] = sum / area;
  }
  for (std::size_t i = 0; i < w.env_affine.size(); ++i) {
    x = w.env_affine[i](x);
    if (i + 1 < w.env_affine.size()) relu_inplace(x);
  }
  return w.config.env_output == EnvOutput::softmax ? softmax(x) : x;
}

/// Bilinear sample of channel c at continuous feature coordinates (x, y),
/// where pixel (i, j) is centered at (i + 0.5, j + 0.5). Out-of-range samples
/// are clamped to the border.
inline double bilinear_sample(const FeatureMap& map, std::size_t c, double x, double y) {
  const double u = std::clamp(x - 0.5, 0.0, static_cast<double>(map.width() - 1));
  const double v = std::clamp(y - 0.5, 0.0, static_cast<double>(map.height() - 1));
  const auto x0 = static_cast<std::size_t>(u);
  const auto y0 = static_cast<std::size_t>(v);
  const std::size_t x1 = std::min(x0 + 1, map.width() - 1);
  const std::size_t y1 = std::min(y0 + 1, map.height() - 1);
  const double ax = u - static_cast<double>(x0);
  const double ay = v - static_cast<double>(y0);
  const double top = (1.0 - ax) * map.at(c, y0, x0) + ax * map.at(c, y0, x1);
  const double bottom = (1.0 - ax) * map.at(c, y1, x0) + ax * map.at(c, y1, x1);
  return (1.0 - ay) * top + ay * bottom;
}

/// RoIAlign without coordinate quantization: the normalized box is scaled to
/// the map, split into grid bins, and each bin averages samples_h x samples_w
/// bilinear samples at regular offsets.
inline Tensor roi_align(const FeatureMap& map, const Box& box, std::array<std::size_t, 2> grid,
                        std::array<std::size_t, 2> samples) {
  const double x1 = box[0] * static_cast<double>(map.width());
  const double y1 = box[1] * static_cast<double>(map.height());
  const double bin_w = (box[2] - box[0]) * static_cast<double>(map.width()) / static_cast<double>(grid[1]);
  const double bin_h = (box[3] - box[1]) * static_cast<double>(map.height()) / static_cast<double>(grid[0]);
  const auto count = static_cast<double>(samples[0] * samples[1]);

  Tensor out({map.channels(), grid[0], grid[1]});
  for (std::size_t c = 0; c < map.channels(); ++c) {
    for (std::size_t gy = 0; gy < grid[0]; ++gy) {
      for (std::size_t gx = 0; gx < grid[1]; ++gx) {
        double sum = 0.0;
        for (std::size_t sy = 0; sy < samples[0]; ++sy) {
          const double y = y1 + static_cast<double>(gy) * bin_h +
                           (static_cast<double>(sy) + 0.5) * bin_h / static_cast<double>(samples[0]);
          for (std::size_t sx = 0; sx < samples[1]; ++sx) {
            const double x = x1 + static_cast<double>(gx) * bin_w +
                             (static_cast<double>(sx) + 0.5) * bin_w / static_cast<double>(samples[1]);
            sum += bilinear_sample(map, c, x, y);
          }
        }
        out[(c * grid[0] + gy) * grid[1] + gx] = sum / count;
      }
    }
  }
  return out;
}

inline Vec mean_pool(const std::vector<Vec>& tokens) {
  Vec out(tokens.front().size(), 0.0);
  for (const auto& t : tokens) add_inplace(out, t);
  for (double& v : out) v /= static_cast<double>(tokens.size());
  return out;
}

/// Projects each agent patch to a token, runs the agent encoder, and
/// mean-pools. Returns nullopt when there are no agents.
inline std::optional<Vec> agent_fusion(const std::vector<Tensor>& patches, const FusionWeights& w) {
  if (patches.empty()) return std::nullopt;
  for (const auto& p : patches) {
    if (p.dims() != patches.front().dims()) throw Error(ErrorKind::invalid_input, "agent patches differ in dims");
  }
  std::vector<Vec> tokens;
  tokens.reserve(patches.size());
  for (const auto& p : patches) tokens.push_back(w.patch_proj(p.data()));
  return mean_pool(attention_encoder(std::move(tokens), w.agent_encoder));
}

/// Re-weights environment and agent features through the fusion encoder.
inline Vec ae_fuse(const Vec& env, const std::optional<Vec>& agents, const FusionWeights& w) {
  if (env.size() != w.d_model() || (agents && agents->size() != w.d_model())) {
    throw Error(ErrorKind::configuration, "fusion inputs must have length d_model");
  }
  std::vector<Vec> tokens{env};
  if (agents) tokens.push_back(*agents);
  return mean_pool(attention_encoder(std::move(tokens), w.fuse_encoder));
}

inline SnippetFeature featurize_snippet(const FeatureMap& map, std::vector<Box> boxes, const FusionWeights& w) {
  // Canonical box order makes the result bit-identical under any listing order.
  std::sort(boxes.begin(), boxes.end());
  SnippetFeature f;
  f.env = environment_pathway(map, w);
  std::vector<Tensor> patches;
  patches.reserve(boxes.size());
  for (const auto& b : boxes) patches.push_back(roi_align(map, b, w.config.roi_grid, w.config.roi_samples));
  f.agents = agent_fusion(patches, w);
  f.fused = ae_fuse(f.env, f.agents, w);
  return f;
}

struct StubSource {
  std::uint64_t seed = 0;
  std::array<std::size_t, 3> dims{16, 8, 8};
};

/// Feature maps are tensor files named in the manifest, resolved against
/// base_dir when relative.
struct FileSource {
  std::filesystem::path base_dir;
};

using FeatureSource = std::variant<StubSource, FileSource>;

inline FeatureMap load_snippet_map(const Manifest& m, std::int64_t index, const FeatureSource& source) {
  if (const auto* stub = std::get_if<StubSource>(&source)) {
    return stub_backbone(m.video.video_id, index, stub->dims, stub->seed);
  }
  const auto& files = std::get<FileSource>(source);
  const SnippetEntry* entry = m.find_snippet(index);
  const std::string where = m.video.video_id + " snippet " + std::to_string(index);
  if (!entry || !entry->feature_file) throw Error(ErrorKind::data, where + ": no feature file listed");
  std::filesystem::path path(*entry->feature_file);
  if (path.is_relative()) path = files.base_dir / path;
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::data, where + ": feature file '" + path.string() + "' not found");
  }
  try {
    return FeatureMap(read_tensor(path));
  } catch (const Error& e) {
    throw Error(ErrorKind::data, where + ": " + e.what());
  }
}

/// F = {f_i}: rows are fused snippet features in snippet order.
inline Tensor featurize_video(const Manifest& m, const FusionWeights& w, const FeatureSource& source,
                              std::size_t workers = 1) {
  check_weights(w);
  const SnippetGrid grid = build_grid(m.video);
  const std::size_t count = grid.size();
  Tensor out({count, w.d_model()});
  parallel_for(count, workers, [&](std::size_t i) {
    const auto index = static_cast<std::int64_t>(i);
    const FeatureMap map = load_snippet_map(m, index, source);
    const SnippetEntry* entry = m.find_snippet(index);
    const SnippetFeature f = featurize_snippet(map, entry ? entry->agent_boxes : std::vector<Box>{}, w);
    std::copy(f.fused.begin(), f.fused.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * w.d_model()));
  });
  return out;
}

// Weight bundles: a directory of tensor files plus index.json.

inline nlohmann::ordered_json fusion_config_to_json(const FusionConfig& c) {
  return {{"channels", c.channels},
          {"d_model", c.d_model},
          {"num_heads", c.num_heads},
          {"num_layers", c.num_layers},
          {"ff_dim", c.ff_dim},
          {"env_hidden", c.env_hidden},
          {"roi_grid", c.roi_grid},
          {"roi_samples", c.roi_samples},
          {"env_output", c.env_output == EnvOutput::softmax ? "softmax" : "logits"}};
}

inline FusionConfig fusion_config_from_json(const nlohmann::json& j, FusionConfig c = {}) {
  try {
    if (j.contains("channels")) c.channels = j.at("channels").get<std::size_t>();
    if (j.contains("d_model")) c.d_model = j.at("d_model").get<std::size_t>();
    if (j.contains("num_heads")) c.num_heads = j.at("num_heads").get<std::size_t>();
    if (j.contains("num_layers")) c.num_layers = j.at("num_layers").get<std::size_t>();
    if (j.contains("ff_dim")) c.ff_dim = j.at("ff_dim").get<std::size_t>();
    if (j.contains("env_hidden")) c.env_hidden = j.at("env_hidden").get<std::vector<std::size_t>>();
    if (j.contains("roi_grid")) c.roi_grid = j.at("roi_grid").get<std::array<std::size_t, 2>>();
    if (j.contains("roi_samples")) c.roi_samples = j.at("roi_samples").get<std::array<std::size_t, 2>>();
    if (j.contains("env_output")) {
      const auto s = j.at("env_output").get<std::string>();
      if (s != "softmax" && s != "logits") throw Error(ErrorKind::configuration, "env_output must be softmax|logits");
      c.env_output = s == "softmax" ? EnvOutput::softmax : EnvOutput::logits;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::configuration, std::string("fusion config: ") + e.what());
  }
  return c;
}

inline void save_weight_bundle(const FusionWeights& weights, const std::filesystem::path& dir) {
  check_weights(weights);
  FusionWeights w = weights;
  nlohmann::ordered_json index = fusion_config_to_json(w.config);
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  detail::visit_params(w, [&](const std::string& name, std::vector<double>& values, std::vector<std::size_t> dims,
                              detail::ParamRole) {
    const std::string file = name + ".aent";
    write_tensor(Tensor(std::move(dims), values), dir / file);
    params[name] = file;
  });
  index["params"] = std::move(params);
  write_file_atomic(dir / "index.json", index.dump(2) + "\n");
}

inline FusionWeights load_weight_bundle(const std::filesystem::path& dir) {
  const auto bytes = read_file_bytes(dir / "index.json");
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::configuration, std::string("weight index: ") + e.what());
  }
  FusionWeights w = detail::fusion_skeleton(fusion_config_from_json(index));
  if (!index.contains("params") || !index["params"].is_object()) {
    throw Error(ErrorKind::configuration, "weight index has no params table");
  }
  const auto& params = index["params"];
  detail::visit_params(w, [&](const std::string& name, std::vector<double>& values, std::vector<std::size_t> dims,
                              detail::ParamRole) {
    if (!params.contains(name)) throw Error(ErrorKind::configuration, "weight index is missing " + name);
    const Tensor t = read_tensor(dir / params[name].get<std::string>());
    if (t.dims() != dims) throw Error(ErrorKind::configuration, name + ": shape disagrees with config");
    std::copy(t.data().begin(), t.data().end(), values.begin());
  });
  check_weights(w);
  return w;
}

}  // namespace aen
