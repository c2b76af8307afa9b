// SPDX-License-Identifier: Apache-2.0
#pragma once

// Manifest-driven batch commands behind the `aen` CLI. Every command writes
// one artifact per video with atomic renames and returns a RunSummary; the
// caller decides the process exit code from it.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "aen/error.hpp"
#include "aen/fusion.hpp"
#include "aen/inference.hpp"
#include "aen/manifest.hpp"
#include "aen/metrics.hpp"
#include "aen/parallel.hpp"
#include "aen/rng.hpp"
#include "aen/supervision.hpp"
#include "aen/tensor.hpp"
#include "aen/timeline.hpp"

namespace aen {

namespace fs = std::filesystem;

struct RunConfig {
  fs::path manifest_dir;
  fs::path feature_dir;
  fs::path weights_dir;
  fs::path grids_dir;
  fs::path proposals_dir;
  fs::path output_dir = "out";

  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool keep_going = false;

  FusionConfig fusion;
  std::array<std::size_t, 3> backbone_dims{16, 8, 8};
  std::string feature_source = "stub";

  DurationPolicy duration_policy = DurationPolicy::full;
  LocalMaxRule local_max = LocalMaxRule::per_gt_global;
  LossConfig loss;
  InferenceConfig inference;
  std::string metric_preset = "activitynet";
  std::set<std::string> seen_labels;
  std::set<std::string> unseen_labels;

  std::size_t synth_videos = 5;
  std::size_t synth_max_actions = 3;
  std::size_t synth_min_snippets = 4;
  std::size_t synth_max_snippets = 32;
  bool synth_features = false;
  bool synth_grids = true;
};

namespace detail {

inline const char* policy_name(DurationPolicy p) { return p == DurationPolicy::full ? "full" : "half"; }

inline const char* rule_name(LocalMaxRule r) {
  switch (r) {
    case LocalMaxRule::per_gt_global: return "per_gt_global";
    case LocalMaxRule::duration_axis: return "duration_axis";
    case LocalMaxRule::start_axis: return "start_axis";
  }
  return "per_gt_global";
}

}  // namespace detail

inline nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["paths"] = {{"manifest_dir", c.manifest_dir.generic_string()}, {"feature_dir", c.feature_dir.generic_string()},
                {"weights_dir", c.weights_dir.generic_string()},   {"grids_dir", c.grids_dir.generic_string()},
                {"proposals_dir", c.proposals_dir.generic_string()}, {"output_dir", c.output_dir.generic_string()}};
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["keep_going"] = c.keep_going;
  j["fusion"] = fusion_config_to_json(c.fusion);
  j["backbone_dims"] = c.backbone_dims;
  j["feature_source"] = c.feature_source;
  j["duration_policy"] = detail::policy_name(c.duration_policy);
  j["local_max_rule"] = detail::rule_name(c.local_max);
  j["loss"] = {{"lambda_reg", c.loss.lambda_reg},
               {"lambda_1", c.loss.lambda_1},
               {"lambda_2", c.loss.lambda_2},
               {"clamp_eps", c.loss.clamp_eps}};
  j["peaks"] = {{"peak_ratio", c.inference.peaks.peak_ratio}, {"local_max_only", c.inference.peaks.local_max_only}};
  j["nms"] = {{"sigma", c.inference.nms.sigma},
              {"score_floor", c.inference.nms.score_floor},
              {"top_k", c.inference.nms.top_k}};
  j["metric_preset"] = c.metric_preset;
  j["seen_labels"] = c.seen_labels;
  j["unseen_labels"] = c.unseen_labels;
  j["synth"] = {{"videos", c.synth_videos},
                {"max_actions", c.synth_max_actions},
                {"min_snippets", c.synth_min_snippets},
                {"max_snippets", c.synth_max_snippets},
                {"features", c.synth_features},
                {"grids", c.synth_grids}};
  return j;
}

/// Overlays the fields present in `j` onto `c`. Unknown top-level keys are
/// rejected so typos surface.
inline RunConfig config_from_json(const nlohmann::json& j, RunConfig c = {}) {
  static const std::set<std::string> known{"paths",  "seed",          "workers",     "keep_going",     "fusion",
                                           "backbone_dims", "feature_source", "duration_policy", "local_max_rule",
                                           "loss",   "peaks",         "nms",         "metric_preset",  "seen_labels",
                                           "unseen_labels", "synth"};
  if (!j.is_object()) throw Error(ErrorKind::configuration, "config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw Error(ErrorKind::configuration, "unknown config key '" + key + "'");
  }
  try {
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      auto path = [&](const char* key, fs::path& dst) {
        if (p.contains(key)) dst = p[key].get<std::string>();
      };
      path("manifest_dir", c.manifest_dir);
      path("feature_dir", c.feature_dir);
      path("weights_dir", c.weights_dir);
      path("grids_dir", c.grids_dir);
      path("proposals_dir", c.proposals_dir);
      path("output_dir", c.output_dir);
    }
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("workers")) c.workers = j["workers"].get<std::size_t>();
    if (j.contains("keep_going")) c.keep_going = j["keep_going"].get<bool>();
    if (j.contains("fusion")) c.fusion = fusion_config_from_json(j["fusion"], c.fusion);
    if (j.contains("backbone_dims")) c.backbone_dims = j["backbone_dims"].get<std::array<std::size_t, 3>>();
    if (j.contains("feature_source")) c.feature_source = j["feature_source"].get<std::string>();
    if (j.contains("duration_policy")) {
      const auto s = j["duration_policy"].get<std::string>();
      if (s != "full" && s != "half") throw Error(ErrorKind::configuration, "duration_policy must be full|half");
      c.duration_policy = s == "full" ? DurationPolicy::full : DurationPolicy::half;
    }
    if (j.contains("local_max_rule")) {
      const auto s = j["local_max_rule"].get<std::string>();
      if (s == "per_gt_global") {
        c.local_max = LocalMaxRule::per_gt_global;
      } else if (s == "duration_axis") {
        c.local_max = LocalMaxRule::duration_axis;
      } else if (s == "start_axis") {
        c.local_max = LocalMaxRule::start_axis;
      } else {
        throw Error(ErrorKind::configuration, "unknown local_max_rule '" + s + "'");
      }
    }
    if (j.contains("loss")) {
      const auto& l = j["loss"];
      if (l.contains("lambda_reg")) c.loss.lambda_reg = l["lambda_reg"].get<double>();
      if (l.contains("lambda_1")) c.loss.lambda_1 = l["lambda_1"].get<double>();
      if (l.contains("lambda_2")) c.loss.lambda_2 = l["lambda_2"].get<double>();
      if (l.contains("clamp_eps")) c.loss.clamp_eps = l["clamp_eps"].get<double>();
    }
    if (j.contains("peaks")) {
      const auto& p = j["peaks"];
      if (p.contains("peak_ratio")) c.inference.peaks.peak_ratio = p["peak_ratio"].get<double>();
      if (p.contains("local_max_only")) c.inference.peaks.local_max_only = p["local_max_only"].get<bool>();
    }
    if (j.contains("nms")) {
      const auto& n = j["nms"];
      if (n.contains("sigma")) c.inference.nms.sigma = n["sigma"].get<double>();
      if (n.contains("score_floor")) c.inference.nms.score_floor = n["score_floor"].get<double>();
      if (n.contains("top_k")) c.inference.nms.top_k = n["top_k"].get<std::size_t>();
    }
    if (j.contains("metric_preset")) c.metric_preset = j["metric_preset"].get<std::string>();
    if (j.contains("seen_labels")) c.seen_labels = j["seen_labels"].get<std::set<std::string>>();
    if (j.contains("unseen_labels")) c.unseen_labels = j["unseen_labels"].get<std::set<std::string>>();
    if (j.contains("synth")) {
      const auto& s = j["synth"];
      if (s.contains("videos")) c.synth_videos = s["videos"].get<std::size_t>();
      if (s.contains("max_actions")) c.synth_max_actions = s["max_actions"].get<std::size_t>();
      if (s.contains("min_snippets")) c.synth_min_snippets = s["min_snippets"].get<std::size_t>();
      if (s.contains("max_snippets")) c.synth_max_snippets = s["max_snippets"].get<std::size_t>();
      if (s.contains("features")) c.synth_features = s["features"].get<bool>();
      if (s.contains("grids")) c.synth_grids = s["grids"].get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::configuration, std::string("config: ") + e.what());
  }
  return c;
}

inline void check(const RunConfig& c) {
  if (c.workers < 1) throw Error(ErrorKind::configuration, "workers must be >= 1");
  if (c.feature_source != "stub" && c.feature_source != "files") {
    throw Error(ErrorKind::configuration, "feature_source must be stub|files");
  }
  if (c.synth_min_snippets < 1 || c.synth_min_snippets > c.synth_max_snippets) {
    throw Error(ErrorKind::configuration, "synth snippet range is empty");
  }
  tiou_thresholds(c.metric_preset);
  c.fusion.check();
}

struct VideoFailure {
  std::string video;
  std::string error;
};

struct RunSummary {
  std::string command;
  std::size_t processed = 0;
  std::size_t warnings = 0;
  std::vector<VideoFailure> failures;
  std::optional<std::string> fatal;  // whole-run failure, e.g. an undefined metric
  bool keep_going = false;
  double wall_seconds = 0.0;
  nlohmann::ordered_json config;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  /// 0 success, 1 validation/data error, 2 partial failure under keep-going.
  int exit_code() const {
    if (fatal) return 1;
    if (failures.empty()) return 0;
    return keep_going ? 2 : 1;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["processed"] = processed;
    j["warnings"] = warnings;
    auto fails = nlohmann::ordered_json::array();
    for (const auto& f : failures) fails.push_back({{"video", f.video}, {"error", f.error}});
    j["failures"] = std::move(fails);
    j["fatal"] = fatal ? nlohmann::ordered_json(*fatal) : nlohmann::ordered_json(nullptr);
    j["exit_code"] = exit_code();
    j["wall_seconds"] = wall_seconds;
    j["extra"] = extra;
    j["config"] = config;
    return j;
  }
};

// Output layout under RunConfig::output_dir.
namespace layout {
inline fs::path manifests(const fs::path& root) { return root / "manifests"; }
inline fs::path grids(const fs::path& root) { return root / "grids"; }
inline fs::path maps(const fs::path& root) { return root / "feature_maps"; }
inline fs::path weights(const fs::path& root) { return root / "weights"; }
inline fs::path features(const fs::path& root) { return root / "features"; }
inline fs::path labels(const fs::path& root) { return root / "labels"; }
inline fs::path proposals(const fs::path& root) { return root / "proposals"; }
inline fs::path summary(const fs::path& root, const std::string& cmd) {
  return root / ("run_summary_" + cmd + ".json");
}
}  // namespace layout

inline std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::data, "directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline void write_grids(const ScoreGrids& g, const fs::path& dir) {
  const std::size_t t = g.num_snippets();
  const std::size_t d = g.max_duration();
  write_tensor(Tensor({t}, g.start_probs), dir / "start.aent");
  write_tensor(Tensor({t}, g.end_probs), dir / "end.aent");
  write_tensor(Tensor({d, t}, g.conf_cls.data), dir / "conf_cls.aent");
  write_tensor(Tensor({d, t}, g.conf_reg.data), dir / "conf_reg.aent");
}

inline ScoreGrids read_grids(const fs::path& dir) {
  const Tensor s = read_tensor(dir / "start.aent");
  const Tensor e = read_tensor(dir / "end.aent");
  const Tensor cc = read_tensor(dir / "conf_cls.aent");
  const Tensor cr = read_tensor(dir / "conf_reg.aent");
  if (s.rank() != 1 || e.rank() != 1 || cc.rank() != 2 || cr.rank() != 2) {
    throw Error(ErrorKind::data, "score grid tensors in " + dir.string() + " have the wrong rank");
  }
  ScoreGrids g{s.values(), e.values(), Matrix::from_tensor(cc, "conf_cls"), Matrix::from_tensor(cr, "conf_reg")};
  validate(g);
  return g;
}

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Runs fn(i) per item in parallel; failures land in per-item slots and are
/// merged in item order.
template <typename Fn>
void for_each_video(RunSummary& summary, const std::vector<std::string>& names, std::size_t workers, Fn&& fn) {
  std::vector<std::optional<std::string>> errors(names.size());
  std::vector<std::size_t> warnings(names.size(), 0);
  parallel_for(names.size(), workers, [&](std::size_t i) {
    try {
      warnings[i] = fn(i);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < names.size(); ++i) {
    summary.warnings += warnings[i];
    if (errors[i]) {
      summary.failures.push_back({names[i], *errors[i]});
    } else {
      ++summary.processed;
    }
  }
}

inline std::vector<std::string> stems(const std::vector<fs::path>& files) {
  std::vector<std::string> out;
  for (const auto& f : files) out.push_back(f.stem().string());
  return out;
}

inline RunSummary start_summary(const std::string& cmd, const RunConfig& cfg) {
  RunSummary s;
  s.command = cmd;
  s.keep_going = cfg.keep_going;
  s.config = config_to_json(cfg);
  return s;
}

inline void finish(RunSummary& s, const RunConfig& cfg, const Stopwatch& clock) {
  s.wall_seconds = clock.seconds();
  write_file_atomic(layout::summary(cfg.output_dir, s.command), s.to_json().dump(2) + "\n");
}

inline std::string video_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "video_%04zu", i);
  return buf;
}

struct SynthVideo {
  Manifest manifest;
  LabelSet labels;
};

/// One random video. Annotations are non-overlapping and start and end just
/// inside snippet edges, so boundary labels land on the covering snippets and
/// the best duration cell overlaps each action with IoU >= 0.96.
inline SynthVideo synth_video(const RunConfig& cfg, std::size_t index) {
  SplitMix64 rng(derive_key(cfg.seed, 0x73796E7468ull, index));
  static constexpr std::array<double, 3> kFps{16.0, 25.0, 30.0};
  static constexpr std::array<std::int64_t, 2> kSnippetLen{8, 16};

  const double fps = kFps[static_cast<std::size_t>(rng.uniform_int(0, 2))];
  const std::int64_t delta = kSnippetLen[static_cast<std::size_t>(rng.uniform_int(0, 1))];
  const auto count = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(cfg.synth_min_snippets),
                                                              static_cast<std::int64_t>(cfg.synth_max_snippets)));
  const std::int64_t frames = static_cast<std::int64_t>(count) * delta + rng.uniform_int(0, delta - 1);

  SynthVideo out;
  Manifest& m = out.manifest;
  m.video = VideoMeta::make(video_name(index), frames, fps, delta);
  const SnippetGrid grid = build_grid(m.video);
  const std::size_t max_dur = max_duration(count, cfg.duration_policy);

  const std::size_t wanted =
      cfg.synth_max_actions == 0 ? 0
                                 : static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(cfg.synth_max_actions)));
  std::vector<std::uint8_t> used(count, 0);
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (std::size_t attempt = 0; spans.size() < wanted && attempt < 200; ++attempt) {
    const auto len = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(max_dur)));
    const auto start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(count - len)));
    if (std::any_of(used.begin() + static_cast<std::ptrdiff_t>(start),
                    used.begin() + static_cast<std::ptrdiff_t>(start + len), [](auto u) { return u != 0; })) {
      continue;
    }
    std::fill(used.begin() + static_cast<std::ptrdiff_t>(start), used.begin() + static_cast<std::ptrdiff_t>(start + len),
              1);
    spans.emplace_back(start, len);
  }
  std::sort(spans.begin(), spans.end());
  const double snip = grid.snippet_seconds();
  for (auto [start, len] : spans) {
    const double lead = rng.uniform(0.005, 0.02) * snip;
    const double tail = rng.uniform(0.005, 0.02) * snip;
    m.annotations.push_back({"action_" + std::to_string(rng.uniform_int(0, 9)), grid.edge(start) + lead,
                             grid.edge(start + len) - tail});
  }

  for (std::size_t s = 0; s < count; ++s) {
    SnippetEntry e;
    e.index = static_cast<std::int64_t>(s);
    const auto boxes = rng.uniform_int(0, 3);
    for (std::int64_t b = 0; b < boxes; ++b) {
      const double x1 = rng.uniform(0.0, 0.7);
      const double y1 = rng.uniform(0.0, 0.7);
      e.agent_boxes.push_back({x1, y1, x1 + rng.uniform(0.05, 1.0 - x1), y1 + rng.uniform(0.05, 1.0 - y1)});
    }
    if (cfg.synth_features) {
      char buf[48];
      std::snprintf(buf, sizeof buf, "snippet_%04zu.aent", s);
      e.feature_file = (fs::path("..") / "feature_maps" / m.video.video_id / buf).generic_string();
    }
    m.snippets.push_back(std::move(e));
  }
  out.labels = gen_labels(grid, m.annotations, max_dur, cfg.local_max);
  return out;
}

}  // namespace detail

/// Random manifests plus, optionally, oracle score grids (probability 1 on
/// label cells) and stub feature-map files with a matching weight bundle.
inline RunSummary cmd_synth(const RunConfig& cfg) {
  check(cfg);
  detail::Stopwatch clock;
  RunSummary summary = detail::start_summary("synth", cfg);
  const fs::path root = cfg.output_dir;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < cfg.synth_videos; ++i) names.push_back(detail::video_name(i));

  detail::for_each_video(summary, names, cfg.workers, [&](std::size_t i) -> std::size_t {
    const auto v = detail::synth_video(cfg, i);
    const auto& id = v.manifest.video.video_id;
    write_manifest(v.manifest, layout::manifests(root) / (id + ".json"));
    if (cfg.synth_grids) write_grids(oracle_grids(v.labels), layout::grids(root) / id);
    if (cfg.synth_features) {
      for (const auto& s : v.manifest.snippets) {
        const FeatureMap map = stub_backbone(id, s.index, cfg.backbone_dims, cfg.seed);
        write_tensor(map.tensor(), layout::manifests(root) / *s.feature_file);
      }
    }
    return v.manifest.annotations.empty() ? 1 : 0;
  });
  if (cfg.synth_features) {
    FusionConfig fc = cfg.fusion;
    fc.channels = cfg.backbone_dims[0];
    save_weight_bundle(init_fusion_weights(fc, cfg.seed), layout::weights(root));
  }
  detail::finish(summary, cfg, clock);
  return summary;
}

/// Fused snippet features F, one [T, d_model] tensor per manifest.
inline RunSummary cmd_featurize(const RunConfig& cfg) {
  check(cfg);
  detail::Stopwatch clock;
  RunSummary summary = detail::start_summary("featurize", cfg);
  const auto files = list_files(cfg.manifest_dir, ".json");

  FusionWeights weights;
  if (!cfg.weights_dir.empty()) {
    weights = load_weight_bundle(cfg.weights_dir);
  } else {
    FusionConfig fc = cfg.fusion;
    fc.channels = cfg.backbone_dims[0];
    weights = init_fusion_weights(fc, cfg.seed);
  }

  detail::for_each_video(summary, detail::stems(files), cfg.workers, [&](std::size_t i) -> std::size_t {
    const Manifest m = read_manifest(files[i]);
    FeatureSource source = StubSource{cfg.seed, cfg.backbone_dims};
    if (cfg.feature_source == "files") {
      source = FileSource{cfg.feature_dir.empty() ? files[i].parent_path() : cfg.feature_dir};
    }
    write_tensor(featurize_video(m, weights, source), layout::features(cfg.output_dir) / (m.video.video_id + ".aent"));
    return 0;
  });
  detail::finish(summary, cfg, clock);
  return summary;
}

/// L_S, L_E and L_D for each manifest.
inline RunSummary cmd_labels(const RunConfig& cfg) {
  check(cfg);
  detail::Stopwatch clock;
  RunSummary summary = detail::start_summary("labels", cfg);
  const auto files = list_files(cfg.manifest_dir, ".json");
  detail::for_each_video(summary, detail::stems(files), cfg.workers, [&](std::size_t i) -> std::size_t {
    const Manifest m = read_manifest(files[i]);
    const SnippetGrid grid = build_grid(m.video);
    const std::size_t d = max_duration(grid.size(), cfg.duration_policy);
    const auto boundary = gen_boundary_labels(grid, m.annotations);
    const Matrix durations = gen_duration_labels(grid, m.annotations, d, cfg.local_max);
    const fs::path dir = layout::labels(cfg.output_dir) / m.video.video_id;
    write_tensor(Tensor({grid.size()}, boundary.starts), dir / "starts.aent");
    write_tensor(Tensor({grid.size()}, boundary.ends), dir / "ends.aent");
    write_tensor(durations.to_tensor(), dir / "durations.aent");
    return boundary.warnings;
  });
  detail::finish(summary, cfg, clock);
  return summary;
}

/// Ranked proposal JSON per video from its score grids.
inline RunSummary cmd_infer(const RunConfig& cfg) {
  check(cfg);
  detail::Stopwatch clock;
  RunSummary summary = detail::start_summary("infer", cfg);
  const auto files = list_files(cfg.manifest_dir, ".json");
  const fs::path grids_root = cfg.grids_dir.empty() ? layout::grids(cfg.manifest_dir.parent_path()) : cfg.grids_dir;
  detail::for_each_video(summary, detail::stems(files), cfg.workers, [&](std::size_t i) -> std::size_t {
    const Manifest m = read_manifest(files[i]);
    const SnippetGrid grid = build_grid(m.video);
    const ScoreGrids g = read_grids(grids_root / m.video.video_id);
    const auto props = infer(g, grid, cfg.inference);
    write_file_atomic(layout::proposals(cfg.output_dir) / (m.video.video_id + ".json"),
                      proposals_to_json(props).dump(2) + "\n");
    return 0;
  });
  detail::finish(summary, cfg, clock);
  return summary;
}

/// Joins proposal files with manifests by video id and writes eval.json and
/// eval.csv (plus Seen/Unseen results when label sets are configured).
inline RunSummary cmd_eval(const RunConfig& cfg) {
  check(cfg);
  detail::Stopwatch clock;
  RunSummary summary = detail::start_summary("eval", cfg);
  const auto manifests = list_files(cfg.manifest_dir, ".json");
  const fs::path prop_root =
      cfg.proposals_dir.empty() ? layout::proposals(cfg.manifest_dir.parent_path()) : cfg.proposals_dir;

  std::vector<std::optional<VideoResult>> slots(manifests.size());
  detail::for_each_video(summary, detail::stems(manifests), cfg.workers, [&](std::size_t i) -> std::size_t {
    const Manifest m = read_manifest(manifests[i]);
    const fs::path pf = prop_root / (m.video.video_id + ".json");
    if (!fs::exists(pf)) return 1;  // not part of the join
    const auto bytes = read_file_bytes(pf);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(pf.string(), e.what());
    }
    slots[i] = VideoResult{m.video.video_id, segments_from_json(doc), m.annotations};
    return 0;
  });
  std::vector<VideoResult> joined;
  for (auto& s : slots) {
    if (s) joined.push_back(std::move(*s));
  }
  summary.extra["joined_videos"] = joined.size();

  try {
    if (joined.empty()) throw Error(ErrorKind::undefined_metric, "no video ids shared by proposals and manifests");
    const auto thresholds = tiou_thresholds(cfg.metric_preset);
    const EvalResult r = evaluate(joined, thresholds);
    write_file_atomic(cfg.output_dir / "eval.json", eval_to_json(r).dump(2) + "\n");
    write_file_atomic(cfg.output_dir / "eval.csv", eval_to_csv(r));
    summary.extra["auc"] = r.auc;
    summary.extra["ar_at_100"] = r.ar_at_an.count(100) ? r.ar_at_an.at(100) : r.ar_at_an.rbegin()->second;

    if (!cfg.seen_labels.empty() || !cfg.unseen_labels.empty()) {
      const SplitResult split = split_eval(joined, cfg.seen_labels, cfg.unseen_labels, thresholds);
      nlohmann::ordered_json j;
      j["seen"] = split.seen ? eval_to_json(*split.seen) : nlohmann::ordered_json(nullptr);
      j["unseen"] = split.unseen ? eval_to_json(*split.unseen) : nlohmann::ordered_json(nullptr);
      j["seen_gts"] = split.seen_gts;
      j["unseen_gts"] = split.unseen_gts;
      j["conflicting"] = split.conflicting;
      j["unassigned"] = split.unassigned;
      write_file_atomic(cfg.output_dir / "eval_split.json", j.dump(2) + "\n");
      for (const auto& v : split.conflicting) {
        summary.failures.push_back({v, "labels fall in both seen and unseen sets"});
      }
    }
  } catch (const Error& e) {
    summary.fatal = e.what();
  }
  detail::finish(summary, cfg, clock);
  return summary;
}

}  // namespace aen
