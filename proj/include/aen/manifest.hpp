// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "aen/error.hpp"
#include "aen/tensor.hpp"
#include "aen/timeline.hpp"

namespace aen {

/// Normalized [x1, y1, x2, y2] box in [0,1] image coordinates.
using Box = std::array<double, 4>;

struct SnippetEntry {
  std::int64_t index = 0;
  std::optional<std::string> feature_file;
  std::vector<Box> agent_boxes;

  bool operator==(const SnippetEntry&) const = default;
};

struct Manifest {
  VideoMeta video;
  std::vector<GroundTruthAction> annotations;
  std::vector<SnippetEntry> snippets;

  /// Entry for snippet `index`, or nullptr if the manifest does not list it.
  const SnippetEntry* find_snippet(std::int64_t index) const {
    for (const auto& s : snippets) {
      if (s.index == index) return &s;
    }
    return nullptr;
  }

  bool operator==(const Manifest&) const = default;
};

namespace detail {

using nlohmann::json;

inline void require_object(const json& j, const std::string& path, std::initializer_list<const char*> allowed,
                           std::initializer_list<const char*> required) {
  if (!j.is_object()) throw ValidationError(path, "expected object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ValidationError(path + "/" + key, "unknown field");
  }
  for (const char* r : required) {
    if (!j.contains(r)) throw ValidationError(path + "/" + r, "missing required field");
  }
}

inline double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path, "expected number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(path, "expected finite number");
  return v;
}

inline std::int64_t get_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ValidationError(path, "expected integer");
  return j.get<std::int64_t>();
}

inline std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ValidationError(path, "expected string");
  return j.get<std::string>();
}

inline const json& get_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError(path, "expected array");
  return j;
}

}  // namespace detail

inline void validate_box(const Box& b, const std::string& path) {
  for (std::size_t k = 0; k < 4; ++k) {
    if (!(b[k] >= 0.0 && b[k] <= 1.0)) {
      throw ValidationError(path + "/" + std::to_string(k), "box coordinate outside [0,1]");
    }
  }
  if (!(b[0] < b[2])) throw ValidationError(path, "box requires x1 < x2");
  if (!(b[1] < b[3])) throw ValidationError(path, "box requires y1 < y2");
}

/// Enforces every manifest invariant; used both after parsing and before
/// writing.
inline void validate(const Manifest& m) {
  try {
    validate(m.video);
  } catch (const Error& e) {
    throw ValidationError("/video", e.what());
  }
  if (m.video.video_id.empty()) throw ValidationError("/video/video_id", "must be non-empty");
  const auto count = m.video.num_frames / m.video.snippet_len;
  for (std::size_t i = 0; i < m.annotations.size(); ++i) {
    const auto& a = m.annotations[i];
    const std::string path = "/annotations/" + std::to_string(i);
    if (!(a.start_sec >= 0.0)) throw ValidationError(path + "/start_sec", "must be >= 0");
    if (!(a.start_sec < a.end_sec)) throw ValidationError(path + "/end_sec", "must exceed start_sec");
    if (!(a.end_sec <= m.video.duration_seconds)) {
      throw ValidationError(path + "/end_sec", "exceeds video duration");
    }
  }
  std::set<std::int64_t> seen;
  for (std::size_t i = 0; i < m.snippets.size(); ++i) {
    const auto& s = m.snippets[i];
    const std::string path = "/snippets/" + std::to_string(i);
    if (s.index < 0 || s.index >= count) throw ValidationError(path + "/index", "outside [0, T)");
    if (!seen.insert(s.index).second) throw ValidationError(path + "/index", "duplicate snippet index");
    if (s.feature_file && s.feature_file->empty()) throw ValidationError(path + "/feature_file", "empty path");
    for (std::size_t b = 0; b < s.agent_boxes.size(); ++b) {
      validate_box(s.agent_boxes[b], path + "/agent_boxes/" + std::to_string(b));
    }
  }
}

inline Manifest parse_manifest(const nlohmann::json& doc) {
  using namespace detail;
  require_object(doc, "", {"video", "annotations", "snippets"}, {"video", "annotations", "snippets"});

  Manifest m;
  const json& v = doc["video"];
  require_object(v, "/video", {"video_id", "num_frames", "fps", "snippet_len", "duration_seconds"},
                 {"video_id", "num_frames", "fps", "snippet_len", "duration_seconds"});
  m.video.video_id = get_string(v["video_id"], "/video/video_id");
  m.video.num_frames = get_integer(v["num_frames"], "/video/num_frames");
  m.video.fps = get_number(v["fps"], "/video/fps");
  m.video.snippet_len = get_integer(v["snippet_len"], "/video/snippet_len");
  m.video.duration_seconds = get_number(v["duration_seconds"], "/video/duration_seconds");
  if (m.video.num_frames <= 0) throw ValidationError("/video/num_frames", "must be positive");
  if (!(m.video.fps > 0.0)) throw ValidationError("/video/fps", "must be positive");
  if (m.video.snippet_len <= 0) throw ValidationError("/video/snippet_len", "must be positive");
  if (m.video.num_frames < m.video.snippet_len) throw ValidationError("/video/num_frames", "must be >= snippet_len");
  const double expected = static_cast<double>(m.video.num_frames) / m.video.fps;
  if (!(std::abs(m.video.duration_seconds - expected) <= 1e-9 * expected)) {
    throw ValidationError("/video/duration_seconds", "must equal num_frames / fps");
  }

  const json& anns = get_array(doc["annotations"], "/annotations");
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string path = "/annotations/" + std::to_string(i);
    require_object(anns[i], path, {"label", "start_sec", "end_sec"}, {"label", "start_sec", "end_sec"});
    m.annotations.push_back({get_string(anns[i]["label"], path + "/label"),
                             get_number(anns[i]["start_sec"], path + "/start_sec"),
                             get_number(anns[i]["end_sec"], path + "/end_sec")});
  }

  const json& snips = get_array(doc["snippets"], "/snippets");
  for (std::size_t i = 0; i < snips.size(); ++i) {
    const std::string path = "/snippets/" + std::to_string(i);
    require_object(snips[i], path, {"index", "feature_file", "agent_boxes"}, {"index", "agent_boxes"});
    SnippetEntry s;
    s.index = get_integer(snips[i]["index"], path + "/index");
    if (snips[i].contains("feature_file") && !snips[i]["feature_file"].is_null()) {
      s.feature_file = get_string(snips[i]["feature_file"], path + "/feature_file");
    }
    const json& boxes = get_array(snips[i]["agent_boxes"], path + "/agent_boxes");
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      const std::string bpath = path + "/agent_boxes/" + std::to_string(b);
      if (!boxes[b].is_array() || boxes[b].size() != 4) throw ValidationError(bpath, "expected [x1,y1,x2,y2]");
      Box box{};
      for (std::size_t k = 0; k < 4; ++k) box[k] = get_number(boxes[b][k], bpath + "/" + std::to_string(k));
      s.agent_boxes.push_back(box);
    }
    m.snippets.push_back(std::move(s));
  }

  validate(m);
  return m;
}

inline nlohmann::ordered_json manifest_to_json(const Manifest& m) {
  nlohmann::ordered_json doc;
  doc["video"] = {{"video_id", m.video.video_id},
                  {"num_frames", m.video.num_frames},
                  {"fps", m.video.fps},
                  {"snippet_len", m.video.snippet_len},
                  {"duration_seconds", m.video.duration_seconds}};
  doc["annotations"] = nlohmann::ordered_json::array();
  for (const auto& a : m.annotations) {
    doc["annotations"].push_back({{"label", a.label}, {"start_sec", a.start_sec}, {"end_sec", a.end_sec}});
  }
  doc["snippets"] = nlohmann::ordered_json::array();
  for (const auto& s : m.snippets) {
    nlohmann::ordered_json e;
    e["index"] = s.index;
    if (s.feature_file) e["feature_file"] = *s.feature_file;
    e["agent_boxes"] = nlohmann::ordered_json::array();
    for (const auto& b : s.agent_boxes) e["agent_boxes"].push_back(b);
    doc["snippets"].push_back(std::move(e));
  }
  return doc;
}

inline Manifest read_manifest(const std::filesystem::path& src) {
  const auto bytes = read_file_bytes(src);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_manifest(doc);
}

inline void write_manifest(const Manifest& m, const std::filesystem::path& dest) {
  validate(m);
  write_file_atomic(dest, manifest_to_json(m).dump(2) + "\n");
}

}  // namespace aen
