// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <functional>

#include "aen/manifest.hpp"
#include "aen/rng.hpp"

namespace aen {
namespace {

using nlohmann::json;

json minimal() {
  return json::parse(R"({
    "video": {"video_id": "v1", "num_frames": 16, "fps": 16, "snippet_len": 16, "duration_seconds": 1.0},
    "annotations": [{"label": "jump", "start_sec": 0.1, "end_sec": 0.9}],
    "snippets": [{"index": 0, "agent_boxes": []}]
  })");
}

std::string error_path(const json& doc) {
  try {
    parse_manifest(doc);
  } catch (const ValidationError& e) {
    return e.path();
  }
  return "<accepted>";
}

TEST(Manifest, MinimalValid) {
  const Manifest m = parse_manifest(minimal());
  EXPECT_EQ(m.annotations.size(), 1u);
  EXPECT_EQ(m.video.video_id, "v1");
  EXPECT_FALSE(m.snippets[0].feature_file.has_value());
}

TEST(Manifest, AnnotationPastDuration) {
  auto doc = minimal();
  doc["annotations"][0]["end_sec"] = 1.5;
  EXPECT_EQ(error_path(doc), "/annotations/0/end_sec");
}

TEST(Manifest, InvertedBox) {
  auto doc = minimal();
  doc["snippets"][0]["agent_boxes"] = json::array({json::array({0.5, 0.5, 0.4, 0.9})});
  EXPECT_EQ(error_path(doc), "/snippets/0/agent_boxes/0");
}

TEST(Manifest, StrictUnknownFields) {
  auto doc = minimal();
  doc["video"]["fsp"] = 3;
  EXPECT_EQ(error_path(doc), "/video/fsp");
  doc = minimal();
  doc["extra"] = 1;
  EXPECT_EQ(error_path(doc), "/extra");
}

TEST(Manifest, RejectsInvariantMutations) {
  using Mutation = std::pair<const char*, std::function<void(json&)>>;
  const std::vector<Mutation> mutations{
      {"/video/video_id", [](json& d) { d["video"].erase("video_id"); }},
      {"/video/num_frames", [](json& d) { d["video"]["num_frames"] = -4; }},
      {"/video/num_frames", [](json& d) { d["video"]["num_frames"] = 8; }},
      {"/video/num_frames", [](json& d) { d["video"]["num_frames"] = 16.5; }},
      {"/video/fps", [](json& d) { d["video"]["fps"] = 0; }},
      {"/video/fps", [](json& d) { d["video"]["fps"] = "16"; }},
      {"/video/snippet_len", [](json& d) { d["video"]["snippet_len"] = 0; }},
      {"/video/duration_seconds", [](json& d) { d["video"]["duration_seconds"] = 2.0; }},
      {"/annotations", [](json& d) { d["annotations"] = json::object(); }},
      {"/annotations/0/start_sec", [](json& d) { d["annotations"][0]["start_sec"] = -0.1; }},
      {"/annotations/0/end_sec", [](json& d) { d["annotations"][0]["end_sec"] = 0.05; }},
      {"/annotations/0/label", [](json& d) { d["annotations"][0]["label"] = 3; }},
      {"/snippets/0/index", [](json& d) { d["snippets"][0]["index"] = 1; }},
      {"/snippets/1/index", [](json& d) { d["snippets"].push_back(d["snippets"][0]); }},
      {"/snippets/0/agent_boxes/0/2", [](json& d) { d["snippets"][0]["agent_boxes"] = {{0.1, 0.1, 1.2, 0.5}}; }},
      {"/snippets/0/agent_boxes/0", [](json& d) { d["snippets"][0]["agent_boxes"] = {{0.1, 0.6, 0.2, 0.5}}; }},
      {"/snippets/0/agent_boxes/0", [](json& d) { d["snippets"][0]["agent_boxes"] = {{0.1, 0.2}}; }},
      {"/snippets/0/feature_file", [](json& d) { d["snippets"][0]["feature_file"] = ""; }},
      {"/snippets/0/agent_boxes", [](json& d) { d["snippets"][0].erase("agent_boxes"); }},
  };
  for (const auto& [path, mutate] : mutations) {
    json doc = minimal();
    mutate(doc);
    EXPECT_EQ(error_path(doc), path) << doc.dump();
  }
}

TEST(Manifest, RoundtripProperty) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "aen_manifest_test";
  fs::remove_all(dir);
  SplitMix64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    Manifest m;
    const auto delta = rng.uniform_int(1, 16);
    const auto frames = delta * rng.uniform_int(1, 40) + rng.uniform_int(0, delta - 1);
    m.video = VideoMeta::make("vid" + std::to_string(trial), frames, rng.uniform(10, 60), delta);
    for (int a = 0; a < rng.uniform_int(0, 4); ++a) {
      const double s = rng.uniform(0, m.video.duration_seconds * 0.9);
      m.annotations.push_back({"l" + std::to_string(a), s, rng.uniform(s + 1e-6, m.video.duration_seconds)});
    }
    const auto count = frames / delta;
    for (std::int64_t s = 0; s < count; s += 2) {
      SnippetEntry e;
      e.index = s;
      if (rng.uniform() < 0.5) e.feature_file = "maps/s" + std::to_string(s) + ".aent";
      for (int b = 0; b < rng.uniform_int(0, 3); ++b) {
        const double x = rng.uniform(0, 0.5), y = rng.uniform(0, 0.5);
        e.agent_boxes.push_back({x, y, x + rng.uniform(0.01, 0.5), y + rng.uniform(0.01, 0.5)});
      }
      m.snippets.push_back(e);
    }
    write_manifest(m, dir / "m.json");
    EXPECT_EQ(read_manifest(dir / "m.json"), m);
  }
  fs::remove_all(dir);
}

TEST(Manifest, MalformedJson) {
  namespace fs = std::filesystem;
  const fs::path p = fs::temp_directory_path() / "aen_manifest_bad.json";
  write_file_atomic(p, std::string("{not json"));
  EXPECT_THROW(read_manifest(p), ValidationError);
  fs::remove(p);
}

}  // namespace
}  // namespace aen
