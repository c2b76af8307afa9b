// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "aen/pipeline.hpp"
#include "test_support.hpp"

namespace aen {
namespace {

using testing::scratch_dir;
using testing::snapshot;

RunConfig synth_config(const fs::path& out, std::size_t videos, std::uint64_t seed) {
  RunConfig c;
  c.output_dir = out;
  c.synth_videos = videos;
  c.seed = seed;
  return c;
}

/// synth -> infer -> eval inside one directory.
RunSummary oracle_run(RunConfig c) {
  EXPECT_EQ(cmd_synth(c).exit_code(), 0);
  c.manifest_dir = layout::manifests(c.output_dir);
  EXPECT_EQ(cmd_infer(c).exit_code(), 0);
  return cmd_eval(c);
}

nlohmann::json read_json(const fs::path& p) {
  const auto bytes = read_file_bytes(p);
  return nlohmann::json::parse(bytes.begin(), bytes.end());
}

TEST(Synth, DeterministicPerSeed) {
  const auto a = scratch_dir("synth_a"), b = scratch_dir("synth_b"), c = scratch_dir("synth_c");
  EXPECT_EQ(cmd_synth(synth_config(a, 5, 7)).exit_code(), 0);
  EXPECT_EQ(cmd_synth(synth_config(b, 5, 7)).exit_code(), 0);
  EXPECT_EQ(cmd_synth(synth_config(c, 5, 8)).exit_code(), 0);
  const auto sa = snapshot(a);
  EXPECT_EQ(sa.size(), 5u * 5u);  // manifest + four grids per video
  EXPECT_EQ(sa, snapshot(b));
  EXPECT_NE(sa, snapshot(c));
}

TEST(Synth, ManifestsAreValidAndLabelsMatchAnnotations) {
  const auto dir = scratch_dir("synth_valid");
  auto cfg = synth_config(dir, 20, 3);
  cfg.synth_max_actions = 4;
  cmd_synth(cfg);
  for (const auto& f : list_files(layout::manifests(dir), ".json")) {
    const Manifest m = read_manifest(f);
    const auto grid = build_grid(m.video);
    EXPECT_GE(grid.size(), 4u);
    EXPECT_LE(grid.size(), 32u);
    EXPECT_GE(m.annotations.size(), 1u);
    EXPECT_LE(m.annotations.size(), 4u);
    const auto g = read_grids(layout::grids(dir) / m.video.video_id);
    const auto labels = gen_labels(grid, m.annotations, grid.size());
    EXPECT_EQ(g.start_probs, labels.starts);
    EXPECT_EQ(g.conf_cls, labels.durations);
  }
}

TEST(Synth, NoActionsWarnsPerVideo) {
  const auto dir = scratch_dir("synth_empty");
  auto cfg = synth_config(dir, 4, 1);
  cfg.synth_max_actions = 0;
  const auto s = cmd_synth(cfg);
  EXPECT_EQ(s.exit_code(), 0);
  EXPECT_EQ(s.warnings, 4u);
  EXPECT_TRUE(read_manifest(layout::manifests(dir) / "video_0000.json").annotations.empty());
}

TEST(Pipeline, OracleCorpusSaturates) {
  const auto dir = scratch_dir("oracle_single");
  auto cfg = synth_config(dir, 50, 11);
  cfg.synth_max_actions = 1;
  const auto s = oracle_run(cfg);
  ASSERT_EQ(s.exit_code(), 0) << s.to_json().dump();
  EXPECT_NEAR(s.extra["auc"].get<double>(), 100.0, 1e-9);
  const auto eval = read_json(dir / "eval.json");
  EXPECT_EQ(eval["num_videos"], 50);
}

TEST(Pipeline, MultiActionRecallSaturatesAtActionCount) {
  const auto dir = scratch_dir("oracle_multi");
  auto cfg = synth_config(dir, 30, 12);
  cfg.synth_max_actions = 3;
  ASSERT_EQ(oracle_run(cfg).exit_code(), 0);
  const auto eval = read_json(dir / "eval.json");
  for (int an = 3; an <= 100; ++an) EXPECT_EQ(eval["ar_at_an"][std::to_string(an)].get<double>(), 1.0) << an;
}

TEST(Pipeline, HalfDurationPolicy) {
  const auto dir = scratch_dir("oracle_half");
  auto cfg = synth_config(dir, 10, 13);
  cfg.duration_policy = DurationPolicy::half;
  ASSERT_EQ(oracle_run(cfg).exit_code(), 0);
  const auto g = read_grids(layout::grids(dir) / "video_0000");
  EXPECT_EQ(g.max_duration(), std::max<std::size_t>(1, g.num_snippets() / 2));
  EXPECT_EQ(read_json(dir / "eval.json")["ar_at_an"]["100"], 1.0);
}

TEST(Pipeline, FeaturizeFromFilesMatchesStub) {
  const auto dir = scratch_dir("featurize");
  auto cfg = synth_config(dir, 3, 5);
  cfg.synth_features = true;
  cfg.backbone_dims = {6, 5, 4};
  cfg.fusion.d_model = 8;
  cfg.fusion.num_heads = 2;
  cfg.fusion.ff_dim = 16;
  cfg.fusion.env_hidden = {8};
  ASSERT_EQ(cmd_synth(cfg).exit_code(), 0);

  RunConfig stub = cfg;
  stub.manifest_dir = layout::manifests(dir);
  stub.output_dir = dir / "stub";
  ASSERT_EQ(cmd_featurize(stub).exit_code(), 0);

  RunConfig files = stub;
  files.output_dir = dir / "files";
  files.feature_source = "files";
  files.weights_dir = layout::weights(dir);
  ASSERT_EQ(cmd_featurize(files).exit_code(), 0);

  EXPECT_EQ(snapshot(stub.output_dir), snapshot(files.output_dir));
  const Tensor f = read_tensor(layout::features(stub.output_dir) / "video_0000.aent");
  const auto m = read_manifest(layout::manifests(dir) / "video_0000.json");
  EXPECT_EQ(f.dims(), (std::vector<std::size_t>{build_grid(m.video).size(), 8}));
}

TEST(Pipeline, LabelsCommand) {
  const auto dir = scratch_dir("labels");
  cmd_synth(synth_config(dir, 3, 2));
  RunConfig cfg;
  cfg.manifest_dir = layout::manifests(dir);
  cfg.output_dir = dir / "out";
  ASSERT_EQ(cmd_labels(cfg).exit_code(), 0);
  const auto durations = read_tensor(layout::labels(cfg.output_dir) / "video_0001" / "durations.aent");
  const auto g = read_grids(layout::grids(dir) / "video_0001");
  EXPECT_EQ(durations.values(), g.conf_cls.data);
}

TEST(Pipeline, KeepGoingExitCodes) {
  const auto dir = scratch_dir("keep_going");
  RunConfig cfg = synth_config(dir, 4, 9);
  cmd_synth(cfg);
  cfg.manifest_dir = layout::manifests(dir);
  write_file_atomic(cfg.manifest_dir / "video_0002.json", std::string("{\"video\": 3}"));

  auto s = cmd_infer(cfg);
  EXPECT_EQ(s.exit_code(), 1);
  ASSERT_EQ(s.failures.size(), 1u);
  EXPECT_EQ(s.failures[0].video, "video_0002");
  cfg.keep_going = true;
  s = cmd_infer(cfg);
  EXPECT_EQ(s.exit_code(), 2);
  EXPECT_EQ(s.processed, 3u);
  const auto summary = read_json(layout::summary(dir, "infer"));
  EXPECT_EQ(summary["exit_code"], 2);
  EXPECT_EQ(summary["config"]["keep_going"], true);
}

TEST(Pipeline, EmptyJoinIsFatal) {
  const auto dir = scratch_dir("empty_join");
  RunConfig cfg = synth_config(dir, 2, 1);
  cmd_synth(cfg);
  cfg.manifest_dir = layout::manifests(dir);
  fs::create_directories(layout::proposals(dir));
  const auto s = cmd_eval(cfg);
  EXPECT_EQ(s.exit_code(), 1);
  ASSERT_TRUE(s.fatal.has_value());
  EXPECT_FALSE(fs::exists(dir / "eval.json"));
}

TEST(Pipeline, SplitEvaluationFile) {
  const auto dir = scratch_dir("split");
  auto cfg = synth_config(dir, 12, 4);
  cfg.synth_max_actions = 1;
  cfg.seen_labels = {"action_0", "action_1", "action_2", "action_3", "action_4"};
  cfg.unseen_labels = {"action_5", "action_6", "action_7", "action_8", "action_9"};
  ASSERT_EQ(oracle_run(cfg).exit_code(), 0);
  const auto split = read_json(dir / "eval_split.json");
  EXPECT_EQ(split["seen_gts"].get<int>() + split["unseen_gts"].get<int>(), 12);
}

TEST(Pipeline, ParallelEqualsSerialAndRerunsAreIdempotent) {
  const auto serial = scratch_dir("serial"), parallel = scratch_dir("parallel");
  auto cfg = synth_config(serial, 12, 21);
  cfg.synth_features = true;
  cfg.backbone_dims = {4, 4, 4};
  cfg.fusion.d_model = 8;
  cfg.fusion.num_heads = 2;
  cfg.fusion.env_hidden = {};
  auto full = [](RunConfig c) {
    cmd_synth(c);
    c.manifest_dir = layout::manifests(c.output_dir);
    cmd_featurize(c);
    cmd_labels(c);
    cmd_infer(c);
    return cmd_eval(c).exit_code();
  };
  ASSERT_EQ(full(cfg), 0);
  const auto first = snapshot(serial);
  ASSERT_EQ(full(cfg), 0);
  EXPECT_EQ(snapshot(serial), first);

  cfg.output_dir = parallel;
  cfg.workers = 4;
  ASSERT_EQ(full(cfg), 0);
  EXPECT_EQ(snapshot(parallel), first);
}

TEST(Pipeline, MissingManifestDirectoryIsDataError) {
  RunConfig cfg;
  cfg.manifest_dir = fs::temp_directory_path() / "aen_does_not_exist";
  try {
    cmd_infer(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
}

TEST(Config, DefaultsAndOverlay) {
  const RunConfig defaults;
  EXPECT_EQ(defaults.loss.lambda_reg, 10.0);
  EXPECT_EQ(defaults.loss.lambda_1, 1.0);
  EXPECT_EQ(defaults.loss.lambda_2, 1.0);
  EXPECT_EQ(defaults.duration_policy, DurationPolicy::full);

  const auto overlaid = config_from_json(
      nlohmann::json::parse(R"({"seed": 4, "loss": {"lambda_reg": 2.5}, "duration_policy": "half", "nms": {"top_k": 7}})"));
  EXPECT_EQ(overlaid.seed, 4u);
  EXPECT_EQ(overlaid.loss.lambda_reg, 2.5);
  EXPECT_EQ(overlaid.loss.lambda_1, 1.0);
  EXPECT_EQ(overlaid.duration_policy, DurationPolicy::half);
  EXPECT_EQ(overlaid.inference.nms.top_k, 7u);
  EXPECT_EQ(overlaid.inference.nms.sigma, 0.4);

  EXPECT_EQ(config_to_json(config_from_json(config_to_json(overlaid))), config_to_json(overlaid));
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"sede": 4})")), Error);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"duration_policy": "third"})")), Error);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"seed": "x"})")), Error);
}

}  // namespace
}  // namespace aen
