// SPDX-License-Identifier: Apache-2.0
//
// aen: batch front-end over manifests and tensor files.
//
//   aen synth     --out DIR [--videos N] [--max-actions K] [--with-features]
//   aen featurize --manifests DIR --out DIR [--source stub|files] [--weights DIR]
//   aen labels    --manifests DIR --out DIR
//   aen infer     --manifests DIR --grids DIR --out DIR
//   aen eval      --manifests DIR --proposals DIR --out DIR [--preset activitynet|thumos]
//
// Exit codes: 0 success, 1 validation/data error, 2 partial failure with
// --keep-going.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "aen/pipeline.hpp"

namespace {

std::set<std::string> split_labels(const std::string& csv) {
  std::set<std::string> out;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.insert(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agent-environment temporal action proposal pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool keep_going = false;
  app.add_option("--config", config_path, "JSON config file; flags override its values")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Seed for synthetic data, stub backbone and weights");
  auto* workers_opt = app.add_option("--workers", workers, "Worker threads over videos")->check(CLI::PositiveNumber);
  auto* keep_opt = app.add_flag("--keep-going", keep_going, "Skip failed videos and exit 2 instead of 1");
  auto* out_opt = app.add_option("--out", out_dir, "Output directory");

  std::string manifests, grids, proposals, weights, source, preset, seen, unseen, policy;
  std::size_t videos = 0, max_actions = 0, top_k = 0;
  double sigma = 0, floor = 0, peak_ratio = 0;
  bool with_features = false, no_grids = false, local_max_only = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with oracle score grids");
  auto* videos_opt = synth->add_option("--videos", videos, "Number of videos")->check(CLI::PositiveNumber);
  auto* actions_opt = synth->add_option("--max-actions", max_actions, "Maximum actions per video");
  synth->add_flag("--with-features", with_features, "Also write stub feature maps and a weight bundle");
  synth->add_flag("--no-grids", no_grids, "Skip oracle score grids");

  auto* featurize = app.add_subcommand("featurize", "Compute fused snippet features");
  auto* labels = app.add_subcommand("labels", "Generate boundary and duration labels");
  auto* infer = app.add_subcommand("infer", "Turn score grids into ranked proposals");
  auto* eval = app.add_subcommand("eval", "Evaluate proposals with AR@AN and AUC");

  std::vector<CLI::Option*> manifest_opts;
  for (auto* sub : {featurize, labels, infer, eval}) {
    manifest_opts.push_back(sub->add_option("--manifests", manifests, "Manifest directory")->check(CLI::ExistingDirectory));
  }
  auto* source_opt = featurize->add_option("--source", source, "Feature-map source")->check(CLI::IsMember({"stub", "files"}));
  auto* weights_opt = featurize->add_option("--weights", weights, "Weight bundle directory")->check(CLI::ExistingDirectory);
  auto* grids_opt = infer->add_option("--grids", grids, "Score grid directory");
  auto* sigma_opt = infer->add_option("--sigma", sigma, "Soft-NMS Gaussian sigma")->check(CLI::PositiveNumber);
  auto* floor_opt = infer->add_option("--score-floor", floor, "Soft-NMS score floor");
  auto* topk_opt = infer->add_option("--top-k", top_k, "Maximum proposals per video");
  auto* ratio_opt = infer->add_option("--peak-ratio", peak_ratio, "Peak fallback ratio of max probability");
  infer->add_flag("--local-max-only", local_max_only, "Disable the peak ratio fallback");
  auto* props_opt = eval->add_option("--proposals", proposals, "Proposal directory");
  auto* preset_opt = eval->add_option("--preset", preset, "tIoU preset")->check(CLI::IsMember({"activitynet", "thumos"}));
  auto* seen_opt = eval->add_option("--seen", seen, "Comma-separated Seen labels");
  auto* unseen_opt = eval->add_option("--unseen", unseen, "Comma-separated Unseen labels");
  std::vector<CLI::Option*> policy_opts;
  for (auto* sub : {synth, labels}) {
    policy_opts.push_back(sub->add_option("--duration-policy", policy, "Maximum duration D: full (T) or half (T/2)")
                              ->check(CLI::IsMember({"full", "half"})));
  }

  CLI11_PARSE(app, argc, argv);

  aen::RunConfig cfg;
  try {
    if (!config_path.empty()) {
      const auto bytes = aen::read_file_bytes(config_path);
      cfg = aen::config_from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
    }
  } catch (const std::exception& e) {
    std::cerr << "aen: " << e.what() << "\n";
    return 1;
  }
  if (seed_opt->count()) cfg.seed = seed;
  if (workers_opt->count()) cfg.workers = workers;
  if (keep_opt->count()) cfg.keep_going = true;
  if (out_opt->count()) cfg.output_dir = out_dir;
  for (auto* o : manifest_opts) {
    if (o->count()) cfg.manifest_dir = manifests;
  }
  for (auto* o : policy_opts) {
    if (o->count()) cfg.duration_policy = policy == "full" ? aen::DurationPolicy::full : aen::DurationPolicy::half;
  }
  if (videos_opt->count()) cfg.synth_videos = videos;
  if (actions_opt->count()) cfg.synth_max_actions = max_actions;
  if (with_features) cfg.synth_features = true;
  if (no_grids) cfg.synth_grids = false;
  if (source_opt->count()) cfg.feature_source = source;
  if (weights_opt->count()) cfg.weights_dir = weights;
  if (grids_opt->count()) cfg.grids_dir = grids;
  if (sigma_opt->count()) cfg.inference.nms.sigma = sigma;
  if (floor_opt->count()) cfg.inference.nms.score_floor = floor;
  if (topk_opt->count()) cfg.inference.nms.top_k = top_k;
  if (ratio_opt->count()) cfg.inference.peaks.peak_ratio = peak_ratio;
  if (local_max_only) cfg.inference.peaks.local_max_only = true;
  if (props_opt->count()) cfg.proposals_dir = proposals;
  if (preset_opt->count()) cfg.metric_preset = preset;
  if (seen_opt->count()) cfg.seen_labels = split_labels(seen);
  if (unseen_opt->count()) cfg.unseen_labels = split_labels(unseen);

  try {
    aen::RunSummary summary;
    if (*synth) {
      summary = aen::cmd_synth(cfg);
    } else if (*featurize) {
      summary = aen::cmd_featurize(cfg);
    } else if (*labels) {
      summary = aen::cmd_labels(cfg);
    } else if (*infer) {
      summary = aen::cmd_infer(cfg);
    } else {
      summary = aen::cmd_eval(cfg);
    }
    for (const auto& f : summary.failures) std::cerr << "aen: " << f.video << ": " << f.error << "\n";
    if (summary.fatal) std::cerr << "aen: " << *summary.fatal << "\n";
    std::cout << summary.command << ": " << summary.processed << " processed, " << summary.failures.size()
              << " failed, " << summary.warnings << " warnings\n";
    if (summary.extra.contains("auc")) {
      std::cout << "AUC " << summary.extra["auc"].get<double>() << "  AR@100 "
                << summary.extra["ar_at_100"].get<double>() << "\n";
    }
    return summary.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "aen: " << e.what() << "\n";
    return 1;
  }
}
