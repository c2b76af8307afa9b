// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "aen/error.hpp"
#include "aen/inference.hpp"
#include "aen/timeline.hpp"

namespace aen {

struct ScoredSegment {
  double start = 0.0;
  double end = 0.0;
  double score = 0.0;

  Interval interval() const noexcept { return {start, end}; }
  bool operator==(const ScoredSegment&) const = default;
};

inline std::vector<ScoredSegment> to_segments(const std::vector<Proposal>& props) {
  std::vector<ScoredSegment> out;
  out.reserve(props.size());
  for (const auto& p : props) out.push_back({p.start_sec, p.end_sec, p.score});
  return out;
}

inline std::vector<ScoredSegment> segments_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("", "proposal list must be an array");
  std::vector<ScoredSegment> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    const std::string path = "/" + std::to_string(i);
    for (const char* key : {"t_start_sec", "t_end_sec", "score"}) {
      if (!e.is_object() || !e.contains(key) || !e[key].is_number()) {
        throw ValidationError(path + "/" + key, "expected number");
      }
    }
    ScoredSegment s{e["t_start_sec"].get<double>(), e["t_end_sec"].get<double>(), e["score"].get<double>()};
    if (!(s.end > s.start)) throw ValidationError(path, "t_end_sec must exceed t_start_sec");
    out.push_back(s);
  }
  return out;
}

/// Proposals and annotations of one video.
struct VideoResult {
  std::string video_id;
  std::vector<ScoredSegment> proposals;
  std::vector<GroundTruthAction> gts;
};

/// Score descending, then start, then end: a total order on distinct
/// segments, so the serialization order of ties never matters.
inline std::vector<ScoredSegment> ranked(std::vector<ScoredSegment> props) {
  std::sort(props.begin(), props.end(), [](const ScoredSegment& a, const ScoredSegment& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.start, a.end) < std::tie(b.start, b.end);
  });
  return props;
}

namespace detail {

/// Size of a maximum one-to-one proposal/ground-truth matching restricted to
/// the top-k proposals, for every k = 1..limit. Proposals join in rank order
/// and each one tries an augmenting path, which keeps the matching maximum
/// for every prefix.
inline std::vector<std::size_t> prefix_matches(const std::vector<ScoredSegment>& props,
                                               const std::vector<GroundTruthAction>& gts, double tiou,
                                               std::size_t limit) {
  const std::size_t k = std::min(limit, props.size());
  std::vector<std::vector<std::size_t>> adj(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (temporal_iou(props[i].interval(), gts[g].interval()) >= tiou) adj[i].push_back(g);
    }
  }
  std::vector<std::ptrdiff_t> owner(gts.size(), -1);
  std::vector<std::uint8_t> visited;
  std::function<bool(std::size_t)> augment = [&](std::size_t i) {
    for (std::size_t g : adj[i]) {
      if (visited[g]) continue;
      visited[g] = 1;
      if (owner[g] < 0 || augment(static_cast<std::size_t>(owner[g]))) {
        owner[g] = static_cast<std::ptrdiff_t>(i);
        return true;
      }
    }
    return false;
  };
  std::vector<std::size_t> counts(limit, 0);
  std::size_t matched = 0;
  for (std::size_t i = 0; i < limit; ++i) {
    if (i < k) {
      visited.assign(gts.size(), 0);
      if (augment(i)) ++matched;
    }
    counts[i] = matched;
  }
  return counts;
}

inline std::size_t total_gts(const std::vector<VideoResult>& videos) {
  std::size_t n = 0;
  for (const auto& v : videos) n += v.gts.size();
  return n;
}

}  // namespace detail

/// Fraction of all ground truths (pooled over videos) matched one-to-one by
/// some proposal among their video's top-an at IoU >= tiou.
inline double recall_at(const std::vector<VideoResult>& videos, double tiou, std::size_t an) {
  if (an < 1) throw Error(ErrorKind::invalid_input, "AN must be >= 1");
  const std::size_t total = detail::total_gts(videos);
  if (total == 0) throw Error(ErrorKind::undefined_metric, "no ground-truth actions");
  std::size_t matched = 0;
  for (const auto& v : videos) matched += detail::prefix_matches(ranked(v.proposals), v.gts, tiou, an).back();
  return static_cast<double>(matched) / static_cast<double>(total);
}

inline std::vector<double> tiou_thresholds(const std::string& preset) {
  std::size_t steps = 0;
  if (preset == "activitynet") {
    steps = 10;
  } else if (preset == "thumos") {
    steps = 11;
  } else {
    throw Error(ErrorKind::configuration, "unknown metric preset '" + preset + "'");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < steps; ++i) out.push_back(static_cast<double>(50 + 5 * i) / 100.0);
  return out;
}

inline std::vector<std::size_t> default_an_values() {
  std::vector<std::size_t> out(100);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i + 1;
  return out;
}

struct EvalResult {
  std::vector<double> thresholds;
  std::vector<std::size_t> an_values;
  std::vector<std::vector<double>> per_tiou_recall;  // [threshold][an]
  std::map<std::size_t, double> ar_at_an;
  double auc = 0.0;
  std::size_t num_videos = 0;
  std::size_t num_gts = 0;

  bool operator==(const EvalResult&) const = default;
};

/// AR(an) is the mean recall over thresholds. AUC is 100 times the
/// trapezoidal area under AR over the AN grid, divided by the AN range.
inline EvalResult evaluate(const std::vector<VideoResult>& videos, const std::vector<double>& thresholds,
                           const std::vector<std::size_t>& an_values = default_an_values()) {
  if (thresholds.empty() || an_values.empty()) throw Error(ErrorKind::invalid_input, "empty threshold or AN grid");
  if (!std::is_sorted(an_values.begin(), an_values.end()) || an_values.front() < 1 ||
      std::adjacent_find(an_values.begin(), an_values.end()) != an_values.end()) {
    throw Error(ErrorKind::invalid_input, "AN values must be strictly increasing and >= 1");
  }
  const std::size_t total = detail::total_gts(videos);
  if (total == 0) throw Error(ErrorKind::undefined_metric, "no ground-truth actions");

  // Accumulate over videos sorted by id so the result is independent of
  // corpus order.
  std::vector<const VideoResult*> order;
  for (const auto& v : videos) order.push_back(&v);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->video_id < b->video_id; });

  EvalResult r;
  r.thresholds = thresholds;
  r.an_values = an_values;
  r.num_videos = videos.size();
  r.num_gts = total;
  const std::size_t limit = an_values.back();
  std::vector<std::vector<std::size_t>> matched(thresholds.size(), std::vector<std::size_t>(an_values.size(), 0));
  for (const auto* v : order) {
    const auto props = ranked(v->proposals);
    for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
      const auto counts = detail::prefix_matches(props, v->gts, thresholds[ti], limit);
      for (std::size_t ai = 0; ai < an_values.size(); ++ai) matched[ti][ai] += counts[an_values[ai] - 1];
    }
  }
  r.per_tiou_recall.assign(thresholds.size(), std::vector<double>(an_values.size()));
  std::vector<double> ar(an_values.size(), 0.0);
  for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
    for (std::size_t ai = 0; ai < an_values.size(); ++ai) {
      r.per_tiou_recall[ti][ai] = static_cast<double>(matched[ti][ai]) / static_cast<double>(total);
      ar[ai] += r.per_tiou_recall[ti][ai];
    }
  }
  for (std::size_t ai = 0; ai < an_values.size(); ++ai) {
    ar[ai] /= static_cast<double>(thresholds.size());
    r.ar_at_an[an_values[ai]] = ar[ai];
  }
  if (an_values.size() == 1) {
    r.auc = 100.0 * ar[0];
  } else {
    double area = 0.0;
    for (std::size_t ai = 1; ai < an_values.size(); ++ai) {
      area += 0.5 * (ar[ai] + ar[ai - 1]) * static_cast<double>(an_values[ai] - an_values[ai - 1]);
    }
    r.auc = 100.0 * area / static_cast<double>(an_values.back() - an_values.front());
  }
  return r;
}

struct SplitResult {
  std::optional<EvalResult> seen;
  std::optional<EvalResult> unseen;
  std::size_t seen_gts = 0;
  std::size_t unseen_gts = 0;
  std::vector<std::string> conflicting;  // labels in both sets; excluded
  std::vector<std::string> unassigned;   // labels in neither set; excluded
};

/// Seen/Unseen protocol: a video joins a partition when any of its labels is
/// in that partition's set; each partition is evaluated on its own. An empty
/// partition yields an absent result.
inline SplitResult split_eval(const std::vector<VideoResult>& videos, const std::set<std::string>& seen_labels,
                              const std::set<std::string>& unseen_labels, const std::vector<double>& thresholds,
                              const std::vector<std::size_t>& an_values = default_an_values()) {
  for (const auto& l : seen_labels) {
    if (unseen_labels.count(l)) throw Error(ErrorKind::invalid_input, "label '" + l + "' is in both sets");
  }
  SplitResult out;
  std::vector<VideoResult> seen, unseen;
  for (const auto& v : videos) {
    bool in_seen = false, in_unseen = false;
    for (const auto& g : v.gts) {
      in_seen = in_seen || seen_labels.count(g.label) > 0;
      in_unseen = in_unseen || unseen_labels.count(g.label) > 0;
    }
    if (in_seen && in_unseen) {
      out.conflicting.push_back(v.video_id);
    } else if (in_seen) {
      seen.push_back(v);
    } else if (in_unseen) {
      unseen.push_back(v);
    } else {
      out.unassigned.push_back(v.video_id);
    }
  }
  out.seen_gts = detail::total_gts(seen);
  out.unseen_gts = detail::total_gts(unseen);
  if (out.seen_gts > 0) out.seen = evaluate(seen, thresholds, an_values);
  if (out.unseen_gts > 0) out.unseen = evaluate(unseen, thresholds, an_values);
  return out;
}

inline nlohmann::ordered_json eval_to_json(const EvalResult& r) {
  nlohmann::ordered_json j;
  j["num_videos"] = r.num_videos;
  j["num_gts"] = r.num_gts;
  j["auc"] = r.auc;
  j["thresholds"] = r.thresholds;
  j["an_values"] = r.an_values;
  auto ar = nlohmann::ordered_json::object();
  for (const auto& [an, v] : r.ar_at_an) ar[std::to_string(an)] = v;
  j["ar_at_an"] = std::move(ar);
  j["per_tiou_recall"] = r.per_tiou_recall;
  return j;
}

/// Rows are AN values; columns are one recall per threshold, then AR.
inline std::string eval_to_csv(const EvalResult& r) {
  std::ostringstream os;
  os << std::setprecision(12) << "an";
  for (double t : r.thresholds) os << ",tiou_" << std::fixed << std::setprecision(2) << t;
  os << ",mean\n" << std::defaultfloat << std::setprecision(12);
  for (std::size_t ai = 0; ai < r.an_values.size(); ++ai) {
    os << r.an_values[ai];
    for (std::size_t ti = 0; ti < r.thresholds.size(); ++ti) os << ',' << r.per_tiou_recall[ti][ai];
    os << ',' << r.ar_at_an.at(r.an_values[ai]) << '\n';
  }
  return os.str();
}

}  // namespace aen
