// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "aen/error.hpp"
#include "aen/supervision.hpp"
#include "aen/timeline.hpp"

namespace aen {

/// Candidate covering snippets [start_idx, end_idx). The end boundary pairs
/// with the end probability of snippet end_idx - 1, the last covered snippet.
struct Proposal {
  std::size_t start_idx = 0;
  std::size_t end_idx = 0;
  std::size_t duration = 0;
  double score = 0.0;
  double start_sec = 0.0;
  double end_sec = 0.0;

  Interval interval() const noexcept { return {start_sec, end_sec}; }
  bool operator==(const Proposal&) const = default;
};

struct PeakConfig {
  double peak_ratio = 0.5;
  bool local_max_only = false;
};

struct SoftNmsConfig {
  double sigma = 0.4;
  double score_floor = 0.001;
  std::size_t top_k = 100;
};

struct InferenceConfig {
  PeakConfig peaks;
  SoftNmsConfig nms;
};

/// Indices that are local maxima (a plateau contributes its first index;
/// missing neighbors count as -inf) or reach peak_ratio * max(p).
inline std::vector<std::size_t> find_peaks(std::span<const double> p, const PeakConfig& cfg = {}) {
  if (p.empty()) throw Error(ErrorKind::invalid_input, "find_peaks needs at least one value");
  const std::size_t n = p.size();
  std::vector<std::uint8_t> keep(n, 0);
  for (std::size_t a = 0; a < n;) {
    std::size_t b = a;
    while (b + 1 < n && p[b + 1] == p[a]) ++b;
    const bool left = a == 0 || p[a] > p[a - 1];
    const bool right = b + 1 == n || p[a] > p[b + 1];
    if (left && right) keep[a] = 1;
    a = b + 1;
  }
  if (!cfg.local_max_only) {
    const double top = *std::max_element(p.begin(), p.end());
    for (std::size_t i = 0; i < n; ++i) {
      if (p[i] >= cfg.peak_ratio * top) keep[i] = 1;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) out.push_back(i);
  }
  return out;
}

/// score = P_S[t_s] * P_E[t_e - 1] * sqrt(P_cc[d, t_s] * P_cr[d, t_s]),
/// d = t_e - t_s in snippets.
inline double proposal_score(const ScoreGrids& g, std::size_t start_idx, std::size_t end_idx) {
  const std::size_t d = end_idx - start_idx;
  return g.start_probs[start_idx] * g.end_probs[end_idx - 1] *
         std::sqrt(g.conf_cls(d - 1, start_idx) * g.conf_reg(d - 1, start_idx));
}

inline bool ranks_before(const Proposal& a, const Proposal& b) {
  if (a.score != b.score) return a.score > b.score;
  return std::tie(a.start_idx, a.end_idx) < std::tie(b.start_idx, b.end_idx);
}

/// Pairs each start peak with every end peak at or after it whose span lies
/// within [1, max_dur] snippets. Sorted by score, then (start, end).
inline std::vector<Proposal> form_proposals(std::span<const std::size_t> start_peaks,
                                            std::span<const std::size_t> end_peaks, const ScoreGrids& g,
                                            const SnippetGrid& grid, std::size_t max_dur) {
  const std::size_t t = g.num_snippets();
  max_dur = std::min(max_dur, g.max_duration());
  std::vector<Proposal> out;
  for (std::size_t s : start_peaks) {
    for (std::size_t e : end_peaks) {
      if (s >= t || e >= t) throw Error(ErrorKind::invalid_input, "peak index outside the grid");
      const std::size_t end_idx = e + 1;
      if (end_idx <= s || end_idx - s > max_dur) continue;
      const Interval span = grid.span(s, end_idx - s);
      out.push_back({s, end_idx, end_idx - s, proposal_score(g, s, end_idx), span.start, span.end});
    }
  }
  std::sort(out.begin(), out.end(), ranks_before);
  return out;
}

/// Gaussian Soft-NMS: repeatedly take the best remaining proposal and decay
/// the rest by exp(-iou^2 / sigma). Stops at top_k selections or when every
/// remaining score is below score_floor.
inline std::vector<Proposal> soft_nms(std::vector<Proposal> remaining, const SoftNmsConfig& cfg = {}) {
  if (!(cfg.sigma > 0.0)) throw Error(ErrorKind::invalid_input, "soft-NMS sigma must be positive");
  std::vector<Proposal> kept;
  while (!remaining.empty() && kept.size() < cfg.top_k) {
    auto best = std::min_element(remaining.begin(), remaining.end(), ranks_before);
    if (best->score < cfg.score_floor) break;
    const Proposal chosen = *best;
    remaining.erase(best);
    for (auto& p : remaining) {
      const double iou = temporal_iou(chosen.interval(), p.interval());
      p.score *= std::exp(-(iou * iou) / cfg.sigma);
    }
    kept.push_back(chosen);
  }
  return kept;
}

inline std::vector<Proposal> infer(const ScoreGrids& g, const SnippetGrid& grid, const InferenceConfig& cfg = {}) {
  validate(g);
  if (g.num_snippets() != grid.size()) throw Error(ErrorKind::invalid_input, "score grids do not match the grid");
  const auto starts = find_peaks(g.start_probs, cfg.peaks);
  const auto ends = find_peaks(g.end_probs, cfg.peaks);
  return soft_nms(form_proposals(starts, ends, g, grid, g.max_duration()), cfg.nms);
}

/// Interchange format: [{t_start_sec, t_end_sec, score}, ...] by score.
inline nlohmann::ordered_json proposals_to_json(const std::vector<Proposal>& props) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : props) {
    arr.push_back({{"t_start_sec", p.start_sec}, {"t_end_sec", p.end_sec}, {"score", p.score}});
  }
  return arr;
}

}  // namespace aen
