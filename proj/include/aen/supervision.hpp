// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aen/error.hpp"
#include "aen/linalg.hpp"
#include "aen/timeline.hpp"

namespace aen {

/// Duration matrices are [D, T]: row d - 1 holds candidates lasting d
/// snippets, column j the starting snippet. Cell (d, j) is valid iff j + d <= T.
using Mask = std::vector<std::uint8_t>;

enum class DurationPolicy { full, half };

/// Maximum proposal length D in snippets: T for `full`, floor(T/2) for
/// `half` (never below 1).
inline std::size_t max_duration(std::size_t num_snippets, DurationPolicy policy) {
  if (num_snippets == 0) throw Error(ErrorKind::invalid_input, "no snippets");
  return policy == DurationPolicy::full ? num_snippets : std::max<std::size_t>(1, num_snippets / 2);
}

inline Mask valid_cell_mask(std::size_t num_snippets, std::size_t max_dur) {
  Mask mask(max_dur * num_snippets, 0);
  for (std::size_t d = 1; d <= max_dur; ++d) {
    for (std::size_t j = 0; j + d <= num_snippets; ++j) mask[(d - 1) * num_snippets + j] = 1;
  }
  return mask;
}

struct LabelSet {
  Vec starts;
  Vec ends;
  Matrix durations;  // [D, T]
  std::size_t max_duration = 0;
};

/// Network outputs consumed at inference: boundary probabilities and the two
/// duration confidence maps.
struct ScoreGrids {
  Vec start_probs;
  Vec end_probs;
  Matrix conf_cls;  // [D, T]
  Matrix conf_reg;  // [D, T]

  std::size_t num_snippets() const noexcept { return start_probs.size(); }
  std::size_t max_duration() const noexcept { return conf_cls.rows; }
};

inline void validate(const ScoreGrids& g) {
  const std::size_t t = g.start_probs.size();
  if (t == 0) throw Error(ErrorKind::invalid_input, "score grids are empty");
  if (g.end_probs.size() != t || g.conf_cls.cols != t || g.conf_reg.cols != t || g.conf_reg.rows != g.conf_cls.rows ||
      g.conf_cls.rows == 0 || g.conf_cls.rows > t) {
    throw Error(ErrorKind::invalid_input, "score grid shapes are inconsistent");
  }
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  for (std::size_t i = 0; i < t; ++i) {
    if (!in_unit(g.start_probs[i]) || !in_unit(g.end_probs[i])) {
      throw Error(ErrorKind::invalid_input, "boundary probability outside [0,1]");
    }
  }
  const Mask mask = valid_cell_mask(t, g.conf_cls.rows);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double a = g.conf_cls.data[i];
    const double b = g.conf_reg.data[i];
    if (!in_unit(a) || !in_unit(b)) throw Error(ErrorKind::invalid_input, "confidence outside [0,1]");
    if (!mask[i] && (a != 0.0 || b != 0.0)) throw Error(ErrorKind::invalid_input, "confidence set on invalid cell");
  }
}

/// Grids that put probability 1 exactly on labeled cells.
inline ScoreGrids oracle_grids(const LabelSet& labels) {
  return {labels.starts, labels.ends, labels.durations, labels.durations};
}

struct BoundaryLabels {
  Vec starts;
  Vec ends;
  std::size_t warnings = 0;
};

namespace detail {

inline std::size_t nearest_center(const SnippetGrid& grid, double t) {
  std::size_t best = 0;
  double best_dist = std::abs(grid.center(0) - t);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double d = std::abs(grid.center(i) - t);
    if (d < best_dist) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

}  // namespace detail

/// Marks the snippet whose center is nearest each ground-truth start (end);
/// equidistant snippets resolve to the earlier one. An empty annotation list
/// yields all-zero labels and one warning.
inline BoundaryLabels gen_boundary_labels(const SnippetGrid& grid, const std::vector<GroundTruthAction>& gts) {
  BoundaryLabels out{Vec(grid.size(), 0.0), Vec(grid.size(), 0.0), 0};
  if (gts.empty()) {
    out.warnings = 1;
    return out;
  }
  for (const auto& gt : gts) {
    out.starts[detail::nearest_center(grid, gt.start_sec)] = 1.0;
    out.ends[detail::nearest_center(grid, gt.end_sec)] = 1.0;
  }
  return out;
}

/// How "maximum IoU" is scoped when labeling duration cells.
enum class LocalMaxRule {
  per_gt_global,  // every cell attaining a ground truth's best IoU
  duration_axis,  // per ground truth and start snippet, best duration
  start_axis,     // per ground truth and duration, best start snippet
};

inline Matrix gen_duration_labels(const SnippetGrid& grid, const std::vector<GroundTruthAction>& gts,
                                  std::size_t max_dur, LocalMaxRule rule = LocalMaxRule::per_gt_global) {
  const std::size_t t = grid.size();
  if (max_dur < 1 || max_dur > t) throw Error(ErrorKind::invalid_input, "max duration must lie in [1, T]");
  Matrix labels(max_dur, t);
  Matrix iou(max_dur, t);
  for (const auto& gt : gts) {
    const Interval target = gt.interval();
    for (std::size_t d = 1; d <= max_dur; ++d) {
      for (std::size_t j = 0; j + d <= t; ++j) iou(d - 1, j) = temporal_iou(grid.span(j, d), target);
    }
    auto mark_best = [&](auto&& cells) {
      double best = 0.0;
      for (auto [d, j] : cells) best = std::max(best, iou(d - 1, j));
      if (best <= 0.0) return;
      for (auto [d, j] : cells) {
        if (iou(d - 1, j) == best) labels(d - 1, j) = 1.0;
      }
    };
    using Cell = std::pair<std::size_t, std::size_t>;
    switch (rule) {
      case LocalMaxRule::per_gt_global: {
        std::vector<Cell> cells;
        for (std::size_t d = 1; d <= max_dur; ++d) {
          for (std::size_t j = 0; j + d <= t; ++j) cells.emplace_back(d, j);
        }
        mark_best(cells);
        break;
      }
      case LocalMaxRule::duration_axis:
        for (std::size_t j = 0; j < t; ++j) {
          std::vector<Cell> cells;
          for (std::size_t d = 1; d <= max_dur && j + d <= t; ++d) cells.emplace_back(d, j);
          mark_best(cells);
        }
        break;
      case LocalMaxRule::start_axis:
        for (std::size_t d = 1; d <= max_dur; ++d) {
          std::vector<Cell> cells;
          for (std::size_t j = 0; j + d <= t; ++j) cells.emplace_back(d, j);
          mark_best(cells);
        }
        break;
    }
  }
  return labels;
}

inline LabelSet gen_labels(const SnippetGrid& grid, const std::vector<GroundTruthAction>& gts, std::size_t max_dur,
                           LocalMaxRule rule = LocalMaxRule::per_gt_global) {
  auto b = gen_boundary_labels(grid, gts);
  return {std::move(b.starts), std::move(b.ends), gen_duration_labels(grid, gts, max_dur, rule), max_dur};
}

struct LossConfig {
  double lambda_reg = 10.0;
  double lambda_1 = 1.0;
  double lambda_2 = 1.0;
  double clamp_eps = 1e-12;
};

namespace detail {

inline void check_shapes(std::span<const double> p, std::span<const double> l, std::span<const std::uint8_t> mask) {
  if (p.size() != l.size() || (!mask.empty() && mask.size() != p.size())) {
    throw Error(ErrorKind::invalid_input, "prediction, label and mask shapes differ");
  }
}

inline bool included(std::span<const std::uint8_t> mask, std::size_t i) { return mask.empty() || mask[i] != 0; }

struct BinaryCounts {
  double n = 0, pos = 0, neg = 0;
  double alpha_pos() const { return n / pos; }
  double alpha_neg() const { return n / neg; }
};

inline BinaryCounts binary_counts(std::span<const double> l, std::span<const std::uint8_t> mask) {
  BinaryCounts c;
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (!included(mask, i)) continue;
    c.n += 1;
    (l[i] > 0.5 ? c.pos : c.neg) += 1;
  }
  if (c.pos == 0 || c.neg == 0) {
    throw Error(ErrorKind::degenerate_labels, "weighted binary loss needs positive and negative labels");
  }
  return c;
}

}  // namespace detail

/// Class-balanced negative log-likelihood:
///   -(1/N) * sum[a+ * l * log p + a- * (1 - l) * log(1 - p)],
/// a+ = N/N+, a- = N/N-, with p clamped to [eps, 1 - eps]. An empty mask
/// span means every entry is included.
inline double weighted_binary_loss(std::span<const double> p, std::span<const double> l,
                                   std::span<const std::uint8_t> mask = {}, double eps = 1e-12) {
  detail::check_shapes(p, l, mask);
  const auto c = detail::binary_counts(l, mask);
  const double ap = c.alpha_pos();
  const double an = c.alpha_neg();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!detail::included(mask, i)) continue;
    const double q = std::clamp(p[i], eps, 1.0 - eps);
    sum += ap * l[i] * std::log(q) + an * (1.0 - l[i]) * std::log1p(-q);
  }
  return -sum / c.n;
}

/// d(loss)/dp; zero for masked-out entries and inside the clamp zones.
inline Vec weighted_binary_loss_grad(std::span<const double> p, std::span<const double> l,
                                     std::span<const std::uint8_t> mask = {}, double eps = 1e-12) {
  detail::check_shapes(p, l, mask);
  const auto c = detail::binary_counts(l, mask);
  const double ap = c.alpha_pos();
  const double an = c.alpha_neg();
  Vec g(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!detail::included(mask, i) || p[i] < eps || p[i] > 1.0 - eps) continue;
    g[i] = -(ap * l[i] / p[i] - an * (1.0 - l[i]) / (1.0 - p[i])) / c.n;
  }
  return g;
}

inline double l2_loss(std::span<const double> p, std::span<const double> l, std::span<const std::uint8_t> mask = {}) {
  detail::check_shapes(p, l, mask);
  double n = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!detail::included(mask, i)) continue;
    n += 1;
    sum += (p[i] - l[i]) * (p[i] - l[i]);
  }
  if (n == 0) throw Error(ErrorKind::invalid_input, "l2 loss over an empty mask");
  return sum / n;
}

inline Vec l2_loss_grad(std::span<const double> p, std::span<const double> l, std::span<const std::uint8_t> mask = {}) {
  detail::check_shapes(p, l, mask);
  double n = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) n += detail::included(mask, i) ? 1 : 0;
  if (n == 0) throw Error(ErrorKind::invalid_input, "l2 loss over an empty mask");
  Vec g(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (detail::included(mask, i)) g[i] = 2.0 * (p[i] - l[i]) / n;
  }
  return g;
}

struct LossBreakdown {
  double start = 0, end = 0, conf_cls = 0, conf_reg = 0;
  double tem = 0, pem = 0, total = 0;
};

/// L = lambda_1 * (wb(P_S, L_S) + wb(P_E, L_E))
///   + lambda_2 * (wb(P_cc, L_D) + lambda_reg * L2(P_cr, L_D)),
/// with the duration terms restricted to valid cells.
inline LossBreakdown total_loss(const ScoreGrids& g, const LabelSet& labels, const LossConfig& cfg = {}) {
  const std::size_t t = g.num_snippets();
  if (labels.starts.size() != t || labels.ends.size() != t || g.end_probs.size() != t ||
      labels.durations.rows != g.conf_cls.rows || labels.durations.cols != t || g.conf_cls.cols != t ||
      g.conf_reg.rows != g.conf_cls.rows || g.conf_reg.cols != t) {
    throw Error(ErrorKind::invalid_input, "grids and labels disagree in shape");
  }
  const Mask mask = valid_cell_mask(t, g.conf_cls.rows);
  LossBreakdown b;
  b.start = weighted_binary_loss(g.start_probs, labels.starts, {}, cfg.clamp_eps);
  b.end = weighted_binary_loss(g.end_probs, labels.ends, {}, cfg.clamp_eps);
  b.conf_cls = weighted_binary_loss(g.conf_cls.data, labels.durations.data, mask, cfg.clamp_eps);
  b.conf_reg = l2_loss(g.conf_reg.data, labels.durations.data, mask);
  b.tem = b.start + b.end;
  b.pem = b.conf_cls + cfg.lambda_reg * b.conf_reg;
  b.total = cfg.lambda_1 * b.tem + cfg.lambda_2 * b.pem;
  return b;
}

}  // namespace aen
