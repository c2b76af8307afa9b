// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "aen/error.hpp"

namespace aen {

/// Frame-level description of one untrimmed video. Timestamps everywhere in
/// the library are seconds.
struct VideoMeta {
  std::string video_id;
  std::int64_t num_frames = 0;
  double fps = 0.0;
  std::int64_t snippet_len = 0;
  double duration_seconds = 0.0;

  /// Fills duration_seconds from num_frames / fps.
  static VideoMeta make(std::string id, std::int64_t frames, double fps, std::int64_t snippet_len) {
    VideoMeta m{std::move(id), frames, fps, snippet_len, 0.0};
    m.duration_seconds = static_cast<double>(frames) / fps;
    return m;
  }

  bool operator==(const VideoMeta&) const = default;
};

inline void validate(const VideoMeta& meta) {
  if (meta.num_frames <= 0) throw Error(ErrorKind::invalid_input, "num_frames must be positive");
  if (!(meta.fps > 0.0) || !std::isfinite(meta.fps)) throw Error(ErrorKind::invalid_input, "fps must be positive");
  if (meta.snippet_len <= 0) throw Error(ErrorKind::invalid_input, "snippet_len must be positive");
  if (meta.num_frames < meta.snippet_len) {
    throw Error(ErrorKind::invalid_input, "num_frames must be >= snippet_len");
  }
  const double expected = static_cast<double>(meta.num_frames) / meta.fps;
  if (!(std::abs(meta.duration_seconds - expected) <= 1e-9 * expected)) {
    throw Error(ErrorKind::invalid_input, "duration_seconds must equal num_frames / fps");
  }
}

struct Interval {
  double start = 0.0;
  double end = 0.0;

  double length() const noexcept { return end - start; }
  bool operator==(const Interval&) const = default;
};

struct GroundTruthAction {
  std::string label;
  double start_sec = 0.0;
  double end_sec = 0.0;

  Interval interval() const noexcept { return {start_sec, end_sec}; }
  bool operator==(const GroundTruthAction&) const = default;
};

/// Non-overlapping snippets of snippet_len frames; trailing frames that do
/// not fill a whole snippet are dropped.
class SnippetGrid {
 public:
  SnippetGrid() = default;

  std::size_t size() const noexcept { return centers_.size(); }
  const std::vector<double>& centers() const noexcept { return centers_; }
  double center(std::size_t i) const { return centers_.at(i); }

  /// Seconds covered by one snippet.
  double snippet_seconds() const noexcept { return static_cast<double>(snippet_len_) / fps_; }

  /// Left edge of snippet i; i == size() gives the right edge of the last one.
  double edge(std::size_t i) const noexcept { return static_cast<double>(snippet_len_) * static_cast<double>(i) / fps_; }

  /// Interval of the candidate covering snippets [start, start + duration).
  Interval span(std::size_t start, std::size_t duration) const noexcept {
    return {edge(start), edge(start + duration)};
  }

  std::int64_t snippet_len() const noexcept { return snippet_len_; }
  double fps() const noexcept { return fps_; }

 private:
  friend SnippetGrid build_grid(const VideoMeta& meta);

  std::vector<double> centers_;
  std::int64_t snippet_len_ = 0;
  double fps_ = 1.0;
};

inline SnippetGrid build_grid(const VideoMeta& meta) {
  if (meta.snippet_len <= 0 || !(meta.fps > 0.0)) {
    throw Error(ErrorKind::invalid_input, "snippet_len and fps must be positive");
  }
  const std::int64_t count = meta.num_frames / meta.snippet_len;
  if (count <= 0) throw Error(ErrorKind::invalid_input, "video shorter than one snippet");

  SnippetGrid grid;
  grid.snippet_len_ = meta.snippet_len;
  grid.fps_ = meta.fps;
  grid.centers_.resize(static_cast<std::size_t>(count));
  const auto delta = static_cast<double>(meta.snippet_len);
  for (std::int64_t i = 0; i < count; ++i) {
    grid.centers_[static_cast<std::size_t>(i)] = delta * (static_cast<double>(i) + 0.5) / meta.fps;
  }
  return grid;
}

/// Intersection over union of two time intervals.
inline double temporal_iou(const Interval& a, const Interval& b) {
  if (!(a.end > a.start) || !(b.end > b.start)) {
    throw Error(ErrorKind::invalid_input, "temporal_iou requires positive-length intervals");
  }
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = a.length() + b.length() - inter;
  return inter / uni;
}

}  // namespace aen
