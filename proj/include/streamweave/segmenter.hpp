#pragma once
// Online scene segmentation over a frame-embedding stream.
//
// A scene boundary is declared before frame k when the cosine similarity of
// frames k-1 and k drops below the threshold, the open clip already holds
// min_frames frames, and the previous boundary is at least exclusion_window
// frames back. The boundary frame opens the next clip. A clip is also cut
// when it reaches max_frames. Uniform mode cuts every uniform_frames frames
// and ignores threshold, exclusion window and max_frames.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "streamweave/vector_core.hpp"

namespace streamweave {

struct FrameEmbedding {
  std::int64_t t_ms = 0;
  Vec vec;
};

/// Half-open time span [start_ms, end_ms).
struct Clip {
  std::size_t index = 0;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::size_t frame_count = 0;
  std::size_t first_frame = 0;

  bool overlaps(std::int64_t start, std::int64_t end) const noexcept {
    return start_ms < end && start < end_ms;
  }
  friend bool operator==(const Clip&, const Clip&) = default;
};

struct ClipFeature {
  Clip clip;
  Vec feature;    // pooled clip representation
  Vec indicator;  // unit-norm retrieval key

  friend bool operator==(const ClipFeature&, const ClipFeature&) = default;
};

enum class SegmentMode { Scene, Uniform };

struct SegmenterConfig {
  SegmentMode mode = SegmentMode::Scene;
  double threshold = 0.85;
  std::size_t exclusion_window = 4;
  std::size_t min_frames = 4;
  std::size_t max_frames = 64;
  std::size_t uniform_frames = 16;

  /// Throws Error(InvalidConfig) when a field is out of range.
  void validate() const;
};

/// Builds F (compress_adjacent once, then mean_pool) and the indicator from
/// the frames of one clip.
ClipFeature make_clip_feature(Clip clip, std::span<const Vec> frames);

class SceneSegmenter {
 public:
  explicit SceneSegmenter(SegmenterConfig cfg, std::int64_t frame_period_ms = 1000);

  /// Ingests one frame (normalizing it); returns the clip closed by it, if any.
  std::optional<ClipFeature> push_frame(FrameEmbedding frame);

  /// Flushes pending frames as a final clip, possibly shorter than min_frames.
  std::optional<ClipFeature> finalize();

  const SegmenterConfig& config() const noexcept { return cfg_; }
  std::size_t frames_seen() const noexcept { return frames_seen_; }
  std::size_t clips_emitted() const noexcept { return next_clip_; }
  std::size_t pending_frames() const noexcept { return pending_.size(); }
  std::optional<double> last_similarity() const noexcept { return last_similarity_; }
  std::vector<std::size_t> boundary_frames() const { return boundary_frames_; }

 private:
  ClipFeature close_clip(std::int64_t end_ms);

  SegmenterConfig cfg_;
  std::int64_t frame_period_ms_;
  std::vector<Vec> pending_;
  std::int64_t pending_start_ms_ = 0;
  std::size_t pending_first_frame_ = 0;
  std::optional<std::int64_t> last_t_ms_;
  std::optional<std::size_t> last_boundary_frame_;
  std::optional<double> last_similarity_;
  std::vector<std::size_t> boundary_frames_;
  std::size_t frames_seen_ = 0;
  std::size_t next_clip_ = 0;
};

/// Batch reference for SceneSegmenter: precomputes the similarity series and
/// sweeps it once. Produces the same clips as push_frame + finalize.
std::vector<ClipFeature> segment_offline(std::span<const FrameEmbedding> frames,
                                         const SegmenterConfig& cfg,
                                         std::int64_t frame_period_ms = 1000);

}  // namespace streamweave
