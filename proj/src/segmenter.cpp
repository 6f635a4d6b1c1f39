#include "streamweave/segmenter.hpp"

#include <string>
#include <utility>

namespace streamweave {

void SegmenterConfig::validate() const {
  if (mode == SegmentMode::Scene) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
      throw Error(ErrorCode::InvalidConfig, "segmenter.threshold must lie in (0,1)");
    }
    if (exclusion_window < 1) {
      throw Error(ErrorCode::InvalidConfig, "segmenter.exclusion_window must be >= 1");
    }
  }
  if (min_frames < 1) throw Error(ErrorCode::InvalidConfig, "segmenter.min_frames must be >= 1");
  if (max_frames < min_frames) {
    throw Error(ErrorCode::InvalidConfig, "segmenter.max_frames must be >= segmenter.min_frames");
  }
  if (uniform_frames < 1) {
    throw Error(ErrorCode::InvalidConfig, "segmenter.uniform_frames must be >= 1");
  }
}

ClipFeature make_clip_feature(Clip clip, std::span<const Vec> frames) {
  if (frames.empty()) throw Error(ErrorCode::EmptyInput, "clip without frames");
  const std::vector<Vec> compressed = compress_adjacent(frames);
  ClipFeature out;
  out.clip = clip;
  out.feature = mean_pool(compressed);
  // Antipodal frames can cancel out; fall back to the first frame's direction.
  out.indicator = norm(out.feature) >= kZeroNorm ? l2_normalize(out.feature) : frames.front();
  return out;
}

SceneSegmenter::SceneSegmenter(SegmenterConfig cfg, std::int64_t frame_period_ms)
    : cfg_(cfg), frame_period_ms_(frame_period_ms) {
  cfg_.validate();
  if (frame_period_ms_ <= 0) throw Error(ErrorCode::InvalidConfig, "frame period must be > 0");
}

ClipFeature SceneSegmenter::close_clip(std::int64_t end_ms) {
  Clip clip{next_clip_++, pending_start_ms_, end_ms, pending_.size(), pending_first_frame_};
  ClipFeature cf = make_clip_feature(clip, pending_);
  pending_.clear();
  return cf;
}

std::optional<ClipFeature> SceneSegmenter::push_frame(FrameEmbedding frame) {
  if (last_t_ms_ && frame.t_ms <= *last_t_ms_) {
    throw Error(ErrorCode::NonMonotonicTimestamp, "frame at " + std::to_string(frame.t_ms) +
                                                      " ms after " +
                                                      std::to_string(*last_t_ms_) + " ms");
  }
  Vec unit = l2_normalize(frame.vec);
  const std::size_t k = frames_seen_;

  bool cut = false;
  if (!pending_.empty()) {
    if (cfg_.mode == SegmentMode::Uniform) {
      cut = pending_.size() >= cfg_.uniform_frames;
    } else {
      last_similarity_ = cosine_sim(pending_.back(), unit);
      const bool outside_exclusion =
          !last_boundary_frame_ || k - *last_boundary_frame_ >= cfg_.exclusion_window;
      if (*last_similarity_ < cfg_.threshold && pending_.size() >= cfg_.min_frames &&
          outside_exclusion) {
        cut = true;
        last_boundary_frame_ = k;
        boundary_frames_.push_back(k);
      } else if (pending_.size() >= cfg_.max_frames) {
        cut = true;
      }
    }
  }

  std::optional<ClipFeature> emitted;
  if (cut) emitted = close_clip(frame.t_ms);
  if (pending_.empty()) {
    pending_start_ms_ = frame.t_ms;
    pending_first_frame_ = k;
  }
  pending_.push_back(std::move(unit));
  last_t_ms_ = frame.t_ms;
  ++frames_seen_;
  return emitted;
}

std::optional<ClipFeature> SceneSegmenter::finalize() {
  if (pending_.empty()) return std::nullopt;
  return close_clip(*last_t_ms_ + frame_period_ms_);
}

std::vector<ClipFeature> segment_offline(std::span<const FrameEmbedding> frames,
                                         const SegmenterConfig& cfg,
                                         std::int64_t frame_period_ms) {
  cfg.validate();
  std::vector<ClipFeature> clips;
  if (frames.empty()) return clips;

  std::vector<Vec> unit;
  unit.reserve(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (k > 0 && frames[k].t_ms <= frames[k - 1].t_ms) {
      throw Error(ErrorCode::NonMonotonicTimestamp,
                  "frame " + std::to_string(k) + " is not after its predecessor");
    }
    unit.push_back(l2_normalize(frames[k].vec));
  }
  std::vector<double> similarity(frames.size(), 1.0);
  for (std::size_t k = 1; k < frames.size(); ++k) similarity[k] = cosine_sim(unit[k - 1], unit[k]);

  // Cut positions: each entry is the first frame of a new clip.
  std::vector<std::size_t> cuts;
  std::size_t clip_start = 0;
  bool have_boundary = false;
  std::size_t last_boundary = 0;
  for (std::size_t k = 1; k < frames.size(); ++k) {
    const std::size_t open = k - clip_start;
    bool cut = false;
    if (cfg.mode == SegmentMode::Uniform) {
      cut = open >= cfg.uniform_frames;
    } else if (similarity[k] < cfg.threshold && open >= cfg.min_frames &&
               (!have_boundary || k - last_boundary >= cfg.exclusion_window)) {
      cut = true;
      have_boundary = true;
      last_boundary = k;
    } else {
      cut = open >= cfg.max_frames;
    }
    if (cut) {
      cuts.push_back(k);
      clip_start = k;
    }
  }
  cuts.push_back(frames.size());

  std::size_t begin = 0;
  for (std::size_t end : cuts) {
    const std::int64_t end_ms =
        end < frames.size() ? frames[end].t_ms : frames.back().t_ms + frame_period_ms;
    Clip clip{clips.size(), frames[begin].t_ms, end_ms, end - begin, begin};
    clips.push_back(make_clip_feature(
        clip, std::span<const Vec>(unit).subspan(begin, end - begin)));
    begin = end;
  }
  return clips;
}

}  // namespace streamweave
