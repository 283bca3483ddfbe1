#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ntssl/data_model.hpp"

namespace ntssl {

enum class ChainBy { iou, track };

struct BuilderConfig {
  double iou_threshold = 0.1;
  std::size_t subsample_stride = 4;
  std::size_t tracklet_length = 8;
  // `track` links consecutive detections by polyp_id instead of box overlap.
  ChainBy chain_by = ChainBy::iou;

  void validate() const;
};

using DetectionChain = std::vector<Detection>;

double iou(const BoundingBox& a, const BoundingBox& b);

/// Splits a (video_id, frame_index)-sorted stream into chains of consecutive
/// overlapping detections. Throws UsageError on unsorted input.
std::vector<DetectionChain> chain_detections(std::span<const Detection> stream, const BuilderConfig& cfg);

/// Subsamples a chain and cuts it into non-overlapping windows of exactly
/// tracklet_length frames. Tracklet ids are left empty for the caller.
std::vector<Tracklet> windows(const DetectionChain& chain, const BuilderConfig& cfg);

/// chain_detections + windows over a whole stream, assigning ids
/// "<video_id>/t<counter>" in stream order.
std::vector<Tracklet> build_tracklets(std::span<const Detection> stream, const BuilderConfig& cfg);

}  // namespace ntssl
