#include "ntssl/tracklet_builder.hpp"

#include <algorithm>
#include <map>

#include "ntssl/error.hpp"

namespace ntssl {

void BuilderConfig::validate() const {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) throw UsageError("builder: iou_threshold must be in [0,1]");
  if (subsample_stride < 1) throw UsageError("builder: subsample_stride must be >= 1");
  if (tracklet_length < 1) throw UsageError("builder: tracklet_length must be >= 1");
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

namespace {

bool links(const Detection& prev, const Detection& next, const BuilderConfig& cfg) {
  if (next.frame_index != prev.frame_index + 1) return false;
  if (cfg.chain_by == ChainBy::track) return prev.polyp_id.has_value() && prev.polyp_id == next.polyp_id;
  return iou(prev.box, next.box) >= cfg.iou_threshold;
}

}  // namespace

std::vector<DetectionChain> chain_detections(std::span<const Detection> stream, const BuilderConfig& cfg) {
  cfg.validate();
  // Per-video chaining; videos may be interleaved in the input.
  std::map<std::string, std::size_t> open;  // video_id -> index of its open chain
  std::vector<DetectionChain> chains;
  for (const Detection& d : stream) {
    auto it = open.find(d.video_id);
    if (it != open.end()) {
      DetectionChain& chain = chains[it->second];
      const Detection& prev = chain.back();
      if (d.frame_index <= prev.frame_index) {
        throw UsageError("chain_detections: stream not sorted by frame_index within video '" + d.video_id + "'");
      }
      if (links(prev, d, cfg)) {
        chain.push_back(d);
        continue;
      }
    }
    open[d.video_id] = chains.size();
    chains.push_back({d});
  }
  return chains;
}

std::vector<Tracklet> windows(const DetectionChain& chain, const BuilderConfig& cfg) {
  cfg.validate();
  std::vector<const Detection*> retained;
  for (std::size_t i = 0; i < chain.size(); i += cfg.subsample_stride) retained.push_back(&chain[i]);

  const std::size_t L = cfg.tracklet_length;
  std::vector<Tracklet> out;
  for (std::size_t start = 0; start + L <= retained.size(); start += L) {
    const std::size_t d_in = retained[start]->features.size();
    std::vector<double> data;
    data.reserve(L * d_in);
    for (std::size_t t = 0; t < L; ++t) {
      const auto& f = retained[start + t]->features;
      if (f.size() != d_in) throw UsageError("windows: inconsistent feature dimension within chain");
      data.insert(data.end(), f.begin(), f.end());
    }
    Tracklet tr;
    tr.video_id = retained[start]->video_id;
    tr.position = retained[start]->frame_index;
    tr.frames = Tensor({L, d_in}, std::move(data));
    tr.polyp_id = retained[start]->polyp_id;
    out.push_back(std::move(tr));
  }
  return out;
}

std::vector<Tracklet> build_tracklets(std::span<const Detection> stream, const BuilderConfig& cfg) {
  std::vector<Tracklet> out;
  std::map<std::string, std::size_t> counters;
  for (const DetectionChain& chain : chain_detections(stream, cfg)) {
    for (Tracklet& t : windows(chain, cfg)) {
      t.tracklet_id = t.video_id + "/t" + std::to_string(counters[t.video_id]++);
      out.push_back(std::move(t));
    }
  }
  return out;
}

}  // namespace ntssl
