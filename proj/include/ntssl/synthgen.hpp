#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ntssl/data_model.hpp"
#include "ntssl/tracklet_builder.hpp"

namespace ntssl {

/// Procedural colonoscopy-like video model.
///
/// Each video visits its polyps one after another. A polyp p owns a latent
/// appearance a_p drawn uniformly on the unit sphere; each frame shows
/// a_p + drift_scale * D(t) + noise_scale * eps, where D is a per-video random
/// walk confined to the trailing drift_fraction of the coordinates (an
/// illumination/viewpoint nuisance shared by temporally adjacent frames) and
/// eps ~ N(0, I/d_in). size_class and histology_class are the signs of
/// coordinates 0 and 1 of a_p, which the drift never touches. attr_margin
/// pushes those two coordinates away from zero (|a| + margin, then the
/// latent is renormalized) so the classes are separated.
struct SynthConfig {
  std::size_t num_videos = 20;
  std::size_t polyps_per_video = 5;
  std::size_t encounters_per_polyp = 2;
  std::size_t frames_per_encounter = 128;
  std::size_t gap_frames = 48;
  double overlap_prob = 0.3;
  std::size_t d_in = 32;
  double drift_scale = 0.02;
  double noise_scale = 1.2;
  double drift_fraction = 0.5;
  double attr_margin = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

std::vector<Detection> generate_stream(const SynthConfig& cfg);

/// generate_stream + build_tracklets, with ground-truth polyp ids and
/// attributes attached. Throws UsageError("no tracklets produced").
TrackletDataset generate_dataset(const SynthConfig& cfg, const BuilderConfig& builder = {});

}  // namespace ntssl
