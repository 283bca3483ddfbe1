#include "ntssl/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>

#include "ntssl/error.hpp"
#include "ntssl/rng.hpp"

namespace ntssl {

void SynthConfig::validate() const {
  if (num_videos < 1 || polyps_per_video < 1 || encounters_per_polyp < 1 || frames_per_encounter < 1 ||
      gap_frames < 1) {
    throw UsageError("synth: all counts must be >= 1");
  }
  if (!(overlap_prob >= 0.0 && overlap_prob <= 1.0)) throw UsageError("synth: overlap_prob must be in [0,1]");
  if (d_in < 2) throw UsageError("synth: d_in must be >= 2");
  if (!(drift_scale >= 0.0) || !(noise_scale >= 0.0)) throw UsageError("synth: scales must be >= 0");
  if (!(attr_margin >= 0.0)) throw UsageError("synth: attr_margin must be >= 0");
  if (!(drift_fraction >= 0.0 && drift_fraction <= 1.0)) throw UsageError("synth: drift_fraction must be in [0,1]");
}

namespace {

struct Polyp {
  std::string id;
  std::vector<double> latent;
  int size_class = 0;
  int histology_class = 0;
};

std::string video_name(std::size_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "v%03zu", v);
  return buf;
}

std::vector<double> unit_sphere(Rng& rng, std::size_t d) {
  std::vector<double> x(d);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& v : x) {
      v = rng.normal();
      norm2 += v * v;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : x) v *= inv;
  return x;
}

std::vector<Polyp> make_polyps(Rng& rng, const std::string& video, const SynthConfig& cfg) {
  std::vector<Polyp> polyps(cfg.polyps_per_video);
  for (std::size_t p = 0; p < polyps.size(); ++p) {
    polyps[p].id = video + "/p" + std::to_string(p);
    std::vector<double> a = unit_sphere(rng, cfg.d_in);
    if (cfg.attr_margin > 0.0) {
      for (std::size_t k = 0; k < 2; ++k) a[k] = std::copysign(std::abs(a[k]) + cfg.attr_margin, a[k]);
      double norm2 = 0.0;
      for (double v : a) norm2 += v * v;
      for (double& v : a) v /= std::sqrt(norm2);
    }
    polyps[p].latent = std::move(a);
    polyps[p].size_class = polyps[p].latent[0] > 0.0 ? 1 : 0;
    polyps[p].histology_class = polyps[p].latent[1] > 0.0 ? 1 : 0;
  }
  return polyps;
}

// Visit order of (polyp, encounter) blocks. An interleave inserts the first
// encounter of polyp p+1 right after the first encounter of polyp p.
std::vector<std::size_t> encounter_order(Rng& rng, const SynthConfig& cfg) {
  const std::size_t P = cfg.polyps_per_video;
  const std::size_t E = cfg.encounters_per_polyp;
  std::vector<std::size_t> remaining(P, E);
  std::vector<std::size_t> order;
  for (std::size_t p = 0; p < P; ++p) {
    const bool interleave = E >= 2 && p + 1 < P && remaining[p] == E && remaining[p + 1] == E &&
                            rng.bernoulli(cfg.overlap_prob);
    while (remaining[p] > 0) {
      order.push_back(p);
      --remaining[p];
      if (interleave && remaining[p] == E - 1) {
        order.push_back(p + 1);
        --remaining[p + 1];
      }
    }
  }
  return order;
}

}  // namespace

std::vector<Detection> generate_stream(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.d_in;
  const auto n_drift = std::min<std::size_t>(d - 2, static_cast<std::size_t>(std::lround(cfg.drift_fraction * d)));
  const std::size_t drift_begin = d - n_drift;
  const double drift_step = n_drift > 0 ? 1.0 / std::sqrt(static_cast<double>(n_drift)) : 0.0;
  const double noise_step = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<Detection> stream;
  for (std::size_t v = 0; v < cfg.num_videos; ++v) {
    Rng rng(mix_seed(cfg.seed, 0x5f3759df, v));
    const std::string video = video_name(v);
    const std::vector<Polyp> polyps = make_polyps(rng, video, cfg);
    std::vector<double> drift(d, 0.0);
    auto advance_drift = [&] {
      for (std::size_t k = drift_begin; k < d; ++k) drift[k] += drift_step * rng.normal();
    };

    std::int64_t frame = 0;
    for (std::size_t p : encounter_order(rng, cfg)) {
      const std::size_t gap = 1 + rng.below(2 * cfg.gap_frames - 1);
      for (std::size_t g = 0; g < gap; ++g) advance_drift();
      frame += static_cast<std::int64_t>(gap);

      const double side = 40.0 + 40.0 * rng.uniform();
      double x = rng.uniform(0.0, 500.0), y = rng.uniform(0.0, 400.0);
      for (std::size_t f = 0; f < cfg.frames_per_encounter; ++f) {
        Detection det;
        det.video_id = video;
        det.frame_index = frame;
        det.box = {x, y, x + side, y + side};
        det.polyp_id = polyps[p].id;
        det.features.resize(d);
        for (std::size_t k = 0; k < d; ++k) {
          det.features[k] = polyps[p].latent[k] + cfg.drift_scale * drift[k] + cfg.noise_scale * noise_step * rng.normal();
        }
        stream.push_back(std::move(det));
        x += rng.uniform(-1.0, 1.0);
        y += rng.uniform(-1.0, 1.0);
        advance_drift();
        ++frame;
      }
    }
  }
  return stream;
}

TrackletDataset generate_dataset(const SynthConfig& cfg, const BuilderConfig& builder) {
  const std::vector<Detection> stream = generate_stream(cfg);
  std::vector<Tracklet> tracklets = build_tracklets(stream, builder);
  if (tracklets.empty()) throw UsageError("no tracklets produced");

  // Attributes are a function of the latent; recompute the same draw per video.
  std::map<std::string, AttributeMap> attrs;
  for (std::size_t v = 0; v < cfg.num_videos; ++v) {
    Rng rng(mix_seed(cfg.seed, 0x5f3759df, v));
    for (const Polyp& p : make_polyps(rng, video_name(v), cfg)) {
      attrs[p.id] = {{"size_class", p.size_class}, {"histology_class", p.histology_class}};
    }
  }
  for (Tracklet& t : tracklets) t.attrs = attrs.at(*t.polyp_id);
  return TrackletDataset(std::move(tracklets), builder.tracklet_length, cfg.d_in);
}

}  // namespace ntssl
