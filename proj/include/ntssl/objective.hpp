#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ntssl/autodiff.hpp"
#include "ntssl/tensor.hpp"

namespace ntssl {

enum class Level { tracklet, frame, both };
/// Frame-level positives for anchor frame t: every frame of every bag member
/// (all), or only frame t of each member (aligned).
enum class FramePairing { all, aligned };

struct LossConfig {
  double sim_temperature = 0.1;
  Level level = Level::both;
  FramePairing frame_pairing = FramePairing::all;

  void validate() const;
};

struct LossOutput {
  double total = 0.0;
  std::map<std::string, double> per_level;  // "tracklet", "frame"
  std::vector<double> per_anchor;
};

/// cos(u, v) / sim_temperature. Throws NumericError on a zero-norm input.
double similarity(std::span<const double> u, std::span<const double> v, const LossConfig& cfg);

/// Core of the bag objective, on precomputed similarities.
///
/// logits is (N*M x N): row i*M + m holds s(z_im, y_j) for every anchor j.
/// Returns the per-anchor loss column (N x 1)
///   l_i = logsumexp_{m,j} logits - logsumexp_m logits[i*M + m, i].
ad::Var bag_contrastive_from_logits(ad::Var logits, std::size_t bag_size);

/// Noise-aware contrastive loss per anchor (N x 1). anchors is N x d, bags
/// is N*M x d grouped by anchor. Other anchors in the batch act as negatives.
ad::Var noise_aware_loss(ad::Var anchors, ad::Var bags, std::size_t bag_size, double temperature);

/// Value-only evaluation; bags may be N x K x d or N*K x d.
LossOutput noise_aware_loss(const Tensor& anchors, const Tensor& bags, std::size_t K, const LossConfig& cfg);

struct MultiLevelInputs {
  ad::Var anchor_tracklet;  // N x d
  ad::Var bag_tracklet;     // N*K x d, row i*K + k
  ad::Var anchor_frames;    // N*L x d, row i*L + t
  ad::Var bag_frames;       // N*K*L x d, row (i*K + k)*L + t
  std::size_t N = 0, K = 0, L = 0;
};

struct MultiLevelLoss {
  ad::Var total;                    // scalar
  ad::Var per_anchor;               // N x 1, summed over active levels
  std::optional<ad::Var> tracklet;  // N x 1
  std::optional<ad::Var> frame;     // N x 1, mean over anchor frames

  LossOutput summary() const;
};

MultiLevelLoss multi_level_loss(const MultiLevelInputs& in, const LossConfig& cfg);

std::string to_string(Level level);
Level parse_level(const std::string& s);
std::string to_string(FramePairing p);
FramePairing parse_frame_pairing(const std::string& s);

}  // namespace ntssl
