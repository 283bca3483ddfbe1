#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ntssl/data_model.hpp"
#include "ntssl/rng.hpp"

namespace ntssl {

/// Same-video candidates of one anchor, nearest in time first. Entries are
/// dataset indices; rank r (1-based) lives at ordered[r - 1].
struct RankOrder {
  std::size_t anchor = 0;
  std::vector<std::size_t> ordered;

  std::size_t candidates() const noexcept { return ordered.size(); }
};

struct Bag {
  std::size_t anchor = 0;
  std::vector<std::size_t> members;       // dataset indices, K distinct
  std::vector<std::size_t> sampled_ranks;  // 1-based, aligned with members

  friend bool operator==(const Bag&, const Bag&) = default;
};

struct CurriculumSchedule {
  double tau_min = 0.3;
  double tau_max = 12.0;

  void validate() const;
};

/// Orders same-video tracklets by |p_j - p_i|; ties go to the earlier
/// position, then to the lexicographically smaller tracklet id.
RankOrder rank_order(const TrackletDataset& dataset, std::size_t anchor);

/// rank_order for every anchor, computed once per dataset.
class RankIndex {
 public:
  explicit RankIndex(const TrackletDataset& dataset);

  const RankOrder& order(std::size_t anchor) const { return orders_[anchor]; }
  std::size_t size() const noexcept { return orders_.size(); }
  /// Anchors with at least K candidates, in dataset order.
  std::vector<std::size_t> usable_anchors(std::size_t K) const;

 private:
  std::vector<RankOrder> orders_;
};

/// P(r) = exp(-r / tau) / sum_u exp(-u / tau) for r = 1..C.
std::vector<double> rank_pmf(std::size_t C, double tau);

/// Draws K distinct ranks one at a time, each from rank_pmf renormalized over
/// the ranks not yet taken. Throws UsageError("insufficient candidates").
Bag sample_bag(const RankOrder& order, std::size_t K, double tau, Rng& rng);

/// The K nearest-in-time candidates.
Bag top_k_bag(const RankOrder& order, std::size_t K);

/// Cosine ramp from tau_min (c = 0) to tau_max (c = 1).
double curriculum_tau(const CurriculumSchedule& sched, double c);

/// Fraction of bags whose members all carry the anchor's polyp_id.
double bag_purity(std::span<const Bag> bags, const TrackletDataset& dataset);
bool is_pure(const Bag& bag, const TrackletDataset& dataset);

struct SamplerPoint {
  double c = 0.0;
  double tau = 0.0;
  double mean_rank = 0.0;  // over all sampled members
  double purity = 0.0;
};

/// Sampled rank and bag purity along the curriculum: `grid` evenly spaced c
/// values in [0, 1], `samples` bags per value, anchors drawn uniformly from
/// those with at least K candidates.
std::vector<SamplerPoint> diagnose_sampler(const TrackletDataset& dataset, std::size_t K,
                                           const CurriculumSchedule& sched, std::size_t grid, std::size_t samples,
                                           std::uint64_t seed);

}  // namespace ntssl
