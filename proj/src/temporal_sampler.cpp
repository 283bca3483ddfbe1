#include "ntssl/temporal_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numbers>
#include <string>

#include "ntssl/error.hpp"

namespace ntssl {

void CurriculumSchedule::validate() const {
  if (!(tau_min > 0.0)) throw UsageError("schedule: tau_min must be > 0");
  if (!(tau_max >= tau_min)) throw UsageError("schedule: tau_max must be >= tau_min");
}

namespace {

std::vector<std::size_t> order_candidates(const TrackletDataset& ds, std::size_t anchor,
                                          std::vector<std::size_t> candidates) {
  const std::int64_t p0 = ds.position(anchor);
  std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    const std::int64_t da = std::llabs(ds.position(a) - p0);
    const std::int64_t db = std::llabs(ds.position(b) - p0);
    if (da != db) return da < db;
    if (ds.position(a) != ds.position(b)) return ds.position(a) < ds.position(b);
    return ds.id(a) < ds.id(b);
  });
  return candidates;
}

}  // namespace

RankOrder rank_order(const TrackletDataset& dataset, std::size_t anchor) {
  if (anchor >= dataset.size()) throw UsageError("rank_order: anchor out of range");
  std::vector<std::size_t> candidates;
  for (std::size_t j = 0; j < dataset.size(); ++j) {
    if (j != anchor && dataset.video_id(j) == dataset.video_id(anchor)) candidates.push_back(j);
  }
  return {anchor, order_candidates(dataset, anchor, std::move(candidates))};
}

RankIndex::RankIndex(const TrackletDataset& dataset) {
  std::map<std::string, std::vector<std::size_t>> by_video;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_video[dataset.video_id(i)].push_back(i);
  orders_.resize(dataset.size());
  for (const auto& [video, members] : by_video) {
    for (std::size_t anchor : members) {
      std::vector<std::size_t> candidates;
      candidates.reserve(members.size() - 1);
      for (std::size_t j : members)
        if (j != anchor) candidates.push_back(j);
      orders_[anchor] = {anchor, order_candidates(dataset, anchor, std::move(candidates))};
    }
  }
}

std::vector<std::size_t> RankIndex::usable_anchors(std::size_t K) const {
  std::vector<std::size_t> out;
  for (const RankOrder& o : orders_)
    if (o.candidates() >= K) out.push_back(o.anchor);
  return out;
}

std::vector<double> rank_pmf(std::size_t C, double tau) {
  if (C < 1) throw UsageError("rank_pmf: C must be >= 1");
  if (!(tau > 0.0)) throw UsageError("rank_pmf: tau must be > 0");
  // The largest logit is at r = 1; shifting by it keeps exp() in range.
  std::vector<double> p(C);
  double total = 0.0;
  for (std::size_t r = 0; r < C; ++r) {
    p[r] = std::exp(-static_cast<double>(r) / tau);
    total += p[r];
  }
  for (double& v : p) v /= total;
  return p;
}

Bag sample_bag(const RankOrder& order, std::size_t K, double tau, Rng& rng) {
  const std::size_t C = order.candidates();
  if (K > C) throw UsageError("insufficient candidates");
  if (!(tau > 0.0)) throw UsageError("sample_bag: tau must be > 0");

  Bag bag;
  bag.anchor = order.anchor;
  std::vector<bool> taken(C, false);
  std::vector<double> w(C);
  for (std::size_t draw = 0; draw < K; ++draw) {
    // Shift by the best remaining rank so the leading weight is exactly 1.
    std::size_t first = 0;
    while (taken[first]) ++first;
    double total = 0.0;
    for (std::size_t r = 0; r < C; ++r) {
      w[r] = taken[r] ? 0.0 : std::exp(-static_cast<double>(r - first) / tau);
      total += w[r];
    }
    double u = rng.uniform() * total;
    std::size_t pick = first;
    for (std::size_t r = first; r < C; ++r) {
      if (taken[r]) continue;
      pick = r;
      if (u < w[r]) break;
      u -= w[r];
    }
    taken[pick] = true;
    bag.sampled_ranks.push_back(pick + 1);
    bag.members.push_back(order.ordered[pick]);
  }
  return bag;
}

Bag top_k_bag(const RankOrder& order, std::size_t K) {
  if (K > order.candidates()) throw UsageError("insufficient candidates");
  Bag bag;
  bag.anchor = order.anchor;
  for (std::size_t r = 0; r < K; ++r) {
    bag.members.push_back(order.ordered[r]);
    bag.sampled_ranks.push_back(r + 1);
  }
  return bag;
}

double curriculum_tau(const CurriculumSchedule& sched, double c) {
  sched.validate();
  if (!(c >= 0.0 && c <= 1.0)) throw UsageError("curriculum_tau: c must be in [0,1]");
  return sched.tau_min + 0.5 * (1.0 - std::cos(std::numbers::pi * c)) * (sched.tau_max - sched.tau_min);
}

bool is_pure(const Bag& bag, const TrackletDataset& dataset) {
  const auto& anchor_id = dataset.labels(bag.anchor).polyp_id;
  if (!anchor_id) throw UsageError("bag_purity: missing polyp_id on '" + dataset.id(bag.anchor) + "'");
  bool pure = true;
  for (std::size_t m : bag.members) {
    const auto& id = dataset.labels(m).polyp_id;
    if (!id) throw UsageError("bag_purity: missing polyp_id on '" + dataset.id(m) + "'");
    pure = pure && (*id == *anchor_id);
  }
  return pure;
}

double bag_purity(std::span<const Bag> bags, const TrackletDataset& dataset) {
  if (bags.empty()) return 0.0;
  std::size_t pure = 0;
  for (const Bag& b : bags) pure += is_pure(b, dataset) ? 1 : 0;
  return static_cast<double>(pure) / static_cast<double>(bags.size());
}

std::vector<SamplerPoint> diagnose_sampler(const TrackletDataset& dataset, std::size_t K,
                                           const CurriculumSchedule& sched, std::size_t grid, std::size_t samples,
                                           std::uint64_t seed) {
  if (grid < 2) throw UsageError("diagnose_sampler: grid must be >= 2");
  if (samples == 0) throw UsageError("diagnose_sampler: samples must be > 0");
  sched.validate();
  const RankIndex index(dataset);
  const std::vector<std::size_t> anchors = index.usable_anchors(K);
  if (anchors.empty()) throw UsageError("insufficient candidates: no anchor has " + std::to_string(K));
  std::vector<SamplerPoint> out;
  out.reserve(grid);
  for (std::size_t g = 0; g < grid; ++g) {
    SamplerPoint pt;
    pt.c = static_cast<double>(g) / static_cast<double>(grid - 1);
    pt.tau = curriculum_tau(sched, pt.c);
    Rng rng(mix_seed(seed, 0xd1a9, g));
    double rank_sum = 0.0;
    std::size_t pure = 0;
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t a = anchors[rng.below(anchors.size())];
      const Bag bag = sample_bag(index.order(a), K, pt.tau, rng);
      for (std::size_t r : bag.sampled_ranks) rank_sum += static_cast<double>(r);
      pure += is_pure(bag, dataset) ? 1 : 0;
    }
    pt.mean_rank = rank_sum / static_cast<double>(samples * K);
    pt.purity = static_cast<double>(pure) / static_cast<double>(samples);
    out.push_back(pt);
  }
  return out;
}

}  // namespace ntssl
