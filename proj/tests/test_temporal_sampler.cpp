#include "test_main.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "ntssl/error.hpp"
#include "ntssl/synthgen.hpp"
#include "ntssl/temporal_sampler.hpp"

using namespace ntssl;

namespace {

Tracklet at(const std::string& id, const std::string& video, std::int64_t pos, const std::string& polyp = "") {
  Tracklet t;
  t.tracklet_id = id;
  t.video_id = video;
  t.position = pos;
  t.frames = Tensor::matrix(1, 1, 1.0);
  if (!polyp.empty()) t.polyp_id = polyp;
  return t;
}

std::vector<std::string> ids(const TrackletDataset& d, const std::vector<std::size_t>& idx) {
  std::vector<std::string> out;
  for (std::size_t i : idx) out.push_back(d.id(i));
  return out;
}

// C candidates at distances 1..C from an anchor at 0.
TrackletDataset line(std::size_t C) {
  std::vector<Tracklet> ts{at("anchor", "v", 0)};
  for (std::size_t i = 1; i <= C; ++i) ts.push_back(at("c" + std::to_string(i), "v", static_cast<std::int64_t>(i)));
  return TrackletDataset(ts, 1, 1);
}

}  // namespace

TEST_CASE("rank order sorts by temporal distance within the video") {
  const TrackletDataset d({at("anchor", "v", 100), at("a", "v", 90), at("b", "v", 120), at("c", "v", 95),
                           at("other", "w", 100)},
                          1, 1);
  const RankOrder o = rank_order(d, 0);
  CHECK(ids(d, o.ordered) == std::vector<std::string>{"c", "a", "b"});

  const TrackletDataset tie({at("x", "v", 100), at("late", "v", 110), at("early", "v", 90)}, 1, 1);
  CHECK(ids(tie, rank_order(tie, 0).ordered) == std::vector<std::string>{"early", "late"});

  const TrackletDataset same({at("x", "v", 100), at("zeta", "v", 90), at("alpha", "v", 90)}, 1, 1);
  CHECK(ids(same, rank_order(same, 0).ordered) == std::vector<std::string>{"alpha", "zeta"});

  const TrackletDataset alone({at("x", "v", 0), at("y", "w", 0)}, 1, 1);
  CHECK(rank_order(alone, 0).candidates() == 0);
}

TEST_CASE("rank order invariants on generated data") {
  SynthConfig c;
  c.num_videos = 3;
  const TrackletDataset d = generate_dataset(c);
  const RankIndex index(d);
  for (std::size_t a = 0; a < d.size(); ++a) {
    const RankOrder& o = index.order(a);
    std::set<std::size_t> seen(o.ordered.begin(), o.ordered.end());
    REQUIRE(seen.size() == o.ordered.size());
    REQUIRE_FALSE(seen.count(a));
    std::int64_t prev = -1;
    for (std::size_t j : o.ordered) {
      REQUIRE(d.video_id(j) == d.video_id(a));
      const std::int64_t dist = std::abs(d.position(j) - d.position(a));
      REQUIRE(dist >= prev);
      prev = dist;
    }
  }
}

TEST_CASE("rank pmf values and limits") {
  const auto p = rank_pmf(2, 1.0);
  const double z = std::exp(-1.0) + std::exp(-2.0);
  CHECK(p[0] == doctest::Approx(std::exp(-1.0) / z).epsilon(1e-15));
  CHECK(p[0] == doctest::Approx(0.7310585786300049).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(0.2689414213699951).epsilon(1e-14));
  for (double v : rank_pmf(4, 1e9)) CHECK(std::abs(v - 0.25) < 1e-6);
  CHECK(rank_pmf(3, 1e-3)[0] > 1 - 1e-9);

  for (std::size_t C : {1, 2, 7, 1000, 100000}) {
    for (double tau : {1e-3, 0.3, 2.0, 12.0, 1e9}) {
      const auto q = rank_pmf(C, tau);
      double s = 0;
      for (std::size_t r = 0; r < C; ++r) {
        REQUIRE(q[r] >= 0);  // far ranks underflow at small tau
        if (r > 0 && tau < 1e6 && q[r] > 1e-300) REQUIRE(q[r] < q[r - 1]);
        s += q[r];
      }
      REQUIRE(std::abs(s - 1.0) <= 1e-12);
    }
  }
  CHECK_THROWS_AS(rank_pmf(0, 1.0), UsageError);
  CHECK_THROWS_AS(rank_pmf(3, 0.0), UsageError);
}

TEST_CASE("sample_bag draws distinct ranks") {
  const TrackletDataset d = line(5);
  const RankOrder o = rank_order(d, 0);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Bag b = sample_bag(o, 3, 2.0, rng);
    std::set<std::size_t> m(b.members.begin(), b.members.end());
    REQUIRE(m.size() == 3);
    REQUIRE_FALSE(m.count(0));
    for (std::size_t k = 0; k < 3; ++k) REQUIRE(b.members[k] == o.ordered[b.sampled_ranks[k] - 1]);
  }
  // K = C: every candidate regardless of tau.
  for (double tau : {1e-3, 1.0, 1e6}) {
    const Bag b = sample_bag(o, 5, tau, rng);
    std::vector<std::size_t> sorted = b.members;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<std::size_t>{1, 2, 3, 4, 5});
  }
  CHECK_THROWS_WITH_AS(sample_bag(o, 6, 1.0, rng), doctest::Contains("insufficient candidates"), UsageError);
  Rng r1(9), r2(9);
  CHECK(sample_bag(o, 2, 1.0, r1) == sample_bag(o, 2, 1.0, r2));
}

TEST_CASE("cold sampling takes the nearest ranks") {
  // P({1,2}) = P(1) P(2 | not 1) + P(2) P(1 | not 2), evaluated in closed form.
  const double tau = 0.05;
  const auto p = rank_pmf(5, tau);
  const double rest1 = p[1] + p[2] + p[3] + p[4], rest2 = p[0] + p[2] + p[3] + p[4];
  const double exact = p[0] * p[1] / rest1 + p[1] * p[0] / rest2;
  CHECK(exact > 1 - 1e-8);
  const RankOrder o = rank_order(line(5), 0);
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    Bag b = sample_bag(o, 2, tau, rng);
    std::sort(b.sampled_ranks.begin(), b.sampled_ranks.end());
    REQUIRE(b.sampled_ranks == std::vector<std::size_t>{1, 2});
  }
}

TEST_CASE("second draw follows the renormalized pmf") {
  // Conditional on a first draw of rank 1, the second rank r has probability
  // P(r) / (1 - P(1)).
  const std::size_t C = 5;
  const double tau = 1.5;
  const auto p = rank_pmf(C, tau);
  const RankOrder o = rank_order(line(C), 0);
  Rng rng(5);
  std::map<std::size_t, double> counts;
  std::size_t conditioned = 0;
  for (int i = 0; i < 200000; ++i) {
    const Bag b = sample_bag(o, 2, tau, rng);
    if (b.sampled_ranks[0] != 1) continue;
    ++conditioned;
    counts[b.sampled_ranks[1]] += 1;
  }
  for (std::size_t r = 2; r <= C; ++r) {
    const double q = p[r - 1] / (1 - p[0]);
    const double se = std::sqrt(q * (1 - q) / static_cast<double>(conditioned));
    CHECK(std::abs(counts[r] / static_cast<double>(conditioned) - q) < 4 * se);
  }
}

TEST_CASE("top-k bags") {
  const TrackletDataset d({at("anchor", "v", 100), at("a", "v", 90), at("b", "v", 120), at("c", "v", 95)}, 1, 1);
  const RankOrder o = rank_order(d, 0);
  CHECK(ids(d, top_k_bag(o, 2).members) == std::vector<std::string>{"c", "a"});
  CHECK(top_k_bag(o, 1).members == std::vector<std::size_t>{o.ordered[0]});
  CHECK(top_k_bag(o, 3).sampled_ranks == std::vector<std::size_t>{1, 2, 3});
  CHECK_THROWS_AS(top_k_bag(o, 4), UsageError);
}

TEST_CASE("curriculum schedule") {
  const CurriculumSchedule s;
  CHECK(curriculum_tau(s, 0.0) == 0.3);
  CHECK(curriculum_tau(s, 1.0) == 12.0);
  CHECK(std::abs(curriculum_tau(s, 0.5) - 6.15) <= 1e-12);
  double prev = 0;
  for (int i = 0; i <= 1000; ++i) {
    const double t = curriculum_tau(s, i / 1000.0);
    REQUIRE(t >= prev);
    prev = t;
  }
  CHECK_THROWS_AS(curriculum_tau(s, -0.01), UsageError);
  CHECK_THROWS_AS(curriculum_tau(s, 1.01), UsageError);
  CHECK_THROWS_AS(curriculum_tau({2.0, 1.0}, 0.5), UsageError);
  CHECK_THROWS_AS(curriculum_tau({0.0, 1.0}, 0.5), UsageError);
}

TEST_CASE("bag purity") {
  const TrackletDataset d({at("a0", "v", 0, "p"), at("a1", "v", 1, "p"), at("a2", "v", 2, "p"), at("b0", "v", 3, "q"),
                           at("u", "w", 0)},
                          1, 1);
  const std::vector<Bag> bags{{0, {1, 2}, {1, 2}}, {1, {0, 2}, {1, 2}}, {2, {0, 1}, {1, 2}}, {0, {1, 3}, {1, 2}}};
  CHECK(bag_purity(std::span(bags).first(3), d) == 1.0);
  CHECK(bag_purity(bags, d) == 0.75);
  const std::vector<Bag> unlabeled{{4, {0}, {1}}};
  CHECK_THROWS_AS(bag_purity(unlabeled, d), UsageError);
}

TEST_CASE("cold bags stay pure when polyps do not interleave") {
  SynthConfig c;
  c.num_videos = 4;
  c.overlap_prob = 0.0;
  c.encounters_per_polyp = 1;
  c.frames_per_encounter = 256;  // 8 tracklets per polyp, more than K
  const TrackletDataset d = generate_dataset(c);
  const RankIndex index(d);
  Rng rng(1);
  std::vector<Bag> bags;
  // Anchors in the middle of a polyp block have >= K same-polyp neighbours
  // on the nearest ranks.
  for (std::size_t a = 0; a < d.size(); ++a) {
    const auto& lab = d.labels(a);
    std::size_t near_same = 0;
    for (std::size_t r = 0; r < 2 && r < index.order(a).candidates(); ++r)
      near_same += d.labels(index.order(a).ordered[r]).polyp_id == lab.polyp_id;
    if (near_same == 2) bags.push_back(sample_bag(index.order(a), 2, 1e-3, rng));
  }
  REQUIRE(bags.size() > 50);
  CHECK(bag_purity(bags, d) == 1.0);
}

TEST_CASE("sampler diagnostic on the default dataset") {
  const TrackletDataset d = generate_dataset(SynthConfig{});
  const auto pts = diagnose_sampler(d, 4, CurriculumSchedule{}, 11, 2000, 0);
  REQUIRE(pts.size() == 11);
  CHECK(pts.front().tau == 0.3);
  CHECK(pts.back().tau == 12.0);
  CHECK(pts[5].c == 0.5);
  CHECK(pts.back().mean_rank > pts.front().mean_rank);
  CHECK(pts.front().purity > pts.back().purity);
  CHECK(diagnose_sampler(d, 4, CurriculumSchedule{}, 3, 50, 7)[1].purity ==
        diagnose_sampler(d, 4, CurriculumSchedule{}, 3, 50, 7)[1].purity);
}
