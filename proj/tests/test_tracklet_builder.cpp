#include "test_main.hpp"

#include <set>

#include "ntssl/error.hpp"
#include "ntssl/tracklet_builder.hpp"

using namespace ntssl;

namespace {

Detection det(const std::string& video, std::int64_t frame, BoundingBox box, double feat = 0.0) {
  Detection d;
  d.video_id = video;
  d.frame_index = frame;
  d.box = box;
  d.features = {feat, static_cast<double>(frame)};
  return d;
}

std::vector<Detection> straight_chain(const std::string& video, std::int64_t start, std::size_t n) {
  std::vector<Detection> s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(det(video, start + static_cast<std::int64_t>(i), {0, 0, 10, 10}));
  return s;
}

}  // namespace

TEST_CASE("iou") {
  CHECK(iou({0, 0, 1, 1}, {0, 0, 1, 1}) == 1.0);
  CHECK(iou({0, 0, 1, 1}, {5, 5, 6, 6}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {5, 0, 15, 10}) == doctest::Approx(50.0 / 150.0).epsilon(1e-15));
  CHECK(iou({0, 0, 1, 1}, {1, 0, 2, 1}) == 0.0);
}

TEST_CASE("chaining by overlap and frame adjacency") {
  BuilderConfig cfg;
  auto two = std::vector<Detection>{det("v", 0, {0, 0, 1, 1}), det("v", 1, {0, 0, 1, 1})};
  CHECK(chain_detections(two, cfg).size() == 1);
  two[1].box = {5, 5, 6, 6};
  CHECK(chain_detections(two, cfg).size() == 2);

  // Third box overlaps the second at iou 0.05 < 0.1.
  std::vector<Detection> five{det("v", 0, {0, 0, 10, 10}), det("v", 1, {0, 0, 10, 10}),
                              det("v", 2, {0, 9.5, 10, 19.5}), det("v", 3, {0, 9.5, 10, 19.5}),
                              det("v", 4, {0, 9.5, 10, 19.5})};
  CHECK(iou(five[1].box, five[2].box) == doctest::Approx(5.0 / 195.0));
  const auto chains = chain_detections(five, cfg);
  REQUIRE(chains.size() == 2);
  CHECK(chains[0].size() == 2);
  CHECK(chains[1].size() == 3);

  // A frame gap starts a new chain even with identical boxes.
  std::vector<Detection> gap{det("v", 0, {0, 0, 1, 1}), det("v", 2, {0, 0, 1, 1})};
  CHECK(chain_detections(gap, cfg).size() == 2);
}

TEST_CASE("unsorted streams are rejected") {
  std::vector<Detection> s{det("v", 3, {0, 0, 1, 1}), det("v", 2, {0, 0, 1, 1})};
  CHECK_THROWS_AS(chain_detections(s, BuilderConfig{}), UsageError);
  std::vector<Detection> dup{det("v", 3, {0, 0, 1, 1}), det("v", 3, {0, 0, 1, 1})};
  CHECK_THROWS_AS(chain_detections(dup, BuilderConfig{}), UsageError);
}

TEST_CASE("track mode chains by identity") {
  BuilderConfig cfg;
  cfg.chain_by = ChainBy::track;
  auto s = straight_chain("v", 0, 4);
  for (auto& d : s) d.polyp_id = "p";
  s[2].box = {50, 50, 60, 60};
  CHECK(chain_detections(s, cfg).size() == 1);
  s[3].polyp_id = "q";
  CHECK(chain_detections(s, cfg).size() == 2);
}

TEST_CASE("windows subsample and cut non-overlapping tracklets") {
  BuilderConfig cfg;
  CHECK(windows(straight_chain("v", 0, 64), cfg).size() == 2);
  CHECK(windows(straight_chain("v", 0, 31), cfg).size() == 1);
  CHECK(windows(straight_chain("v", 0, 7), cfg).empty());

  const auto ts = windows(straight_chain("v", 100, 64), cfg);
  REQUIRE(ts.size() == 2);
  CHECK(ts[0].position == 100);
  CHECK(ts[1].position == 132);
  std::set<double> frames_used;
  for (const Tracklet& t : ts) {
    REQUIRE(t.frames.rows() == 8);
    for (std::size_t r = 0; r < 8; ++r) {
      // column 1 carries the frame index
      CHECK(t.frames(r, 1) == static_cast<double>(t.position + 4 * static_cast<std::int64_t>(r)));
      CHECK(frames_used.insert(t.frames(r, 1)).second);
    }
  }
}

TEST_CASE("chaining is invariant to interleaving videos") {
  BuilderConfig cfg;
  auto a = straight_chain("a", 0, 40);
  auto b = straight_chain("b", 0, 40);
  std::vector<Detection> grouped = a;
  grouped.insert(grouped.end(), b.begin(), b.end());
  std::vector<Detection> mixed;
  for (std::size_t i = 0; i < 40; ++i) {
    mixed.push_back(a[i]);
    mixed.push_back(b[i]);
  }
  const auto x = build_tracklets(grouped, cfg);
  const auto y = build_tracklets(mixed, cfg);
  REQUIRE(x.size() == y.size());
  std::set<std::pair<std::string, std::int64_t>> sx, sy;
  for (const auto& t : x) sx.insert({t.tracklet_id, t.position});
  for (const auto& t : y) sy.insert({t.tracklet_id, t.position});
  CHECK(sx == sy);
  CHECK(x[0].tracklet_id == "a/t0");
}
