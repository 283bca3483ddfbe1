#include "test_main.hpp"

#include <cmath>
#include <set>

#include "ntssl/error.hpp"
#include "ntssl/parallel.hpp"
#include "ntssl/rng.hpp"
#include "ntssl/tensor.hpp"

using namespace ntssl;

TEST_CASE("rng streams are reproducible and seed-sensitive") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    (void)c.next_u64();
  }
  CHECK(Rng(42).uniform() != Rng(43).uniform());
  CHECK(mix_seed(1, 2, 3) == mix_seed(1, 2, 3));
  CHECK(mix_seed(1, 2, 3) != mix_seed(1, 3, 2));
  CHECK(mix_seed(0) != mix_seed(1));
}

TEST_CASE("uniform, below and normal have the expected range and moments") {
  Rng r(7);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto k = r.below(5);
    REQUIRE(k < 5);
    seen.insert(k);
  }
  CHECK(seen.size() == 5);
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("tensor shapes") {
  Tensor t = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t(1, 2) == 6);
  CHECK(t.row(1)[0] == 4);
  Tensor r = t.reshaped({3, 2});
  CHECK(r(2, 1) == 6);
  CHECK_THROWS_AS(t.reshaped({4, 2}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  Tensor v({4});
  CHECK(v.cols() == 1);
  CHECK(shape_string({2, 3}) == "[2,3]");
  t[0] = std::nan("");
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("parallel_for visits every index once and propagates exceptions") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) REQUIRE(h == 1);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 7) throw NumericError("boom");
                  }),
                  NumericError);
  CHECK(worker_count() >= 1);
}
