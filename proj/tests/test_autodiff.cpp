#include "test_main.hpp"

#include <array>
#include <cmath>

#include "grad_check.hpp"
#include "ntssl/autodiff.hpp"
#include "ntssl/error.hpp"

using namespace ntssl;
using namespace ntssl::ad;
using gradcheck::random_tensor;

namespace {

constexpr double kTol = 1e-4;

void expect_grad(const std::vector<Tensor>& inputs, const gradcheck::Build& f) {
  const auto r = gradcheck::check(inputs, f);
  CHECK(r.coordinates > 0);
  CHECK(r.max_rel_error <= kTol);
}

// Values bounded away from zero so relu kinks are not straddled by the
// finite-difference step.
Tensor away_from_zero(Rng& rng, std::vector<std::size_t> shape) {
  Tensor t = random_tensor(rng, std::move(shape));
  for (double& v : t.values()) v = (v >= 0 ? 0.1 : -0.1) + v;
  return t;
}

}  // namespace

TEST_CASE("finite differences: matrix products") {
  Rng rng(1);
  for (auto [m, k, n] : std::vector<std::array<std::size_t, 3>>{{1, 1, 1}, {2, 3, 4}, {5, 4, 3}, {7, 9, 6}}) {
    expect_grad({random_tensor(rng, {m, k}), random_tensor(rng, {k, n})},
                [](Tape&, const std::vector<Var>& v) { return matmul(v[0], v[1]); });
    expect_grad({random_tensor(rng, {m, k}), random_tensor(rng, {n, k})},
                [](Tape&, const std::vector<Var>& v) { return matmul_nt(v[0], v[1], 0.7); });
    expect_grad({random_tensor(rng, {m, k}), random_tensor(rng, {k, n}), random_tensor(rng, {n})},
                [](Tape&, const std::vector<Var>& v) { return linear(v[0], v[1], v[2]); });
  }
}

TEST_CASE("finite differences: elementwise and structural ops") {
  Rng rng(2);
  const Tensor a = random_tensor(rng, {4, 3}), b = random_tensor(rng, {4, 3}), c = random_tensor(rng, {4, 3});
  expect_grad({a, b}, [](Tape&, const std::vector<Var>& v) { return add(v[0], v[1]); });
  expect_grad({a, b, c}, [](Tape&, const std::vector<Var>& v) { return add_n(v); });
  expect_grad({a}, [](Tape&, const std::vector<Var>& v) { return add_n(std::vector<Var>{v[0], v[0]}); });
  expect_grad({a}, [](Tape&, const std::vector<Var>& v) { return scale(v[0], -2.5); });
  expect_grad({random_tensor(rng, {6, 3}), random_tensor(rng, {2, 3})},
              [](Tape&, const std::vector<Var>& v) { return add_tiled(v[0], v[1]); });
  expect_grad({random_tensor(rng, {6, 3}), random_tensor(rng, {1, 3})},
              [](Tape&, const std::vector<Var>& v) { return prepend_token(v[0], v[1], 2); });
  expect_grad({away_from_zero(rng, {5, 4})}, [](Tape&, const std::vector<Var>& v) { return relu(v[0]); });
  expect_grad({random_tensor(rng, {5, 4}, 2.0)}, [](Tape&, const std::vector<Var>& v) { return gelu(v[0]); });
  expect_grad({random_tensor(rng, {5, 4})}, [](Tape&, const std::vector<Var>& v) {
    Rng mask(7);  // same mask on every evaluation
    return dropout(v[0], 0.3, mask);
  });
  expect_grad({random_tensor(rng, {5, 3})},
              [](Tape&, const std::vector<Var>& v) { return select_rows(v[0], {4, 0, 4, 2}); });
  expect_grad({random_tensor(rng, {5, 3})}, [](Tape&, const std::vector<Var>& v) { return slice_rows(v[0], 1, 4); });
  expect_grad({random_tensor(rng, {4, 5})}, [](Tape&, const std::vector<Var>& v) { return normalize_rows(v[0]); });
  expect_grad({a}, [](Tape&, const std::vector<Var>& v) { return sum(v[0]); });
  expect_grad({a}, [](Tape&, const std::vector<Var>& v) { return mean(v[0]); });
  expect_grad({a}, [](Tape&, const std::vector<Var>& v) { return sum_squares(v[0]); });
  const std::vector<int> labels{0, 2, 1, 2};
  expect_grad({random_tensor(rng, {4, 3})},
              [&](Tape&, const std::vector<Var>& v) { return cross_entropy(v[0], labels); });
}

TEST_CASE("finite differences: layer norm and attention") {
  Rng rng(3);
  for (std::size_t d : {2, 5, 8}) {
    expect_grad({random_tensor(rng, {4, d}, 3.0), random_tensor(rng, {d}), random_tensor(rng, {d})},
                [](Tape&, const std::vector<Var>& v) { return layer_norm(v[0], v[1], v[2], kLayerNormEps); });
  }
  for (auto [B, S, H, D] : std::vector<std::array<std::size_t, 4>>{{1, 2, 1, 2}, {2, 3, 2, 4}, {2, 5, 4, 8}}) {
    expect_grad({random_tensor(rng, {B * S, 3 * D})}, [B = B, S = S, H = H](Tape&, const std::vector<Var>& v) {
      return multi_head_attention(v[0], B, S, H);
    });
  }
}

TEST_CASE("finite differences: a composed graph with reuse") {
  Rng rng(4);
  expect_grad({random_tensor(rng, {6, 4}), random_tensor(rng, {4, 12}), random_tensor(rng, {4}),
               random_tensor(rng, {4})},
              [](Tape&, const std::vector<Var>& v) {
                Var h = layer_norm(v[0], v[2], v[3], kLayerNormEps);
                Var qkv = matmul(h, v[1]);
                Var att = multi_head_attention(qkv, 2, 3, 2);
                Var res = add(v[0], att);
                return normalize_rows(gelu(res));
              });
}

TEST_CASE("parameter gradients") {
  ParamStore store;
  store.add("W", Tensor::from_rows({{1, 2}, {3, 4}}));
  {
    Tape tape;
    tape.backward(sum(tape.parameter(store, "W")));
  }
  for (double g : store.grad("W").values()) CHECK(g == 1.0);
  store.zero_grad();

  // 0.5 |W x|^2 with x = (1, -1): gradient (W x) x^T = [[-1, 1], [-1, 1]].
  {
    Tape tape;
    Var W = tape.parameter(store, "W");
    Var x = tape.constant(Tensor::from_rows({{1}, {-1}}));
    tape.backward(scale(sum_squares(matmul(W, x)), 0.5));
  }
  CHECK(store.grad("W") == Tensor::from_rows({{-1, 1}, {-1, 1}}));

  // Gradients accumulate across tapes until zero_grad.
  {
    Tape tape;
    tape.backward(sum(tape.parameter(store, "W")));
  }
  CHECK(store.grad("W") == Tensor::from_rows({{0, 2}, {0, 2}}));
  store.zero_grad();
  CHECK(store.grad("W") == Tensor::from_rows({{0, 0}, {0, 0}}));

  // The same parameter used twice on one tape gets both contributions.
  {
    Tape tape;
    Var a = tape.parameter(store, "W");
    Var b = tape.parameter(store, "W");
    CHECK(a.id() == b.id());
    tape.backward(sum(add(a, b)));
  }
  for (double g : store.grad("W").values()) CHECK(g == 2.0);
  CHECK(store.scalar_count() == 4);
  CHECK_THROWS_AS(store.add("W", Tensor({1})), UsageError);
  CHECK_THROWS_AS(store.value("nope"), UsageError);
}

TEST_CASE("tape misuse is rejected") {
  Tape tape;
  Var x = tape.constant(Tensor::from_rows({{1, 2}}));
  Var s = sum(x);
  tape.backward(s);
  CHECK_THROWS_WITH_AS(tape.backward(s), "backward called twice without re-running forward", UsageError);
  CHECK_THROWS_AS(sum(x), UsageError);

  Tape t2;
  CHECK_THROWS_AS(t2.backward(t2.constant(Tensor::from_rows({{1, 2}}))), UsageError);
  CHECK_THROWS_AS(matmul(t2.constant(Tensor::matrix(2, 3)), t2.constant(Tensor::matrix(2, 3))), UsageError);
  CHECK_THROWS_AS(normalize_rows(t2.constant(Tensor::matrix(1, 3))), NumericError);
}

TEST_CASE("attention rows are distributions") {
  Rng rng(5);
  const Tensor qkv = random_tensor(rng, {3 * 7, 3 * 8}, 4.0);
  const Tensor P = attention_weights(qkv, 3, 7, 4);
  REQUIRE(P.rows() == 3 * 4 * 7);
  for (std::size_t r = 0; r < P.rows(); ++r) {
    double s = 0;
    for (double v : P.row(r)) {
      REQUIRE(v >= 0);
      s += v;
    }
    REQUIRE(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("layer norm standardizes each row") {
  Rng rng(6);
  Tape tape;
  Tensor x = random_tensor(rng, {20, 16}, 5.0);
  for (std::size_t c = 0; c < 16; ++c) x(3, c) = 1e3 + 0.5 * static_cast<double>(c);  // large common offset
  Var y = layer_norm(tape.constant(x), tape.constant(Tensor({16}, 1.0)), tape.constant(Tensor({16}, 0.0)),
                     kLayerNormEps);
  for (std::size_t r = 0; r < 20; ++r) {
    double mu = 0, var = 0;
    for (double v : y.value().row(r)) mu += v;
    mu /= 16;
    for (double v : y.value().row(r)) var += (v - mu) * (v - mu);
    var /= 16;
    CHECK(std::abs(mu) <= 1e-9);
    CHECK(std::abs(var - 1.0) <= 1e-9);
  }
}

TEST_CASE("dropout is identity at p = 0 and scales kept units") {
  Rng rng(8);
  Tape tape;
  Var x = tape.constant(Tensor({1000}, 1.0));
  CHECK(dropout(x, 0.0, rng).id() == x.id());
  const Tensor& y = dropout(x, 0.25, rng).value();
  std::size_t kept = 0;
  for (double v : y.values()) {
    REQUIRE((v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-15));
    kept += v != 0.0;
  }
  CHECK(kept > 650);
  CHECK(kept < 850);
}
