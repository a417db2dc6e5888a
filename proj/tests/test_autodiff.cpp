// Copyright 2026 the vcx authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "vcx/nn/gradcheck.hpp"
#include "vcx/nn/tape.hpp"
#include "vcx/nn/tensor.hpp"
#include "vcx/util/rng.hpp"

using vcx::Rng;
using vcx::nn::concat_cols;
using vcx::nn::concat_rows;
using vcx::nn::ParamBlockT;
using vcx::nn::PoolKind;
using vcx::nn::TapeT;
using vcx::nn::TensorT;
using vcx::nn::ValT;

namespace {

using Tape64 = TapeT<double>;
using Val64 = ValT<double>;
using T64 = TensorT<double>;

struct Block {
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<int> shape;
};

// Runs central-difference verification of one scalar-valued graph builder over
// a set of leaf parameter blocks with random contents.
template <typename Build>
double op_check(std::vector<std::vector<int>> shapes, Build build, uint64_t seed,
                size_t max_coords = 400, double eps = 1e-5) {
  Rng rng(seed);
  std::vector<Block> blocks;
  for (const auto& sh : shapes) {
    Block b;
    b.shape = sh;
    b.value.resize(T64::numel_of(sh));
    b.grad.assign(b.value.size(), 0.0);
    for (auto& v : b.value) v = rng.uniform(-1.0, 1.0);
    blocks.push_back(std::move(b));
  }
  auto run = [&](bool backward) {
    Tape64 tape;
    std::vector<Val64> leaves;
    for (auto& b : blocks)
      leaves.push_back(tape.leaf(T64(b.shape, b.value), b.grad.data()));
    Val64 loss = build(tape, leaves);
    const double v = loss.value()[0];
    if (backward) tape.backward(loss);
    return v;
  };
  std::vector<ParamBlockT<double>> views;
  for (auto& b : blocks)
    views.push_back({b.value.data(), b.grad.data(), b.value.size()});
  auto loss_fn = [&]() { return run(false); };
  auto grad_fn = [&]() {
    for (auto& b : blocks) std::fill(b.grad.begin(), b.grad.end(), 0.0);
    run(true);
  };
  Rng pick(seed ^ 0x9e3779b97f4a7c15ull);
  return vcx::nn::check_gradients<double>(loss_fn, grad_fn, views, eps, max_coords, pick);
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  TensorT<float> t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK_THROWS(TensorT<float>({2, 2}, {1.f, 2.f, 3.f}));
}

TEST_CASE("matmul forward oracles") {
  Tape64 tape;
  SUBCASE("identity passthrough") {
    auto i2 = tape.constant(T64({2, 2}, {1, 0, 0, 1}));
    auto x = tape.constant(T64({2, 3}, {1, 2, 3, 4, 5, 6}));
    auto y = matmul(i2, x);
    for (int i = 0; i < 6; ++i) CHECK(y.value()[i] == doctest::Approx(x.value()[i]));
  }
  SUBCASE("hand product") {
    auto a = tape.constant(T64({2, 2}, {1, 2, 3, 4}));
    auto b = tape.constant(T64({2, 1}, {1, 1}));
    auto y = matmul(a, b);
    CHECK(y.value()[0] == doctest::Approx(3.0));
    CHECK(y.value()[1] == doctest::Approx(7.0));
  }
  SUBCASE("zero matrix annihilates") {
    auto z = tape.constant(T64({2, 2}));
    auto x = tape.constant(T64({2, 2}, {5, -1, 2, 9}));
    auto y = matmul(z, x);
    for (int i = 0; i < 4; ++i) CHECK(y.value()[i] == 0.0);
  }
  SUBCASE("dimension error names both shapes") {
    auto a = tape.constant(T64({2, 3}));
    auto b = tape.constant(T64({2, 3}));
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("2x3"), std::invalid_argument);
  }
}

TEST_CASE("softmax forward oracles") {
  Tape64 tape;
  auto x = tape.constant(T64({3, 2}, {0, 0, 1000, 1000, 0, std::log(3.0)}));
  auto y = softmax_rows(x);
  CHECK(y.value().at2(0, 0) == doctest::Approx(0.5));
  CHECK(y.value().at2(1, 0) == doctest::Approx(0.5));  // no overflow
  CHECK(y.value().at2(1, 1) == doctest::Approx(0.5));
  CHECK(y.value().at2(2, 0) == doctest::Approx(0.25));
  CHECK(y.value().at2(2, 1) == doctest::Approx(0.75));
  for (int i = 0; i < 3; ++i) {
    double s = y.value().at2(i, 0) + y.value().at2(i, 1);
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("pooling forward oracles") {
  Tape64 tape;
  SUBCASE("constant field is a fixed point of all kinds") {
    T64 c({3, 3, 2});
    for (size_t i = 0; i < c.numel(); ++i) c[i] = (i % 2 == 0) ? 2.5 : -1.5;
    for (auto kind : {PoolKind::kGap, PoolKind::kGmp, PoolKind::kGwrp}) {
      auto y = pool_spatial(tape.constant(c), kind, 0.7);
      CHECK(y.value()[0] == doctest::Approx(2.5));
      CHECK(y.value()[1] == doctest::Approx(-1.5));
    }
  }
  SUBCASE("GMP picks the max") {
    auto y = pool_spatial(tape.constant(T64({2, 2, 1}, {1, 2, 3, 4})), PoolKind::kGmp);
    CHECK(y.value()[0] == 4.0);
  }
  SUBCASE("GWRP weighted rank sum") {
    auto y = pool_spatial(tape.constant(T64({2, 2, 1}, {4, 3, 2, 1})), PoolKind::kGwrp, 0.5);
    CHECK(y.value()[0] == doctest::Approx(6.125 / 1.875));
  }
  SUBCASE("GWRP with decay 1 equals GAP") {
    T64 x({2, 2, 1}, {0.3, -2.0, 5.0, 1.25});
    auto g = pool_spatial(tape.constant(x), PoolKind::kGwrp, 1.0);
    auto a = pool_spatial(tape.constant(x), PoolKind::kGap);
    CHECK(g.value()[0] == doctest::Approx(a.value()[0]));
  }
  SUBCASE("GWRP decay outside (0,1] rejected") {
    auto x = tape.constant(T64({1, 1, 1}, {1.0}));
    CHECK_THROWS_AS(pool_spatial(x, PoolKind::kGwrp, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(pool_spatial(x, PoolKind::kGwrp, 1.5), std::invalid_argument);
  }
}

TEST_CASE("conv2d forward oracles") {
  Tape64 tape;
  SUBCASE("1x1 all-ones kernel sums channels") {
    T64 x({2, 2, 3});
    for (size_t i = 0; i < x.numel(); ++i) x[i] = static_cast<double>(i);
    auto w = tape.constant(T64({1, 1, 3, 1}, {1, 1, 1}));
    auto b = tape.constant(T64({1}));
    auto y = conv2d_same(tape.constant(x), w, b);
    for (int p = 0; p < 4; ++p) {
      double want = x[p * 3 + 0] + x[p * 3 + 1] + x[p * 3 + 2];
      CHECK(y.value()[p] == doctest::Approx(want));
    }
  }
  SUBCASE("delta kernel shifts within padding rules") {
    // 3x3 kernel with a one at (0,1): y(i,j) = x(i-1, j) under same-padding.
    T64 x({3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    T64 w({3, 3, 1, 1});
    w[1] = 1.0;  // di=0, dj=1 -> source row i-1, same column
    auto y = conv2d_same(tape.constant(x), tape.constant(w), tape.constant(T64({1})));
    CHECK(y.value().at3(0, 0, 0) == 0.0);
    CHECK(y.value().at3(1, 0, 0) == doctest::Approx(1.0));
    CHECK(y.value().at3(2, 2, 0) == doctest::Approx(6.0));
  }
  SUBCASE("zero weights give zero output") {
    T64 x({2, 2, 2});
    for (size_t i = 0; i < x.numel(); ++i) x[i] = 3.0;
    auto y = conv2d_same(tape.constant(x), tape.constant(T64({3, 3, 2, 4})),
                         tape.constant(T64({4})));
    for (size_t i = 0; i < y.value().numel(); ++i) CHECK(y.value()[i] == 0.0);
  }
  SUBCASE("even kernel rejected") {
    Tape64 t2;
    CHECK_THROWS_AS(conv2d_same(t2.constant(T64({2, 2, 1})), t2.constant(T64({2, 2, 1, 1})),
                                t2.constant(T64({1}))),
                    std::invalid_argument);
  }
}

TEST_CASE("backward basic oracles") {
  SUBCASE("d(x*x)/dx at 3 is 6") {
    Tape64 tape;
    std::vector<double> grad(1, 0.0);
    auto x = tape.leaf(T64({1}, {3.0}), grad.data());
    tape.backward(sum_all(mul(x, x)));
    CHECK(grad[0] == doctest::Approx(6.0));
  }
  SUBCASE("sigmoid slope at 0 is 0.25") {
    Tape64 tape;
    std::vector<double> grad(1, 0.0);
    auto x = tape.leaf(T64({1}, {0.0}), grad.data());
    tape.backward(sum_all(sigmoid(x)));
    CHECK(grad[0] == doctest::Approx(0.25));
  }
  SUBCASE("non-scalar loss rejected") {
    Tape64 tape;
    std::vector<double> grad(2, 0.0);
    auto x = tape.leaf(T64({2}, {1.0, 2.0}), grad.data());
    CHECK_THROWS_AS(tape.backward(mul(x, x)), std::invalid_argument);
  }
}

TEST_CASE("gradcheck per op") {
  // Each subcase checks one op composed with enough structure to exercise its
  // full gradient rule, in 64-bit mode, against central differences.
  SUBCASE("arithmetic and reshape") {
    double e = op_check({{3, 4}, {3, 4}}, [](Tape64& t, std::vector<Val64> xs) {
      auto s = add(mul(xs[0], xs[1]), sub(xs[0], scale(xs[1], 0.7)));
      auto r = reshape(neg(s), {4, 3});
      return mean_all(mul(r, r));
    }, 11);
    CHECK(e < 1e-6);
  }
  SUBCASE("matmul and transpose") {
    double e = op_check({{3, 4}, {4, 5}}, [](Tape64& t, std::vector<Val64> xs) {
      auto y = matmul(xs[0], xs[1]);
      auto z = matmul(transpose2d(y), y);
      (void)t;
      return mean_all(mul(z, z));
    }, 12);
    CHECK(e < 1e-6);
  }
  SUBCASE("softmax rows") {
    double e = op_check({{4, 6}}, [](Tape64& t, std::vector<Val64> xs) {
      auto y = softmax_rows(scale(xs[0], 3.0));
      (void)t;
      return mean_all(mul(y, y));
    }, 13);
    CHECK(e < 1e-6);
  }
  SUBCASE("log softmax rows") {
    double e = op_check({{4, 6}}, [](Tape64& t, std::vector<Val64> xs) {
      auto y = log_softmax_rows(scale(xs[0], 2.0));
      (void)t;
      return mean_all(mul(y, y));
    }, 14);
    CHECK(e < 1e-6);
  }
  SUBCASE("layer norm") {
    double e = op_check({{5, 8}, {8}, {8}}, [](Tape64& t, std::vector<Val64> xs) {
      auto y = vcx::nn::layer_norm(xs[0], xs[1], xs[2]);
      (void)t;
      return mean_all(mul(y, y));
    }, 15);
    CHECK(e < 1e-6);
  }
  SUBCASE("gelu sigmoid softplus relu") {
    double e = op_check({{4, 7}}, [](Tape64& t, std::vector<Val64> xs) {
      auto a = gelu(xs[0]);
      auto b = sigmoid(xs[0]);
      auto c = softplus(xs[0]);
      auto d = relu(add(xs[0], t.constant(T64({4, 7}, std::vector<double>(28, 0.05)))));
      return mean_all(add(add(a, b), add(c, d)));
    }, 16);
    CHECK(e < 1e-6);
  }
  SUBCASE("broadcast row ops and reductions") {
    double e = op_check({{5, 6}, {6}, {6}}, [](Tape64& t, std::vector<Val64> xs) {
      auto y = add_rowvec(mul_rowvec(xs[0], xs[1]), xs[2]);
      auto m = row_mean(y);
      (void)t;
      return sum_all(mul(m, m));
    }, 17);
    CHECK(e < 1e-6);
  }
  SUBCASE("slices and concats") {
    double e = op_check({{6, 4}, {2, 4}, {6, 3}}, [](Tape64& t, std::vector<Val64> xs) {
      auto cat = concat_rows<double>(
          {slice_rows(xs[0], 0, 2), xs[1], slice_rows(xs[0], 3, 6)});  // 7x4
      auto side = concat_rows<double>({xs[2], slice_rows(xs[2], 0, 1)});  // 7x3
      auto cc = concat_cols<double>({cat, side});
      auto sl = slice_cols(cc, 1, 6);
      (void)t;
      return mean_all(mul(sl, sl));
    }, 18);
    CHECK(e < 1e-6);
  }
  SUBCASE("diag and l2 normalize") {
    double e = op_check({{5, 5}}, [](Tape64& t, std::vector<Val64> xs) {
      auto y = l2_normalize_rows(xs[0]);
      auto s = matmul(y, transpose2d(y));
      (void)t;
      return mean_all(mul(diag(s), diag(s)));
    }, 19);
    CHECK(e < 1e-6);
  }
  SUBCASE("conv2d") {
    double e = op_check({{4, 4, 3}, {3, 3, 3, 2}, {2}}, [](Tape64& t, std::vector<Val64> xs) {
      auto y = conv2d_same(xs[0], xs[1], xs[2]);
      (void)t;
      return mean_all(mul(y, y));
    }, 20);
    CHECK(e < 1e-6);
  }
  SUBCASE("pooling kinds") {
    for (auto [kind, seed] : {std::pair{PoolKind::kGap, 21ull},
                              std::pair{PoolKind::kGmp, 22ull},
                              std::pair{PoolKind::kGwrp, 23ull}}) {
      double e = op_check({{3, 3, 4}}, [kind](Tape64& t, std::vector<Val64> xs) {
        auto y = pool_spatial(xs[0], kind, 0.6);
        (void)t;
        return mean_all(mul(y, y));
      }, seed);
      CHECK(e < 1e-6);
    }
  }
  SUBCASE("linear function is exact") {
    double e = op_check({{4, 4}}, [](Tape64& t, std::vector<Val64> xs) {
      (void)t;
      return mean_all(scale(xs[0], 3.25));
    }, 24);
    CHECK(e < 1e-9);
  }
}

TEST_CASE("gradcheck negative control") {
  // A corrupted gradient must be flagged loudly.
  Rng rng(77);
  std::vector<double> value(12), grad(12);
  for (auto& v : value) v = rng.uniform(-1.0, 1.0);
  auto loss_fn = [&]() {
    Tape64 tape;
    auto x = tape.constant(T64({3, 4}, value));
    return mean_all(mul(x, x)).value()[0];
  };
  auto grad_fn = [&]() {
    std::fill(grad.begin(), grad.end(), 0.0);
    Tape64 tape;
    auto x = tape.leaf(T64({3, 4}, value), grad.data());
    tape.backward(mean_all(mul(x, x)));
    grad[3] += 0.5;  // fault injection
  };
  std::vector<ParamBlockT<double>> views{{value.data(), grad.data(), value.size()}};
  Rng pick(5);
  double e = vcx::nn::check_gradients<double>(loss_fn, grad_fn, views, 1e-5, 12, pick);
  CHECK(e > 1e-2);
}

TEST_CASE("forward determinism is bit exact") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    TapeT<float> tape;
    TensorT<float> a({16, 16}), b({16, 16});
    for (size_t i = 0; i < a.numel(); ++i) a[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (size_t i = 0; i < b.numel(); ++i) b[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    auto y = softmax_rows(matmul(tape.constant(a), tape.constant(b)));
    std::vector<float> out(y.value().data(), y.value().data() + y.value().numel());
    return out;
  };
  auto r1 = run(99), r2 = run(99);
  CHECK(std::memcmp(r1.data(), r2.data(), r1.size() * sizeof(float)) == 0);
}
