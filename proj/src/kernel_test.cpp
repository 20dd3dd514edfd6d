// Copyright 2026 The promptcl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "promptcl/kernel.hpp"

#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"

using namespace promptcl;
using doctest::Approx;

TEST_CASE("matrix basics") {
  RealMatrix m{{1, 2}, {3, 4}};
  CHECK(m.rows() == 2);
  CHECK(m(1, 0) == 3);
  CHECK(m.frobenius_norm() == Approx(std::sqrt(30.0)));
  CHECK(RealMatrix::identity(3)(2, 2) == 1.0);
  CHECK_THROWS_AS(RealMatrix(2, 2, std::vector<double>{1, 2, 3}), InputError);
  CHECK_THROWS_AS((RealMatrix{{1, 2}, {3}}), InputError);
  m(0, 0) = std::nan("");
  CHECK_FALSE(m.all_finite());
}

TEST_CASE("embed_lookup forward and backward") {
  Rng rng(4);
  const RealMatrix table = fixtures::random_matrix(rng, 5, 4);
  const std::vector<TokenId> ids{1, 1};
  const RealMatrix rows = embed_lookup(table, ids);
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(rows(0, c) == table(1, c));
    CHECK(rows(1, c) == table(1, c));
  }
  Tape tape;
  auto t = tape.variable(table);
  tape.backward(tape.sum_all(tape.embed_lookup(t, ids)));
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 4; ++c) CHECK(tape.grad(t)(r, c) == (r == 1 ? 2.0 : 0.0));
  }
  const std::vector<TokenId> bad{5};
  CHECK_THROWS_AS(embed_lookup(table, bad), InputError);
}

TEST_CASE("attention_pool examples") {
  const std::vector<double> q1{0.3, -0.2};
  RealMatrix one{{2.0, 5.0}};
  auto r1 = attention_pool(q1, one);
  CHECK(r1.weights == std::vector<double>{1.0});
  CHECK(r1.pooled == std::vector<double>{2.0, 5.0});

  RealMatrix twin{{1.5, -1.0}, {1.5, -1.0}};
  auto r2 = attention_pool(q1, twin);
  CHECK(r2.weights[0] == Approx(0.5));
  CHECK(r2.pooled[0] == Approx(1.5));

  const std::vector<double> q{1.0, 0.0};
  RealMatrix basis{{1.0, 0.0}, {0.0, 1.0}};
  auto r3 = attention_pool(q, basis);
  const double e = std::exp(1.0 / std::sqrt(2.0));
  const double sigma = e / (e + 1.0);
  CHECK(r3.weights[0] == Approx(sigma).epsilon(1e-12));
  CHECK(r3.pooled[0] == Approx(0.6698).epsilon(1e-4));
  CHECK(r3.pooled[1] == Approx(0.3302).epsilon(1e-4));

  CHECK_THROWS_AS(attention_pool(q, RealMatrix(0, 2)), InputError);
  CHECK_THROWS_AS(attention_pool(std::vector<double>{1.0}, basis), InputError);
}

TEST_CASE("attention weights are a distribution") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(12), d = 1 + rng.index(16);
    const RealMatrix v = fixtures::random_matrix(rng, n, d, 5.0);
    const RealMatrix q = fixtures::random_matrix(rng, 1, d, 5.0);
    auto r = attention_pool(q.row(0), v);
    double s = 0.0;
    for (double w : r.weights) {
      CHECK(w >= 0.0);
      s += w;
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("affine examples") {
  const std::vector<double> x{1.0, 1.0};
  CHECK(affine(RealMatrix::identity(2), x, std::vector<double>{0, 0}) == x);
  CHECK(affine(RealMatrix(2, 2), x, std::vector<double>{4, -1}) == std::vector<double>{4, -1});
  CHECK(affine(RealMatrix{{1, 2}, {3, 4}}, x, std::vector<double>{0, 1}) ==
        std::vector<double>{3, 8});
  CHECK_THROWS_AS(affine(RealMatrix(3, 2), x, std::vector<double>{0, 0}), InputError);
}

TEST_CASE("tanh examples") {
  CHECK(tanh_elem(std::vector<double>{0.0})[0] == 0.0);
  CHECK(std::abs(tanh_elem(std::vector<double>{40.0})[0] - 1.0) < 1e-9);
  CHECK(tanh_elem(std::vector<double>{0.5})[0] == Approx(0.46211716).epsilon(1e-8));
}

TEST_CASE("softmax_xent examples") {
  auto flat = softmax_xent(std::vector<double>{2, 2, 2, 2}, 1);
  CHECK(flat.loss == Approx(std::log(4.0)));
  CHECK(flat.probs[3] == Approx(0.25));
  CHECK(softmax_xent(std::vector<double>{0, 100}, 1).loss < 1e-40);
  auto r = softmax_xent(std::vector<double>{1, 2, 3}, 2);
  CHECK(r.probs[0] == Approx(0.0900).epsilon(1e-3));
  CHECK(r.probs[1] == Approx(0.2447).epsilon(1e-3));
  CHECK(r.probs[2] == Approx(0.6652).epsilon(1e-3));
  CHECK(r.loss == Approx(0.4076).epsilon(1e-3));
  CHECK_THROWS_AS(softmax_xent(std::vector<double>{1, 2}, 2), InputError);
  // Huge logits stay finite.
  auto big = softmax_xent(std::vector<double>{1e308, -1e308}, 0);
  CHECK(std::isfinite(big.loss));
}

TEST_CASE("softmax sums to one") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const RealMatrix z = fixtures::random_matrix(rng, 1, 1 + rng.index(30), 20.0);
    const auto p = softmax(z.row(0));
    double s = 0.0;
    for (double x : p) s += x;
    CHECK(std::abs(s - 1.0) < 1e-9);
    CHECK(softmax_xent(z.row(0), 0).loss >= 0.0);
  }
}

TEST_CASE("grad_check trivial identities") {
  Rng rng(6);
  const RealMatrix p = fixtures::random_matrix(rng, 3, 4);
  CHECK(grad_check([](Tape& t, Tape::Var x) { return t.sum_all(x); }, p, 1e-4) < 1e-8);
  Tape tape;
  auto x = tape.variable(p);
  tape.backward(tape.sum_squares(x));
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(tape.grad(x).data()[i] == 2.0 * p.data()[i]);
  CHECK(grad_check([](Tape& t, Tape::Var v) { return t.sum_squares(v); }, p, 1e-4) < 1e-6);
  CHECK_THROWS_AS(grad_check([](Tape& t, Tape::Var v) { return t.sum_all(v); }, p, 0.0),
                  InputError);
}

namespace {

// Each op, wrapped to a scalar through a seeded random head.
double worst_for_op(int op, Rng& rng) {
  const std::size_t d = 1 + rng.index(32);
  const std::size_t n = 1 + rng.index(6);
  const RealMatrix other = fixtures::random_matrix(rng, n, d);
  const RealMatrix weights = fixtures::random_matrix(rng, d, d, 0.3);
  const RealMatrix bias = fixtures::random_matrix(rng, 1, d);
  const std::size_t gold = rng.index(d);
  const std::vector<TokenId> ids{0, static_cast<TokenId>(rng.index(n + 1)), 0};
  TapeFunction f;
  RealMatrix point;
  switch (op) {
    case 0:  // embed_lookup
      point = fixtures::random_matrix(rng, n + 1, d);
      f = [ids](Tape& t, Tape::Var x) { return t.sum_squares(t.embed_lookup(x, ids)); };
      break;
    case 1:  // attention_pool, gradient through the query
      point = fixtures::random_matrix(rng, 1, d);
      f = [&](Tape& t, Tape::Var x) {
        return t.softmax_xent(t.attention_pool(x, t.constant_ref(other)), gold);
      };
      break;
    case 2:  // attention_pool, gradient through the values
      point = fixtures::random_matrix(rng, n, d);
      f = [&](Tape& t, Tape::Var x) {
        return t.softmax_xent(t.attention_pool(t.mean_rows(x), x), gold);
      };
      break;
    case 3:  // affine; x, W and b all depend on the variable
      point = fixtures::random_matrix(rng, 1, d);
      f = [&](Tape& t, Tape::Var x) {
        auto w = t.constant_ref(weights);
        return t.sum_squares(t.affine(w, x, t.add(x, t.constant_ref(bias))));
      };
      break;
    case 4:
      point = fixtures::random_matrix(rng, 1, d);
      f = [&](Tape& t, Tape::Var x) { return t.softmax_xent(t.tanh(t.scale(x, 1.7)), gold); };
      break;
    default:  // concat, sum and a composed loss
      point = fixtures::random_matrix(rng, 2, d);
      f = [&](Tape& t, Tape::Var x) {
        std::vector<Tape::Var> parts{x, t.constant_ref(other)};
        auto pooled = t.attention_pool(t.mean_rows(t.constant_ref(other)), t.concat_rows(parts));
        std::vector<Tape::Var> terms{t.softmax_xent(pooled, gold), t.sum_squares(x)};
        return t.sum(terms);
      };
      break;
  }
  return grad_check(f, point, 1e-4);
}

}  // namespace

TEST_CASE("every op passes the finite-difference check on 100 seeded configs") {
  for (int op = 0; op < 6; ++op) {
    Rng rng(derive_seed(100, static_cast<std::uint64_t>(op)));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) worst = std::max(worst, worst_for_op(op, rng));
    INFO("op ", op);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("affine gradient reaches the weights") {
  Rng rng(10);
  const RealMatrix x = fixtures::random_matrix(rng, 1, 5);
  const RealMatrix b = fixtures::random_matrix(rng, 1, 3);
  const RealMatrix w = fixtures::random_matrix(rng, 3, 5);
  CHECK(grad_check(
            [&](Tape& t, Tape::Var v) {
              return t.sum_squares(t.tanh(t.affine(v, t.constant_ref(x), t.constant_ref(b))));
            },
            w, 1e-4) < 1e-4);
}

TEST_CASE("backward visits only nodes on a gradient path") {
  Tape tape;
  auto c = tape.constant(RealMatrix(1, 2, 1.0));
  auto v = tape.variable(RealMatrix(1, 2, 0.5));
  auto dead = tape.tanh(c);
  auto live = tape.sum_squares(tape.add(v, c));
  tape.backward(live);
  const auto& order = tape.last_backward_order();
  CHECK(order.front() == live.id);
  CHECK(std::find(order.begin(), order.end(), dead.id) == order.end());
  CHECK(tape.grad(v)(0, 1) == Approx(3.0));
  CHECK_FALSE(tape.requires_grad(c));
  CHECK_THROWS_AS(tape.backward(v), InputError);
}

TEST_CASE("ops are pure") {
  Rng rng(12);
  const RealMatrix v = fixtures::random_matrix(rng, 7, 9);
  const RealMatrix q = fixtures::random_matrix(rng, 1, 9);
  CHECK(attention_pool(q.row(0), v).pooled == attention_pool(q.row(0), v).pooled);
}
