// Copyright 2026 The protospoof Authors
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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>

#include "protospoof/numkernel/attention.hpp"
#include "protospoof/numkernel/optim.hpp"
#include "test_support.hpp"

namespace protospoof {
namespace {

using testing::random_tensor;

Tensor2 forward(const std::function<Var(Tape&)>& f) {
  Tape tape;
  return tape.value(f(tape));
}

TEST(Affine, IdentityWeights) {
  const Tensor2 y = forward([](Tape& t) {
    return affine(t, t.constant({{1, 2}}), t.constant({{1, 0}, {0, 1}}), t.constant({{0, 0}}));
  });
  EXPECT_EQ(y(0, 0), 1.0);
  EXPECT_EQ(y(0, 1), 2.0);
}

TEST(Affine, HandMultiply) {
  const Tensor2 y = forward([](Tape& t) {
    return affine(t, t.constant({{1, 1}}), t.constant({{2, 0}, {0, 3}}), t.constant({{1, 1}}));
  });
  EXPECT_EQ(y(0, 0), 3.0);
  EXPECT_EQ(y(0, 1), 4.0);
}

TEST(Affine, ShapeMismatchThrows) {
  Tape t;
  EXPECT_THROW(affine(t, t.constant(Tensor2(1, 3)), t.constant(Tensor2(2, 2)), t.constant(Tensor2(1, 2))),
               DimensionError);
}

TEST(Relu, Examples) {
  Tensor2 y = forward([](Tape& t) { return relu(t, t.constant({{-1, 2}})); });
  EXPECT_EQ(y(0, 0), 0.0);
  EXPECT_EQ(y(0, 1), 2.0);
  y = forward([](Tape& t) { return relu(t, t.constant({{0}})); });
  EXPECT_EQ(y(0, 0), 0.0);
  const Tensor2 pos{{0.5, 3.0, 1e-9}};
  y = forward([&](Tape& t) { return relu(t, t.constant(pos)); });
  EXPECT_EQ(max_abs_diff(y, pos), 0.0);
}

TEST(Softmax, Examples) {
  Tensor2 y = forward([](Tape& t) { return softmax_rows(t, t.constant({{0, 0}})); });
  EXPECT_EQ(y(0, 0), 0.5);
  EXPECT_EQ(y(0, 1), 0.5);
  y = forward([](Tape& t) { return softmax_rows(t, t.constant({{std::log(3.0), 0}})); });
  EXPECT_NEAR(y(0, 0), 0.75, 1e-15);
  EXPECT_NEAR(y(0, 1), 0.25, 1e-15);
  y = forward([](Tape& t) { return softmax_rows(t, t.constant({{1000, 0}})); });
  EXPECT_TRUE(y.all_finite());
  EXPECT_NEAR(y(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(y(0, 1), 0.0, 1e-15);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor2 x = random_tensor(4, 7, rng, -20, 20);
    Tensor2 shifted = x;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double c = rng.uniform(-50, 50);
      for (double& v : shifted.row(i)) v += c;
    }
    const Tensor2 a = forward([&](Tape& t) { return softmax_rows(t, t.constant(x)); });
    const Tensor2 b = forward([&](Tape& t) { return softmax_rows(t, t.constant(shifted)); });
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const auto r = a.row(i);
      EXPECT_NEAR(std::accumulate(r.begin(), r.end(), 0.0), 1.0, 1e-12);
    }
    EXPECT_LT(max_abs_diff(a, b), 1e-12);
  }
}

TEST(LogSoftmax, MatchesLogOfSoftmax) {
  Rng rng(12);
  const Tensor2 x = random_tensor(3, 5, rng, -5, 5);
  const Tensor2 a = forward([&](Tape& t) { return log_softmax_rows(t, t.constant(x)); });
  const Tensor2 b = forward([&](Tape& t) { return softmax_rows(t, t.constant(x)); });
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], std::log(b.data()[i]), 1e-14);
}

// ---- gradients of primitives ---------------------------------------------------

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Scalar head: sum(y) + sum(y^2), so every output entry receives a
// different upstream gradient.
Var scalar_head(Tape& t, Var y) { return add(t, sum_all(t, y), sum_squares(t, y)); }

double primitive_gradient_error(std::vector<Tensor2> inputs, const Builder& build) {
  ParamStore store;
  std::vector<ParamId> ids;
  for (std::size_t i = 0; i < inputs.size(); ++i) ids.push_back(store.add("x" + std::to_string(i), inputs[i]));
  auto loss_value = [&] {
    Tape t;
    std::vector<Var> vars;
    for (auto id : ids) vars.push_back(t.param(store, id));
    return t.value(scalar_head(t, build(t, vars)))(0, 0);
  };
  {
    Tape t;
    std::vector<Var> vars;
    for (auto id : ids) vars.push_back(t.param(store, id));
    t.backward(scalar_head(t, build(t, vars)), store);
  }
  const double h = 1e-5;
  double worst = 0.0;
  for (auto& p : store.params())
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double keep = p.value.data()[i];
      p.value.data()[i] = keep + h;
      const double up = loss_value();
      p.value.data()[i] = keep - h;
      const double down = loss_value();
      p.value.data()[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p.grad.data()[i];
      worst = std::max(worst, std::abs(analytic - numeric) /
                                  std::max({std::abs(analytic), std::abs(numeric), 1e-4}));
    }
  return worst;
}

struct PrimitiveCase {
  const char* name;
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  Builder build;
};

std::vector<PrimitiveCase> primitive_cases() {
  return {
      {"matmul", {{3, 4}, {4, 2}}, [](Tape& t, const std::vector<Var>& v) { return matmul(t, v[0], v[1]); }},
      {"affine", {{3, 4}, {4, 2}, {1, 2}},
       [](Tape& t, const std::vector<Var>& v) { return affine(t, v[0], v[1], v[2]); }},
      {"add", {{2, 3}, {2, 3}}, [](Tape& t, const std::vector<Var>& v) { return add(t, v[0], v[1]); }},
      {"scale", {{2, 3}}, [](Tape& t, const std::vector<Var>& v) { return scale(t, v[0], -1.7); }},
      {"relu", {{3, 3}}, [](Tape& t, const std::vector<Var>& v) { return relu(t, v[0]); }},
      {"transpose", {{2, 5}}, [](Tape& t, const std::vector<Var>& v) { return transpose(t, v[0]); }},
      {"softmax_rows", {{3, 4}}, [](Tape& t, const std::vector<Var>& v) { return softmax_rows(t, v[0]); }},
      {"log_softmax_rows", {{3, 4}}, [](Tape& t, const std::vector<Var>& v) { return log_softmax_rows(t, v[0]); }},
      {"slice_cols", {{3, 6}}, [](Tape& t, const std::vector<Var>& v) { return slice_cols(t, v[0], 2, 3); }},
      {"concat_cols", {{3, 2}, {3, 4}},
       [](Tape& t, const std::vector<Var>& v) { return concat_cols(t, {v[0], v[1]}); }},
      {"concat_rows", {{2, 3}, {1, 3}},
       [](Tape& t, const std::vector<Var>& v) { return concat_rows(t, {v[0], v[1]}); }},
      {"gather_rows", {{4, 3}}, [](Tape& t, const std::vector<Var>& v) { return gather_rows(t, v[0], {2, 0, 2}); }},
      {"mean_rows", {{5, 3}}, [](Tape& t, const std::vector<Var>& v) { return mean_rows(t, v[0]); }},
      {"l2_normalize_rows", {{3, 4}}, [](Tape& t, const std::vector<Var>& v) { return l2_normalize_rows(t, v[0]); }},
      {"pairwise_distance", {{3, 4}, {2, 4}},
       [](Tape& t, const std::vector<Var>& v) { return pairwise_distance(t, v[0], v[1], false); }},
      {"pairwise_sq_distance", {{3, 4}, {2, 4}},
       [](Tape& t, const std::vector<Var>& v) { return pairwise_distance(t, v[0], v[1], true); }},
      {"nll_mean", {{3, 4}},
       [](Tape& t, const std::vector<Var>& v) { return nll_mean(t, log_softmax_rows(t, v[0]), {1, 3, 0}); }},
      {"self_attention", {{5, 4}, {4, 4}, {1, 4}, {4, 4}, {1, 4}, {4, 4}, {1, 4}, {4, 4}, {1, 4}},
       [](Tape& t, const std::vector<Var>& v) {
         return multi_head_self_attention(t, v[0], {v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]}, 2);
       }},
  };
}

TEST(Gradients, PrimitivesMatchFiniteDifferences) {
  for (const auto& c : primitive_cases()) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(derive_seed(seed, {0x9a}));
      std::vector<Tensor2> inputs;
      for (auto [r, k] : c.shapes) {
        Tensor2 x = random_tensor(r, k, rng);
        // keep relu inputs away from the kink
        if (std::string(c.name) == "relu")
          for (double& v : x.data())
            if (std::abs(v) < 1e-2) v = 0.5;
        inputs.push_back(std::move(x));
      }
      EXPECT_LT(primitive_gradient_error(inputs, c.build), 1e-4) << c.name << " seed " << seed;
    }
  }
}

TEST(Gradients, SingleRowBiasIsOnes) {
  ParamStore store;
  const ParamId b = store.add("b", Tensor2(1, 3));
  Rng rng(2);
  Tape t;
  const Var y = affine(t, t.constant(Tensor2(1, 3, 1.0)), t.constant(random_tensor(3, 3, rng)), t.param(store, b));
  t.backward(sum_all(t, y), store);
  for (double g : store[b].grad.data()) EXPECT_EQ(g, 1.0);
}

TEST(Gradients, ZeroTimesAnythingGivesZero) {
  ParamStore store;
  Rng rng(3);
  const ParamId w = store.add("w", random_tensor(3, 3, rng));
  Tape t;
  const Var y = matmul(t, t.constant(random_tensor(2, 3, rng)), t.param(store, w));
  t.backward(scale(t, sum_squares(t, y), 0.0), store);
  for (double g : store[w].grad.data()) EXPECT_EQ(g, 0.0);
}

TEST(Tape, RejectsNonScalarLossAndReplay) {
  ParamStore store;
  Tape t;
  const Var x = t.constant(Tensor2(2, 2, 1.0));
  EXPECT_THROW(t.backward(x, store), ContractError);
  const Var s = sum_all(t, x);
  t.backward(s, store);
  EXPECT_THROW(t.backward(s, store), ContractError);
}

// ---- attention -----------------------------------------------------------------

struct AttentionFixture {
  ParamStore store;
  std::vector<ParamId> ids;
  explicit AttentionFixture(std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    for (const char* n : {"wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo"})
      ids.push_back(store.add(n, n[0] == 'b' ? random_tensor(1, d, rng) : random_tensor(d, d, rng)));
  }
  Tensor2 run(const Tensor2& z, std::size_t heads) const {
    Tape t;
    AttentionVars v{t.param(store, ids[0]), t.param(store, ids[1]), t.param(store, ids[2]), t.param(store, ids[3]),
                    t.param(store, ids[4]), t.param(store, ids[5]), t.param(store, ids[6]), t.param(store, ids[7])};
    return t.value(multi_head_self_attention(t, t.constant(z), v, heads));
  }
};

TEST(Attention, SingleRowIsProjectedValue) {
  const AttentionFixture f(4, 21);
  Rng rng(22);
  const Tensor2 z = random_tensor(1, 4, rng);
  const Tensor2 got = f.run(z, 2);
  // (z wv + bv) wo + bo, written out directly
  const auto& wv = f.store.value(f.ids[4]);
  const auto& bv = f.store.value(f.ids[5]);
  const auto& wo = f.store.value(f.ids[6]);
  const auto& bo = f.store.value(f.ids[7]);
  std::vector<double> v(4), o(4);
  for (int j = 0; j < 4; ++j) {
    v[j] = bv(0, j);
    for (int i = 0; i < 4; ++i) v[j] += z(0, i) * wv(i, j);
  }
  for (int j = 0; j < 4; ++j) {
    o[j] = bo(0, j);
    for (int i = 0; i < 4; ++i) o[j] += v[i] * wo(i, j);
    EXPECT_NEAR(got(0, j), o[j], 1e-12);
  }
}

TEST(Attention, DuplicateRowsGiveDuplicateOutputs) {
  const AttentionFixture f(4, 23);
  Rng rng(24);
  Tensor2 z = random_tensor(3, 4, rng);
  std::copy(z.row(0).begin(), z.row(0).end(), z.row(2).begin());
  const Tensor2 y = f.run(z, 2);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(y(0, j), y(2, j));
}

TEST(Attention, RowPermutationEquivariance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const AttentionFixture f(8, seed);
    Rng rng(derive_seed(seed, {1}));
    const Tensor2 z = random_tensor(7, 8, rng);
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    const Tensor2 y = f.run(z, 2);
    const Tensor2 yp = f.run(select_rows(z, perm), 2);
    EXPECT_LT(max_abs_diff(yp, select_rows(y, perm)), 1e-10);
  }
}

TEST(Attention, HeadCountMustDivideWidth) {
  const AttentionFixture f(4, 25);
  EXPECT_THROW(f.run(Tensor2(2, 4, 0.1), 3), ConfigError);
}

TEST(Forward, Deterministic) {
  const AttentionFixture f(8, 26);
  Rng rng(27);
  const Tensor2 z = random_tensor(6, 8, rng);
  const Tensor2 a = f.run(z, 2), b = f.run(z, 2);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

// ---- optimiser -----------------------------------------------------------------

TEST(Adam, ZeroGradientLeavesParameters) {
  ParamStore store;
  Rng rng(31);
  const ParamId w = store.add("w", random_tensor(3, 2, rng));
  const Tensor2 before = store.value(w);
  adam_step(store, 1e-3);
  EXPECT_EQ(max_abs_diff(store.value(w), before), 0.0);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  ParamStore store;
  const ParamId w = store.add("w", Tensor2(1, 4, 0.0));
  const std::vector<double> g{0.3, -2.0, 1e-3, -40.0};
  std::copy(g.begin(), g.end(), store[w].grad.data().begin());
  const double lr = 1e-3;
  adam_step(store, lr);
  for (std::size_t i = 0; i < g.size(); ++i) {
    // mhat = g, vhat = g^2 after bias correction
    const double expected = -lr * g[i] / (std::abs(g[i]) + 1e-8);
    EXPECT_NEAR(store.value(w)(0, i), expected, 1e-15);
    EXPECT_EQ(std::signbit(store.value(w)(0, i)), std::signbit(-g[i]));
  }
  EXPECT_EQ(store.step(), 1u);
  for (double v : store[w].grad.data()) EXPECT_EQ(v, 0.0);
}

TEST(Adam, ReproducibleBitForBit) {
  auto run = [] {
    ParamStore store;
    Rng rng(32);
    const ParamId w = store.add("w", random_tensor(4, 4, rng));
    for (int s = 0; s < 2; ++s) {
      auto g = store[w].grad.data();
      for (double& v : g) v = rng.normal();
      adam_step(store, 1e-2);
    }
    return store.value(w);
  };
  const Tensor2 a = run(), b = run();
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(StepLr, Schedule) {
  EXPECT_EQ(step_lr(1e-3, 0, 20, 0.5), 1e-3);
  EXPECT_EQ(step_lr(1e-3, 19, 20, 0.5), 1e-3);
  EXPECT_EQ(step_lr(1e-3, 20, 20, 0.5), 5e-4);
  EXPECT_DOUBLE_EQ(step_lr(1e-3, 45, 20, 0.5), 2.5e-4);
  EXPECT_THROW(step_lr(1e-3, 1, 0, 0.5), ConfigError);
}

}  // namespace
}  // namespace protospoof
