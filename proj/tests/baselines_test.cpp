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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "test_support.hpp"

namespace protospoof {
namespace {

Tensor2 normal_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Tensor2 x(n, d);
  for (double& v : x.data()) v = rng.normal();
  return x;
}

// Random orthonormal matrix by Gram-Schmidt on normal columns.
Tensor2 random_orthonormal(std::size_t d, std::uint64_t seed) {
  Tensor2 q = normal_rows(d, d, seed);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      double dot = 0.0;
      for (std::size_t r = 0; r < d; ++r) dot += q(r, c) * q(r, p);
      for (std::size_t r = 0; r < d; ++r) q(r, c) -= dot * q(r, p);
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < d; ++r) norm += q(r, c) * q(r, c);
    for (std::size_t r = 0; r < d; ++r) q(r, c) /= std::sqrt(norm);
  }
  return q;
}

std::vector<double> values(const Tensor2& t) { return {t.data().begin(), t.data().end()}; }

std::vector<double> probe_weights(const ProbeModel& p) { return values(p.params().value(p.params().id("probe.w"))); }

GaussianModel moments_model(std::vector<double> mu, const std::vector<std::vector<double>>& cov) {
  Tensor2 s(cov.size(), cov.size());
  for (std::size_t i = 0; i < cov.size(); ++i)
    for (std::size_t j = 0; j < cov.size(); ++j) s(i, j) = cov[i][j];
  return GaussianModel::from_moments(std::move(mu), std::move(s), 0.0);
}

TEST(Gaussian, StandardNormalFit) {
  const GaussianModel g = fit_gaussian(normal_rows(10000, 4, 1), 0.0);
  double norm = 0.0;
  for (double m : g.mean) norm += m * m;
  EXPECT_LT(std::sqrt(norm), 0.05);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_LT(std::abs(g.covariance(i, j) - (i == j ? 1.0 : 0.0)), 0.1);
}

TEST(Gaussian, IdenticalPointsAreIllConditioned) {
  Tensor2 x(2, 3);
  for (std::size_t j = 0; j < 3; ++j) x(0, j) = x(1, j) = 0.5 * j;
  EXPECT_THROW(fit_gaussian(x, 0.0), ConditioningError);
  EXPECT_NO_THROW(fit_gaussian(x, 0.5));
  EXPECT_THROW(fit_gaussian(normal_rows(1, 3, 2)), ValidationError);
  EXPECT_THROW(fit_gaussian(x, 1.5), ConfigError);
}

TEST(Gaussian, FullShrinkageIsDiagonal) {
  const GaussianModel g = fit_gaussian(normal_rows(50, 5, 3), 1.0);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      if (i != j) {
        EXPECT_EQ(g.covariance(i, j), 0.0);
      }
    }
}

TEST(Mahalanobis, WorkedExamples) {
  const GaussianModel id = moments_model({0, 0}, {{1, 0}, {0, 1}});
  const std::vector<double> x{3, 4};
  EXPECT_NEAR(mahalanobis_score(id, x), 5.0, 1e-12);
  const GaussianModel diag = moments_model({0, 0}, {{4, 0}, {0, 1}});
  const std::vector<double> y{2, 1};
  EXPECT_NEAR(mahalanobis_score(diag, y), std::sqrt(2.0), 1e-12);
  const GaussianModel g = fit_gaussian(normal_rows(30, 3, 4));
  EXPECT_EQ(mahalanobis_score(g, g.mean), 0.0);
  EXPECT_THROW(mahalanobis_score(g, x), DimensionError);
}

TEST(Mahalanobis, IdentityCovarianceIsEuclidean) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.below(8);
    std::vector<double> mu(d), x(d);
    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      mu[i] = rng.normal() * 3;
      x[i] = rng.normal() * 3;
      cov[i][i] = 1.0;
      sq += (x[i] - mu[i]) * (x[i] - mu[i]);
    }
    EXPECT_NEAR(mahalanobis_score(moments_model(mu, cov), x), std::sqrt(sq), 1e-10);
  }
}

TEST(Mahalanobis, OrthonormalChangeOfBasis) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t d = 6;
    const GaussianModel g = fit_gaussian(normal_rows(40, d, 100 + seed));
    const Tensor2 q = random_orthonormal(d, 200 + seed);
    std::vector<double> mu(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) mu[i] += q(i, j) * g.mean[j];
    Tensor2 cov(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t b = 0; b < d; ++b) cov(i, j) += q(i, a) * g.covariance(a, b) * q(j, b);
    const GaussianModel r = GaussianModel::from_moments(mu, cov, g.shrinkage);
    const Tensor2 xs = normal_rows(10, d, 300 + seed);
    for (std::size_t n = 0; n < xs.rows(); ++n) {
      std::vector<double> x(xs.row(n).begin(), xs.row(n).end()), y(d, 0.0);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) y[i] += q(i, j) * x[j];
      EXPECT_NEAR(mahalanobis_score(g, x), mahalanobis_score(r, y), 1e-8);
    }
  }
}

TEST(Gaussian, FitIsPermutationInvariant) {
  const Tensor2 x = normal_rows(60, 4, 6);
  std::vector<std::size_t> perm(60);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(7);
  rng.shuffle(perm);
  const GaussianModel a = fit_gaussian(x), b = fit_gaussian(select_rows(x, perm));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(a.mean[i], b.mean[i], 1e-12);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(a.covariance(i, j), b.covariance(i, j), 1e-12);
  }
}

TEST(Gaussian, CodecRoundTrip) {
  const GaussianModel g = fit_gaussian(normal_rows(20, 3, 8));
  const std::string bytes = encode_gaussian(g);
  EXPECT_EQ(bytes.substr(0, 4), "PSGM");
  EXPECT_EQ(bytes.size(), 4 + 2 + 4 + 8 * (3 + 9));
  const GaussianModel back = decode_gaussian(bytes);
  EXPECT_EQ(back.mean, g.mean);
  EXPECT_EQ(values(back.covariance), values(g.covariance));
  EXPECT_THROW(decode_gaussian(bytes.substr(0, bytes.size() - 8)), CorruptRecordError);
  EXPECT_THROW(decode_gaussian("PSFM" + bytes.substr(4)), FormatError);
}

double accuracy(const ProbeModel& p, const EmbeddingDataset& ds) {
  const auto s = p.scores(ds.all_rows());
  const auto t = binary_targets(ds);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < s.size(); ++i) ok += (s[i] >= 0.5) == (t[i] == 1);
  return static_cast<double>(ok) / static_cast<double>(s.size());
}

TEST(Probe, SeparableTrainingAccuracy) {
  const EmbeddingDataset ds = testing::separable_dataset(8, 100, 10.0, 9);
  ProbeConfig c;
  c.seed = 10;
  EXPECT_GT(accuracy(train_probe(ds, c), ds), 0.95);
}

EmbeddingDataset shuffled_labels(const EmbeddingDataset& ds, std::uint64_t seed) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < ds.size(); ++i) labels.push_back(ds[i].label);
  Rng rng(seed);
  rng.shuffle(labels);
  EmbeddingDataset out(ds.dim());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EmbeddingRecord r = ds[i];
    r.label = labels[i];
    out.add(std::move(r));
  }
  return out;
}

TEST(Probe, ShuffledLabelsGiveChance) {
  const std::vector<std::vector<double>> centres{std::vector<double>(8, 2.0), std::vector<double>(8, -2.0)};
  const auto clusters = [&](std::size_t n, std::uint64_t seed, const char* prefix) {
    return testing::cluster_dataset({"bonafide", "fake"}, centres, n, 1.0, seed, prefix);
  };
  const EmbeddingDataset train_set = shuffled_labels(clusters(500, 11, "a"), 12);
  const EmbeddingDataset held = shuffled_labels(clusters(1000, 13, "b"), 14);
  ProbeConfig c;
  c.seed = 15;
  EXPECT_NEAR(accuracy(train_probe(train_set, c), held), 0.5, 0.05);
}

TEST(Probe, SeedDeterministic) {
  const EmbeddingDataset ds = testing::separable_dataset(4, 40, 2.0, 14);
  ProbeConfig c;
  c.seed = 15;
  const ProbeModel a = train_probe(ds, c), b = train_probe(ds, c);
  EXPECT_EQ(probe_weights(a), probe_weights(b));
  c.seed = 16;
  const ProbeModel d = train_probe(ds, c);
  EXPECT_NE(probe_weights(a), probe_weights(d));
  EmbeddingDataset single(4);
  for (std::size_t i : ds.indices_of("bonafide")) single.add(ds[i]);
  EXPECT_THROW(train_probe(single, c), ValidationError);
}

EmbeddingDataset binary_sample(std::size_t per_class, std::uint64_t seed) {
  std::vector<std::vector<double>> centres(2, std::vector<double>(8, 0.0));
  centres[1][0] = 1.5;
  return testing::cluster_dataset({"bonafide", "fake"}, centres, per_class, 1.0, seed, "s" + std::to_string(seed));
}

TEST(Finetune, PresetsMatchSchedules) {
  const FinetuneConfig ten = FinetuneConfig::preset(10), hundred = FinetuneConfig::preset(100);
  EXPECT_EQ(ten.batch, 4u);
  EXPECT_EQ(ten.epochs, 2u);
  EXPECT_EQ(ten.lr, 1e-4);
  EXPECT_EQ(ten.repeats, 15u);
  EXPECT_EQ(hundred.batch, 64u);
  EXPECT_EQ(hundred.epochs, 3u);
  EXPECT_EQ(hundred.lr, 1e-4);
  EXPECT_THROW(FinetuneConfig::preset(7), ConfigError);
}

TEST(Finetune, TenPerClassSchedule) {
  const FewShotModel base = testing::random_model(testing::model_config(8, Aggregation::self_attentive, Objective::binary), 17);
  const auto r = finetune_adapt(PrototypeHeadClassifier(base), binary_sample(10, 18), FinetuneConfig::preset(10), 19);
  EXPECT_EQ(r.train_size, 14u);
  EXPECT_EQ(r.holdout_size, 6u);
  ASSERT_EQ(r.schedule.size(), 2u);
  for (const auto& e : r.schedule) {
    EXPECT_EQ(e.batch_sizes, (std::vector<std::size_t>{4, 4, 4, 2}));
    EXPECT_EQ(e.lr, 1e-4);
  }
}

TEST(Finetune, HundredPerClassSchedule) {
  ProbeConfig pc;
  pc.seed = 20;
  const ProbeModel base = train_probe(binary_sample(50, 21), pc);
  const auto r = finetune_adapt(base, binary_sample(100, 22), FinetuneConfig::preset(100), 23);
  EXPECT_EQ(r.train_size, 140u);
  ASSERT_EQ(r.schedule.size(), 3u);
  for (const auto& e : r.schedule) EXPECT_EQ(e.batch_sizes, (std::vector<std::size_t>{64, 64, 12}));
}

TEST(Finetune, EarlyStoppingKeepsMinimumHoldoutLoss) {
  ProbeConfig pc;
  pc.seed = 24;
  const ProbeModel base = train_probe(binary_sample(50, 25), pc);
  FinetuneConfig c = FinetuneConfig::preset(10);
  c.lr = 0.05;
  c.epochs = 8;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = finetune_adapt(base, binary_sample(10, 26 + seed), c, seed);
    double best = r.schedule[0].holdout_loss;
    std::size_t arg = 0;
    for (const auto& e : r.schedule)
      if (e.holdout_loss < best) best = e.holdout_loss, arg = e.epoch;
    EXPECT_EQ(r.best_holdout_loss, best);
    EXPECT_EQ(r.best_epoch, arg);
    // the returned parameters reproduce the recorded holdout loss
    const EmbeddingDataset sample = binary_sample(10, 26 + seed);
    const DatasetSplit split = split_stratified(sample, 1.0 - c.holdout, derive_seed(seed, {0xf1u}));
    EXPECT_EQ(mean_nll(r.model, split.second.all_rows(), binary_targets(split.second)), best);
  }
}

TEST(Finetune, NullShiftDoesNotHurt) {
  ProbeConfig pc;
  pc.seed = 27;
  const ProbeModel base = train_probe(binary_sample(300, 28), pc);
  const EmbeddingDataset test = binary_sample(500, 29);
  const TrialSet t = trial_set(test);
  const double before = eer(base.scores(t.rows), t.fake);
  const FinetuneConfig c = FinetuneConfig::preset(10);
  double after = 0.0;
  for (std::size_t rep = 0; rep < c.repeats; ++rep) {
    const auto r = finetune_adapt(base, binary_sample(10, 100 + rep), c, rep);
    after += eer(r.model.scores(t.rows), t.fake);
  }
  after /= static_cast<double>(c.repeats);
  EXPECT_LE(after, before + 2.0) << before << " -> " << after;
}

TEST(Finetune, RejectsBadInputs) {
  ProbeConfig pc;
  const ProbeModel base = train_probe(binary_sample(20, 30), pc);
  FinetuneConfig c = FinetuneConfig::preset(10);
  EXPECT_THROW(finetune_adapt(base, binary_sample(1, 31), c, 1), ValidationError);
  c.holdout = 1.0;
  EXPECT_THROW(finetune_adapt(base, binary_sample(10, 31), c, 1), ConfigError);
}

}  // namespace
}  // namespace protospoof
