#include <cmath>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace reattn {
namespace {

// High-precision reference values (mpmath, 30 digits).
constexpr double kLn2OverLn10 = 0.301029995663981195213738894725;
constexpr double kHalfLn2OverLn10 = 0.150514997831990597606869447362;
constexpr double kEntropyHalfQuarterQuarter = 0.946394630357186155649290671514;

TEST(IdfWeight, Values) {
  EXPECT_EQ(idf_weight(0, 9), 1.0);
  EXPECT_EQ(idf_weight(0, 1), 1.0);
  EXPECT_EQ(idf_weight(9, 9), 0.0);
  EXPECT_EQ(idf_weight(1, 1), 0.0);
  EXPECT_NEAR(idf_weight(4, 9), kLn2OverLn10, 1e-15);
  EXPECT_THROW(idf_weight(10, 9), DomainError);
  EXPECT_THROW(idf_weight(0, 0), DomainError);
}

TEST(IdfWeight, BoundedAndStrictlyDecreasing) {
  for (std::size_t n = 1; n <= 60; ++n) {
    double prev = 2.0;
    for (std::size_t df = 0; df <= n; ++df) {
      const double w = idf_weight(df, n);
      EXPECT_GE(w, 0.0);
      EXPECT_LE(w, 1.0);
      EXPECT_LT(w, prev);
      prev = w;
    }
  }
}

TEST(ReweightTokens, Branches) {
  const auto tokens = make_tokens({"producer", "film", "award"});
  const IdfWeights weights = {{"producer", 0.0}, {"award", idf_weight(4, 9)}};
  const std::vector<double> s = {0.5, 0.5, 0.5};
  const auto out = reweight_tokens(s, {true, false, true}, tokens, weights);
  EXPECT_EQ(out[0], 0.0);
  EXPECT_EQ(out[1], 0.5);
  EXPECT_NEAR(out[2], kHalfLn2OverLn10, 1e-15);
}

TEST(ReweightTokens, MissingWeightIsAnError) {
  const auto tokens = make_tokens({"producer"});
  EXPECT_THROW(reweight_tokens(std::vector<double>{0.5}, {true}, tokens, {}), MissingWeight);
  EXPECT_THROW(reweight_tokens(std::vector<double>{0.5, 0.1}, {true}, tokens, {}), LengthMismatch);
}

TEST(BaseScore, SumsFilteredOnly) {
  const std::vector<std::size_t> both = {0, 1};
  const std::vector<std::size_t> first = {0};
  EXPECT_NEAR(base_score(std::vector<double>{0.3, 0.2}, both), 0.5, 1e-15);
  EXPECT_EQ(base_score(std::vector<double>{0.3, -5.0}, first), 0.3);
  EXPECT_EQ(base_score(std::vector<double>{0.0, 0.0}, both), 0.0);
}

TEST(TokenDistribution, ClampsNegatives) {
  const std::vector<std::size_t> two = {0, 1};
  const std::vector<std::size_t> three = {0, 1, 2};
  auto d = token_distribution(std::vector<double>{0.3, 0.3}, two);
  EXPECT_FALSE(d.degenerate);
  EXPECT_EQ(d.p, (std::vector<double>{0.5, 0.5}));

  d = token_distribution(std::vector<double>{0.3, -0.1, 0.3}, three);
  EXPECT_EQ(d.p, (std::vector<double>{0.5, 0.0, 0.5}));

  d = token_distribution(std::vector<double>{-0.3, 0.0, -0.1}, three);
  EXPECT_TRUE(d.degenerate);
}

TEST(TokenDistribution, FollowsFilteredIndices) {
  const std::vector<std::size_t> kept = {1, 3};
  const auto d = token_distribution(std::vector<double>{9.0, 0.1, 9.0, 0.3}, kept);
  ASSERT_EQ(d.p.size(), 2u);
  EXPECT_NEAR(d.p[0], 0.25, 1e-15);
  EXPECT_NEAR(d.p[1], 0.75, 1e-15);
}

TEST(NormalizedEntropy, Values) {
  EXPECT_NEAR(normalized_entropy({{0.25, 0.25, 0.25, 0.25}, false}, 4), 1.0, 1e-12);
  EXPECT_EQ(normalized_entropy({{1.0, 0.0, 0.0}, false}, 3), 0.0);
  EXPECT_NEAR(normalized_entropy({{0.5, 0.25, 0.25}, false}, 3), kEntropyHalfQuarterQuarter, 1e-12);
  EXPECT_EQ(normalized_entropy({{1.0}, false}, 1), 0.0);
  EXPECT_EQ(normalized_entropy({{0.0, 0.0}, true}, 2), 0.0);
}

TEST(NormalizedEntropy, BaseIndependent) {
  Random rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = rng.between(2, 30);
    std::vector<double> w(n);
    double sum = 0.0;
    for (auto& x : w) sum += (x = rng.bernoulli(0.2) ? 0.0 : rng.uniform());
    if (sum == 0.0) continue;
    for (auto& x : w) x /= sum;
    double h2 = 0.0;
    for (double p : w)
      if (p > 0) h2 -= p * std::log2(p);
    const double e = normalized_entropy({w, false}, n);
    EXPECT_NEAR(e, h2 / std::log2(static_cast<double>(n)), 1e-12);
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, 1.0);
  }
}

TEST(WeightedMeanEntropy, Values) {
  EXPECT_NEAR(weighted_mean_entropy(std::vector<double>{2, 1}, std::vector<double>{0.8, 0.2}), 0.6,
              1e-12);
  EXPECT_NEAR(weighted_mean_entropy(std::vector<double>{5, 0.1, 3}, std::vector<double>{0.4, 0.4, 0.4}),
              0.4, 1e-15);
  EXPECT_NEAR(weighted_mean_entropy(std::vector<double>{-1, 0}, std::vector<double>{0.2, 0.8}), 0.5,
              1e-15);
  // Negative B carries no weight.
  EXPECT_NEAR(weighted_mean_entropy(std::vector<double>{2, -7}, std::vector<double>{0.3, 0.9}), 0.3,
              1e-15);
}

TEST(DispersionWeight, Values) {
  EXPECT_EQ(dispersion_weight(0.6, 0.6), 1.0);
  EXPECT_NEAR(dispersion_weight(0.8, 0.6), 1.2, 1e-15);
  EXPECT_EQ(dispersion_weight(0.0, 1.0), 0.0);
  EXPECT_EQ(dispersion_weight(1.0, 0.0), 2.0);
}

TEST(FinalScores, Values) {
  auto f = final_scores(std::vector<double>{2, 1}, std::vector<double>{1.2, 0.8});
  EXPECT_TRUE(f.normalized);
  EXPECT_NEAR(f.adjusted[0], 2.4, 1e-15);
  EXPECT_NEAR(f.adjusted[1], 0.8, 1e-15);
  EXPECT_NEAR(f.final[0], 0.75, 1e-15);
  EXPECT_NEAR(f.final[1], 0.25, 1e-15);

  f = final_scores(std::vector<double>{3, 1, 4}, std::vector<double>{1, 1, 1});
  EXPECT_NEAR(f.final[0], 3.0 / 8, 1e-15);
  EXPECT_NEAR(f.final[2], 4.0 / 8, 1e-15);

  f = final_scores(std::vector<double>{0, 0}, std::vector<double>{1, 1});
  EXPECT_FALSE(f.normalized);
  EXPECT_EQ(f.final, (std::vector<double>{0, 0}));

  // Non-positive B ignores W.
  f = final_scores(std::vector<double>{-1, 3}, std::vector<double>{0.5, 1});
  EXPECT_EQ(f.adjusted[0], -1.0);
  EXPECT_NEAR(f.final[0], -0.5, 1e-15);
}

TEST(FinalScores, RankPreserving) {
  Random rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = rng.between(1, 20);
    std::vector<double> b(n), w(n);
    for (auto& x : b) x = rng.uniform(-0.5, 2.0);
    for (auto& x : w) x = rng.uniform(0.0, 2.0);
    const auto f = final_scores(b, w);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (f.adjusted[i] > f.adjusted[j]) {
          EXPECT_GT(f.final[i], f.final[j]);
        }
  }
}

}  // namespace
}  // namespace reattn
