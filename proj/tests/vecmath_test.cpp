#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "curate/error.hpp"
#include "curate/vecmath.hpp"
#include "test_util.hpp"

namespace curate {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::InvalidArgument;
}

TEST(CosineSimilarity, IdenticalVectorsScoreOne) {
  EmbeddingVector a{0.6, 0.8};
  EXPECT_DOUBLE_EQ(cosine_similarity(a, a), 1.0);
}

TEST(CosineSimilarity, OrthogonalVectorsScoreZero) {
  EXPECT_EQ(cosine_similarity(EmbeddingVector{1, 0}, EmbeddingVector{0, 1}), 0.0);
}

TEST(CosineSimilarity, MatchesClosedForm) {
  // (1,0).(1,1) / (1 * sqrt 2)
  const double expected = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(cosine_similarity(EmbeddingVector{1, 0}, EmbeddingVector{1, 1}), expected, 1e-9);
  EXPECT_NEAR(cosine_similarity(EmbeddingVector{1, 0}, EmbeddingVector{1, 1}), 0.70710678, 1e-8);
}

TEST(CosineSimilarity, RejectsBadInput) {
  EXPECT_EQ(code_of([] { cosine_similarity(EmbeddingVector{1, 0}, EmbeddingVector{1, 0, 0}); }),
            ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([] { cosine_similarity(EmbeddingVector{0, 0}, EmbeddingVector{1, 0}); }),
            ErrorCode::ZeroNormVector);
  EXPECT_EQ(code_of([] { EmbeddingVector v{1.0, NAN}; }), ErrorCode::NonFiniteValue);
  EXPECT_EQ(code_of([] { EmbeddingVector v(std::vector<double>{}); }), ErrorCode::InvalidArgument);
}

TEST(CosineSimilarity, ClampsRoundingOvershoot) {
  // Nearly parallel vectors whose raw quotient can exceed 1 by an ulp.
  std::mt19937_64 rng(3);
  for (int t = 0; t < 1000; ++t) {
    auto v = testing::random_vector(17, rng);
    std::vector<double> w = v;
    for (auto& x : w) x *= 3.0000000001;
    const double s = cosine_similarity(EmbeddingVector(v), EmbeddingVector(w));
    EXPECT_LE(s, 1.0);
    EXPECT_GE(s, -1.0);
  }
}

TEST(CosineDistance, Examples) {
  EXPECT_EQ(cosine_distance(EmbeddingVector{0.3, 0.4}, EmbeddingVector{0.3, 0.4}), 0.0);
  EXPECT_DOUBLE_EQ(cosine_distance(EmbeddingVector{1, 0}, EmbeddingVector{-1, 0}), 2.0);
  EXPECT_NEAR(cosine_distance(EmbeddingVector{1, 0}, EmbeddingVector{1, 1}),
              1.0 - 1.0 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(cosine_distance(EmbeddingVector{1, 0}, EmbeddingVector{1, 1}), 0.29289322, 1e-8);
}

TEST(L2Normalize, Examples) {
  const auto a = l2_normalize(EmbeddingVector{3, 4});
  EXPECT_NEAR(a[0], 0.6, 1e-15);
  EXPECT_NEAR(a[1], 0.8, 1e-15);
  const auto b = l2_normalize(EmbeddingVector{2, 0, 0});
  EXPECT_EQ(b, (EmbeddingVector{1, 0, 0}));
  EXPECT_EQ(code_of([] { l2_normalize(EmbeddingVector{0, 0}); }), ErrorCode::ZeroNormVector);
}

TEST(VecmathProperties, HoldOnRandomVectors) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dims(1, 64);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t d = dims(rng);
    const EmbeddingVector a(testing::random_vector(d, rng));
    const EmbeddingVector b(testing::random_vector(d, rng));

    EXPECT_EQ(cosine_similarity(a, b), cosine_similarity(b, a));

    std::vector<double> scaled(a.values().begin(), a.values().end());
    const double c = scale(rng);
    for (auto& x : scaled) x *= c;
    EXPECT_NEAR(cosine_similarity(EmbeddingVector(scaled), b), cosine_similarity(a, b), 1e-9);

    EXPECT_NEAR(cosine_distance(a, a), 0.0, 1e-9);
    const double dist = cosine_distance(a, b);
    EXPECT_GE(dist, 0.0);
    EXPECT_LE(dist, 2.0);

    const auto n1 = l2_normalize(a);
    EXPECT_TRUE(n1.is_unit());
    const auto n2 = l2_normalize(n1);
    for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(n1[i], n2[i], 1e-9);
  }
}

TEST(VecmathMixedPrecision, FloatRowsScoreInDouble) {
  const std::vector<float> f{0.6f, 0.8f};
  const std::vector<double> d{0.6, 0.8};
  const double s = cosine_similarity(std::span<const float>(f), std::span<const double>(d));
  EXPECT_NEAR(s, 1.0, 1e-7);
}

}  // namespace
}  // namespace curate
