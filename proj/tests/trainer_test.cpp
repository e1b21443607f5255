#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "curate/embedder.hpp"
#include "curate/trainer.hpp"
#include "test_util.hpp"

namespace curate {
namespace {

// Unit vectors at a prescribed cosine distance d from e1.
EmbeddedPair pair_at_distance(double d, int label) {
  const double c = 1.0 - d;
  return {EmbeddingVector{1.0, 0.0}, EmbeddingVector{c, std::sqrt(1.0 - c * c)}, label};
}

TEST(ContrastiveLoss, HandDerivedValues) {
  const EmbeddedPair same{EmbeddingVector{0.6, 0.8}, EmbeddingVector{0.6, 0.8}, 1};
  EXPECT_EQ(contrastive_loss(std::span(&same, 1), 0.5), 0.0);

  const auto far = pair_at_distance(0.8, 0);
  EXPECT_EQ(contrastive_loss(std::span(&far, 1), 0.5), 0.0);

  // 1/(2*1) * (0.5 - 0.2)^2
  const auto near = pair_at_distance(0.2, 0);
  EXPECT_NEAR(contrastive_loss(std::span(&near, 1), 0.5), 0.045, 1e-12);
}

TEST(ContrastiveLoss, EmptyBatchIsAnError) {
  std::vector<EmbeddedPair> none;
  EXPECT_THROW(contrastive_loss(none, 0.5), Error);
}

TEST(ContrastiveLoss, DecomposesOverPairs) {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < 50; ++t) {
    std::vector<EmbeddedPair> a, b;
    for (int i = 0; i < 3; ++i) {
      a.push_back({testing::random_unit(4, rng), testing::random_unit(4, rng), coin(rng) ? 1 : 0});
    }
    for (int i = 0; i < 5; ++i) {
      b.push_back({testing::random_unit(4, rng), testing::random_unit(4, rng), coin(rng) ? 1 : 0});
    }
    auto all = a;
    all.insert(all.end(), b.begin(), b.end());
    // one pair at a time: sum of per-pair losses over 2|T|
    double oracle = 0.0;
    for (const auto& p : all) {
      const double d = 1.0 - cosine_similarity(p.a, p.b);
      oracle += p.label ? d * d : std::pow(std::max(0.0, 0.5 - d), 2);
    }
    oracle /= 2.0 * static_cast<double>(all.size());
    EXPECT_NEAR(contrastive_loss(all, 0.5), oracle, 1e-12);
    const double weighted = (contrastive_loss(a, 0.5) * static_cast<double>(a.size()) +
                             contrastive_loss(b, 0.5) * static_cast<double>(b.size())) /
                            static_cast<double>(all.size());
    EXPECT_NEAR(contrastive_loss(all, 0.5), weighted, 1e-12);
    EXPECT_GE(contrastive_loss(all, 0.5), 0.0);
  }
}

TEST(ContrastiveLoss, NegativeLossGrowsWithMargin) {
  const auto p = pair_at_distance(0.3, 0);
  double prev = 0.0;
  for (double m = 0.05; m <= 2.0; m += 0.05) {
    const double l = contrastive_loss(std::span(&p, 1), m);
    EXPECT_GE(l, prev);
    prev = l;
  }
}

TEST(EmbedWithHead, IdentityAndBiasOnly) {
  const EmbeddingVector x{0.6, 0.0, 0.8};
  EXPECT_EQ(embed_with_head(x, ProjectionHead::identity(3)), x);

  ProjectionHead h(3, 3);
  h.bias()[0] = 1.0;
  EXPECT_EQ(embed_with_head(EmbeddingVector{0.3, -2.0, 5.0}, h), (EmbeddingVector{1, 0, 0}));
}

TEST(EmbedWithHead, MatchesNaiveMatmul) {
  const auto h = ProjectionHead::random(4, 3, 42);
  const EmbeddingVector x{1, 1, 1};
  std::vector<double> z(4, 0.0);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 3; ++c) z[r] += h.w(r, c) * x[c];
    z[r] += h.bias()[r];
  }
  double n = 0.0;
  for (double v : z) n += v * v;
  n = std::sqrt(n);
  const auto y = embed_with_head(x, h);
  for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(y[r], z[r] / n, 1e-15);
}

TEST(EmbedWithHead, Errors) {
  EXPECT_THROW(embed_with_head(EmbeddingVector{1, 2}, ProjectionHead::identity(3)), Error);
  ProjectionHead zero(2, 2);
  try {
    embed_with_head(EmbeddingVector{1, 0}, zero);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroNormVector);
  }
}

TEST(LossGradient, FlatHingeAndMinimumGiveZero) {
  const auto head = ProjectionHead::identity(2);
  const auto far = pair_at_distance(0.9, 0);
  for (double g : testing::flatten(loss_gradient(std::span(&far, 1), head, 0.5))) EXPECT_EQ(g, 0.0);
  const EmbeddedPair same{EmbeddingVector{0.6, 0.8}, EmbeddingVector{0.6, 0.8}, 1};
  for (double g : testing::flatten(loss_gradient(std::span(&same, 1), head, 0.5))) {
    EXPECT_NEAR(g, 0.0, 1e-15);
  }
}

TEST(LossGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<std::size_t> dims(2, 8);
  std::uniform_int_distribution<std::size_t> sizes(1, 4);
  std::bernoulli_distribution coin(0.5);
  int checked = 0;
  for (int trial = 0; checked < 40 && trial < 1000; ++trial) {
    const std::size_t in = dims(rng), out = dims(rng);
    auto head = ProjectionHead::random(out, in, rng());
    for (auto& b : head.bias()) b = 0.1 * testing::random_vector(1, rng)[0];
    std::vector<EmbeddedPair> batch;
    const std::size_t n = sizes(rng);
    bool near_kink = false;
    for (std::size_t i = 0; i < n; ++i) {
      EmbeddedPair p{testing::random_unit(in, rng), testing::random_unit(in, rng), coin(rng) ? 1 : 0};
      const double d = cosine_distance(embed_with_head(p.a, head), embed_with_head(p.b, head));
      if (p.label == 0 && std::abs(d - 0.5) <= 1e-3) near_kink = true;
      batch.push_back(std::move(p));
    }
    if (near_kink) continue;
    const auto analytic = testing::flatten(loss_gradient(batch, head, 0.5));
    const auto numeric = testing::finite_difference_gradient(batch, head, 0.5, 1e-5);
    EXPECT_LT(testing::max_relative_error(analytic, numeric), 1e-5) << "trial " << trial;
    ++checked;
  }
  EXPECT_EQ(checked, 40);
}

TEST(LossGradient, ReportsBatchLoss) {
  std::mt19937_64 rng(8);
  std::vector<EmbeddedPair> batch;
  for (int i = 0; i < 4; ++i) {
    batch.push_back({testing::random_unit(5, rng), testing::random_unit(5, rng), i % 2});
  }
  const auto head = ProjectionHead::random(3, 5, 1);
  // The gradient path adds a tiny epsilon to the norms.
  EXPECT_NEAR(loss_gradient(batch, head, 0.5).loss, head_loss(batch, head, 0.5), 1e-9);
}

TEST(Schedule, LinearWarmupThenFlat) {
  TrainConfig c;
  c.learning_rate = 1.0;
  c.warmup_steps = 4;
  EXPECT_EQ(scheduled_learning_rate(c, 0), 0.0);
  EXPECT_EQ(scheduled_learning_rate(c, 2), 0.5);
  EXPECT_EQ(scheduled_learning_rate(c, 4), 1.0);
  EXPECT_EQ(scheduled_learning_rate(c, 400), 1.0);
  c.warmup_steps = 0;
  EXPECT_EQ(scheduled_learning_rate(c, 0), 1.0);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.margin = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.margin = 2.5;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
}

TrainingDataset synthetic_pairs() {
  // Positives share a topic word pair; negatives swap in a different topic.
  const std::vector<std::string> topics = {"river bank", "piano tuning", "solar panel", "tax form",
                                           "bread dough", "train ticket", "chess opening", "rose garden"};
  TrainingDataset out;
  for (std::size_t i = 0; i < topics.size(); ++i) {
    const auto& t = topics[i];
    const auto& other = topics[(i + 3) % topics.size()];
    const std::string id = "s" + std::to_string(i);
    out.push_back({"how do I care for a " + t, "tips for looking after a " + t, 1, 1, id, {}});
    out.push_back({"how do I care for a " + t, "how do I care for a " + other, 0, 2, id, {}});
    out.push_back({"tips for looking after a " + t, "tips for looking after a " + other, 0, 3, id, {}});
    out.push_back({"what is a " + t, "explain what a " + t + " is", 1, 1, id, {}});
  }
  return out;
}

TEST(Train, LossDecreasesOnSyntheticPairs) {
  const StubEmbedder base(32);
  const auto data = synthetic_pairs();
  ASSERT_EQ(data.size(), 32u);
  TrainConfig c;
  c.learning_rate = 0.5;
  c.warmup_steps = 2;
  c.batch_size = 4;
  c.epochs = 1;
  c.rng_seed = 9;
  const auto r = train(data, base, c);
  EXPECT_EQ(r.step_losses.size(), 8u);
  EXPECT_LT(r.final_loss, r.initial_loss);
}

TEST(Train, ZeroLearningRateKeepsInitialization) {
  const StubEmbedder base(16);
  TrainConfig c;
  c.learning_rate = 0.0;
  EXPECT_EQ(train(synthetic_pairs(), base, c).head, ProjectionHead::identity(16));
  c.out_dim = 6;
  c.rng_seed = 3;
  EXPECT_EQ(train(synthetic_pairs(), base, c).head, ProjectionHead::random(6, 16, 3));
}

TEST(Train, SameSeedSameHead) {
  const StubEmbedder base(16);
  TrainConfig c;
  c.learning_rate = 0.1;
  c.warmup_steps = 1;
  c.batch_size = 5;
  c.epochs = 3;
  c.rng_seed = 77;
  const auto a = train(synthetic_pairs(), base, c);
  const auto b = train(synthetic_pairs(), base, c);
  EXPECT_EQ(a.head, b.head);
  EXPECT_EQ(a.step_losses, b.step_losses);
}

TEST(Train, RejectsBadData) {
  const StubEmbedder base(8);
  EXPECT_THROW(train({}, base, TrainConfig{}), Error);
  TrainingDataset bad{{"a", "b", 2, 1, "s", {}}};
  EXPECT_THROW(train(bad, base, TrainConfig{}), Error);
}

TEST(ComposedEmbedder, AppliesHeadAfterBase) {
  auto base = std::make_shared<StubEmbedder>(8);
  const auto head = ProjectionHead::random(4, 8, 2);
  const ComposedEmbedder u(base, head);
  EXPECT_EQ(u.dim(), 4u);
  const auto v = u.embed("the quick brown fox");
  EXPECT_EQ(v, embed_with_head(base->embed("the quick brown fox"), head));
  EXPECT_TRUE(v.is_unit());
  EXPECT_THROW(ComposedEmbedder(base, ProjectionHead::identity(5)), Error);
}

}  // namespace
}  // namespace curate
