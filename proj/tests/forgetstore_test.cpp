#include <atomic>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "curate/ann.hpp"
#include "curate/embedder.hpp"
#include "curate/forgetstore.hpp"
#include "test_util.hpp"

namespace curate {
namespace {

TEST(ForgetStore, EmptyStoreHasNoScore) {
  ForgetStore store;
  const auto m = store.max_similarity(EmbeddingVector{1, 0});
  EXPECT_FALSE(m.score.has_value());
  EXPECT_FALSE(m.id.has_value());
  EXPECT_EQ(store.count(), 0u);
}

TEST(ForgetStore, AddThenRetrieve) {
  ForgetStore store;
  const auto r = store.add("first", EmbeddingVector{3, 4});
  EXPECT_EQ(store.count(), 1u);
  EXPECT_TRUE(r.embedding.is_unit());
  EXPECT_EQ(store.max_similarity(EmbeddingVector{3, 4}).score, 1.0);

  const auto r2 = store.add("second", EmbeddingVector{0, 1});
  EXPECT_EQ(store.count(), 2u);
  EXPECT_NE(r.id, r2.id);
  EXPECT_GT(r2.accepted_at, r.accepted_at);
}

TEST(ForgetStore, BasisQueryFindsItsRecord) {
  ForgetStore store;
  const auto e1 = store.add("e1", EmbeddingVector{1, 0, 0});
  store.add("e2", EmbeddingVector{0, 1, 0});
  const auto m = store.max_similarity(EmbeddingVector{1, 0, 0});
  EXPECT_EQ(m.score, 1.0);
  EXPECT_EQ(m.id, e1.id);
  EXPECT_EQ(m.record_index, 0u);
}

TEST(ForgetStore, IdenticalTextEmbeddingScoresOne) {
  const StubEmbedder emb(64);
  ForgetStore store;
  store.add("what is the capital of spain", emb.embed("what is the capital of spain"));
  EXPECT_EQ(store.max_similarity(emb.embed("what is the capital of spain")).score, 1.0);
}

TEST(ForgetStore, Errors) {
  ForgetStore store(2);
  store.add("a", EmbeddingVector{1, 0});
  EXPECT_THROW(store.add("b", EmbeddingVector{1, 0, 0}), Error);
  EXPECT_THROW(store.max_similarity(EmbeddingVector{1, 0, 0}), Error);
  store.add("b", EmbeddingVector{0, 1});
  try {
    store.add("c", EmbeddingVector{1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StoreFull);
  }
  EXPECT_EQ(store.count(), 2u);
}

TEST(ForgetStore, MatchesNaiveScanBitwise) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    ForgetStore store;
    std::vector<std::vector<float>> rows;
    for (int i = 0; i < 100; ++i) {
      const auto v = testing::random_unit(16, rng);
      rows.push_back(testing::stored_form(v));
      store.add("r" + std::to_string(i), v);
    }
    const EmbeddingVector q(testing::random_vector(16, rng));
    const auto qf = testing::stored_form(q);
    const auto expected = testing::naive_scan(rows, std::vector<double>(qf.begin(), qf.end()));
    const auto got = store.max_similarity(q);
    ASSERT_TRUE(got.score.has_value());
    EXPECT_EQ(*got.score, expected.score);
    EXPECT_EQ(*got.record_index, expected.index);
  }
}

TEST(ForgetStore, GrowthNeverLowersScore) {
  std::mt19937_64 rng(22);
  ForgetStore store;
  const auto q = testing::random_unit(8, rng);
  double prev = -2.0;
  for (int i = 0; i < 300; ++i) {
    store.add("x", testing::random_unit(8, rng));
    const double s = *store.max_similarity(q).score;
    EXPECT_GE(s, prev);
    prev = s;
  }
}

TEST(ForgetStore, ConcurrentReadersSeeEveryAcknowledgedAdd) {
  const StubEmbedder emb(64);
  ForgetStore store;
  for (int i = 0; i < 2000; ++i) store.add("pre", emb.embed("preloaded item " + std::to_string(i)));
  std::atomic<bool> stop{false};
  std::atomic<int> reads{0};
  std::vector<std::thread> readers;
  for (int t = 0; t < 3; ++t) {
    readers.emplace_back([&, t] {
      std::mt19937_64 rng(t);
      while (!stop.load()) {
        store.max_similarity(testing::random_unit(64, rng));
        reads.fetch_add(1);
      }
    });
  }
  for (int i = 0; i < 200; ++i) {
    const std::string text = "fresh forget request " + std::to_string(i);
    store.add(text, emb.embed(text));
    EXPECT_EQ(store.max_similarity(emb.embed(text)).score, 1.0) << i;
  }
  stop = true;
  for (auto& r : readers) r.join();
  EXPECT_GT(reads.load(), 0);
  EXPECT_EQ(store.count(), 2200u);
}

TEST(ForgetStore, CompressionRatioAtDim768) {
  std::mt19937_64 rng(23);
  ForgetStore store;
  for (int i = 0; i < 4000; ++i) store.add("r", testing::random_unit(768, rng));
  StoreMode mode;
  mode.variant = StoreVariant::Compressed;
  mode.pca_dim = 32;
  const auto report = store.compress(mode);
  EXPECT_EQ(report.exact_bytes, 4000ull * 768 * 4);
  EXPECT_EQ(report.compressed_bytes, 4000ull * 32 + (32ull * 768 + 768 + 64) * 4);
  EXPECT_DOUBLE_EQ(report.ratio, static_cast<double>(report.exact_bytes) /
                                     static_cast<double>(report.compressed_bytes));
  EXPECT_GE(report.ratio, 15.0);
  EXPECT_EQ(store.variant(), StoreVariant::Compressed);
  EXPECT_EQ(store.count(), 4000u);
}

// Clusters of tight unit vectors around random directions.
std::vector<EmbeddingVector> clustered_vectors(std::size_t clusters, std::size_t per,
                                               std::size_t dim, double spread,
                                               std::mt19937_64& rng) {
  std::vector<EmbeddingVector> out;
  for (std::size_t c = 0; c < clusters; ++c) {
    const auto center = testing::random_unit(dim, rng);
    for (std::size_t i = 0; i < per; ++i) {
      auto noise = testing::random_vector(dim, rng);
      for (std::size_t j = 0; j < dim; ++j) noise[j] = center[j] + spread * noise[j];
      out.push_back(l2_normalize(EmbeddingVector(std::move(noise))));
    }
  }
  return out;
}

TEST(ForgetStore, CompressedKeepsOwnRecordOnTop) {
  std::mt19937_64 rng(24);
  const auto vs = clustered_vectors(40, 5, 64, 0.02, rng);
  ForgetStore store;
  for (const auto& v : vs) store.add("r", v);
  StoreMode mode;
  mode.variant = StoreVariant::Compressed;
  mode.pca_dim = 48;
  store.compress(mode);
  int hits = 0;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const auto m = store.max_similarity(vs[i]);
    // the top row must be i or a near-duplicate from i's own cluster
    hits += *m.record_index / 5 == i / 5;
  }
  EXPECT_EQ(hits, static_cast<int>(vs.size()));
}

TEST(ForgetStore, ClusteredKeepsTenPercent) {
  std::mt19937_64 rng(25);
  ForgetStore store;
  for (const auto& v : clustered_vectors(100, 10, 32, 0.05, rng)) store.add("r", v);
  StoreMode mode;
  mode.variant = StoreVariant::Clustered;
  mode.pca_dim = 16;
  mode.keep_ratio = 0.1;
  const auto report = store.compress(mode);
  EXPECT_EQ(report.stored_rows, 100u);
  EXPECT_EQ(store.scored_rows(), 100u);
  EXPECT_EQ(store.count(), 1000u);
  // additions after compression become new rows
  store.add("late", testing::random_unit(32, rng));
  EXPECT_EQ(store.scored_rows(), 101u);
}

TEST(ForgetStore, CompressionPreconditions) {
  ForgetStore store;
  StoreMode mode;
  mode.variant = StoreVariant::Compressed;
  EXPECT_THROW(store.compress(mode), Error);
  store.add("a", EmbeddingVector{1, 0, 0});
  try {
    store.compress(mode);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
  store.add("b", EmbeddingVector{0, 1, 0});
  mode.pca_dim = 4;
  EXPECT_THROW(store.compress(mode), Error);
  mode.pca_dim = 2;
  store.compress(mode);
  EXPECT_THROW(store.compress(mode), Error);  // already compressed
}

TEST(ForgetStore, StateRoundTripPreservesScores) {
  std::mt19937_64 rng(26);
  for (auto variant : {StoreVariant::Exact, StoreVariant::Compressed, StoreVariant::Clustered}) {
    ForgetStore store;
    for (int i = 0; i < 60; ++i) store.add("t" + std::to_string(i), testing::random_unit(12, rng));
    if (variant != StoreVariant::Exact) {
      StoreMode mode;
      mode.variant = variant;
      mode.pca_dim = 6;
      store.compress(mode);
    }
    const auto copy = ForgetStore::from_state(store.export_state());
    EXPECT_EQ(copy->count(), store.count());
    EXPECT_EQ(copy->variant(), variant);
    for (int q = 0; q < 20; ++q) {
      const auto v = testing::random_unit(12, rng);
      const auto a = store.max_similarity(v), b = copy->max_similarity(v);
      EXPECT_EQ(a.score, b.score);
      EXPECT_EQ(a.id, b.id);
    }
  }
}

TEST(IvfIndex, FullProbeEqualsExactScan) {
  std::mt19937_64 rng(27);
  ForgetStore store;
  for (const auto& v : clustered_vectors(20, 25, 16, 0.2, rng)) store.add("r", v);
  const auto index = IvfIndex::build(store, 20, 1);
  for (int q = 0; q < 200; ++q) {
    const auto v = testing::random_unit(16, rng);
    const auto exact = store.max_similarity(v);
    const auto approx = index.search(v, 20);
    EXPECT_EQ(exact.score, approx.score);
    EXPECT_EQ(exact.record_index, approx.record_index);
  }
}

TEST(IvfIndex, RecallAtOneOnClusteredData) {
  std::mt19937_64 rng(28);
  ForgetStore store;
  const auto vs = clustered_vectors(100, 100, 32, 0.15, rng);
  for (const auto& v : vs) store.add("r", v);
  const auto index = IvfIndex::build(store, 100, 2);
  int hits = 0;
  const int queries = 500;
  std::uniform_int_distribution<std::size_t> pick(0, vs.size() - 1);
  for (int q = 0; q < queries; ++q) {
    auto noisy = testing::random_vector(32, rng);
    const auto& base = vs[pick(rng)];
    for (std::size_t j = 0; j < 32; ++j) noisy[j] = base[j] + 0.05 * noisy[j];
    const EmbeddingVector v(std::move(noisy));
    hits += store.max_similarity(v).record_index == index.search(v, 10).record_index;
  }
  EXPECT_GE(static_cast<double>(hits) / queries, 0.9);
}

TEST(IvfIndex, NeedsEnoughRows) {
  ForgetStore store;
  EXPECT_THROW(IvfIndex::build(store, 1), Error);
  store.add("a", EmbeddingVector{1, 0});
  EXPECT_THROW(IvfIndex::build(store, 2), Error);
  const auto index = IvfIndex::build(store, 1);
  EXPECT_TRUE(index.search(EmbeddingVector{0, 1}, 5).score.has_value());
}

}  // namespace
}  // namespace curate
