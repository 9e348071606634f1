#include <gtest/gtest.h>

#include <fmt/format.h>

#include <fstream>
#include <set>
#include <thread>

#include "n2i/error.hpp"
#include "n2i/vector_index.hpp"
#include "oracles.hpp"
#include "workbench.hpp"

namespace n2i {
namespace {

IndexEntry entry(std::string id, std::vector<double> v, std::string country = "MA") {
  IndexEntry e;
  e.article_id = std::move(id);
  e.vector = EmbeddingVector(std::move(v));
  e.metadata.source_id = "S";
  e.metadata.country = std::move(country);
  e.metadata.ban_topic = "plastic_bags";
  return e;
}

std::vector<IndexEntry> random_entries(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<IndexEntry> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(entry(fmt::format("E#{:04}", i), testkit::random_vector(rng, dim), i % 3 ? "MA" : "SN"));
  }
  return out;
}

TEST(VectorIndex, ConstructorValidates) {
  EXPECT_THROW(VectorIndex(0), Error);
  EXPECT_THROW(VectorIndex(4, HnswParams{1, 10, 10, 1}), Error);
  EXPECT_THROW(VectorIndex(4, HnswParams{4, 0, 10, 1}), Error);
}

TEST(VectorIndex, InsertIsAllOrNothing) {
  VectorIndex index(2);
  std::vector<IndexEntry> batch{entry("a", {1, 0}), entry("b", {0, 0})};
  try {
    index.insert(batch);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroVector);
  }
  EXPECT_EQ(index.size(), 0u);
  std::vector<IndexEntry> wrong{entry("a", {1, 0}), entry("c", {1, 0, 0})};
  EXPECT_THROW(index.insert(wrong), Error);
  EXPECT_EQ(index.size(), 0u);
}

TEST(VectorIndex, ReplaceById) {
  VectorIndex index(2);
  std::vector<IndexEntry> first{entry("a", {1, 0}), entry("b", {0, 1})};
  index.insert(first);
  std::vector<IndexEntry> again{entry("a", {0, 1})};
  EXPECT_EQ(index.insert(again), 1u);
  EXPECT_EQ(index.size(), 2u);
  auto hits = index.knn(EmbeddingVector({0, 1}), 2, {}, SearchMode::approximate);
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].article_id, "a");  // tie at distance 0, broken by id
  EXPECT_EQ(hits[1].article_id, "b");
  EXPECT_NEAR(hits[1].distance, 0.0, 1e-15);
}

TEST(VectorIndex, QueryValidation) {
  VectorIndex index(2);
  std::vector<IndexEntry> one{entry("a", {1, 0})};
  index.insert(one);
  EXPECT_THROW((void)index.knn(EmbeddingVector({1, 0}), 0), Error);
  EXPECT_THROW((void)index.knn(EmbeddingVector({1, 0, 0}), 1), Error);
  EXPECT_THROW((void)index.knn(EmbeddingVector({0, 0}), 1), Error);
  EXPECT_TRUE(VectorIndex(2).knn(EmbeddingVector({1, 0}), 3).empty());
}

TEST(VectorIndex, KLargerThanCandidates) {
  auto entries = random_entries(7, 8, 1);
  VectorIndex index(8);
  index.insert(entries);
  auto hits = index.knn(entries[0].vector, 50);
  EXPECT_EQ(hits.size(), 7u);
  for (std::size_t i = 0; i < hits.size(); ++i) EXPECT_EQ(hits[i].rank, i + 1);
  EXPECT_EQ(hits[0].article_id, "E#0000");
}

TEST(VectorIndex, FilterIsAppliedBeforeRanking) {
  auto entries = random_entries(300, 16, 2);
  VectorIndex index(16);
  index.insert(entries);
  MetadataFilter sn;
  sn.country = "SN";
  for (auto mode : {SearchMode::exact, SearchMode::approximate}) {
    auto hits = index.knn(entries[1].vector, 10, sn, mode);  // entries[1] is MA
    ASSERT_EQ(hits.size(), 10u);
    for (const auto& h : hits) EXPECT_EQ(index.find(h.article_id)->metadata.country, "SN");
  }
  MetadataFilter none;
  none.country = "ZZ";
  EXPECT_TRUE(index.knn(entries[0].vector, 5, none).empty());
}

TEST(VectorIndex, ExactMatchesOracle) {
  auto entries = random_entries(500, 24, 3);
  VectorIndex index(24);
  index.insert(entries);
  std::mt19937_64 rng(9);
  for (int q = 0; q < 20; ++q) {
    auto qv = testkit::random_vector(rng, 24);
    auto got = index.knn(EmbeddingVector(qv), 15, {}, SearchMode::exact);
    auto want = testkit::brute_knn(entries, qv, 15, {});
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].article_id, want[i].id);
      EXPECT_NEAR(got[i].distance, static_cast<double>(want[i].distance), 1e-12);
    }
  }
}

TEST(VectorIndex, ApproximateRecallOnSmallSet) {
  auto entries = random_entries(800, 32, 4);
  VectorIndex index(32);
  index.insert(entries);
  std::mt19937_64 rng(10);
  std::size_t found = 0;
  for (int q = 0; q < 50; ++q) {
    auto qv = testkit::random_vector(rng, 32);
    auto want = testkit::brute_knn(entries, qv, 10, {});
    std::set<std::string> ids;
    for (const auto& h : want) ids.insert(h.id);
    for (const auto& h : index.knn(EmbeddingVector(qv), 10)) found += ids.count(h.article_id);
  }
  EXPECT_GE(found / 500.0, 0.95);
}

TEST(VectorIndex, IncrementalInsertMatchesBatch) {
  auto entries = random_entries(200, 16, 5);
  VectorIndex batch(16), incremental(16);
  batch.insert(entries);
  for (std::size_t i = 0; i < entries.size(); i += 17) {
    std::span<const IndexEntry> part(entries.data() + i, std::min<std::size_t>(17, entries.size() - i));
    incremental.insert(part);
  }
  EXPECT_EQ(incremental.size(), 200u);
  auto q = entries[42].vector;
  EXPECT_EQ(batch.knn(q, 5, {}, SearchMode::exact), incremental.knn(q, 5, {}, SearchMode::exact));
  EXPECT_EQ(incremental.knn(q, 1)[0].article_id, "E#0042");
}

TEST(VectorIndex, SaveLoadRoundTrip) {
  testkit::TempDir dir;
  auto entries = random_entries(150, 12, 6);
  VectorIndex index(12, HnswParams{8, 50, 20, 99});
  index.insert(entries);
  index.save(dir / "i.json");
  auto back = VectorIndex::load(dir / "i.json");
  EXPECT_EQ(back.size(), index.size());
  EXPECT_EQ(back.params(), index.params());
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(back.knn(entries[i].vector, 5), index.knn(entries[i].vector, 5));
  }
  EXPECT_THROW(VectorIndex::load(dir / "missing.json"), Error);
  std::ofstream(dir / "junk.json") << "[1,2";
  EXPECT_THROW(VectorIndex::load(dir / "junk.json"), Error);
}

TEST(VectorIndex, ConcurrentQueries) {
  auto entries = random_entries(400, 16, 7);
  VectorIndex index(16);
  index.insert(entries);
  std::vector<std::vector<RetrievalHit>> expected;
  for (int i = 0; i < 8; ++i) expected.push_back(index.knn(entries[i].vector, 10));
  std::atomic<int> mismatches{0};
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < 4; ++t) {
      pool.emplace_back([&] {
        for (int r = 0; r < 25; ++r) {
          for (int i = 0; i < 8; ++i) {
            if (index.knn(entries[i].vector, 10) != expected[i]) ++mismatches;
          }
        }
      });
    }
  }
  EXPECT_EQ(mismatches.load(), 0);
}

TEST(VectorIndex, BuildFromCorpus) {
  auto corpus = ingest(load_source_directory(testkit::fixture_path("corpus")), "c");
  HashingEmbedder e;
  auto index = build_index(corpus, e);
  EXPECT_EQ(index.size(), corpus.articles.size());
  const auto& a = corpus.articles[3];
  auto hits = index.knn(embed(article_embedding_text(a), e), 1);
  EXPECT_EQ(hits[0].article_id, a.article_id);
}

TEST(SearchMode, Names) {
  EXPECT_EQ(parse_search_mode("exact"), SearchMode::exact);
  EXPECT_EQ(parse_search_mode(to_string(SearchMode::approximate)), SearchMode::approximate);
  EXPECT_FALSE(parse_search_mode("fuzzy"));
}

}  // namespace
}  // namespace n2i
