#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "n2i/corpus.hpp"
#include "n2i/embedding.hpp"

namespace n2i {

struct HnswParams {
  std::size_t M = 16;
  std::size_t ef_construction = 200;
  std::size_t ef_search = 64;
  std::uint64_t seed = 42;

  bool operator==(const HnswParams&) const = default;
};

struct IndexEntry {
  std::string article_id;
  EmbeddingVector vector;
  DocumentMetadata metadata;
};

struct RetrievalHit {
  std::string article_id;
  double distance = 0.0;
  std::size_t rank = 0;

  bool operator==(const RetrievalHit&) const = default;
};

enum class SearchMode { exact, approximate };

std::string_view to_string(SearchMode mode) noexcept;
std::optional<SearchMode> parse_search_mode(std::string_view name);

/// Cosine-distance vector store answering top-k queries by exact scan or by
/// a hierarchical navigable small-world graph. Metadata filters restrict the
/// candidate set before ranking.
///
/// Queries may run concurrently; insert() takes the graph exclusively.
class VectorIndex {
 public:
  VectorIndex(std::size_t dimension, HnswParams params = {});
  VectorIndex(VectorIndex&&) noexcept;
  VectorIndex& operator=(VectorIndex&&) noexcept;
  ~VectorIndex();

  /// Adds or replaces entries by article_id. Returns the number of entries
  /// processed. Throws DimensionMismatch / ZeroVector before mutating anything.
  std::size_t insert(std::span<const IndexEntry> entries);

  /// Results are sorted by (distance, article_id) and ranked from 1.
  [[nodiscard]] std::vector<RetrievalHit> knn(const EmbeddingVector& query, std::size_t k,
                                              const MetadataFilter& filter = {},
                                              SearchMode mode = SearchMode::approximate) const;

  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
  [[nodiscard]] const HnswParams& params() const noexcept { return params_; }
  [[nodiscard]] const IndexEntry* find(std::string_view article_id) const;

  void save(const std::filesystem::path& path) const;
  static VectorIndex load(const std::filesystem::path& path);

 private:
  using Slot = std::uint32_t;
  struct Scored {
    double distance;
    Slot slot;
  };

  double distance_to(const EmbeddingVector& q, Slot s) const;
  double distance_between(Slot a, Slot b) const;
  int draw_level();
  void link_slot(Slot slot);
  void rebuild_graph();
  std::vector<Scored> search_layer(const EmbeddingVector& q, std::vector<Slot> entry_points, std::size_t ef,
                                   int level, const MetadataFilter* filter) const;
  std::vector<Slot> select_neighbors(std::vector<Scored> candidates, std::size_t max_count) const;
  std::size_t max_links(int level) const { return level == 0 ? 2 * params_.M : params_.M; }
  std::vector<RetrievalHit> exact_search(const EmbeddingVector& q, std::size_t k, const MetadataFilter& filter) const;
  std::vector<RetrievalHit> finalize(std::vector<Scored> scored, std::size_t k) const;

  std::size_t dimension_;
  HnswParams params_;
  std::vector<IndexEntry> entries_;
  std::unordered_map<std::string, Slot> slot_of_;
  std::vector<int> levels_;
  std::vector<std::vector<std::vector<Slot>>> links_;  // slot -> level -> neighbours
  Slot entry_point_ = 0;
  int max_level_ = -1;
  std::mt19937_64 rng_;
  std::unique_ptr<std::shared_mutex> mutex_;
};

/// Text embedded for an article: its heading and body.
std::string article_embedding_text(const Article& article);

VectorIndex build_index(const Corpus& corpus, const EmbeddingBackend& backend, HnswParams params = {});

}  // namespace n2i
