#include "n2i/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <queue>
#include <sstream>

#include <fmt/format.h>

#include "n2i/error.hpp"
#include "n2i/text.hpp"

namespace n2i {

namespace fs = std::filesystem;

std::string_view to_string(SearchMode mode) noexcept {
  return mode == SearchMode::exact ? "exact" : "approximate";
}

std::optional<SearchMode> parse_search_mode(std::string_view name) {
  if (name == "exact") return SearchMode::exact;
  if (name == "approximate") return SearchMode::approximate;
  return std::nullopt;
}

VectorIndex::VectorIndex(std::size_t dimension, HnswParams params)
    : dimension_(dimension), params_(params), rng_(params.seed), mutex_(std::make_unique<std::shared_mutex>()) {
  if (dimension == 0) throw Error(ErrorCode::InvalidArgument, "index dimension must be positive");
  if (params.M < 2) throw Error(ErrorCode::InvalidArgument, "HNSW M must be at least 2");
  if (params.ef_construction == 0 || params.ef_search == 0) {
    throw Error(ErrorCode::InvalidArgument, "HNSW ef parameters must be positive");
  }
}

VectorIndex::VectorIndex(VectorIndex&&) noexcept = default;
VectorIndex& VectorIndex::operator=(VectorIndex&&) noexcept = default;
VectorIndex::~VectorIndex() = default;

std::size_t VectorIndex::size() const {
  std::shared_lock lock(*mutex_);
  return entries_.size();
}

const IndexEntry* VectorIndex::find(std::string_view article_id) const {
  std::shared_lock lock(*mutex_);
  auto it = slot_of_.find(std::string(article_id));
  return it == slot_of_.end() ? nullptr : &entries_[it->second];
}

double VectorIndex::distance_to(const EmbeddingVector& q, Slot s) const {
  return cosine_distance(q, entries_[s].vector);
}

double VectorIndex::distance_between(Slot a, Slot b) const {
  return cosine_distance(entries_[a].vector, entries_[b].vector);
}

int VectorIndex::draw_level() {
  const double ml = 1.0 / std::log(static_cast<double>(params_.M));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng_);
  if (u <= 0.0) u = std::numeric_limits<double>::min();
  return static_cast<int>(std::floor(-std::log(u) * ml));
}

std::size_t VectorIndex::insert(std::span<const IndexEntry> entries) {
  for (const auto& e : entries) {
    if (e.vector.dimension() != dimension_) {
      throw Error(ErrorCode::DimensionMismatch, fmt::format("entry '{}' has dimension {}, index expects {}",
                                                            e.article_id, e.vector.dimension(), dimension_));
    }
    if (e.vector.norm() == 0.0) {
      throw Error(ErrorCode::ZeroVector, fmt::format("entry '{}' is a zero vector", e.article_id));
    }
  }

  std::unique_lock lock(*mutex_);
  bool replaced = false;
  std::vector<Slot> fresh;
  for (const auto& e : entries) {
    auto it = slot_of_.find(e.article_id);
    if (it != slot_of_.end()) {
      entries_[it->second] = e;
      replaced = true;
      continue;
    }
    Slot slot = static_cast<Slot>(entries_.size());
    slot_of_.emplace(e.article_id, slot);
    entries_.push_back(e);
    levels_.push_back(0);
    links_.emplace_back();
    fresh.push_back(slot);
  }

  // The graph has no deletion, so a replaced vector forces a rebuild.
  if (replaced) {
    rebuild_graph();
  } else {
    for (Slot s : fresh) link_slot(s);
  }
  return entries.size();
}

void VectorIndex::rebuild_graph() {
  rng_.seed(params_.seed);
  max_level_ = -1;
  entry_point_ = 0;
  for (auto& l : links_) l.clear();
  for (Slot s = 0; s < entries_.size(); ++s) link_slot(s);
}

void VectorIndex::link_slot(Slot slot) {
  const int level = draw_level();
  levels_[slot] = level;
  links_[slot].assign(static_cast<std::size_t>(level) + 1, {});
  if (max_level_ < 0) {
    entry_point_ = slot;
    max_level_ = level;
    return;
  }

  const EmbeddingVector& q = entries_[slot].vector;
  Slot cur = entry_point_;
  double cur_dist = distance_to(q, cur);
  for (int l = max_level_; l > level; --l) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (Slot n : links_[cur][static_cast<std::size_t>(l)]) {
        double d = distance_to(q, n);
        if (d < cur_dist) {
          cur_dist = d;
          cur = n;
          moved = true;
        }
      }
    }
  }

  std::vector<Slot> eps{cur};
  for (int l = std::min(level, max_level_); l >= 0; --l) {
    auto found = search_layer(q, eps, params_.ef_construction, l, nullptr);
    auto chosen = select_neighbors(found, params_.M);
    const auto lu = static_cast<std::size_t>(l);
    links_[slot][lu] = chosen;
    for (Slot n : chosen) {
      auto& back = links_[n][lu];
      back.push_back(slot);
      if (back.size() > max_links(l)) {
        std::vector<Scored> scored;
        scored.reserve(back.size());
        for (Slot b : back) scored.push_back({distance_between(n, b), b});
        std::sort(scored.begin(), scored.end(),
                  [](const Scored& a, const Scored& b) { return a.distance < b.distance || (a.distance == b.distance && a.slot < b.slot); });
        back = select_neighbors(std::move(scored), max_links(l));
      }
    }
    eps.clear();
    for (const auto& f : found) eps.push_back(f.slot);
  }
  if (level > max_level_) {
    max_level_ = level;
    entry_point_ = slot;
  }
}

// Keeps a candidate only if it is closer to the base than to every neighbour
// already kept; candidates arrive sorted by distance to the base.
std::vector<VectorIndex::Slot> VectorIndex::select_neighbors(std::vector<Scored> candidates,
                                                             std::size_t max_count) const {
  std::vector<Slot> kept;
  for (const auto& c : candidates) {
    if (kept.size() >= max_count) break;
    bool diverse = true;
    for (Slot k : kept) {
      if (distance_between(c.slot, k) < c.distance) {
        diverse = false;
        break;
      }
    }
    if (diverse) kept.push_back(c.slot);
  }
  return kept;
}

std::vector<VectorIndex::Scored> VectorIndex::search_layer(const EmbeddingVector& q, std::vector<Slot> entry_points,
                                                           std::size_t ef, int level,
                                                           const MetadataFilter* filter) const {
  auto closer = [](const Scored& a, const Scored& b) {
    return a.distance > b.distance || (a.distance == b.distance && a.slot > b.slot);
  };
  auto farther = [](const Scored& a, const Scored& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.slot < b.slot);
  };
  std::priority_queue<Scored, std::vector<Scored>, decltype(closer)> frontier(closer);
  std::priority_queue<Scored, std::vector<Scored>, decltype(farther)> best(farther);
  std::vector<char> visited(entries_.size(), 0);
  auto admit = [&](Slot s) { return filter == nullptr || filter->matches(entries_[s].metadata); };

  for (Slot ep : entry_points) {
    if (visited[ep]) continue;
    visited[ep] = 1;
    Scored sc{distance_to(q, ep), ep};
    frontier.push(sc);
    if (admit(ep)) best.push(sc);
  }
  const auto lu = static_cast<std::size_t>(level);
  while (!frontier.empty()) {
    Scored c = frontier.top();
    if (best.size() >= ef && c.distance > best.top().distance) break;
    frontier.pop();
    for (Slot n : links_[c.slot][lu]) {
      if (visited[n]) continue;
      visited[n] = 1;
      Scored sc{distance_to(q, n), n};
      if (best.size() < ef || sc.distance < best.top().distance) {
        frontier.push(sc);
        if (admit(n)) {
          best.push(sc);
          if (best.size() > ef) best.pop();
        }
      }
    }
  }
  std::vector<Scored> out;
  out.reserve(best.size());
  while (!best.empty()) {
    out.push_back(best.top());
    best.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<RetrievalHit> VectorIndex::finalize(std::vector<Scored> scored, std::size_t k) const {
  auto order = [&](const Scored& a, const Scored& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return entries_[a.slot].article_id < entries_[b.slot].article_id;
  };
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), order);
  std::vector<RetrievalHit> hits;
  hits.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    hits.push_back({entries_[scored[i].slot].article_id, scored[i].distance, i + 1});
  }
  return hits;
}

std::vector<RetrievalHit> VectorIndex::exact_search(const EmbeddingVector& q, std::size_t k,
                                                    const MetadataFilter& filter) const {
  std::vector<Scored> scored;
  for (Slot s = 0; s < entries_.size(); ++s) {
    if (filter.matches(entries_[s].metadata)) scored.push_back({distance_to(q, s), s});
  }
  return finalize(std::move(scored), k);
}

std::vector<RetrievalHit> VectorIndex::knn(const EmbeddingVector& query, std::size_t k, const MetadataFilter& filter,
                                           SearchMode mode) const {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  if (query.dimension() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("query has dimension {}, index expects {}", query.dimension(), dimension_));
  }
  if (query.norm() == 0.0) throw Error(ErrorCode::ZeroVector, "query is a zero vector");

  std::shared_lock lock(*mutex_);
  if (entries_.empty()) return {};
  if (mode == SearchMode::exact) return exact_search(query, k, filter);

  std::size_t admitted = 0;
  for (const auto& e : entries_) admitted += filter.matches(e.metadata) ? 1 : 0;
  if (admitted == 0) return {};
  const std::size_t ef = std::max(params_.ef_search, k);
  // Small filtered candidate sets are cheaper and exact to scan directly.
  if (admitted <= ef) return exact_search(query, k, filter);

  Slot cur = entry_point_;
  double cur_dist = distance_to(query, cur);
  for (int l = max_level_; l > 0; --l) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (Slot n : links_[cur][static_cast<std::size_t>(l)]) {
        double d = distance_to(query, n);
        if (d < cur_dist) {
          cur_dist = d;
          cur = n;
          moved = true;
        }
      }
    }
  }
  const MetadataFilter* f = filter.unconstrained() ? nullptr : &filter;
  auto found = search_layer(query, {cur}, ef, 0, f);
  if (found.size() < std::min(k, admitted)) return exact_search(query, k, filter);
  return finalize(std::move(found), k);
}

// --- persistence -------------------------------------------------------------

void VectorIndex::save(const fs::path& path) const {
  std::shared_lock lock(*mutex_);
  nlohmann::json j;
  j["format"] = "n2i-index";
  j["version"] = 1;
  j["dimension"] = dimension_;
  j["params"] = {{"M", params_.M},
                 {"ef_construction", params_.ef_construction},
                 {"ef_search", params_.ef_search},
                 {"seed", params_.seed}};
  std::ostringstream rng_state;
  rng_state << rng_;
  j["rng_state"] = rng_state.str();
  j["entry_point"] = entry_point_;
  j["max_level"] = max_level_;
  auto& arr = j["entries"] = nlohmann::json::array();
  for (std::size_t s = 0; s < entries_.size(); ++s) {
    const auto& e = entries_[s];
    arr.push_back({{"article_id", e.article_id},
                   {"vector", std::vector<double>(e.vector.values().begin(), e.vector.values().end())},
                   {"metadata", e.metadata},
                   {"level", levels_[s]},
                   {"links", links_[s]}});
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = fs::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", tmp.string()));
    out << j.dump();
    if (!out.flush()) throw Error(ErrorCode::Io, fmt::format("write failed for '{}'", tmp.string()));
  }
  fs::rename(tmp, path);
}

VectorIndex VectorIndex::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IndexMissing, fmt::format("cannot open index '{}'", path.string()));
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || j.value("format", std::string{}) != "n2i-index") {
    throw Error(ErrorCode::IndexMissing, fmt::format("'{}' is not an index file", path.string()));
  }
  try {
    HnswParams p;
    const auto& jp = j.at("params");
    p.M = jp.at("M").get<std::size_t>();
    p.ef_construction = jp.at("ef_construction").get<std::size_t>();
    p.ef_search = jp.at("ef_search").get<std::size_t>();
    p.seed = jp.at("seed").get<std::uint64_t>();
    VectorIndex index(j.at("dimension").get<std::size_t>(), p);
    std::istringstream rng_state(j.at("rng_state").get<std::string>());
    rng_state >> index.rng_;
    index.entry_point_ = j.at("entry_point").get<Slot>();
    index.max_level_ = j.at("max_level").get<int>();
    for (const auto& je : j.at("entries")) {
      IndexEntry e;
      e.article_id = je.at("article_id").get<std::string>();
      e.vector = EmbeddingVector(je.at("vector").get<std::vector<double>>());
      e.metadata = je.at("metadata").get<DocumentMetadata>();
      if (e.vector.dimension() != index.dimension_) {
        throw Error(ErrorCode::DimensionMismatch, fmt::format("stored entry '{}' has wrong dimension", e.article_id));
      }
      index.slot_of_.emplace(e.article_id, static_cast<Slot>(index.entries_.size()));
      index.entries_.push_back(std::move(e));
      index.levels_.push_back(je.at("level").get<int>());
      index.links_.push_back(je.at("links").get<std::vector<std::vector<Slot>>>());
    }
    for (const auto& node : index.links_) {
      for (const auto& level : node) {
        for (Slot n : level) {
          if (n >= index.entries_.size()) throw Error(ErrorCode::IndexMissing, "index graph references unknown slot");
        }
      }
    }
    return index;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IndexMissing, fmt::format("corrupt index '{}': {}", path.string(), e.what()));
  }
}

std::string article_embedding_text(const Article& article) {
  return article.heading + "\n" + article.body;
}

VectorIndex build_index(const Corpus& corpus, const EmbeddingBackend& backend, HnswParams params) {
  VectorIndex index(backend.dimension(), params);
  constexpr std::size_t kBatch = 64;
  for (std::size_t start = 0; start < corpus.articles.size(); start += kBatch) {
    const std::size_t end = std::min(start + kBatch, corpus.articles.size());
    std::vector<std::string> texts;
    for (std::size_t i = start; i < end; ++i) texts.push_back(article_embedding_text(corpus.articles[i]));
    auto vectors = embed_all(texts, backend);
    std::vector<IndexEntry> batch;
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back({corpus.articles[i].article_id, std::move(vectors[i - start]), corpus.articles[i].metadata});
    }
    index.insert(batch);
  }
  return index;
}

}  // namespace n2i
