#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace n2i {

enum class TextType { law, decree, regulation, directive, order, other };

std::string_view to_string(TextType type) noexcept;
std::optional<TextType> parse_text_type(std::string_view name);

using Date = std::chrono::year_month_day;

/// Strict ISO-8601 calendar date ("YYYY-MM-DD"). Anything else is nullopt.
std::optional<Date> parse_date(std::string_view iso);
std::string format_date(const Date& date);

/// Standardized metadata attached to every document and copied onto its articles.
struct DocumentMetadata {
  std::string source_id;
  std::string country;  // ISO-3166 alpha-2
  std::string ban_topic;
  TextType text_type = TextType::other;
  std::string institution;
  std::optional<Date> publication_date;
  std::optional<Date> revision_date;

  bool operator==(const DocumentMetadata&) const = default;
};

struct DocumentSource {
  DocumentMetadata metadata;
  std::string raw_text;
};

/// Throws InvalidArgument / EmptyDocument when a source breaks its invariants.
void validate(const DocumentSource& source);

/// One segmented legal provision. `marker` is the heading exactly as it
/// appeared in the normalized text (e.g. "Article 1."), empty for a preamble.
struct Article {
  std::string article_id;
  int ordinal = 0;
  std::string heading;
  std::string marker;
  std::string body;
  DocumentMetadata metadata;

  bool operator==(const Article&) const = default;
};

struct Corpus {
  std::string name;
  std::vector<Article> articles;
  std::string created_at;

  [[nodiscard]] const Article* find(std::string_view article_id) const;
};

/// Heading keywords recognised at a segment boundary, matched
/// case-insensitively and followed by an arabic numeral.
struct SegmentationGrammar {
  std::vector<std::string> keywords{"Article", "Art."};
  std::string preamble_heading = "Preamble";
};

/// Byte span of one article inside the whitespace-normalized text.
/// [begin, marker_end) is the heading marker, [marker_end, end) the body.
struct ArticleSpan {
  std::size_t begin = 0;
  std::size_t marker_end = 0;
  std::size_t end = 0;
  std::string heading;
};

/// Spans partition [0, normalized.size()) exactly, in document order.
std::vector<ArticleSpan> find_article_spans(std::string_view normalized, const SegmentationGrammar& grammar = {});

std::string make_article_id(std::string_view source_id, int ordinal);

std::vector<Article> segment_document(const DocumentSource& source, const SegmentationGrammar& grammar = {});

/// Markers and bodies joined in ordinal order; equals the normalized source
/// text once whitespace is disregarded.
std::string reconstruct_text(std::span<const Article> articles);

Corpus ingest(std::span<const DocumentSource> sources, std::string corpus_name,
              const SegmentationGrammar& grammar = {});

/// Conjunction of optional clauses; an absent clause is unconstrained.
struct MetadataFilter {
  std::optional<std::string> country;
  std::optional<std::string> ban_topic;
  std::vector<TextType> text_types;  // empty = any
  std::optional<Date> published_from;
  std::optional<Date> published_to;

  [[nodiscard]] bool matches(const DocumentMetadata& metadata) const;
  [[nodiscard]] bool unconstrained() const;
  bool operator==(const MetadataFilter&) const = default;
};

std::vector<Article> filter_articles(const Corpus& corpus, const MetadataFilter& filter);

void to_json(nlohmann::json& j, const DocumentMetadata& m);
void from_json(const nlohmann::json& j, DocumentMetadata& m);
void to_json(nlohmann::json& j, const Article& a);
void from_json(const nlohmann::json& j, Article& a);
void to_json(nlohmann::json& j, const MetadataFilter& f);
void from_json(const nlohmann::json& j, MetadataFilter& f);

/// Newline-delimited record files, one per corpus, under a directory.
class CorpusStore {
 public:
  explicit CorpusStore(std::filesystem::path dir);

  [[nodiscard]] std::filesystem::path path_for(std::string_view corpus_name) const;
  [[nodiscard]] bool contains(std::string_view corpus_name) const;

  /// Atomic replace under an exclusive lock.
  void write(const Corpus& corpus) const;
  [[nodiscard]] Corpus read(std::string_view corpus_name) const;

 private:
  std::filesystem::path dir_;
};

std::string serialize_corpus(const Corpus& corpus);
Corpus parse_corpus(std::string_view records);
void save_corpus_file(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus_file(const std::filesystem::path& path);

/// Reads *.txt files from `dir` plus a JSON sidecar mapping file name to
/// DocumentSource metadata fields. The sidecar defaults to dir/metadata.json.
std::vector<DocumentSource> load_source_directory(const std::filesystem::path& dir,
                                                  const std::optional<std::filesystem::path>& sidecar = {});

}  // namespace n2i
