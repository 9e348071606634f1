#include "n2i/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <unordered_set>

#include <fmt/format.h>

#include "n2i/error.hpp"
#include "n2i/text.hpp"

namespace n2i {

std::string_view to_string(TextType type) noexcept {
  switch (type) {
    case TextType::law: return "law";
    case TextType::decree: return "decree";
    case TextType::regulation: return "regulation";
    case TextType::directive: return "directive";
    case TextType::order: return "order";
    case TextType::other: return "other";
  }
  return "other";
}

std::optional<TextType> parse_text_type(std::string_view name) {
  const std::string lower = text::to_lower_ascii(text::trim(name));
  for (auto t : {TextType::law, TextType::decree, TextType::regulation, TextType::directive, TextType::order,
                 TextType::other}) {
    if (lower == to_string(t)) return t;
  }
  return std::nullopt;
}

std::optional<Date> parse_date(std::string_view iso) {
  iso = text::trim(iso);
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
  auto number = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int value = 0;
    auto sub = iso.substr(pos, len);
    auto [ptr, ec] = std::from_chars(sub.data(), sub.data() + sub.size(), value);
    if (ec != std::errc{} || ptr != sub.data() + sub.size()) return std::nullopt;
    return value;
  };
  auto y = number(0, 4);
  auto m = number(5, 2);
  auto d = number(8, 2);
  if (!y || !m || !d) return std::nullopt;
  Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
            std::chrono::day{static_cast<unsigned>(*d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::string format_date(const Date& date) {
  return fmt::format("{:04}-{:02}-{:02}", static_cast<int>(date.year()), static_cast<unsigned>(date.month()),
                     static_cast<unsigned>(date.day()));
}

void validate(const DocumentSource& source) {
  if (text::is_blank(source.metadata.source_id)) {
    throw Error(ErrorCode::InvalidArgument, "source_id must be non-empty");
  }
  if (text::is_blank(source.raw_text)) {
    throw Error(ErrorCode::EmptyDocument, fmt::format("source '{}' has no text", source.metadata.source_id));
  }
  const auto& m = source.metadata;
  if (m.publication_date && m.revision_date && *m.revision_date < *m.publication_date) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("source '{}': revision_date precedes publication_date", m.source_id));
  }
}

const Article* Corpus::find(std::string_view article_id) const {
  auto it = std::find_if(articles.begin(), articles.end(),
                         [&](const Article& a) { return a.article_id == article_id; });
  return it == articles.end() ? nullptr : &*it;
}

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// A heading may only start a segment at the top of the text, a line start,
// or right after sentence-final punctuation and a space.
bool at_boundary(std::string_view t, std::size_t i) {
  if (i == 0) return true;
  char prev = t[i - 1];
  if (prev == '\n') return true;
  if (prev != ' ' || i < 2) return false;
  char before = t[i - 2];
  return before == '.' || before == ';' || before == ':' || before == '!' || before == '?' || before == '\n';
}

struct HeadingMatch {
  std::size_t begin;
  std::size_t marker_end;
  std::string heading;
};

std::optional<HeadingMatch> match_heading(std::string_view t, std::size_t i, std::string_view keyword) {
  if (!text::starts_with_icase(t.substr(i), keyword)) return std::nullopt;
  std::size_t p = i + keyword.size();
  const bool dotted = !keyword.empty() && keyword.back() == '.';
  if (!dotted && p < t.size() && is_alnum(t[p])) return std::nullopt;
  std::size_t spaces = 0;
  while (p < t.size() && t[p] == ' ') {
    ++p;
    ++spaces;
  }
  if (!dotted && spaces == 0) return std::nullopt;
  std::size_t digits_begin = p;
  while (p < t.size() && std::isdigit(static_cast<unsigned char>(t[p]))) ++p;
  if (p == digits_begin) return std::nullopt;
  if (text::starts_with_icase(t.substr(p), "er") && (p + 2 == t.size() || !is_alnum(t[p + 2]))) p += 2;
  if (p < t.size() && is_alnum(t[p])) return std::nullopt;

  HeadingMatch m;
  m.begin = i;
  m.heading = fmt::format("{} {}", t.substr(i, keyword.size()), t.substr(digits_begin, p - digits_begin));

  // Up to two punctuation marks, each possibly after one space ("Article 3 : ...",
  // "Article 1er. - ...").
  m.marker_end = p;
  for (int round = 0; round < 2; ++round) {
    std::size_t q = m.marker_end;
    if (q < t.size() && t[q] == ' ') ++q;
    auto rest = t.substr(q);
    std::size_t punct = 0;
    if (!rest.empty() && (rest[0] == '.' || rest[0] == ':' || rest[0] == '-' || rest[0] == ')')) {
      punct = 1;
    } else if (rest.starts_with("–") || rest.starts_with("—")) {
      punct = 3;
    }
    if (!punct) break;
    m.marker_end = q + punct;
  }
  return m;
}

}  // namespace

std::vector<ArticleSpan> find_article_spans(std::string_view t, const SegmentationGrammar& grammar) {
  std::vector<HeadingMatch> candidates;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!at_boundary(t, i)) continue;
    for (const auto& kw : grammar.keywords) {
      if (auto m = match_heading(t, i, kw)) {
        candidates.push_back(std::move(*m));
        i = candidates.back().marker_end - 1;
        break;
      }
    }
  }

  // A heading whose body would be blank is not a split point; its text is
  // absorbed by the preceding span.
  std::vector<HeadingMatch> accepted;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    std::size_t body_end = j + 1 < candidates.size() ? candidates[j + 1].begin : t.size();
    if (!text::is_blank(t.substr(candidates[j].marker_end, body_end - candidates[j].marker_end))) {
      accepted.push_back(candidates[j]);
    }
  }

  std::vector<ArticleSpan> spans;
  std::size_t first = accepted.empty() ? t.size() : accepted.front().begin;
  if (first > 0 || accepted.empty()) {
    spans.push_back({0, 0, first, grammar.preamble_heading});
  }
  for (std::size_t j = 0; j < accepted.size(); ++j) {
    std::size_t end = j + 1 < accepted.size() ? accepted[j + 1].begin : t.size();
    spans.push_back({accepted[j].begin, accepted[j].marker_end, end, accepted[j].heading});
  }
  return spans;
}

std::string make_article_id(std::string_view source_id, int ordinal) {
  return fmt::format("{}#{}", source_id, ordinal);
}

std::vector<Article> segment_document(const DocumentSource& source, const SegmentationGrammar& grammar) {
  if (text::is_blank(source.raw_text)) {
    throw Error(ErrorCode::EmptyDocument, fmt::format("source '{}' has no text", source.metadata.source_id));
  }
  const std::string normalized = text::normalize_whitespace(source.raw_text);
  std::vector<Article> articles;
  int ordinal = 0;
  for (const auto& span : find_article_spans(normalized, grammar)) {
    std::string_view body =
        text::trim(std::string_view(normalized).substr(span.marker_end, span.end - span.marker_end));
    if (body.empty()) continue;  // blank preamble
    Article a;
    a.ordinal = ++ordinal;
    a.article_id = make_article_id(source.metadata.source_id, a.ordinal);
    a.heading = span.heading;
    a.marker = normalized.substr(span.begin, span.marker_end - span.begin);
    a.body = std::string(body);
    a.metadata = source.metadata;
    articles.push_back(std::move(a));
  }
  return articles;
}

std::string reconstruct_text(std::span<const Article> articles) {
  std::string out;
  for (const auto& a : articles) {
    if (!out.empty()) out += ' ';
    if (!a.marker.empty()) {
      out += a.marker;
      out += ' ';
    }
    out += a.body;
  }
  return out;
}

Corpus ingest(std::span<const DocumentSource> sources, std::string corpus_name, const SegmentationGrammar& grammar) {
  std::unordered_set<std::string> seen;
  for (const auto& s : sources) {
    if (!seen.insert(s.metadata.source_id).second) {
      throw Error(ErrorCode::DuplicateSourceId, fmt::format("duplicate source_id '{}'", s.metadata.source_id));
    }
  }
  Corpus corpus;
  corpus.name = std::move(corpus_name);
  corpus.created_at = text::utc_timestamp();
  for (const auto& s : sources) {
    validate(s);
    auto articles = segment_document(s, grammar);
    std::move(articles.begin(), articles.end(), std::back_inserter(corpus.articles));
  }
  return corpus;
}

bool MetadataFilter::matches(const DocumentMetadata& m) const {
  if (country && m.country != *country) return false;
  if (ban_topic && m.ban_topic != *ban_topic) return false;
  if (!text_types.empty() && std::find(text_types.begin(), text_types.end(), m.text_type) == text_types.end()) {
    return false;
  }
  if (published_from || published_to) {
    if (!m.publication_date) return false;
    if (published_from && *m.publication_date < *published_from) return false;
    if (published_to && *m.publication_date > *published_to) return false;
  }
  return true;
}

bool MetadataFilter::unconstrained() const {
  return !country && !ban_topic && text_types.empty() && !published_from && !published_to;
}

std::vector<Article> filter_articles(const Corpus& corpus, const MetadataFilter& filter) {
  std::vector<Article> out;
  std::copy_if(corpus.articles.begin(), corpus.articles.end(), std::back_inserter(out),
               [&](const Article& a) { return filter.matches(a.metadata); });
  return out;
}

// --- JSON ------------------------------------------------------------------

namespace {

nlohmann::json date_or_null(const std::optional<Date>& d) {
  return d ? nlohmann::json(format_date(*d)) : nlohmann::json(nullptr);
}

std::optional<Date> date_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) return std::nullopt;
  return parse_date(it->get<std::string>());  // unparseable -> absent
}

std::string string_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  return it != j.end() && it->is_string() ? it->get<std::string>() : std::string{};
}

}  // namespace

void to_json(nlohmann::json& j, const DocumentMetadata& m) {
  j = nlohmann::json{{"source_id", m.source_id},
                     {"country", m.country},
                     {"ban_topic", m.ban_topic},
                     {"text_type", to_string(m.text_type)},
                     {"institution", m.institution},
                     {"publication_date", date_or_null(m.publication_date)},
                     {"revision_date", date_or_null(m.revision_date)}};
}

void from_json(const nlohmann::json& j, DocumentMetadata& m) {
  m.source_id = string_field(j, "source_id");
  m.country = string_field(j, "country");
  m.ban_topic = string_field(j, "ban_topic");
  m.text_type = parse_text_type(string_field(j, "text_type")).value_or(TextType::other);
  m.institution = string_field(j, "institution");
  m.publication_date = date_field(j, "publication_date");
  m.revision_date = date_field(j, "revision_date");
}

void to_json(nlohmann::json& j, const Article& a) {
  j = nlohmann::json{{"article_id", a.article_id}, {"ordinal", a.ordinal}, {"heading", a.heading},
                     {"marker", a.marker},         {"body", a.body},       {"metadata", a.metadata}};
}

void from_json(const nlohmann::json& j, Article& a) {
  a.article_id = j.at("article_id").get<std::string>();
  a.ordinal = j.at("ordinal").get<int>();
  a.heading = j.at("heading").get<std::string>();
  a.marker = j.value("marker", std::string{});
  a.body = j.at("body").get<std::string>();
  a.metadata = j.at("metadata").get<DocumentMetadata>();
}

void to_json(nlohmann::json& j, const MetadataFilter& f) {
  j = nlohmann::json::object();
  if (f.country) j["country"] = *f.country;
  if (f.ban_topic) j["ban_topic"] = *f.ban_topic;
  if (!f.text_types.empty()) {
    auto& arr = j["text_types"] = nlohmann::json::array();
    for (auto t : f.text_types) arr.push_back(to_string(t));
  }
  if (f.published_from) j["published_from"] = format_date(*f.published_from);
  if (f.published_to) j["published_to"] = format_date(*f.published_to);
}

void from_json(const nlohmann::json& j, MetadataFilter& f) {
  f = {};
  if (j.contains("country") && j["country"].is_string()) f.country = j["country"].get<std::string>();
  if (j.contains("ban_topic") && j["ban_topic"].is_string()) f.ban_topic = j["ban_topic"].get<std::string>();
  if (j.contains("text_types")) {
    for (const auto& t : j["text_types"]) {
      if (auto tt = parse_text_type(t.get<std::string>())) f.text_types.push_back(*tt);
    }
  }
  f.published_from = date_field(j, "published_from");
  f.published_to = date_field(j, "published_to");
}

}  // namespace n2i
