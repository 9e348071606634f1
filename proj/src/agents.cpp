#include "n2i/agents.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <functional>
#include <set>

#include <fmt/format.h>

#include "n2i/error.hpp"
#include "n2i/text.hpp"

namespace n2i {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

constexpr std::string_view kNone = "(none)";
constexpr std::string_view kUngradeable = "ungradeable output";

FieldSpec unit_score(std::string name) { return FieldSpec{std::move(name), FieldType::number, true, 0.0, 1.0}; }
FieldSpec optional_field(std::string name, FieldType type) { return FieldSpec{std::move(name), type, false, {}, {}}; }
FieldSpec explanation_field() { return FieldSpec{"explanation", FieldType::string, true, {}, {}, true}; }

std::string describe_metadata(const QueryMetadata& m) {
  std::vector<std::string> parts;
  if (m.country) parts.push_back("country=" + *m.country);
  if (m.ban_topic) parts.push_back("ban_topic=" + *m.ban_topic);
  if (m.text_type) parts.push_back(fmt::format("text_type={}", to_string(*m.text_type)));
  if (m.date_from) parts.push_back("date_from=" + format_date(*m.date_from));
  if (m.date_to) parts.push_back("date_to=" + format_date(*m.date_to));
  if (!m.thematic_keywords.empty()) parts.push_back("keywords=" + text::join(m.thematic_keywords, ","));
  return parts.empty() ? "no metadata could be inferred from the query" : "extracted " + text::join(parts, ", ");
}

std::string upper_ascii(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

// Bracketed tokens without whitespace, e.g. "[MA-2010#3]".
std::vector<std::string> bracket_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = s.find('[', pos)) != std::string_view::npos) {
    auto close = s.find(']', pos + 1);
    if (close == std::string_view::npos) break;
    auto token = s.substr(pos + 1, close - pos - 1);
    if (!token.empty() && token.find_first_of(" \t\n") == std::string_view::npos) out.emplace_back(token);
    pos = close + 1;
  }
  return out;
}

std::string erase_all(std::string s, std::string_view needle) {
  std::size_t pos;
  while ((pos = s.find(needle)) != std::string::npos) s.erase(pos, needle.size());
  return s;
}

AgentGrade grade_from(double score, double threshold, std::string explanation, std::map<std::string, double> criteria) {
  return AgentGrade{score, score >= threshold, std::move(explanation), std::move(criteria)};
}

nlohmann::json grade_output(const AgentGrade& g, double threshold) {
  nlohmann::json j = g;
  j["threshold"] = threshold;
  return j;
}

}  // namespace

// --- naming ------------------------------------------------------------------

std::string_view to_string(AgentKind kind) noexcept {
  switch (kind) {
    case AgentKind::metadata_retriever: return "metadata_retriever";
    case AgentKind::context_retriever: return "context_retriever";
    case AgentKind::context_grader: return "context_grader";
    case AgentKind::generator: return "generator";
    case AgentKind::groundedness_grader: return "groundedness_grader";
    case AgentKind::answer_relevance_grader: return "answer_relevance_grader";
    case AgentKind::query_disambiguator: return "query_disambiguator";
    case AgentKind::binary_qa: return "binary_qa";
  }
  return "unknown";
}

std::optional<AgentKind> parse_agent_kind(std::string_view name) {
  for (auto k : kAllAgents) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

// --- value types ---------------------------------------------------------------

bool QueryMetadata::empty() const {
  return !country && !ban_topic && !text_type && !date_from && !date_to && thematic_keywords.empty();
}

MetadataFilter QueryMetadata::to_filter() const {
  MetadataFilter f;
  f.country = country;
  f.ban_topic = ban_topic;
  if (text_type) f.text_types.push_back(*text_type);
  f.published_from = date_from;
  f.published_to = date_to;
  return f;
}

void to_json(nlohmann::json& j, const QueryMetadata& m) {
  j = nlohmann::json::object();
  if (m.country) j["country"] = *m.country;
  if (m.ban_topic) j["ban_topic"] = *m.ban_topic;
  if (m.text_type) j["text_type"] = to_string(*m.text_type);
  if (m.date_from) j["date_from"] = format_date(*m.date_from);
  if (m.date_to) j["date_to"] = format_date(*m.date_to);
  if (!m.thematic_keywords.empty()) j["thematic_keywords"] = m.thematic_keywords;
}

void to_json(nlohmann::json& j, const AgentGrade& g) {
  j = nlohmann::json{{"score", g.score}, {"pass", g.pass}, {"criteria", g.criteria}, {"explanation", g.explanation}};
}

void to_json(nlohmann::json& j, const GeneratedAnswer& a) {
  j = nlohmann::json{{"answer", a.text}, {"cited_article_ids", a.cited_article_ids}};
}

void to_json(nlohmann::json& j, const BinaryDecision& d) {
  j = nlohmann::json{{"label", d.label}, {"explanation", d.explanation}};
}

void from_json(const nlohmann::json& j, BinaryDecision& d) {
  d.label = j.at("label").get<int>();
  d.explanation = j.at("explanation").get<std::string>();
}

void to_json(nlohmann::json& j, const StepRecord& s) {
  j = nlohmann::json{{"agent", to_string(s.agent)},
                     {"llm", is_llm_agent(s.agent)},
                     {"template_version", s.template_version},
                     {"input_digest", s.input_digest},
                     {"output", s.output},
                     {"explanation", s.explanation},
                     {"elapsed_ms", s.elapsed_ms},
                     {"outcome", s.outcome}};
}

void from_json(const nlohmann::json& j, StepRecord& s) {
  auto kind = parse_agent_kind(j.at("agent").get<std::string>());
  if (!kind) throw Error(ErrorCode::MalformedTrace, "unknown agent '" + j.at("agent").get<std::string>() + "'");
  s.agent = *kind;
  s.template_version = j.value("template_version", std::string{});
  s.input_digest = j.value("input_digest", std::string{});
  s.output = j.value("output", nlohmann::json{});
  s.explanation = j.at("explanation").get<std::string>();
  s.elapsed_ms = j.value("elapsed_ms", 0.0);
  s.outcome = j.at("outcome").get<std::string>();
}

// --- schemas -------------------------------------------------------------------

namespace schemas {

const SchemaDescriptor& query_metadata() {
  static const SchemaDescriptor s{"QueryMetadata",
                                  {
                                      optional_field("country", FieldType::string),
                                      optional_field("ban_topic", FieldType::string),
                                      optional_field("text_type", FieldType::string),
                                      optional_field("date_from", FieldType::string),
                                      optional_field("date_to", FieldType::string),
                                      optional_field("thematic_keywords", FieldType::string_list),
                                  },
                                  false};
  return s;
}

const SchemaDescriptor& context_grade() {
  static const SchemaDescriptor s{"ContextGrade", {unit_score("relevance"), unit_score("specificity"), explanation_field()}};
  return s;
}

const SchemaDescriptor& generated_answer() {
  static const SchemaDescriptor s{"GeneratedAnswer",
                                  {{"answer", FieldType::string, true, {}, {}, true},
                                   optional_field("cited_article_ids", FieldType::string_list)}};
  return s;
}

const SchemaDescriptor& groundedness_grade() {
  static const SchemaDescriptor s{"GroundednessGrade", {unit_score("supported_claims_fraction"), explanation_field()}};
  return s;
}

const SchemaDescriptor& answer_relevance_grade() {
  static const SchemaDescriptor s{"AnswerRelevanceGrade", {unit_score("addresses_query"), explanation_field()}};
  return s;
}

const SchemaDescriptor& binary_decision() {
  static const SchemaDescriptor s{"BinaryDecision",
                                  {{"label", FieldType::integer, true, 0.0, 1.0}, explanation_field()}};
  return s;
}

}  // namespace schemas

std::string reprompt_text(std::string_view prompt, std::string_view reason) {
  return fmt::format(
      "{}\n\nYour previous reply could not be used ({}). Reply again with ONLY the JSON object described above, "
      "with no other text.",
      prompt, reason);
}

std::string render_contexts(std::span<const GradedContext> contexts) {
  std::string out;
  for (const auto& c : contexts) {
    if (!out.empty()) out += "\n";
    out += fmt::format("<article id=\"{}\">\n{}\n{}\n</article>", c.article.article_id, c.article.heading,
                       c.article.body);
  }
  return out;
}

// --- AgentKit ----------------------------------------------------------------------

AgentKit::AgentKit(PromptLibrary prompts, AgentBinding deterministic, AgentBinding generative)
    : prompts_(std::move(prompts)), deterministic_(std::move(deterministic)), generative_(std::move(generative)) {
  if (!deterministic_.backend || !generative_.backend) {
    throw Error(ErrorCode::InvalidArgument, "agent bindings need a backend");
  }
}

nlohmann::json AgentKit::describe_backends() const {
  return {{"deterministic", {{"backend", deterministic_.backend->describe()}, {"temperature", deterministic_.temperature}}},
          {"generative", {{"backend", generative_.backend->describe()}, {"temperature", generative_.temperature}}}};
}

AgentKit::JsonCall AgentKit::call_json(const AgentBinding& binding, const std::string& prompt,
                                       const SchemaDescriptor& schema,
                                       const std::function<void(ParseResult&)>& refine) const {
  JsonCall call;
  call.digest = prompt_digest(prompt);
  auto attempt = [&](const std::string& p) {
    std::string raw;
    try {
      raw = complete(*binding.backend, {p, binding.temperature}, binding.retry);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyCompletion) throw;
    }
    call.raw_replies.push_back(raw);
    if (raw.empty()) {
      ParseResult r;
      r.message = "empty completion";
      return r;
    }
    auto parsed = parse_structured(raw, schema);
    if (parsed.ok() && refine) refine(parsed);
    return parsed;
  };
  call.parsed = attempt(prompt);
  if (!call.parsed.ok()) {
    call.reprompted = true;
    call.parsed = attempt(reprompt_text(prompt, call.parsed.message));
  }
  return call;
}

AgentResult<QueryMetadata> AgentKit::metadata_retrieve(std::string_view query) const {
  if (text::is_blank(query)) throw Error(ErrorCode::InvalidArgument, "query must be non-empty");
  const auto start = Clock::now();
  const auto& tmpl = prompts_.get("metadata_retriever");
  const std::string prompt = tmpl.render({{"query", std::string(query)}});

  auto call = call_json(deterministic_, prompt, schemas::query_metadata(), [](ParseResult& p) {
    if (p.value.contains("text_type") && !parse_text_type(p.value["text_type"].get<std::string>())) {
      p.status = ParseStatus::schema_violation;
      p.message = "text_type is not a known text type";
      p.offending_keys = {"text_type"};
    }
  });
  AgentResult<QueryMetadata> r;
  if (call.parsed.ok()) {
    const auto& v = call.parsed.value;
    auto str = [&](const char* key) -> std::optional<std::string> {
      if (!v.contains(key)) return std::nullopt;
      auto s = std::string(text::trim(v[key].get<std::string>()));
      return s.empty() ? std::nullopt : std::optional<std::string>(s);
    };
    if (auto c = str("country")) r.value.country = upper_ascii(*c);
    r.value.ban_topic = str("ban_topic");
    if (auto t = str("text_type")) r.value.text_type = parse_text_type(*t);
    if (auto d = str("date_from")) r.value.date_from = parse_date(*d);
    if (auto d = str("date_to")) r.value.date_to = parse_date(*d);
    if (v.contains("thematic_keywords")) r.value.thematic_keywords = v["thematic_keywords"].get<std::vector<std::string>>();
    r.step.output = r.value;
    r.step.explanation = describe_metadata(r.value);
    r.step.outcome = call.reprompted ? "reprompted" : "ok";
  } else {
    r.degraded = true;
    r.step.output = {{"error", call.parsed.message}, {"raw", call.raw_replies}};
    r.step.explanation = "metadata reply unusable after one reprompt (" + call.parsed.message +
                         "); continuing without extracted metadata";
    r.step.outcome = "degraded";
  }
  r.step.agent = AgentKind::metadata_retriever;
  r.step.template_version = tmpl.version_tag();
  r.step.input_digest = call.digest;
  r.step.elapsed_ms = elapsed_ms(start);
  return r;
}

AgentResult<AgentGrade> AgentKit::grade_context(std::string_view query, const Article& article,
                                                double threshold) const {
  if (text::is_blank(article.body)) throw Error(ErrorCode::InvalidArgument, "article body must be non-empty");
  const auto start = Clock::now();
  const auto& tmpl = prompts_.get("context_grader");
  const std::string prompt = tmpl.render({{"query", std::string(query)},
                                          {"article_id", article.article_id},
                                          {"body", article.heading + "\n" + article.body}});
  auto call = call_json(deterministic_, prompt, schemas::context_grade());
  AgentResult<AgentGrade> r;
  if (call.parsed.ok()) {
    const auto& v = call.parsed.value;
    double rel = v["relevance"].get<double>();
    double spec = v["specificity"].get<double>();
    r.value = grade_from((rel + spec) / 2.0, threshold, v["explanation"].get<std::string>(),
                         {{"relevance", rel}, {"specificity", spec}});
    r.step.outcome = call.reprompted ? "reprompted" : (r.value.pass ? "ok" : "fail");
  } else {
    r.degraded = true;
    r.value = grade_from(0.0, threshold, std::string(kUngradeable), {{"relevance", 0.0}, {"specificity", 0.0}});
    r.step.outcome = "degraded";
  }
  r.step.agent = AgentKind::context_grader;
  r.step.template_version = tmpl.version_tag();
  r.step.input_digest = call.digest;
  r.step.output = grade_output(r.value, threshold);
  r.step.output["article_id"] = article.article_id;
  r.step.explanation = r.value.explanation;
  r.step.elapsed_ms = elapsed_ms(start);
  return r;
}

AgentResult<GeneratedAnswer> AgentKit::generate(std::string_view query, std::span<const GradedContext> contexts,
                                                const std::optional<std::string>& feedback) const {
  std::vector<GradedContext> passing;
  for (const auto& c : contexts) {
    if (c.grade.pass) passing.push_back(c);
  }
  if (passing.empty()) throw Error(ErrorCode::NoPassingContext, "generation requires at least one passing context");

  const auto start = Clock::now();
  const auto& tmpl = prompts_.get("generator");
  const std::string prompt = tmpl.render({{"query", std::string(query)},
                                          {"contexts", render_contexts(passing)},
                                          {"failure_context", feedback ? *feedback : std::string(kNone)}});
  const AgentBinding& binding = feedback ? generative_ : deterministic_;
  auto call = call_json(binding, prompt, schemas::generated_answer());

  std::set<std::string> allowed;
  std::vector<std::string> context_ids;
  for (const auto& c : passing) {
    allowed.insert(c.article.article_id);
    context_ids.push_back(c.article.article_id);
  }

  AgentResult<GeneratedAnswer> r;
  std::vector<std::string> proposed;
  if (call.parsed.ok()) {
    r.value.text = std::string(text::trim(call.parsed.value["answer"].get<std::string>()));
    if (call.parsed.value.contains("cited_article_ids")) {
      proposed = call.parsed.value["cited_article_ids"].get<std::vector<std::string>>();
    }
  } else {
    const bool all_empty = std::all_of(call.raw_replies.begin(), call.raw_replies.end(),
                                       [](const std::string& s) { return text::is_blank(s); });
    if (all_empty) throw Error(ErrorCode::EmptyCompletion, "generator returned no answer");
    r.degraded = true;
    r.value.text = std::string(text::trim(call.raw_replies.back()));
  }
  for (auto& t : bracket_tokens(r.value.text)) proposed.push_back(std::move(t));

  std::vector<std::string> stripped;
  for (const auto& id : proposed) {
    if (allowed.count(id)) {
      if (std::find(r.value.cited_article_ids.begin(), r.value.cited_article_ids.end(), id) ==
          r.value.cited_article_ids.end()) {
        r.value.cited_article_ids.push_back(id);
      }
    } else if (std::find(stripped.begin(), stripped.end(), id) == stripped.end()) {
      stripped.push_back(id);
      r.value.text = erase_all(std::move(r.value.text), "[" + id + "]");
    }
  }
  if (text::is_blank(r.value.text)) r.value.text = "(answer consisted only of unsupported citations)";

  r.step.agent = AgentKind::generator;
  r.step.template_version = tmpl.version_tag();
  r.step.input_digest = call.digest;
  r.step.output = r.value;
  r.step.output["context_ids"] = context_ids;
  r.step.output["stripped_citations"] = stripped;
  r.step.output["regeneration"] = feedback.has_value();
  if (r.degraded) {
    r.step.outcome = "degraded";
    r.step.explanation = "reply was not valid JSON after one reprompt; raw text used as the answer";
  } else if (!stripped.empty()) {
    r.step.outcome = "citations_stripped";
    r.step.explanation = fmt::format("removed citations outside the provided context: {}", text::join(stripped, ", "));
  } else {
    r.step.outcome = call.reprompted ? "reprompted" : "ok";
    r.step.explanation = fmt::format("answer generated from {} graded article(s), citing {}", passing.size(),
                                     r.value.cited_article_ids.empty() ? std::string("none")
                                                                       : text::join(r.value.cited_article_ids, ", "));
  }
  r.step.elapsed_ms = elapsed_ms(start);
  return r;
}

AgentResult<AgentGrade> AgentKit::grade_groundedness(const GeneratedAnswer& answer,
                                                     std::span<const GradedContext> contexts,
                                                     double threshold) const {
  if (contexts.empty()) throw Error(ErrorCode::InvalidArgument, "groundedness grading needs contexts");
  const auto start = Clock::now();
  const auto& tmpl = prompts_.get("groundedness_grader");
  AgentResult<AgentGrade> r;
  r.step.agent = AgentKind::groundedness_grader;
  r.step.template_version = tmpl.version_tag();

  if (answer.cited_article_ids.empty()) {
    r.value = grade_from(0.0, threshold,
                         "the answer cites no article; statements without a source reference are flagged as "
                         "unreliable",
                         {{"supported_claims_fraction", 0.0}});
    r.step.input_digest = text::sha256_hex(answer.text);
    r.step.outcome = "forced";
  } else {
    const std::string prompt =
        tmpl.render({{"answer", answer.text}, {"contexts", render_contexts(contexts)}});
    auto call = call_json(deterministic_, prompt, schemas::groundedness_grade());
    r.step.input_digest = call.digest;
    if (call.parsed.ok()) {
      double fraction = call.parsed.value["supported_claims_fraction"].get<double>();
      std::string why = call.parsed.value["explanation"].get<std::string>();
      if (fraction < 1.0 && !text::contains_icase(why, "flag")) {
        why += " Statements without a supporting source are flagged as unreliable.";
      }
      r.value = grade_from(fraction, threshold, std::move(why), {{"supported_claims_fraction", fraction}});
      r.step.outcome = call.reprompted ? "reprompted" : (r.value.pass ? "ok" : "fail");
    } else {
      r.degraded = true;
      r.value = grade_from(0.0, threshold, std::string(kUngradeable), {{"supported_claims_fraction", 0.0}});
      r.step.outcome = "degraded";
    }
  }
  r.step.output = grade_output(r.value, threshold);
  r.step.explanation = r.value.explanation;
  r.step.elapsed_ms = elapsed_ms(start);
  return r;
}

AgentResult<AgentGrade> AgentKit::grade_answer_relevance(const GeneratedAnswer& answer, std::string_view query,
                                                         double threshold) const {
  const auto start = Clock::now();
  const auto& tmpl = prompts_.get("answer_relevance_grader");
  const std::string prompt = tmpl.render({{"query", std::string(query)}, {"answer", answer.text}});
  auto call = call_json(deterministic_, prompt, schemas::answer_relevance_grade());
  AgentResult<AgentGrade> r;
  if (call.parsed.ok()) {
    double s = call.parsed.value["addresses_query"].get<double>();
    r.value = grade_from(s, threshold, call.parsed.value["explanation"].get<std::string>(), {{"addresses_query", s}});
    r.step.outcome = call.reprompted ? "reprompted" : (r.value.pass ? "ok" : "fail");
  } else {
    r.degraded = true;
    r.value = grade_from(0.0, threshold, std::string(kUngradeable), {{"addresses_query", 0.0}});
    r.step.outcome = "degraded";
  }
  r.step.agent = AgentKind::answer_relevance_grader;
  r.step.template_version = tmpl.version_tag();
  r.step.input_digest = call.digest;
  r.step.output = grade_output(r.value, threshold);
  r.step.explanation = r.value.explanation;
  r.step.elapsed_ms = elapsed_ms(start);
  return r;
}

AgentResult<std::string> AgentKit::disambiguate(std::string_view query,
                                                const std::optional<std::string>& failure_context) const {
  if (text::is_blank(query)) throw Error(ErrorCode::InvalidArgument, "query must be non-empty");
  const auto start = Clock::now();
  const auto& tmpl = prompts_.get("query_disambiguator");
  const std::string prompt = tmpl.render(
      {{"query", std::string(query)}, {"failure_context", failure_context ? *failure_context : std::string(kNone)}});

  std::string reply;
  try {
    reply = complete(*generative_.backend, {prompt, generative_.temperature}, generative_.retry);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyCompletion) throw;
  }
  // First non-blank line, without wrapping quotes.
  std::string rewrite;
  for (std::size_t pos = 0; pos <= reply.size();) {
    auto nl = reply.find('\n', pos);
    if (nl == std::string::npos) nl = reply.size();
    auto line = text::trim(std::string_view(reply).substr(pos, nl - pos));
    if (!line.empty()) {
      rewrite = text::normalize_whitespace(line);
      break;
    }
    pos = nl + 1;
  }
  while (rewrite.size() >= 2 && (rewrite.front() == '"' || rewrite.front() == '\'') && rewrite.back() == rewrite.front()) {
    rewrite = std::string(text::trim(std::string_view(rewrite).substr(1, rewrite.size() - 2)));
  }

  AgentResult<std::string> r;
  const std::string original(text::trim(query));
  const bool same = text::to_lower_ascii(rewrite) == text::to_lower_ascii(text::normalize_whitespace(original));
  if (rewrite.empty() || same) {
    r.value = original;
    r.step.outcome = "no_op";
    r.step.explanation = rewrite.empty() ? "empty rewrite; original query kept" : "rewrite identical to the input; original query kept";
  } else {
    r.value = rewrite;
    r.step.outcome = "ok";
    r.step.explanation = failure_context ? "query reformulated after: " + *failure_context : "query reformulated";
  }
  r.step.agent = AgentKind::query_disambiguator;
  r.step.template_version = tmpl.version_tag();
  r.step.input_digest = prompt_digest(prompt);
  r.step.output = {{"query", r.value}, {"no_op", r.step.outcome == "no_op"}};
  r.step.elapsed_ms = elapsed_ms(start);
  return r;
}

AgentResult<BinaryDecision> AgentKit::binary_qa(std::string_view question, const GeneratedAnswer& answer) const {
  if (text::is_blank(answer.text)) throw Error(ErrorCode::InvalidArgument, "answer must be non-empty");
  const auto start = Clock::now();
  const auto& tmpl = prompts_.get("binary_qa");
  const std::string prompt = tmpl.render({{"query", std::string(question)}, {"answer", answer.text}});
  auto call = call_json(deterministic_, prompt, schemas::binary_decision());
  AgentResult<BinaryDecision> r;
  if (call.parsed.ok()) {
    r.value.label = static_cast<int>(call.parsed.value["label"].get<double>());
    r.value.explanation = call.parsed.value["explanation"].get<std::string>();
    r.step.outcome = call.reprompted ? "reprompted" : "ok";
  } else {
    r.degraded = true;
    r.value = {0, "unparseable verdict"};
    r.step.outcome = "degraded";
  }
  r.step.agent = AgentKind::binary_qa;
  r.step.template_version = tmpl.version_tag();
  r.step.input_digest = call.digest;
  r.step.output = r.value;
  r.step.explanation = r.value.explanation;
  r.step.elapsed_ms = elapsed_ms(start);
  return r;
}

}  // namespace n2i
