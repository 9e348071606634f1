#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "n2i/corpus.hpp"
#include "n2i/llm.hpp"
#include "n2i/prompts.hpp"
#include "n2i/structured.hpp"

namespace n2i {

enum class AgentKind {
  metadata_retriever,
  context_retriever,
  context_grader,
  generator,
  groundedness_grader,
  answer_relevance_grader,
  query_disambiguator,
  binary_qa,
};

inline constexpr std::array<AgentKind, 8> kAllAgents{
    AgentKind::metadata_retriever,  AgentKind::context_retriever,       AgentKind::context_grader,
    AgentKind::generator,           AgentKind::groundedness_grader,     AgentKind::answer_relevance_grader,
    AgentKind::query_disambiguator, AgentKind::binary_qa,
};

std::string_view to_string(AgentKind kind) noexcept;
std::optional<AgentKind> parse_agent_kind(std::string_view name);
/// Every agent except the vector-search context retriever calls an LLM.
constexpr bool is_llm_agent(AgentKind kind) noexcept { return kind != AgentKind::context_retriever; }

inline constexpr double kDefaultContextThreshold = 0.5;
inline constexpr double kDefaultGroundednessThreshold = 0.8;
inline constexpr double kDefaultAnswerRelevanceThreshold = 0.5;

struct QueryMetadata {
  std::optional<std::string> country;
  std::optional<std::string> ban_topic;
  std::optional<TextType> text_type;
  std::optional<Date> date_from;
  std::optional<Date> date_to;
  std::vector<std::string> thematic_keywords;

  [[nodiscard]] bool empty() const;
  [[nodiscard]] MetadataFilter to_filter() const;
  bool operator==(const QueryMetadata&) const = default;
};

/// Score in [0, 1] with a mandatory explanation; pass <=> score >= threshold.
struct AgentGrade {
  double score = 0.0;
  bool pass = false;
  std::string explanation;
  std::map<std::string, double> criteria;
};

struct GeneratedAnswer {
  std::string text;
  std::vector<std::string> cited_article_ids;
};

struct BinaryDecision {
  int label = 0;
  std::string explanation;

  bool operator==(const BinaryDecision&) const = default;
};

struct GradedContext {
  Article article;
  AgentGrade grade;
};

/// One agent invocation as it appears in a pipeline trace.
struct StepRecord {
  AgentKind agent = AgentKind::metadata_retriever;
  std::string template_version;
  std::string input_digest;
  nlohmann::json output;
  std::string explanation;
  double elapsed_ms = 0.0;
  std::string outcome;  // ok | fail | reprompted | degraded | forced | no_op | citations_stripped
};

template <typename T>
struct AgentResult {
  T value;
  StepRecord step;
  bool degraded = false;  // a fallback replaced the model's output
};

struct AgentBinding {
  std::shared_ptr<const ChatBackend> backend;
  double temperature = 0.0;
  RetryPolicy retry;
};

/// The LLM-backed agents. Deterministic tasks use `deterministic`; query
/// rewriting and regeneration use `generative`.
class AgentKit {
 public:
  AgentKit(PromptLibrary prompts, AgentBinding deterministic, AgentBinding generative);

  [[nodiscard]] AgentResult<QueryMetadata> metadata_retrieve(std::string_view query) const;

  [[nodiscard]] AgentResult<AgentGrade> grade_context(std::string_view query, const Article& article,
                                                      double threshold = kDefaultContextThreshold) const;

  /// Throws NoPassingContext when no context passed grading. `feedback`
  /// (a failed groundedness explanation) switches to the generative binding.
  [[nodiscard]] AgentResult<GeneratedAnswer> generate(std::string_view query, std::span<const GradedContext> contexts,
                                                      const std::optional<std::string>& feedback = {}) const;

  [[nodiscard]] AgentResult<AgentGrade> grade_groundedness(const GeneratedAnswer& answer,
                                                           std::span<const GradedContext> contexts,
                                                           double threshold = kDefaultGroundednessThreshold) const;

  [[nodiscard]] AgentResult<AgentGrade> grade_answer_relevance(
      const GeneratedAnswer& answer, std::string_view query,
      double threshold = kDefaultAnswerRelevanceThreshold) const;

  /// Returns the rewritten query, or the original with outcome "no_op".
  [[nodiscard]] AgentResult<std::string> disambiguate(std::string_view query,
                                                      const std::optional<std::string>& failure_context = {}) const;

  [[nodiscard]] AgentResult<BinaryDecision> binary_qa(std::string_view question, const GeneratedAnswer& answer) const;

  [[nodiscard]] const PromptLibrary& prompts() const noexcept { return prompts_; }
  /// {"deterministic": ..., "generative": ...} backend descriptions with temperatures.
  [[nodiscard]] nlohmann::json describe_backends() const;

 private:
  struct JsonCall {
    ParseResult parsed;
    std::string digest;
    bool reprompted = false;
    std::vector<std::string> raw_replies;
  };
  // `refine` may downgrade an ok parse with checks the schema cannot express.
  JsonCall call_json(const AgentBinding& binding, const std::string& prompt, const SchemaDescriptor& schema,
                     const std::function<void(ParseResult&)>& refine = {}) const;

  PromptLibrary prompts_;
  AgentBinding deterministic_;
  AgentBinding generative_;
};

/// Schemas of the structured replies.
namespace schemas {
const SchemaDescriptor& query_metadata();
const SchemaDescriptor& context_grade();
const SchemaDescriptor& generated_answer();
const SchemaDescriptor& groundedness_grade();
const SchemaDescriptor& answer_relevance_grade();
const SchemaDescriptor& binary_decision();
}  // namespace schemas

/// Appended to a prompt whose reply could not be parsed.
std::string reprompt_text(std::string_view prompt, std::string_view reason);

/// Contexts as they are shown to the generator and groundedness grader.
std::string render_contexts(std::span<const GradedContext> contexts);

void to_json(nlohmann::json& j, const QueryMetadata& m);
void to_json(nlohmann::json& j, const AgentGrade& g);
void to_json(nlohmann::json& j, const GeneratedAnswer& a);
void to_json(nlohmann::json& j, const BinaryDecision& d);
void from_json(const nlohmann::json& j, BinaryDecision& d);
void to_json(nlohmann::json& j, const StepRecord& s);
void from_json(const nlohmann::json& j, StepRecord& s);

}  // namespace n2i
