#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "n2i/agents.hpp"
#include "n2i/corpus.hpp"
#include "n2i/embedding.hpp"
#include "n2i/error.hpp"
#include "n2i/vector_index.hpp"

namespace n2i {

enum class PipelineMode { full, without_hallucination_control, retrieval_only_baseline };

std::string_view to_string(PipelineMode mode) noexcept;
/// Accepts the canonical names plus the short forms "without_hall",
/// "retrieval_only" and "baseline".
std::optional<PipelineMode> parse_pipeline_mode(std::string_view name);
/// Display name used in reports: Full, Without-Hall, Baseline.
std::string_view display_name(PipelineMode mode) noexcept;

std::vector<AgentKind> enabled_agents(PipelineMode mode);
bool agent_enabled(PipelineMode mode, AgentKind agent);

struct Thresholds {
  double context = kDefaultContextThreshold;
  double groundedness = kDefaultGroundednessThreshold;
  double answer_relevance = kDefaultAnswerRelevanceThreshold;

  bool operator==(const Thresholds&) const = default;
};

struct PipelineConfig {
  PipelineMode mode = PipelineMode::full;
  std::size_t top_k = 10;
  int max_loop_iterations = 3;
  Thresholds thresholds;
  double baseline_distance_threshold = 0.5;
  SearchMode search_mode = SearchMode::approximate;

  /// Throws InvalidArgument on top_k == 0, max_loop_iterations < 1 or a
  /// threshold outside [0, 1].
  void validate() const;
  bool operator==(const PipelineConfig&) const = default;
};

/// How a run reached its decision.
enum class ExitPath {
  decided,              // binary_qa produced the label
  no_evidence,          // no context passed grading within the loop budget
  budget_exhausted,     // validation kept failing until the budget ran out
  unparseable_verdict,  // binary_qa fallback
  generation_failed,    // generator returned nothing usable
  degraded_override,    // a fallback fired upstream of a positive verdict
  baseline_rule,        // retrieval-only distance rule
};

std::string_view to_string(ExitPath path) noexcept;
std::optional<ExitPath> parse_exit_path(std::string_view name);

inline constexpr std::string_view kTraceSchema = "n2i-trace/1";

struct PipelineTrace {
  std::string run_id;
  std::string started_at;
  std::string question;
  std::vector<std::string> queries;  // original first, then each rewrite
  MetadataFilter scope;              // as supplied by the caller
  PipelineConfig config;
  nlohmann::json backends = nlohmann::json::object();
  std::vector<StepRecord> steps;
  std::optional<BinaryDecision> decision;
  std::vector<std::string> cited_article_ids;
  int loop_counter = 0;
  std::optional<ExitPath> exit_path;
  bool degraded = false;
  std::optional<std::string> error;  // set on partial traces
};

struct PipelineResult {
  BinaryDecision decision;
  std::vector<std::string> cited_article_ids;
  PipelineTrace trace;
  bool degraded = false;
  ExitPath exit_path = ExitPath::decided;
};

/// Borrowed, read-only collaborators of a run. `agents` may be null in
/// retrieval-only mode.
struct PipelineHandles {
  const Corpus* corpus = nullptr;
  const VectorIndex* index = nullptr;
  const EmbeddingBackend* embedder = nullptr;
  const AgentKit* agents = nullptr;
};

/// Error raised out of a run; carries the trace recorded up to the failure.
class PipelineError : public Error {
 public:
  PipelineError(ErrorCode code, const std::string& message, PipelineTrace partial)
      : Error(code, message), trace_(std::move(partial)) {}
  [[nodiscard]] const PipelineTrace& trace() const noexcept { return trace_; }

 private:
  PipelineTrace trace_;
};

inline constexpr std::string_view kNoSupportingProvision = "no supporting provision found";
inline constexpr std::string_view kBudgetExhausted = "validation budget exhausted";

PipelineResult run_pipeline(std::string_view question, const MetadataFilter& scope, const PipelineHandles& handles,
                            const PipelineConfig& config);

/// Explicit scope wins; extracted metadata only fills unconstrained clauses.
MetadataFilter merge_scope(const MetadataFilter& scope, const QueryMetadata& extracted);

/// Lowercase with spaces and hyphens turned into underscores ("Plastic bags" -> "plastic_bags").
std::string normalize_topic(std::string_view topic);

std::string new_run_id();

void to_json(nlohmann::json& j, const Thresholds& t);
void from_json(const nlohmann::json& j, Thresholds& t);
void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

}  // namespace n2i
