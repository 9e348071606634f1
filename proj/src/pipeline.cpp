#include "n2i/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include <fmt/format.h>

#include "n2i/text.hpp"

namespace n2i {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void check_unit(double v, std::string_view name) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidArgument, fmt::format("{} must lie in [0, 1]", name));
}

std::string describe_hits(const std::vector<RetrievalHit>& hits, std::size_t limit) {
  std::vector<std::string> parts;
  for (std::size_t i = 0; i < hits.size() && i < limit; ++i) {
    parts.push_back(fmt::format("{} (d={:.3f})", hits[i].article_id, hits[i].distance));
  }
  return parts.empty() ? std::string("none") : text::join(parts, ", ");
}

nlohmann::json hits_json(const std::vector<RetrievalHit>& hits) {
  auto arr = nlohmann::json::array();
  for (const auto& h : hits) arr.push_back({{"article_id", h.article_id}, {"distance", h.distance}, {"rank", h.rank}});
  return arr;
}

// One run's mutable state; never shared between runs.
class Run {
 public:
  Run(std::string_view question, const MetadataFilter& scope, const PipelineHandles& h, const PipelineConfig& c)
      : h_(h), c_(c) {
    trace_.run_id = new_run_id();
    trace_.started_at = text::utc_timestamp();
    trace_.question = std::string(text::trim(question));
    trace_.queries.push_back(trace_.question);
    trace_.scope = scope;
    trace_.config = c;
    trace_.backends["embedding"] = h.embedder ? h.embedder->describe() : std::string("none");
    if (h.agents) trace_.backends.update(h.agents->describe_backends());
  }

  PipelineResult execute() {
    try {
      if (c_.mode == PipelineMode::retrieval_only_baseline) return baseline();
      return agentic();
    } catch (const PipelineError&) {
      throw;
    } catch (const Error& e) {
      trace_.error = e.what();
      throw PipelineError(e.code(), e.message(), trace_);
    }
  }

 private:
  PipelineResult finish(BinaryDecision decision, std::vector<std::string> cited, ExitPath path) {
    if (degraded_ && decision.label == 1) {
      decision = {0, fmt::format("conservative 0: a fallback fired ({}); the verdict would have been 1: {}",
                                 text::join(fallbacks_, ", "), decision.explanation)};
      path = ExitPath::degraded_override;
    }
    if (decision.label == 0 && path != ExitPath::decided && path != ExitPath::baseline_rule) cited.clear();
    trace_.decision = decision;
    trace_.cited_article_ids = cited;
    trace_.exit_path = path;
    trace_.degraded = degraded_;
    trace_.loop_counter = loops_;
    PipelineResult r;
    r.decision = std::move(decision);
    r.cited_article_ids = std::move(cited);
    r.degraded = degraded_;
    r.exit_path = path;
    r.trace = trace_;
    return r;
  }

  template <typename T>
  T record(AgentResult<T> r) {
    if (r.degraded) {
      degraded_ = true;
      fallbacks_.emplace_back(to_string(r.step.agent));
    }
    trace_.steps.push_back(std::move(r.step));
    return std::move(r.value);
  }

  std::vector<RetrievalHit> retrieve(const std::string& query, const MetadataFilter& filter) {
    const auto start = Clock::now();
    if (!h_.embedder) throw Error(ErrorCode::InvalidArgument, "no embedding backend configured");
    auto hits = h_.index->knn(embed(query, *h_.embedder), c_.top_k, filter, c_.search_mode);
    StepRecord s;
    s.agent = AgentKind::context_retriever;
    s.template_version = fmt::format("knn-{}", to_string(c_.search_mode));
    s.input_digest = text::sha256_hex(query);
    s.output = {{"query", query}, {"filter", filter}, {"top_k", c_.top_k}, {"hits", hits_json(hits)}};
    s.explanation = fmt::format("{} article(s) retrieved for \"{}\"; nearest: {}", hits.size(), query,
                                describe_hits(hits, 3));
    s.outcome = hits.empty() ? "fail" : "ok";
    s.elapsed_ms = elapsed_ms(start);
    trace_.steps.push_back(std::move(s));
    return hits;
  }

  PipelineResult baseline() {
    auto hits = retrieve(trace_.question, trace_.scope);
    if (hits.empty()) {
      return finish({0, "no article retrieved within the requested scope"}, {}, ExitPath::baseline_rule);
    }
    const auto& best = hits.front();
    const bool positive = best.distance <= c_.baseline_distance_threshold;
    std::vector<std::string> cited;
    for (const auto& hit : hits) {
      if (hit.distance <= c_.baseline_distance_threshold) cited.push_back(hit.article_id);
    }
    auto why = fmt::format("nearest distance {:.3f} {} threshold {:.3f}; top hits: {}", best.distance,
                           positive ? "<=" : ">", c_.baseline_distance_threshold, describe_hits(hits, 3));
    return finish({positive ? 1 : 0, why}, cited, ExitPath::baseline_rule);
  }

  std::vector<GradedContext> grade(const std::vector<RetrievalHit>& hits) {
    const auto start = Clock::now();
    std::vector<GradedContext> graded;
    StepRecord s;
    s.agent = AgentKind::context_grader;
    auto grades = nlohmann::json::array();
    std::vector<std::string> digests;
    std::vector<std::string> passing;
    bool any_degraded = false;
    for (const auto& hit : hits) {
      const Article* article = h_.corpus->find(hit.article_id);
      if (!article) continue;  // index entry without corpus article
      auto r = h_.agents->grade_context(trace_.question, *article, c_.thresholds.context);
      s.template_version = r.step.template_version;
      digests.push_back(r.step.input_digest);
      auto g = r.step.output;
      g["outcome"] = r.step.outcome;
      grades.push_back(std::move(g));
      if (r.degraded) any_degraded = true;
      if (r.value.pass) passing.push_back(article->article_id);
      graded.push_back({*article, std::move(r.value)});
    }
    s.input_digest = text::sha256_hex(text::join(digests, "\n"));
    s.output = {{"grades", grades}, {"passing", passing}, {"threshold", c_.thresholds.context}};
    s.explanation = fmt::format("{} of {} retrieved article(s) passed context grading (threshold {:.2f}){}",
                                passing.size(), graded.size(), c_.thresholds.context,
                                passing.empty() ? std::string() : ": " + text::join(passing, ", "));
    s.outcome = any_degraded ? "degraded" : (passing.empty() ? "fail" : "ok");
    s.elapsed_ms = elapsed_ms(start);
    if (any_degraded) {
      degraded_ = true;
      fallbacks_.emplace_back("context_grader");
    }
    trace_.steps.push_back(std::move(s));
    std::erase_if(graded, [](const GradedContext& g) { return !g.grade.pass; });
    return graded;
  }

  // Returns false once the loop budget is spent.
  bool loop_back(std::string& query, const std::string& failure) {
    if (loops_ >= c_.max_loop_iterations) return false;
    ++loops_;
    query = record(h_.agents->disambiguate(query, failure));
    trace_.queries.push_back(query);
    return true;
  }

  PipelineResult agentic() {
    if (!h_.agents) throw Error(ErrorCode::InvalidArgument, "agentic modes need an agent kit");
    if (!h_.corpus) throw Error(ErrorCode::IndexMissing, "no corpus loaded");
    const AgentKit& agents = *h_.agents;
    const bool validate = c_.mode == PipelineMode::full;

    const auto metadata = record(agents.metadata_retrieve(trace_.question));
    const MetadataFilter filter = merge_scope(trace_.scope, metadata);
    std::string query = trace_.question;

    while (true) {
      const auto hits = retrieve(query, filter);
      std::vector<GradedContext> passing;
      if (!hits.empty()) passing = grade(hits);
      if (passing.empty()) {
        if (!loop_back(query, "no retrieved article passed context grading")) {
          return finish({0, std::string(kNoSupportingProvision)}, {}, ExitPath::no_evidence);
        }
        continue;
      }

      GeneratedAnswer answer;
      try {
        answer = record(agents.generate(trace_.question, passing));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyCompletion) throw;
        return generation_failed(e);
      }

      if (validate) {
        auto grounded = record(agents.grade_groundedness(answer, passing, c_.thresholds.groundedness));
        if (!grounded.pass) {
          try {
            answer = record(agents.generate(trace_.question, passing, grounded.explanation));
          } catch (const Error& e) {
            if (e.code() != ErrorCode::EmptyCompletion) throw;
            return generation_failed(e);
          }
          grounded = record(agents.grade_groundedness(answer, passing, c_.thresholds.groundedness));
          if (!grounded.pass) {
            if (!loop_back(query, "answer not grounded: " + grounded.explanation)) return exhausted();
            continue;
          }
        }
        auto relevant =
            record(agents.grade_answer_relevance(answer, trace_.question, c_.thresholds.answer_relevance));
        if (!relevant.pass) {
          if (!loop_back(query, "answer does not address the question: " + relevant.explanation)) return exhausted();
          continue;
        }
      }

      auto verdict = agents.binary_qa(trace_.question, answer);
      const bool unparseable = verdict.degraded;
      auto decision = record(std::move(verdict));
      return finish(std::move(decision), answer.cited_article_ids,
                    unparseable ? ExitPath::unparseable_verdict : ExitPath::decided);
    }
  }

  PipelineResult exhausted() {
    degraded_ = true;
    fallbacks_.emplace_back("loop budget");
    return finish({0, std::string(kBudgetExhausted)}, {}, ExitPath::budget_exhausted);
  }

  PipelineResult generation_failed(const Error& e) {
    StepRecord s;
    s.agent = AgentKind::generator;
    s.template_version = h_.agents->prompts().get("generator").version_tag();
    s.output = {{"error", e.what()}};
    s.explanation = "the generator returned an empty completion after one reprompt";
    s.outcome = "degraded";
    trace_.steps.push_back(std::move(s));
    degraded_ = true;
    fallbacks_.emplace_back("generator");
    return finish({0, "no answer could be generated"}, {}, ExitPath::generation_failed);
  }

  const PipelineHandles& h_;
  const PipelineConfig& c_;
  PipelineTrace trace_;
  int loops_ = 0;
  bool degraded_ = false;
  std::vector<std::string> fallbacks_;
};

}  // namespace

std::string_view to_string(PipelineMode mode) noexcept {
  switch (mode) {
    case PipelineMode::full: return "full";
    case PipelineMode::without_hallucination_control: return "without_hallucination_control";
    case PipelineMode::retrieval_only_baseline: return "retrieval_only_baseline";
  }
  return "unknown";
}

std::optional<PipelineMode> parse_pipeline_mode(std::string_view name) {
  const auto n = text::to_lower_ascii(text::trim(name));
  if (n == "full") return PipelineMode::full;
  if (n == "without_hallucination_control" || n == "without_hall" || n == "without-hall") {
    return PipelineMode::without_hallucination_control;
  }
  if (n == "retrieval_only_baseline" || n == "retrieval_only" || n == "baseline") {
    return PipelineMode::retrieval_only_baseline;
  }
  return std::nullopt;
}

std::string_view display_name(PipelineMode mode) noexcept {
  switch (mode) {
    case PipelineMode::full: return "Full";
    case PipelineMode::without_hallucination_control: return "Without-Hall";
    case PipelineMode::retrieval_only_baseline: return "Baseline";
  }
  return "unknown";
}

std::vector<AgentKind> enabled_agents(PipelineMode mode) {
  std::vector<AgentKind> out;
  for (auto k : kAllAgents) {
    if (agent_enabled(mode, k)) out.push_back(k);
  }
  return out;
}

bool agent_enabled(PipelineMode mode, AgentKind agent) {
  switch (mode) {
    case PipelineMode::full: return true;
    case PipelineMode::without_hallucination_control:
      return agent != AgentKind::groundedness_grader && agent != AgentKind::answer_relevance_grader;
    case PipelineMode::retrieval_only_baseline: return agent == AgentKind::context_retriever;
  }
  return false;
}

void PipelineConfig::validate() const {
  if (top_k == 0) throw Error(ErrorCode::InvalidArgument, "top_k must be at least 1");
  if (max_loop_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_loop_iterations must be at least 1");
  check_unit(thresholds.context, "context threshold");
  check_unit(thresholds.groundedness, "groundedness threshold");
  check_unit(thresholds.answer_relevance, "answer relevance threshold");
  if (!(baseline_distance_threshold >= 0.0 && baseline_distance_threshold <= 2.0)) {
    throw Error(ErrorCode::InvalidArgument, "baseline_distance_threshold must lie in [0, 2]");
  }
}

std::string_view to_string(ExitPath path) noexcept {
  switch (path) {
    case ExitPath::decided: return "decided";
    case ExitPath::no_evidence: return "no_evidence";
    case ExitPath::budget_exhausted: return "budget_exhausted";
    case ExitPath::unparseable_verdict: return "unparseable_verdict";
    case ExitPath::generation_failed: return "generation_failed";
    case ExitPath::degraded_override: return "degraded_override";
    case ExitPath::baseline_rule: return "baseline_rule";
  }
  return "unknown";
}

std::optional<ExitPath> parse_exit_path(std::string_view name) {
  for (auto p : {ExitPath::decided, ExitPath::no_evidence, ExitPath::budget_exhausted, ExitPath::unparseable_verdict,
                 ExitPath::generation_failed, ExitPath::degraded_override, ExitPath::baseline_rule}) {
    if (to_string(p) == name) return p;
  }
  return std::nullopt;
}

MetadataFilter merge_scope(const MetadataFilter& scope, const QueryMetadata& extracted) {
  MetadataFilter merged = scope;
  if (!merged.country && extracted.country) merged.country = extracted.country;
  if (!merged.ban_topic && extracted.ban_topic) merged.ban_topic = normalize_topic(*extracted.ban_topic);
  if (merged.text_types.empty() && extracted.text_type) merged.text_types.push_back(*extracted.text_type);
  if (!merged.published_from && extracted.date_from) merged.published_from = extracted.date_from;
  if (!merged.published_to && extracted.date_to) merged.published_to = extracted.date_to;
  return merged;
}

std::string normalize_topic(std::string_view topic) {
  std::string out = text::to_lower_ascii(text::trim(topic));
  for (char& c : out) {
    if (c == ' ' || c == '-') c = '_';
  }
  return out;
}

std::string new_run_id() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
  return fmt::format("run-{:x}-{:016x}", ms, rng());
}

PipelineResult run_pipeline(std::string_view question, const MetadataFilter& scope, const PipelineHandles& handles,
                            const PipelineConfig& config) {
  if (text::is_blank(question)) throw Error(ErrorCode::InvalidArgument, "question must be non-empty");
  config.validate();
  if (!handles.index) throw Error(ErrorCode::IndexMissing, "no vector index loaded");
  Run run(question, scope, handles, config);
  return run.execute();
}

void to_json(nlohmann::json& j, const Thresholds& t) {
  j = nlohmann::json{{"context", t.context}, {"groundedness", t.groundedness}, {"answer_relevance", t.answer_relevance}};
}

void from_json(const nlohmann::json& j, Thresholds& t) {
  t.context = j.value("context", t.context);
  t.groundedness = j.value("groundedness", t.groundedness);
  t.answer_relevance = j.value("answer_relevance", t.answer_relevance);
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = nlohmann::json{{"mode", to_string(c.mode)},
                     {"top_k", c.top_k},
                     {"max_loop_iterations", c.max_loop_iterations},
                     {"thresholds", c.thresholds},
                     {"baseline_distance_threshold", c.baseline_distance_threshold},
                     {"search_mode", to_string(c.search_mode)}};
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  if (j.contains("mode")) {
    auto m = parse_pipeline_mode(j.at("mode").get<std::string>());
    if (!m) throw Error(ErrorCode::InvalidArgument, "unknown pipeline mode '" + j.at("mode").get<std::string>() + "'");
    c.mode = *m;
  }
  c.top_k = j.value("top_k", c.top_k);
  c.max_loop_iterations = j.value("max_loop_iterations", c.max_loop_iterations);
  if (j.contains("thresholds")) c.thresholds = j.at("thresholds").get<Thresholds>();
  c.baseline_distance_threshold = j.value("baseline_distance_threshold", c.baseline_distance_threshold);
  if (j.contains("search_mode")) {
    auto m = parse_search_mode(j.at("search_mode").get<std::string>());
    if (!m) throw Error(ErrorCode::InvalidArgument, "unknown search mode");
    c.search_mode = *m;
  }
}

}  // namespace n2i
