#include <algorithm>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "n2i/text.hpp"
#include "n2i/trace.hpp"

namespace n2i {

namespace {

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  std::vector<std::string> out;
  if (!j.is_object() || !j.contains(key) || !j[key].is_array()) return out;
  for (const auto& v : j[key]) {
    if (v.is_string()) out.push_back(v.get<std::string>());
  }
  return out;
}

std::set<std::string> hit_ids(const StepRecord& retrieval) {
  std::set<std::string> ids;
  if (retrieval.output.is_object() && retrieval.output.contains("hits")) {
    for (const auto& h : retrieval.output["hits"]) {
      if (h.is_object() && h.contains("article_id")) ids.insert(h["article_id"].get<std::string>());
    }
  }
  return ids;
}

bool passed(const StepRecord& s) {
  return s.output.is_object() && s.output.contains("pass") && s.output["pass"].is_boolean() &&
         s.output["pass"].get<bool>();
}

bool regeneration(const StepRecord& s) {
  return s.output.is_object() && s.output.value("regeneration", false);
}

bool is_degraded_exit(ExitPath p) {
  return p == ExitPath::budget_exhausted || p == ExitPath::unparseable_verdict ||
         p == ExitPath::generation_failed || p == ExitPath::degraded_override;
}

class Auditor {
 public:
  Auditor(const PipelineTrace& t, const Corpus* corpus) : t_(t), corpus_(corpus) {}

  AuditReport run() {
    check_steps();
    check_transitions();
    if (!t_.error) check_exit();
    check_citations();
    return std::move(report_);
  }

 private:
  template <typename... Args>
  void flag(fmt::format_string<Args...> f, Args&&... args) {
    report_.violations.push_back(fmt::format(f, std::forward<Args>(args)...));
  }

  void check_steps() {
    for (std::size_t i = 0; i < t_.steps.size(); ++i) {
      const auto& s = t_.steps[i];
      if (!agent_enabled(t_.config.mode, s.agent)) {
        flag("disabled agent executed: {} at step {} under mode {}", to_string(s.agent), i + 1,
             to_string(t_.config.mode));
      }
      if (text::is_blank(s.explanation)) flag("step {} ({}) has no explanation", i + 1, to_string(s.agent));
      if (s.outcome.empty()) flag("step {} ({}) has no outcome flag", i + 1, to_string(s.agent));
      if (s.agent == AgentKind::query_disambiguator) ++disambiguations_;
    }
    if (t_.loop_counter != disambiguations_) {
      flag("loop counter {} does not match {} disambiguation step(s)", t_.loop_counter, disambiguations_);
    }
    if (disambiguations_ > t_.config.max_loop_iterations) {
      flag("{} disambiguation cycles exceed the budget of {}", disambiguations_, t_.config.max_loop_iterations);
    }
    if (t_.queries.empty() || t_.queries.front() != t_.question) {
      flag("query history does not start with the original question");
    } else if (static_cast<int>(t_.queries.size()) != 1 + disambiguations_) {
      flag("query history holds {} rewrite(s) for {} disambiguation step(s)", t_.queries.size() - 1,
           disambiguations_);
    }
  }

  // Allowed successors of each step, refined by the step's own outcome.
  std::vector<AgentKind> successors(const StepRecord& s, const StepRecord* last_generator) const {
    using A = AgentKind;
    const bool full = t_.config.mode == PipelineMode::full;
    switch (s.agent) {
      case A::metadata_retriever: return {A::context_retriever};
      case A::context_retriever:
        if (hit_ids(s).empty()) return {A::query_disambiguator};
        return {A::context_grader};
      case A::context_grader:
        if (string_list(s.output, "passing").empty()) return {A::query_disambiguator};
        return {A::generator};
      case A::generator: return {full ? A::groundedness_grader : A::binary_qa};
      case A::groundedness_grader:
        if (passed(s)) return {A::answer_relevance_grader};
        if (last_generator && !regeneration(*last_generator)) return {A::generator};
        return {A::query_disambiguator};
      case A::answer_relevance_grader:
        if (passed(s)) return {A::binary_qa};
        return {A::query_disambiguator};
      case A::query_disambiguator: return {A::context_retriever};
      case A::binary_qa: return {};
    }
    return {};
  }

  void check_transitions() {
    const auto& steps = t_.steps;
    if (steps.empty()) {
      flag("trace has no steps");
      return;
    }
    const AgentKind first = t_.config.mode == PipelineMode::retrieval_only_baseline ? AgentKind::context_retriever
                                                                                     : AgentKind::metadata_retriever;
    if (steps.front().agent != first) {
      flag("trace starts with {} instead of {}", to_string(steps.front().agent), to_string(first));
    }
    if (t_.config.mode == PipelineMode::retrieval_only_baseline) {
      if (steps.size() != 1) flag("retrieval-only trace holds {} steps instead of 1", steps.size());
      return;
    }
    const StepRecord* last_generator = nullptr;
    for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
      if (steps[i].agent == AgentKind::generator) last_generator = &steps[i];
      auto next = successors(steps[i], last_generator);
      if (std::find(next.begin(), next.end(), steps[i + 1].agent) == next.end()) {
        flag("step {} ({}) cannot follow step {} ({})", i + 2, to_string(steps[i + 1].agent), i + 1,
             to_string(steps[i].agent));
      }
    }
  }

  void check_exit() {
    if (!t_.decision || !t_.exit_path) {
      flag("trace has no final decision");
      return;
    }
    const auto& d = *t_.decision;
    const auto path = *t_.exit_path;
    if (d.label != 0 && d.label != 1) flag("decision label {} is not binary", d.label);
    if (text::is_blank(d.explanation)) flag("final decision has no explanation");
    if (is_degraded_exit(path) && d.label != 0) flag("degraded exit path {} produced label 1", to_string(path));
    if (is_degraded_exit(path) && !t_.degraded) flag("degraded exit path not flagged as degraded");

    const auto& last = t_.steps.empty() ? StepRecord{} : t_.steps.back();
    const bool baseline = t_.config.mode == PipelineMode::retrieval_only_baseline;
    auto expect_last = [&](std::initializer_list<AgentKind> kinds) {
      if (t_.steps.empty()) return;
      if (std::find(kinds.begin(), kinds.end(), last.agent) == kinds.end()) {
        flag("exit path {} cannot end on {}", to_string(path), to_string(last.agent));
      }
    };
    switch (path) {
      case ExitPath::baseline_rule:
        if (!baseline) flag("baseline rule used outside retrieval-only mode");
        break;
      case ExitPath::decided:
      case ExitPath::unparseable_verdict:
        expect_last({AgentKind::binary_qa});
        if (last.agent == AgentKind::binary_qa && last.output.is_object() && last.output.contains("label") &&
            last.output["label"] != d.label) {
          flag("final label {} differs from the binary_qa verdict", d.label);
        }
        break;
      case ExitPath::degraded_override:
        expect_last({AgentKind::binary_qa});
        if (!t_.degraded) flag("override exit without a recorded fallback");
        break;
      case ExitPath::no_evidence:
        expect_last({AgentKind::context_retriever, AgentKind::context_grader});
        if (disambiguations_ != t_.config.max_loop_iterations) {
          flag("no-evidence exit after {} of {} loop iterations", disambiguations_, t_.config.max_loop_iterations);
        }
        if (t_.steps.back().agent == AgentKind::context_grader && !string_list(last.output, "passing").empty()) {
          flag("no-evidence exit although context grading passed articles");
        }
        break;
      case ExitPath::budget_exhausted:
        expect_last({AgentKind::groundedness_grader, AgentKind::answer_relevance_grader});
        if (disambiguations_ != t_.config.max_loop_iterations) {
          flag("budget exhausted after {} of {} loop iterations", disambiguations_, t_.config.max_loop_iterations);
        }
        break;
      case ExitPath::generation_failed: expect_last({AgentKind::generator}); break;
    }
    if (baseline && path != ExitPath::baseline_rule) flag("retrieval-only trace exits through {}", to_string(path));
  }

  void check_citations() {
    std::set<std::string> retrieved;
    const StepRecord* last_generator = nullptr;
    for (const auto& s : t_.steps) {
      if (s.agent == AgentKind::context_retriever) retrieved = hit_ids(s);
      if (s.agent != AgentKind::generator) continue;
      last_generator = &s;
      const auto contexts = string_list(s.output, "context_ids");
      for (const auto& id : contexts) {
        if (!retrieved.count(id)) flag("generator context {} was not retrieved by the latest search", id);
      }
      for (const auto& id : string_list(s.output, "cited_article_ids")) {
        if (std::find(contexts.begin(), contexts.end(), id) == contexts.end()) {
          flag("dangling citation: {} cited by the generator but not among its contexts", id);
        }
      }
    }
    for (const auto& id : t_.cited_article_ids) {
      if (corpus_ && !corpus_->find(id)) flag("dangling citation: {} is not in the corpus", id);
      if (t_.config.mode == PipelineMode::retrieval_only_baseline) {
        if (!retrieved.count(id)) flag("dangling citation: {} was not retrieved", id);
        continue;
      }
      const auto cited = last_generator ? string_list(last_generator->output, "cited_article_ids")
                                        : std::vector<std::string>{};
      if (std::find(cited.begin(), cited.end(), id) == cited.end()) {
        flag("dangling citation: {} is not cited by the final answer", id);
      }
    }
  }

  const PipelineTrace& t_;
  const Corpus* corpus_;
  AuditReport report_;
  int disambiguations_ = 0;
};

}  // namespace

AuditReport resume_check(const PipelineTrace& trace, const Corpus* corpus) { return Auditor(trace, corpus).run(); }

}  // namespace n2i
