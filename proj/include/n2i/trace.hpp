#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "n2i/pipeline.hpp"

namespace n2i {

nlohmann::json trace_to_json(const PipelineTrace& trace);
/// Throws MalformedTrace on a missing field, wrong type or unknown schema.
PipelineTrace trace_from_json(const nlohmann::json& j);

/// Writes `<dir>/<run_id>.json` and returns the path.
std::filesystem::path write_trace(const PipelineTrace& trace, const std::filesystem::path& dir);
PipelineTrace read_trace(const std::filesystem::path& path);

/// The trace JSON without run_id, started_at and per-step elapsed_ms, for
/// comparing two runs.
nlohmann::json comparable_trace_json(const PipelineTrace& trace);

/// Validation report for a recorded trace.
struct AuditReport {
  std::vector<std::string> violations;
  [[nodiscard]] bool ok() const noexcept { return violations.empty(); }
};

/// Checks step ordering against the transition rules of the recorded mode,
/// agent enablement, loop accounting, explanations and the citation subset
/// rule. With a corpus, cited ids must also exist in it.
AuditReport resume_check(const PipelineTrace& trace, const Corpus* corpus = nullptr);

}  // namespace n2i
