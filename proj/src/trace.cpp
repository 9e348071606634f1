#include "n2i/trace.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "n2i/error.hpp"

namespace n2i {

namespace fs = std::filesystem;

nlohmann::json trace_to_json(const PipelineTrace& t) {
  nlohmann::json j{{"schema", kTraceSchema},
                   {"run_id", t.run_id},
                   {"started_at", t.started_at},
                   {"question", t.question},
                   {"queries", t.queries},
                   {"scope", t.scope},
                   {"config", t.config},
                   {"backends", t.backends},
                   {"steps", t.steps},
                   {"cited_article_ids", t.cited_article_ids},
                   {"loop_counter", t.loop_counter},
                   {"degraded", t.degraded}};
  j["decision"] = t.decision ? nlohmann::json(*t.decision) : nlohmann::json();
  j["exit_path"] = t.exit_path ? nlohmann::json(to_string(*t.exit_path)) : nlohmann::json();
  if (t.error) j["error"] = *t.error;
  return j;
}

PipelineTrace trace_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::MalformedTrace, "trace is not a JSON object");
  if (j.value("schema", std::string{}) != kTraceSchema) {
    throw Error(ErrorCode::MalformedTrace, fmt::format("unsupported trace schema (expected {})", kTraceSchema));
  }
  PipelineTrace t;
  try {
    t.run_id = j.at("run_id").get<std::string>();
    t.started_at = j.value("started_at", std::string{});
    t.question = j.at("question").get<std::string>();
    t.queries = j.at("queries").get<std::vector<std::string>>();
    t.scope = j.at("scope").get<MetadataFilter>();
    t.config = j.at("config").get<PipelineConfig>();
    t.backends = j.value("backends", nlohmann::json::object());
    t.steps = j.at("steps").get<std::vector<StepRecord>>();
    t.cited_article_ids = j.at("cited_article_ids").get<std::vector<std::string>>();
    t.loop_counter = j.at("loop_counter").get<int>();
    t.degraded = j.at("degraded").get<bool>();
    if (!j.at("decision").is_null()) t.decision = j.at("decision").get<BinaryDecision>();
    if (!j.at("exit_path").is_null()) {
      t.exit_path = parse_exit_path(j.at("exit_path").get<std::string>());
      if (!t.exit_path) throw Error(ErrorCode::MalformedTrace, "unknown exit_path");
    }
    if (j.contains("error")) t.error = j.at("error").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedTrace, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedTrace) throw;
    throw Error(ErrorCode::MalformedTrace, e.message());
  }
  return t;
}

fs::path write_trace(const PipelineTrace& trace, const fs::path& dir) {
  fs::create_directories(dir);
  const fs::path path = dir / (trace.run_id + ".json");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write trace '{}'", path.string()));
  out << trace_to_json(trace).dump(2) << '\n';
  if (!out.flush()) throw Error(ErrorCode::Io, fmt::format("write failed for '{}'", path.string()));
  return path;
}

PipelineTrace read_trace(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, fmt::format("cannot open trace '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  auto j = nlohmann::json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::MalformedTrace, fmt::format("'{}' is not JSON", path.string()));
  return trace_from_json(j);
}

nlohmann::json comparable_trace_json(const PipelineTrace& trace) {
  auto j = trace_to_json(trace);
  j.erase("run_id");
  j.erase("started_at");
  for (auto& step : j["steps"]) step.erase("elapsed_ms");
  return j;
}

}  // namespace n2i
