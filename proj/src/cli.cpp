#include "n2i/cli.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "n2i/corpus.hpp"
#include "n2i/error.hpp"
#include "n2i/grid.hpp"
#include "n2i/report.hpp"
#include "n2i/text.hpp"
#include "n2i/trace.hpp"

#ifndef N2I_VERSION
#define N2I_VERSION "0.0.0"
#endif

namespace n2i {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::optional<fs::path> config;
  std::optional<fs::path> store;
  std::optional<fs::path> trace_dir;
  bool json = false;

  std::string input;
  std::string corpus;
  std::string metadata;
  std::string out_path;

  std::string question;
  std::string country;
  std::string ban;
  std::string mode;
  std::string scripted;
  std::string record;
  bool exact = false;
  std::size_t jobs = 1;

  std::vector<std::string> bans;
  std::vector<std::string> countries;
  std::vector<std::string> modes;
  std::string gold;
  bool per_country = false;

  std::string trace_file;
};

// Backends and stores of one invocation.
struct Session {
  AppConfig config;
  Corpus corpus;
  std::optional<VectorIndex> index;
  std::unique_ptr<EmbeddingBackend> embedder;
  std::shared_ptr<const ChatBackend> chat;
  std::shared_ptr<RecordingBackend> recorder;
  std::optional<AgentKit> agents;

  PipelineHandles handles() const {
    return {&corpus, index ? &*index : nullptr, embedder.get(), agents ? &*agents : nullptr};
  }
};

AppConfig configure(const Options& o, const EnvLookup& env) {
  auto config = load_config(o.config, env);
  if (o.store) config.store_dir = *o.store;
  if (o.trace_dir) config.trace_dir = *o.trace_dir;
  if (!o.corpus.empty()) config.corpus_name = o.corpus;
  if (o.exact) config.pipeline.search_mode = SearchMode::exact;
  return config;
}

Session open_session(const Options& o, const EnvLookup& env, bool need_agents) {
  Session s;
  s.config = configure(o, env);
  CorpusStore store(s.config.store_dir);
  if (!store.contains(s.config.corpus_name)) {
    throw Error(ErrorCode::IndexMissing,
                fmt::format("corpus '{}' not found in {}; run `n2i ingest` first", s.config.corpus_name,
                            s.config.store_dir.string()));
  }
  s.corpus = store.read(s.config.corpus_name);
  const auto index_path = s.config.resolved_index_path();
  if (!fs::exists(index_path)) {
    throw Error(ErrorCode::IndexMissing,
                fmt::format("no index at {}; run `n2i index` first", index_path.string()));
  }
  s.index = VectorIndex::load(index_path);
  s.embedder = make_embedder(s.config);
  if (s.index->dimension() != s.embedder->dimension()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("index dimension {} differs from embedder dimension {}", s.index->dimension(),
                            s.embedder->dimension()));
  }
  if (need_agents) {
    if (!o.scripted.empty()) {
      s.chat = std::make_shared<ScriptedBackend>(ScriptedBackend::from_file(o.scripted));
      s.config.retry.max_retries = 0;
    } else {
      s.chat = make_chat_backend(s.config);
    }
    if (!o.record.empty()) {
      s.recorder = std::make_shared<RecordingBackend>(s.chat);
      s.chat = s.recorder;
    }
    s.agents.emplace(make_agent_kit(s.config, s.chat));
  }
  return s;
}

void save_recording(const Session& s, const Options& o) {
  if (s.recorder) s.recorder->save(o.record);
}

PipelineMode mode_or_default(const Options& o, const AppConfig& config) {
  if (o.mode.empty()) return config.pipeline.mode;
  auto m = parse_pipeline_mode(o.mode);
  if (!m) throw CLI::ValidationError("--mode", "unknown mode '" + o.mode + "'");
  return *m;
}

int cmd_ingest(const Options& o, const EnvLookup& env, std::ostream& out) {
  auto config = configure(o, env);
  std::optional<fs::path> sidecar;
  if (!o.metadata.empty()) sidecar = fs::path(o.metadata);
  auto sources = load_source_directory(o.input, sidecar);
  auto corpus = ingest(sources, config.corpus_name);
  CorpusStore(config.store_dir).write(corpus);

  std::map<std::string, std::size_t> per_source;
  for (const auto& s : sources) per_source[s.metadata.source_id] = 0;
  for (const auto& a : corpus.articles) ++per_source[a.metadata.source_id];
  if (o.json) {
    nlohmann::json j{{"corpus", corpus.name},
                     {"articles", corpus.articles.size()},
                     {"sources", sources.size()},
                     {"path", CorpusStore(config.store_dir).path_for(corpus.name).string()}};
    j["per_source"] = per_source;
    out << j.dump() << "\n";
  } else {
    for (const auto& [id, n] : per_source) out << fmt::format("{}: {} articles\n", id, n);
    out << fmt::format("{} articles in {} sources\n", corpus.articles.size(), sources.size());
  }
  return kExitOk;
}

int cmd_index(const Options& o, const EnvLookup& env, std::ostream& out) {
  auto config = configure(o, env);
  CorpusStore store(config.store_dir);
  auto corpus = store.read(config.corpus_name);
  auto embedder = make_embedder(config);
  auto index = build_index(corpus, *embedder, config.hnsw);
  const fs::path path = o.out_path.empty() ? config.resolved_index_path() : fs::path(o.out_path);
  index.save(path);
  if (o.json) {
    out << nlohmann::json{{"entries", index.size()}, {"dimension", index.dimension()}, {"path", path.string()}}.dump()
        << "\n";
  } else {
    out << fmt::format("indexed {} articles (dimension {}) -> {}\n", index.size(), index.dimension(), path.string());
  }
  return kExitOk;
}

int cmd_ask(const Options& o, const EnvLookup& env, std::ostream& out, std::ostream& err) {
  auto s = open_session(o, env, true);
  auto config = s.config.pipeline;
  config.mode = mode_or_default(o, s.config);
  MetadataFilter scope;
  if (!o.country.empty()) scope.country = o.country;
  if (!o.ban.empty()) scope.ban_topic = o.ban;
  try {
    auto r = run_pipeline(o.question, scope, s.handles(), config);
    const auto path = write_trace(r.trace, s.config.trace_dir);
    save_recording(s, o);
    nlohmann::json j = r.decision;
    j["cited_article_ids"] = r.cited_article_ids;
    j["degraded"] = r.degraded;
    j["exit_path"] = to_string(r.exit_path);
    if (o.json) {
      j["trace"] = path.string();
      out << j.dump() << "\n";
    } else {
      out << j.dump(2) << "\n" << "trace: " << path.string() << "\n";
    }
    return kExitOk;
  } catch (const PipelineError& e) {
    const auto path = write_trace(e.trace(), s.config.trace_dir);
    save_recording(s, o);
    err << e.what() << "\n" << "partial trace: " << path.string() << "\n";
    return kExitFailure;
  }
}

int cmd_grid(const Options& o, const EnvLookup& env, std::ostream& out, std::ostream& err) {
  auto s = open_session(o, env, true);
  auto config = s.config.pipeline;
  config.mode = mode_or_default(o, s.config);
  GridOptions go;
  go.jobs = o.jobs;
  go.trace_dir = s.config.trace_dir;
  auto grid = compute_grid(o.ban, o.country, s.handles(), config, go);
  save_recording(s, o);

  std::optional<MetricReport> metrics;
  if (!o.gold.empty()) metrics = score_grid(grid, GoldLabels::load(o.gold));
  if (o.json) {
    auto j = grid_to_json(grid);
    if (metrics) j["metrics"] = *metrics;
    out << j.dump() << "\n";
  } else {
    out << render_grid_table(grid);
    if (metrics) {
      out << fmt::format("accuracy {}  precision {}  recall {}  specificity {}\n", format_metric(metrics->accuracy),
                         format_metric(metrics->precision), format_metric(metrics->recall),
                         format_metric(metrics->specificity));
    }
    out << "traces: " << s.config.trace_dir.string() << "\n";
  }
  int failed = 0;
  for (const auto& slot : grid.slots) {
    if (slot.error) {
      ++failed;
      err << fmt::format("question {}: {}\n", slot.ordinal, *slot.error);
    }
  }
  return failed ? kExitFailure : kExitOk;
}

int cmd_ablation(const Options& o, const EnvLookup& env, std::ostream& out, std::ostream& err) {
  auto s = open_session(o, env, true);
  std::vector<PipelineMode> modes;
  if (o.modes.empty()) {
    modes = {PipelineMode::full, PipelineMode::without_hallucination_control, PipelineMode::retrieval_only_baseline};
  }
  for (const auto& name : o.modes) {
    auto m = parse_pipeline_mode(name);
    if (!m) throw CLI::ValidationError("--modes", "unknown mode '" + name + "'");
    modes.push_back(*m);
  }
  auto gold = GoldLabels::load(o.gold);
  AblationOptions ao;
  ao.grid.jobs = o.jobs;
  ao.grid.trace_dir = s.config.trace_dir;
  ao.per_country = o.per_country;
  auto report = run_ablation(o.bans, o.countries, modes, s.handles(), s.config.pipeline, gold, ao);
  save_recording(s, o);

  const fs::path prefix = o.out_path.empty() ? s.config.trace_dir / "ablation" : fs::path(o.out_path);
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  std::ofstream(fs::path(prefix).concat(".csv")) << render_csv(report);
  std::ofstream(fs::path(prefix).concat(".json")) << report_json(report).dump(2) << "\n";

  if (o.json) {
    out << report_json(report).dump() << "\n";
  } else {
    out << render_table(report);
    out << fmt::format("written: {}.csv, {}.json\n", prefix.string(), prefix.string());
  }
  int failed = 0;
  for (const auto& g : report.grids) {
    for (const auto& slot : g.slots) {
      if (slot.error) {
        ++failed;
        err << fmt::format("{}/{}/{} question {}: {}\n", g.ban_topic, g.country, to_string(g.mode), slot.ordinal,
                           *slot.error);
      }
    }
  }
  return failed ? kExitFailure : kExitOk;
}

int cmd_audit(const Options& o, const EnvLookup& env, std::ostream& out) {
  auto trace = read_trace(o.trace_file);
  std::optional<Corpus> corpus;
  if (!o.corpus.empty()) {
    auto config = configure(o, env);
    corpus = CorpusStore(config.store_dir).read(config.corpus_name);
  }
  auto report = resume_check(trace, corpus ? &*corpus : nullptr);
  if (o.json) {
    out << nlohmann::json{{"run_id", trace.run_id}, {"violations", report.violations}}.dump() << "\n";
  } else {
    for (const auto& v : report.violations) out << "violation: " << v << "\n";
    out << fmt::format("{}: {} violation(s)\n", trace.run_id, report.violations.size());
  }
  return report.ok() ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  CLI::App app{"Legal indicator questions answered by an agentic retrieval pipeline", "n2i"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  std::string config_path, store, trace_dir;
  app.add_option("--config", config_path, "JSON config file (or N2I_CONFIG)");
  app.add_option("--store", store, "Corpus store directory (overrides the config)");
  app.add_option("--trace-dir", trace_dir, "Directory receiving trace files (overrides the config)");
  app.add_flag("--json", o.json, "Machine-readable output");

  auto* ingest_cmd = app.add_subcommand("ingest", "Segment a directory of legal texts into a stored corpus");
  ingest_cmd->add_option("--input", o.input, "Directory of .txt sources")->required()->check(CLI::ExistingDirectory);
  ingest_cmd->add_option("--corpus", o.corpus, "Corpus name");
  ingest_cmd->add_option("--metadata", o.metadata, "Metadata sidecar (default <input>/metadata.json)")
      ->check(CLI::ExistingFile);

  auto* index_cmd = app.add_subcommand("index", "Embed a stored corpus and build its vector index");
  index_cmd->add_option("--corpus", o.corpus, "Corpus name");
  index_cmd->add_option("--out", o.out_path, "Index file (default from the config)");

  auto add_backend_flags = [&](CLI::App* cmd) {
    cmd->add_option("--corpus", o.corpus, "Corpus name");
    cmd->add_option("--scripted", o.scripted, "Replay chat replies from a scripted file (offline)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--record", o.record, "Record chat replies into a scripted file");
    cmd->add_flag("--exact", o.exact, "Exact vector search instead of the graph index");
  };

  auto* ask_cmd = app.add_subcommand("ask", "Answer one indicator question");
  ask_cmd->add_option("--question", o.question, "Question text")->required();
  ask_cmd->add_option("--country", o.country, "Country code scope");
  ask_cmd->add_option("--ban", o.ban, "Ban topic scope");
  ask_cmd->add_option("--mode", o.mode, "full | without_hallucination_control | retrieval_only_baseline");
  add_backend_flags(ask_cmd);

  auto* grid_cmd = app.add_subcommand("grid", "Fill the 11-question grid for one ban and country");
  grid_cmd->add_option("--country", o.country, "Country code")->required();
  grid_cmd->add_option("--ban", o.ban, "Ban topic")->required();
  grid_cmd->add_option("--mode", o.mode, "Pipeline mode");
  grid_cmd->add_option("--jobs", o.jobs, "Concurrent questions")->check(CLI::Range(1, 64));
  grid_cmd->add_option("--gold", o.gold, "Gold labels to score against")->check(CLI::ExistingFile);
  add_backend_flags(grid_cmd);

  auto* ablation_cmd = app.add_subcommand("ablation", "Score the three configurations against gold labels");
  ablation_cmd->add_option("--ban", o.bans, "Ban topic (repeatable)")->required();
  ablation_cmd->add_option("--country", o.countries, "Country code (repeatable)")->required();
  ablation_cmd->add_option("--modes", o.modes, "Subset of modes (default: all three)");
  ablation_cmd->add_option("--gold", o.gold, "Gold labels file")->required()->check(CLI::ExistingFile);
  ablation_cmd->add_option("--out", o.out_path, "Output prefix for the .csv and .json reports");
  ablation_cmd->add_option("--jobs", o.jobs, "Concurrent questions per grid")->check(CLI::Range(1, 64));
  ablation_cmd->add_flag("--per-country", o.per_country, "Add per-country rows");
  add_backend_flags(ablation_cmd);

  auto* audit_cmd = app.add_subcommand("audit", "Check a trace file against the pipeline invariants");
  audit_cmd->add_option("trace", o.trace_file, "Trace file")->required()->check(CLI::ExistingFile);
  audit_cmd->add_option("--corpus", o.corpus, "Also check citations against this stored corpus");

  app.add_subcommand("version", "Print the version");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (!config_path.empty()) o.config = config_path;
  if (!store.empty()) o.store = store;
  if (!trace_dir.empty()) o.trace_dir = trace_dir;

  try {
    if (app.got_subcommand(ingest_cmd)) return cmd_ingest(o, env, out);
    if (app.got_subcommand(index_cmd)) return cmd_index(o, env, out);
    if (app.got_subcommand(ask_cmd)) return cmd_ask(o, env, out, err);
    if (app.got_subcommand(grid_cmd)) return cmd_grid(o, env, out, err);
    if (app.got_subcommand(ablation_cmd)) return cmd_ablation(o, env, out, err);
    if (app.got_subcommand(audit_cmd)) return cmd_audit(o, env, out);
    out << "n2i " << N2I_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ValidationError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace n2i
