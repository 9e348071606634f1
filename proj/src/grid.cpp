#include "n2i/grid.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "n2i/error.hpp"
#include "n2i/text.hpp"
#include "n2i/trace.hpp"

namespace n2i {

namespace {

std::string gold_key_text(const GoldKey& k) { return fmt::format("{}/{}/{}", k.ban_topic, k.country, k.ordinal); }

GridSlot run_slot(const IndicatorQuestion& q, std::string_view ban_topic, std::string_view country,
                  const PipelineHandles& handles, const PipelineConfig& config) {
  GridSlot slot;
  slot.ordinal = q.ordinal;
  slot.question = instantiate_question(q, ban_topic, country);
  MetadataFilter scope;
  scope.country = std::string(country);
  scope.ban_topic = std::string(ban_topic);
  try {
    auto r = run_pipeline(slot.question, scope, handles, config);
    slot.label = r.decision.label;
    slot.explanation = r.decision.explanation;
    slot.cited_article_ids = r.cited_article_ids;
    slot.degraded = r.degraded;
    slot.trace = std::move(r.trace);
  } catch (const PipelineError& e) {
    slot.label = 0;
    slot.explanation = fmt::format("error: {}", e.what());
    slot.degraded = true;
    slot.error = e.what();
    slot.trace = e.trace();
  } catch (const Error& e) {
    slot.label = 0;
    slot.explanation = fmt::format("error: {}", e.what());
    slot.degraded = true;
    slot.error = e.what();
  }
  slot.run_id = slot.trace.run_id;
  return slot;
}

}  // namespace

std::string_view to_string(QuestionCategory category) noexcept {
  switch (category) {
    case QuestionCategory::scope_extent: return "scope extent";
    case QuestionCategory::exception_scarcity: return "exception scarcity";
    case QuestionCategory::penalties: return "penalties";
    case QuestionCategory::control_mechanisms: return "control mechanisms";
  }
  return "unknown";
}

const std::array<IndicatorQuestion, kQuestionCount>& indicator_questions() {
  using C = QuestionCategory;
  static const std::array<IndicatorQuestion, kQuestionCount> questions{{
      {1, "The ban is specified by a legal article", C::scope_extent},
      {2, "The ban is nationwide in scope", C::scope_extent},
      {3, "The ban is permanent in nature", C::scope_extent},
      {4, "Details of banned activities is documented", C::scope_extent},
      {5, "There are no exceptions to the rule", C::exception_scarcity},
      {6, "Exemptions are restricted to a few specific cases", C::exception_scarcity},
      {7, "A monetary fine is imposed", C::penalties},
      {8, "A jail sentence is outlined", C::penalties},
      {9, "A designated authority is tasked with enforcement", C::control_mechanisms},
      {10, "A control process with a defined duration is established", C::control_mechanisms},
      {11, "A location-specific control procedure is detailed", C::control_mechanisms},
  }};
  return questions;
}

std::string instantiate_question(const IndicatorQuestion& question, std::string_view ban_topic,
                                 std::string_view country) {
  std::string topic(ban_topic);
  for (char& c : topic) {
    if (c == '_') c = ' ';
  }
  return fmt::format("{} for the ban on {} in {}", question.text, topic, country);
}

std::vector<int> IndicatorGrid::labels() const {
  std::vector<int> out;
  out.reserve(slots.size());
  for (const auto& s : slots) out.push_back(s.label);
  return out;
}

IndicatorGrid compute_grid(std::string_view ban_topic, std::string_view country, const PipelineHandles& handles,
                           const PipelineConfig& config, const GridOptions& options) {
  config.validate();
  IndicatorGrid grid;
  grid.ban_topic = std::string(ban_topic);
  grid.country = std::string(country);
  grid.mode = config.mode;
  grid.slots.resize(kQuestionCount);

  const auto& questions = indicator_questions();
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < kQuestionCount; i = next++) {
      grid.slots[i] = run_slot(questions[i], ban_topic, country, handles, config);
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, kQuestionCount);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  if (options.trace_dir) {
    for (const auto& slot : grid.slots) {
      if (!slot.trace.run_id.empty()) write_trace(slot.trace, *options.trace_dir);
    }
  }
  return grid;
}

void GoldLabels::add(GoldKey key, GoldEntry entry) {
  if (entry.label != 0 && entry.label != 1) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("gold label for {} is not binary", gold_key_text(key)));
  }
  if (key.ordinal < 1 || key.ordinal > static_cast<int>(kQuestionCount)) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("gold ordinal {} outside 1..11", key.ordinal));
  }
  auto text = gold_key_text(key);
  if (!entries_.emplace(std::move(key), std::move(entry)).second) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("duplicate gold label for {}", text));
  }
}

const GoldEntry* GoldLabels::find(const GoldKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<GoldKey> GoldLabels::missing(const std::vector<std::string>& ban_topics,
                                         const std::vector<std::string>& countries) const {
  std::vector<GoldKey> out;
  for (const auto& ban : ban_topics) {
    for (const auto& country : countries) {
      for (const auto& q : indicator_questions()) {
        GoldKey k{ban, country, q.ordinal};
        if (!find(k)) out.push_back(std::move(k));
      }
    }
  }
  return out;
}

GoldLabels GoldLabels::parse(std::string_view jsonl) {
  GoldLabels gold;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t nl = jsonl.find('\n', pos);
    if (nl == std::string_view::npos) nl = jsonl.size();
    auto line = text::trim(jsonl.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("gold record {} is not a JSON object", line_no));
    }
    try {
      gold.add({j.at("ban_topic").get<std::string>(), j.at("country").get<std::string>(), j.at("ordinal").get<int>()},
               {j.at("label").get<int>(), j.value("note", std::string{})});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("gold record {}: {}", line_no, e.what()));
    }
  }
  return gold;
}

GoldLabels GoldLabels::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, fmt::format("cannot open gold labels '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

MetricReport score_grid(const IndicatorGrid& grid, const GoldLabels& gold) {
  std::vector<int> gold_labels;
  std::vector<int> predicted;
  for (const auto& slot : grid.slots) {
    const auto* entry = gold.find({grid.ban_topic, grid.country, slot.ordinal});
    if (!entry) {
      throw Error(ErrorCode::MissingGold, gold_key_text({grid.ban_topic, grid.country, slot.ordinal}));
    }
    gold_labels.push_back(entry->label);
    predicted.push_back(slot.label);
  }
  return compute_metrics(predicted, gold_labels);
}

AblationReport run_ablation(const std::vector<std::string>& ban_topics, const std::vector<std::string>& countries,
                            const std::vector<PipelineMode>& modes, const PipelineHandles& handles,
                            const PipelineConfig& base_config, const GoldLabels& gold,
                            const AblationOptions& options) {
  if (ban_topics.empty() || countries.empty() || modes.empty()) {
    throw Error(ErrorCode::InvalidArgument, "ablation needs at least one ban, country and mode");
  }
  if (auto missing = gold.missing(ban_topics, countries); !missing.empty()) {
    std::vector<std::string> keys;
    for (const auto& k : missing) keys.push_back(gold_key_text(k));
    throw Error(ErrorCode::MissingGold, fmt::format("no gold label for {}", text::join(keys, ", ")));
  }

  AblationReport report;
  for (const auto& ban : ban_topics) {
    for (auto mode : modes) {
      PipelineConfig config = base_config;
      config.mode = mode;
      ConfusionCounts pooled;
      for (const auto& country : countries) {
        auto grid = compute_grid(ban, country, handles, config, options.grid);
        auto m = score_grid(grid, gold);
        pooled += m.counts;
        if (options.per_country) report.per_country_rows.push_back({ban, mode, country, m});
        report.grids.push_back(std::move(grid));
      }
      report.rows.push_back({ban, mode, std::nullopt, metrics_from_counts(pooled)});
    }
  }
  return report;
}

nlohmann::json grid_to_json(const IndicatorGrid& grid) {
  auto slots = nlohmann::json::array();
  for (const auto& s : grid.slots) {
    nlohmann::json j{{"ordinal", s.ordinal},
                     {"question", s.question},
                     {"label", s.label},
                     {"explanation", s.explanation},
                     {"cited_article_ids", s.cited_article_ids},
                     {"run_id", s.run_id},
                     {"degraded", s.degraded}};
    if (s.error) j["error"] = *s.error;
    slots.push_back(std::move(j));
  }
  return {{"ban_topic", grid.ban_topic}, {"country", grid.country}, {"mode", to_string(grid.mode)}, {"slots", slots}};
}

}  // namespace n2i
