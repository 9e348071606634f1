#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "n2i/metrics.hpp"
#include "n2i/pipeline.hpp"

namespace n2i {

enum class QuestionCategory { scope_extent, exception_scarcity, penalties, control_mechanisms };

std::string_view to_string(QuestionCategory category) noexcept;

struct IndicatorQuestion {
  int ordinal;
  std::string_view text;
  QuestionCategory category;
};

inline constexpr std::size_t kQuestionCount = 11;

/// The canonical questions, ordinals 1 to 11.
const std::array<IndicatorQuestion, kQuestionCount>& indicator_questions();

/// "<question> for the ban on <topic> in <country>", underscores in the topic
/// read as spaces.
std::string instantiate_question(const IndicatorQuestion& question, std::string_view ban_topic,
                                 std::string_view country);

struct GridSlot {
  int ordinal = 0;
  std::string question;  // instantiated text
  int label = 0;
  std::string explanation;
  std::vector<std::string> cited_article_ids;
  std::string run_id;
  bool degraded = false;
  std::optional<std::string> error;
  PipelineTrace trace;
};

struct IndicatorGrid {
  std::string ban_topic;
  std::string country;
  PipelineMode mode = PipelineMode::full;
  std::vector<GridSlot> slots;  // ordinals 1..11 in order

  [[nodiscard]] std::vector<int> labels() const;
};

struct GridOptions {
  std::size_t jobs = 1;
  /// When set, every slot's trace (partial ones included) is written here.
  std::optional<std::filesystem::path> trace_dir;
};

/// Runs the 11 questions with scope {country, ban_topic}. A failing slot gets
/// label 0, the error in its explanation and the degraded flag.
IndicatorGrid compute_grid(std::string_view ban_topic, std::string_view country, const PipelineHandles& handles,
                           const PipelineConfig& config, const GridOptions& options = {});

struct GoldKey {
  std::string ban_topic;
  std::string country;
  int ordinal = 0;

  auto operator<=>(const GoldKey&) const = default;
};

struct GoldEntry {
  int label = 0;
  std::string note;
};

class GoldLabels {
 public:
  /// Throws InvalidArgument on a non-binary label, an ordinal outside 1..11
  /// or a duplicate key.
  void add(GoldKey key, GoldEntry entry);
  [[nodiscard]] const GoldEntry* find(const GoldKey& key) const;
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }

  /// Keys of the scope (bans x countries x ordinals) with no label.
  [[nodiscard]] std::vector<GoldKey> missing(const std::vector<std::string>& ban_topics,
                                             const std::vector<std::string>& countries) const;

  /// JSON lines of {ban_topic, country, ordinal, label, note}.
  static GoldLabels parse(std::string_view jsonl);
  static GoldLabels load(const std::filesystem::path& path);

 private:
  std::map<GoldKey, GoldEntry> entries_;
};

struct AblationRow {
  std::string ban_topic;
  PipelineMode mode = PipelineMode::full;
  std::optional<std::string> country;  // set on per-country rows only
  MetricReport metrics;
};

struct AblationReport {
  std::vector<AblationRow> rows;              // pooled per (ban, mode), ban-major
  std::vector<AblationRow> per_country_rows;  // filled when requested
  std::vector<IndicatorGrid> grids;
};

struct AblationOptions {
  GridOptions grid;
  bool per_country = false;
};

/// Throws MissingGold listing the uncovered keys before running anything.
AblationReport run_ablation(const std::vector<std::string>& ban_topics, const std::vector<std::string>& countries,
                            const std::vector<PipelineMode>& modes, const PipelineHandles& handles,
                            const PipelineConfig& base_config, const GoldLabels& gold,
                            const AblationOptions& options = {});

/// Metrics of one grid against the gold labels.
MetricReport score_grid(const IndicatorGrid& grid, const GoldLabels& gold);

nlohmann::json grid_to_json(const IndicatorGrid& grid);

}  // namespace n2i
