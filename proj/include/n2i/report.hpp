#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "n2i/grid.hpp"

namespace n2i {

/// Shown in place of an undefined ratio.
inline constexpr std::string_view kAbsentCell = "—";

/// Three decimals, or kAbsentCell.
std::string format_metric(const std::optional<double>& value);

/// "plastic_bags" -> "Plastic bags".
std::string display_ban(std::string_view ban_topic);

/// Aligned table with columns Ban, Configuration, Accuracy, Precision, Recall,
/// Specificity, F1-Score, Balanced Acc. Per-country rows, when present, follow
/// under their own header with a Country column.
std::string render_table(const AblationReport& report);
/// Same content as render_table, comma separated.
std::string render_csv(const AblationReport& report);
nlohmann::json report_json(const AblationReport& report);

/// One line per slot: ordinal, label, question, citations, explanation.
std::string render_grid_table(const IndicatorGrid& grid);

}  // namespace n2i
