#include "n2i/report.hpp"

#include <cctype>

#include <fmt/format.h>

#include "n2i/text.hpp"

namespace n2i {

namespace {

using Row = std::vector<std::string>;

const Row kHeader{"Ban", "Configuration", "Accuracy", "Precision", "Recall", "Specificity", "F1-Score",
                  "Balanced Acc."};

Row cells(const AblationRow& r) {
  Row row{display_ban(r.ban_topic), std::string(display_name(r.mode))};
  if (r.country) row.insert(row.begin() + 1, *r.country);
  const auto& m = r.metrics;
  for (const auto& v : {m.accuracy, m.precision, m.recall, m.specificity, m.f1, m.balanced_accuracy}) {
    row.push_back(format_metric(v));
  }
  return row;
}

Row header(bool with_country) {
  Row h = kHeader;
  if (with_country) h.insert(h.begin() + 1, "Country");
  return h;
}

std::size_t width(std::string_view s) { return text::utf8_units(s).size(); }

std::string aligned(const std::vector<Row>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    widths.resize(std::max(widths.size(), row.size()), 0);
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], width(row[i]));
  }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      if (i) line += "  ";
      const auto pad = std::string(widths[i] - width(rows[r][i]), ' ');
      // Text columns left-aligned, numbers right-aligned.
      const bool numeric = i >= rows[r].size() - 6;
      line += numeric ? pad + rows[r][i] : rows[r][i] + pad;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : widths) total += w;
      out += std::string(total + 2 * (widths.size() - 1), '-') + "\n";
    }
  }
  return out;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::string csv_rows(const std::vector<Row>& rows) {
  std::string out;
  for (const auto& row : rows) {
    std::vector<std::string> quoted;
    for (const auto& c : row) quoted.push_back(csv_cell(c));
    out += text::join(quoted, ",") + "\n";
  }
  return out;
}

nlohmann::json row_json(const AblationRow& r) {
  nlohmann::json j{{"ban_topic", r.ban_topic},
                   {"ban", display_ban(r.ban_topic)},
                   {"mode", to_string(r.mode)},
                   {"configuration", display_name(r.mode)},
                   {"metrics", r.metrics}};
  if (r.country) j["country"] = *r.country;
  return j;
}

}  // namespace

std::string format_metric(const std::optional<double>& value) {
  return value ? fmt::format("{:.3f}", *value) : std::string(kAbsentCell);
}

std::string display_ban(std::string_view ban_topic) {
  std::string out(ban_topic);
  for (char& c : out) {
    if (c == '_') c = ' ';
  }
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::string render_table(const AblationReport& report) {
  std::vector<Row> rows{header(false)};
  for (const auto& r : report.rows) rows.push_back(cells(r));
  std::string out = aligned(rows);
  if (!report.per_country_rows.empty()) {
    std::vector<Row> by_country{header(true)};
    for (const auto& r : report.per_country_rows) by_country.push_back(cells(r));
    out += "\n" + aligned(by_country);
  }
  return out;
}

std::string render_csv(const AblationReport& report) {
  std::vector<Row> rows{header(false)};
  for (const auto& r : report.rows) rows.push_back(cells(r));
  std::string out = csv_rows(rows);
  if (!report.per_country_rows.empty()) {
    std::vector<Row> by_country{header(true)};
    for (const auto& r : report.per_country_rows) by_country.push_back(cells(r));
    out += "\n" + csv_rows(by_country);
  }
  return out;
}

nlohmann::json report_json(const AblationReport& report) {
  auto rows = nlohmann::json::array();
  for (const auto& r : report.rows) rows.push_back(row_json(r));
  auto per_country = nlohmann::json::array();
  for (const auto& r : report.per_country_rows) per_country.push_back(row_json(r));
  auto grids = nlohmann::json::array();
  for (const auto& g : report.grids) grids.push_back(grid_to_json(g));
  return {{"columns", kHeader}, {"rows", rows}, {"per_country_rows", per_country}, {"grids", grids}};
}

std::string render_grid_table(const IndicatorGrid& grid) {
  std::vector<Row> rows{{"#", "Label", "Question", "Cited", "Explanation"}};
  for (const auto& s : grid.slots) {
    std::string why = s.explanation;
    for (char& c : why) {
      if (c == '\n') c = ' ';
    }
    rows.push_back({std::to_string(s.ordinal), std::to_string(s.label), std::string(indicator_questions()[s.ordinal - 1].text),
                    s.cited_article_ids.empty() ? "-" : text::join(s.cited_article_ids, " "), why});
  }
  // Left-aligned; the explanation column is not padded.
  std::vector<std::size_t> widths(4, 0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < 4; ++i) widths[i] = std::max(widths[i], width(r[i]));
  }
  std::string out = fmt::format("{} / {} ({})\n", display_ban(grid.ban_topic), grid.country, display_name(grid.mode));
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < 4; ++i) line += r[i] + std::string(widths[i] - width(r[i]) + 2, ' ');
    out += line + r[4] + "\n";
  }
  return out;
}

}  // namespace n2i
