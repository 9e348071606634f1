#include "workbench.hpp"

#include <cstdlib>
#include <fstream>

#include <fmt/format.h>

#include "n2i/error.hpp"
#include "n2i/grid.hpp"
#include "n2i/trace.hpp"
#include "rule_backend.hpp"

namespace n2i::testkit {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  auto pattern = (fs::temp_directory_path() / (tag + "-XXXXXX")).string();
  if (!::mkdtemp(pattern.data())) throw Error(ErrorCode::Io, "mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

AgentKit make_test_kit(std::shared_ptr<const ChatBackend> chat) {
  RetryPolicy no_retry{0, std::chrono::milliseconds(0)};
  return AgentKit(PromptLibrary::builtin(), {chat, 0.0, no_retry}, {chat, 0.9, no_retry});
}

namespace {

Corpus load_corpus(const fs::path& dir) {
  auto sources = load_source_directory(dir);
  return ingest(sources, "default");
}

}  // namespace

Workbench::Workbench(const fs::path& source_dir, std::shared_ptr<const ChatBackend> backend)
    : corpus(load_corpus(source_dir)), embedder(256), index(build_index(corpus, embedder)), chat(std::move(backend)) {
  if (chat) agents.emplace(make_test_kit(chat));
}

// --- generated French documents ----------------------------------------------

namespace {

const std::vector<std::string> kPreambles{
    "Loi n° 2018-{} relative à la protection du littoral.\nL'Assemblée nationale a délibéré et adopté,\nLe Président "
    "de la République promulgue la loi dont la teneur suit :",
    "Décret n° 2-{}-114 pris pour l'application de la loi sur les emballages.\r\nVu la Constitution ;\r\nVu le code "
    "de l'environnement ;\r\nDécrète :",
    "Arrêté n° {} du ministre chargé de la pêche.\n\nLe ministre,\tsur proposition du directeur des pêches,",
};

const std::vector<std::string> kSentences{
    "Sont interdites la fabrication et la commercialisation des sacs en plastique.",
    "La présente loi s'applique sur l'ensemble du territoire national.",
    "Les contrevenants sont punis d'une amende de 10 000 à 50 000 francs.",
    "Les agents habilités dressent procès-verbal des infractions constatées.",
    "Conformément à l'article 3, les stocks existants sont détruits dans un délai de six mois.",
    "Les dispositions prévues aux articles 2 et 5 ne s'appliquent pas aux sacs isothermes.",
    "Un arrêté du ministre précise les modalités de contrôle (art. 4 du code).",
    "Le ministre chargé de l'environnement est chargé de l'exécution du présent texte.",
    "En cas de récidive, la peine est portée au double, sans préjudice de l'art. 12 du code pénal.",
    "Les contrôles ont lieu dans les points de vente et aux frontières.",
    "Toute dérogation est accordée par décision motivée.",
};

const std::vector<std::string> kKeywords{"Article", "Art.", "ARTICLE"};
const std::vector<std::string> kPunct{"", ".", " :", " -", ". -", " –", ")", ".-"};
const std::vector<std::string> kSeparators{"\n", "\n\n", "\r\n", "\r\n\r\n", " \n\t", " "};

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[rng() % v.size()];
}

std::string jitter(std::mt19937_64& rng, const std::string& sentence) {
  std::string out;
  for (char c : sentence) {
    if (c == ' ') {
      switch (rng() % 8) {
        case 0: out += "  "; break;
        case 1: out += " \t"; break;
        case 2: out += "\n"; break;
        default: out += ' ';
      }
    } else {
      out += c;
    }
  }
  return out;
}

}  // namespace

GeneratedDocument generate_french_document(std::mt19937_64& rng, int index) {
  GeneratedDocument doc;
  doc.source.metadata.source_id = fmt::format("GEN-{:03}", index);
  doc.source.metadata.country = "SN";
  doc.source.metadata.ban_topic = "plastic_bags";
  doc.source.metadata.text_type = TextType::law;
  doc.source.metadata.institution = "Assemblée nationale";
  doc.source.metadata.publication_date = parse_date("2019-03-01");

  std::string& raw = doc.source.raw_text;
  if (rng() % 2) {
    auto pre = fmt::format(fmt::runtime(pick(rng, kPreambles)), 10 + index);
    raw += pre + "\n\n";
    doc.headings.push_back("Preamble");
    doc.bodies.push_back(pre);
  }
  const int count = 1 + static_cast<int>(rng() % 12);
  for (int n = 1; n <= count; ++n) {
    const auto& keyword = pick(rng, kKeywords);
    std::string number = std::to_string(n);
    if (n == 1 && rng() % 2) number += (rng() % 2) ? "er" : "ER";
    const auto& punct = pick(rng, kPunct);
    std::string body;
    const int sentences = 1 + static_cast<int>(rng() % 3);
    for (int s = 0; s < sentences; ++s) {
      if (s) body += ' ';
      body += jitter(rng, pick(rng, kSentences));
    }
    if (n > 1) raw += pick(rng, kSeparators);
    raw += fmt::format("{} {}{} {}", keyword, number, punct, body);
    doc.headings.push_back(fmt::format("{} {}", keyword, number));
    doc.bodies.push_back(body);
  }
  if (rng() % 2) raw += "\r\n";
  return doc;
}

// --- committed fixtures ----------------------------------------------------------

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

PipelineTrace pinned(PipelineTrace t, const std::string& run_id) {
  t.run_id = run_id;
  t.started_at = "2026-01-01T00:00:00Z";
  for (auto& s : t.steps) s.elapsed_ms = 0.0;
  return t;
}

}  // namespace

void write_fixtures(const fs::path& dir) {
  auto recorder = std::make_shared<RecordingBackend>(std::make_shared<RuleBackend>());
  Workbench wb(fixture_path("corpus"), recorder);

  std::vector<IndicatorGrid> grids;
  for (auto mode : {PipelineMode::full, PipelineMode::without_hallucination_control}) {
    PipelineConfig config;
    config.mode = mode;
    for (const char* country : {"MA", "SN"}) grids.push_back(compute_grid("plastic_bags", country, wb.handles(), config));
  }
  write_json(dir / "scripted" / "plastic_bags.json", recorder->to_json());

  const auto& full_q1 = grids[0].slots[0].trace;
  const auto& lean_q1 = grids[2].slots[0].trace;
  write_json(dir / "traces" / "clean_full.json", trace_to_json(pinned(full_q1, "clean-full")));
  write_json(dir / "traces" / "clean_without_hall.json", trace_to_json(pinned(lean_q1, "clean-without-hall")));

  auto deleted = pinned(full_q1, "tampered-deleted-step");
  std::erase_if(deleted.steps, [](const StepRecord& s) { return s.agent == AgentKind::context_grader; });
  write_json(dir / "traces" / "tampered_deleted_step.json", trace_to_json(deleted));

  auto disabled = pinned(lean_q1, "tampered-disabled-agent");
  for (const auto& s : pinned(full_q1, "").steps) {
    if (s.agent != AgentKind::groundedness_grader) continue;
    auto pos = std::find_if(disabled.steps.begin(), disabled.steps.end(),
                            [](const StepRecord& r) { return r.agent == AgentKind::generator; });
    disabled.steps.insert(pos + 1, s);
    break;
  }
  write_json(dir / "traces" / "tampered_disabled_agent.json", trace_to_json(disabled));

  auto dangling = pinned(full_q1, "tampered-dangling-citation");
  dangling.cited_article_ids.push_back("MA-77-15#42");
  write_json(dir / "traces" / "tampered_dangling_citation.json", trace_to_json(dangling));
}

}  // namespace n2i::testkit
