#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "n2i/corpus.hpp"
#include "n2i/error.hpp"
#include "n2i/text.hpp"

namespace n2i {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kCorpusFormat = "n2i-corpus";
constexpr int kCorpusFormatVersion = 1;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Exclusive advisory lock held for the lifetime of the object.
class FileLock {
 public:
  explicit FileLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw Error(ErrorCode::Io, fmt::format("cannot open lock file '{}'", path.string()));
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw Error(ErrorCode::Io, fmt::format("cannot lock '{}'", path.string()));
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  nlohmann::json manifest{{"record", "manifest"},
                          {"format", kCorpusFormat},
                          {"version", kCorpusFormatVersion},
                          {"name", corpus.name},
                          {"created_at", corpus.created_at},
                          {"article_count", corpus.articles.size()}};
  out += manifest.dump();
  out += '\n';
  for (const auto& a : corpus.articles) {
    nlohmann::json rec = a;
    rec["record"] = "article";
    out += rec.dump();
    out += '\n';
  }
  return out;
}

Corpus parse_corpus(std::string_view records) {
  Corpus corpus;
  bool have_manifest = false;
  std::size_t expected = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < records.size()) {
    std::size_t nl = records.find('\n', pos);
    if (nl == std::string_view::npos) nl = records.size();
    auto line = text::trim(records.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorCode::Io, fmt::format("corpus record {} is not a JSON object", line_no));
    }
    const std::string kind = j.value("record", std::string{});
    try {
      if (kind == "manifest") {
        if (have_manifest) throw Error(ErrorCode::Io, "corpus file has two manifest records");
        have_manifest = true;
        corpus.name = j.at("name").get<std::string>();
        corpus.created_at = j.value("created_at", std::string{});
        expected = j.value("article_count", std::size_t{0});
      } else if (kind == "article" || (kind.empty() && j.contains("article_id"))) {
        corpus.articles.push_back(j.get<Article>());
      } else {
        throw Error(ErrorCode::Io, fmt::format("unknown corpus record kind '{}' at line {}", kind, line_no));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Io, fmt::format("corpus record {}: {}", line_no, e.what()));
    }
  }
  if (!have_manifest) throw Error(ErrorCode::Io, "corpus file has no manifest record");
  if (expected != corpus.articles.size()) {
    throw Error(ErrorCode::Io, fmt::format("manifest announces {} articles, file holds {}", expected,
                                           corpus.articles.size()));
  }
  std::vector<std::string> ids;
  ids.reserve(corpus.articles.size());
  for (const auto& a : corpus.articles) ids.push_back(a.article_id);
  std::sort(ids.begin(), ids.end());
  if (auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end()) {
    throw Error(ErrorCode::Io, fmt::format("duplicate article_id '{}' in corpus file", *dup));
  }
  return corpus;
}

void save_corpus_file(const Corpus& corpus, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  FileLock lock(fs::path(path).concat(".lock"));
  fs::path tmp = fs::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", tmp.string()));
    out << serialize_corpus(corpus);
    if (!out.flush()) throw Error(ErrorCode::Io, fmt::format("write failed for '{}'", tmp.string()));
  }
  fs::rename(tmp, path);
}

Corpus load_corpus_file(const fs::path& path) { return parse_corpus(read_file(path)); }

CorpusStore::CorpusStore(fs::path dir) : dir_(std::move(dir)) {}

fs::path CorpusStore::path_for(std::string_view corpus_name) const {
  return dir_ / fmt::format("{}.jsonl", corpus_name);
}

bool CorpusStore::contains(std::string_view corpus_name) const { return fs::exists(path_for(corpus_name)); }

void CorpusStore::write(const Corpus& corpus) const { save_corpus_file(corpus, path_for(corpus.name)); }

Corpus CorpusStore::read(std::string_view corpus_name) const {
  auto path = path_for(corpus_name);
  if (!fs::exists(path)) throw Error(ErrorCode::Io, fmt::format("corpus '{}' not found in store", corpus_name));
  return load_corpus_file(path);
}

std::vector<DocumentSource> load_source_directory(const fs::path& dir, const std::optional<fs::path>& sidecar) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, fmt::format("'{}' is not a directory", dir.string()));
  const fs::path sidecar_path = sidecar.value_or(dir / "metadata.json");
  auto meta = nlohmann::json::parse(read_file(sidecar_path), nullptr, false);
  if (meta.is_discarded() || !meta.is_object()) {
    throw Error(ErrorCode::Io, fmt::format("metadata sidecar '{}' must be a JSON object", sidecar_path.string()));
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<DocumentSource> sources;
  for (const auto& file : files) {
    const std::string name = file.filename().string();
    auto it = meta.find(name);
    if (it == meta.end()) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("no metadata entry for '{}'", name));
    }
    DocumentSource s;
    s.metadata = it->get<DocumentMetadata>();
    if (s.metadata.source_id.empty()) s.metadata.source_id = file.stem().string();
    s.raw_text = read_file(file);
    sources.push_back(std::move(s));
  }
  return sources;
}

}  // namespace n2i
