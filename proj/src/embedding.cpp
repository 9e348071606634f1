#include "n2i/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <fmt/format.h>

#include "n2i/error.hpp"
#include "n2i/text.hpp"

namespace n2i {

namespace {

double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  for (double x : values_) {
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "embedding component is not finite");
  }
  norm_ = l2_norm(values_);
}

EmbeddingVector EmbeddingVector::scaled(double alpha) const {
  std::vector<double> out(values_.begin(), values_.end());
  for (double& x : out) x *= alpha;
  return EmbeddingVector(std::move(out));
}

double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, fmt::format("{} vs {}", a.dimension(), b.dimension()));
  }
  if (a.norm() == 0.0 || b.norm() == 0.0) throw Error(ErrorCode::ZeroVector, "cosine distance of a zero vector");
  auto av = a.values();
  auto bv = b.values();
  double dot = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) dot += av[i] * bv[i];
  return std::clamp(1.0 - dot / (a.norm() * b.norm()), 0.0, 2.0);
}

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be positive");
}

std::vector<std::vector<double>> HashingEmbedder::embed_texts(std::span<const std::string> texts) const {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    const std::string lowered = text::to_lower_ascii(t);
    auto units = text::utf8_units(lowered);
    std::vector<double> v(dimension_, 0.0);
    auto bump = [&](std::size_t first, std::size_t count) {
      std::string gram;
      for (std::size_t k = first; k < first + count; ++k) gram += units[k];
      v[fnv1a(gram) % dimension_] += 1.0;
    };
    if (units.size() < 3) {
      if (!units.empty()) bump(0, units.size());
    } else {
      for (std::size_t i = 0; i + 3 <= units.size(); ++i) bump(i, 3);
    }
    double n = l2_norm(v);
    if (n > 0) {
      for (double& x : v) x /= n;
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::string HashingEmbedder::describe() const { return fmt::format("hashing-3gram(d={})", dimension_); }

std::vector<EmbeddingVector> embed_all(std::span<const std::string> texts, const EmbeddingBackend& backend) {
  for (const auto& t : texts) {
    if (t.empty()) throw Error(ErrorCode::InvalidArgument, "cannot embed empty text");
  }
  auto raw = backend.embed_texts(texts);
  if (raw.size() != texts.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("backend returned {} vectors for {} texts", raw.size(), texts.size()));
  }
  std::vector<EmbeddingVector> out;
  out.reserve(raw.size());
  for (auto& r : raw) {
    if (r.size() != backend.dimension()) {
      throw Error(ErrorCode::DimensionMismatch,
                  fmt::format("backend returned {} components, expected {}", r.size(), backend.dimension()));
    }
    out.emplace_back(std::move(r));
  }
  return out;
}

EmbeddingVector embed(std::string_view text, const EmbeddingBackend& backend) {
  std::string t(text);
  return std::move(embed_all(std::span<const std::string>(&t, 1), backend).front());
}

}  // namespace n2i
