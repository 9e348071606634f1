#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace n2i {

/// Finite real vector. Zero vectors are representable but rejected by
/// distance computations and index insertion.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  /// Throws InvalidArgument if any component is NaN or infinite.
  explicit EmbeddingVector(std::vector<double> values);

  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::size_t dimension() const noexcept { return values_.size(); }
  [[nodiscard]] double norm() const noexcept { return norm_; }

  /// Positive rescaling; the result has the same direction.
  [[nodiscard]] EmbeddingVector scaled(double alpha) const;

  bool operator==(const EmbeddingVector& other) const { return values_ == other.values_; }

 private:
  std::vector<double> values_;
  double norm_ = 0.0;
};

/// 1 - <a,b> / (|a| |b|), clamped to [0, 2].
/// Throws DimensionMismatch or ZeroVector.
double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b);

/// Pluggable text encoder. Implementations must be deterministic.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;

  [[nodiscard]] virtual std::size_t dimension() const = 0;
  /// One raw vector per input text. Throws BackendUnavailable on transport failure.
  [[nodiscard]] virtual std::vector<std::vector<double>> embed_texts(std::span<const std::string> texts) const = 0;
  [[nodiscard]] virtual std::string describe() const = 0;
};

/// Offline encoder: character 3-grams of the lowercased text hashed into
/// `dimension` buckets, counted, then L2-normalized.
class HashingEmbedder final : public EmbeddingBackend {
 public:
  explicit HashingEmbedder(std::size_t dimension = 256);

  [[nodiscard]] std::size_t dimension() const override { return dimension_; }
  [[nodiscard]] std::vector<std::vector<double>> embed_texts(std::span<const std::string> texts) const override;
  [[nodiscard]] std::string describe() const override;

 private:
  std::size_t dimension_;
};

/// Validates the backend's output: non-empty text, D components, all finite.
EmbeddingVector embed(std::string_view text, const EmbeddingBackend& backend);
std::vector<EmbeddingVector> embed_all(std::span<const std::string> texts, const EmbeddingBackend& backend);

}  // namespace n2i
