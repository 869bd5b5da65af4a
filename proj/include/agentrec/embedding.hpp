#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agentrec/error.hpp"

namespace agentrec {

inline constexpr double kUnitNormTolerance = 1e-6;

/// A unit-normalized, finite sentence embedding.
///
/// Instances are only produced through normalize() or from_unit(), so every
/// Embedding satisfies |‖v‖ − 1| ≤ kUnitNormTolerance.
class Embedding {
 public:
  /// Wraps a vector that is already unit length. Throws invalid_embedding
  /// when the vector is empty, non-finite or off the unit sphere.
  static Embedding from_unit(Eigen::VectorXd values);

  const Eigen::VectorXd& values() const noexcept { return values_; }
  Eigen::Index dim() const noexcept { return values_.size(); }

  friend bool operator==(const Embedding& a, const Embedding& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  explicit Embedding(Eigen::VectorXd v) : values_(std::move(v)) {}
  friend Embedding normalize(const Eigen::Ref<const Eigen::VectorXd>& raw);

  Eigen::VectorXd values_;
};

/// v / ‖v‖₂. Throws invalid_embedding for empty, zero or non-finite input.
Embedding normalize(const Eigen::Ref<const Eigen::VectorXd>& raw);

/// Cosine of the angle between two nonzero vectors, clamped to [-1, 1].
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) {
    throw Error(ErrorCode::contract_violation,
                "cosine_similarity: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  }
  const Scalar denom = a.norm() * b.norm();
  if (!(denom > Scalar(0))) {
    throw Error(ErrorCode::invalid_embedding, "cosine_similarity: zero vector");
  }
  const Scalar c = a.dot(b) / denom;
  return std::clamp(c, Scalar(-1), Scalar(1));
}

/// Unit inputs reduce to a dot product.
inline double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::contract_violation,
                "cosine_similarity: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                    std::to_string(b.dim()) + ")");
  }
  return std::clamp(a.values().dot(b.values()), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Embedding providers

enum class ProviderKind { deterministic_hash, remote_http };

struct EmbeddingProviderSpec {
  ProviderKind kind = ProviderKind::deterministic_hash;
  int dim = 768;
  std::uint64_t seed = 0;
  std::string endpoint;
  std::chrono::milliseconds timeout{10000};
};

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual int dim() const noexcept = 0;
  /// One embedding per text, in order.
  virtual std::vector<Embedding> embed(std::span<const std::string> texts) const = 0;
};

/// Model-free embedder: lowercased whitespace tokens, each mapped through a
/// seeded hash to a ±1 vector; the token vectors are summed and normalized.
class HashEmbedder final : public TextEmbedder {
 public:
  HashEmbedder(int dim, std::uint64_t seed);

  int dim() const noexcept override { return dim_; }
  std::vector<Embedding> embed(std::span<const std::string> texts) const override;

  Embedding embed_one(const std::string& text) const;

 private:
  int dim_;
  std::uint64_t seed_;
};

/// Client for an external embedding service:
/// POST {"texts": [...]} -> {"embeddings": [[...], ...]}.
class RemoteEmbedder final : public TextEmbedder {
 public:
  RemoteEmbedder(std::string endpoint, int dim, std::chrono::milliseconds timeout);

  int dim() const noexcept override { return dim_; }
  std::vector<Embedding> embed(std::span<const std::string> texts) const override;

 private:
  std::string endpoint_;
  int dim_;
  std::chrono::milliseconds timeout_;
};

std::unique_ptr<TextEmbedder> make_embedder(const EmbeddingProviderSpec& spec);

/// Validates the batch and embeds it with the provider described by spec.
std::vector<Embedding> embed_texts(const EmbeddingProviderSpec& spec,
                                   std::span<const std::string> texts);
std::vector<Embedding> embed_texts(const TextEmbedder& embedder,
                                   std::span<const std::string> texts);

// ---------------------------------------------------------------------------
// Rephrase-and-respond preprocessing

enum class RephraseKind { identity, remote_http };

struct RephraseSpec {
  RephraseKind kind = RephraseKind::identity;
  std::string endpoint;
  std::chrono::milliseconds timeout{10000};
};

struct PreprocessedPrompt {
  std::string text;
  bool rephrased = false;
};

class PromptPreprocessor {
 public:
  explicit PromptPreprocessor(RephraseSpec spec) : spec_(std::move(spec)) {}

  /// Throws invalid_prompt when the prompt is empty after trimming. A failing
  /// remote rephraser degrades to whitespace normalization with
  /// rephrased = false.
  PreprocessedPrompt operator()(const std::string& raw) const;

  const RephraseSpec& spec() const noexcept { return spec_; }

 private:
  RephraseSpec spec_;
};

PreprocessedPrompt preprocess_prompt(const std::string& raw, const RephraseSpec& spec);

}  // namespace agentrec
