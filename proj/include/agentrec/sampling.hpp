#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace agentrec {

/// A probability vector over a vocabulary: non-negative, finite, summing to
/// one within 1e-9.
class TokenDistribution {
 public:
  explicit TokenDistribution(Eigen::VectorXd probs);

  const Eigen::VectorXd& probs() const noexcept { return probs_; }
  Eigen::Index size() const noexcept { return probs_.size(); }
  double operator[](Eigen::Index i) const { return probs_[i]; }
  /// Number of nonzero entries.
  Eigen::Index support() const noexcept;

 private:
  Eigen::VectorXd probs_;
};

struct SamplingConfig {
  int top_k = 50;
  double nucleus_p = 0.95;
  double repetition_penalty = 1.2;
  double temperature = 0.6;
  int max_tokens = 32;
  std::uint64_t seed = 0;
};

void validate(const SamplingConfig& cfg);

/// softmax(logits / T) with max subtraction.
TokenDistribution apply_temperature(const Eigen::Ref<const Eigen::VectorXd>& logits, double temperature);

/// For each token in history: positive logits are divided by r, the rest
/// multiplied by r.
Eigen::VectorXd apply_repetition_penalty(const Eigen::Ref<const Eigen::VectorXd>& logits,
                                         std::span<const int> history, double penalty);

/// Keeps the k most probable tokens (lower index wins ties) and rescales them
/// to sum to one.
TokenDistribution top_k_filter(const TokenDistribution& dist, int k);

/// Keeps the shortest descending-probability prefix whose mass reaches
/// nucleus_p and rescales it.
TokenDistribution nucleus_filter(const TokenDistribution& dist, double nucleus_p);

/// Inverse-CDF draw. Advances rng by exactly one step.
int sample_token(const TokenDistribution& dist, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Next-token sources

class LogitSource {
 public:
  virtual ~LogitSource() = default;
  virtual const std::vector<std::string>& vocabulary() const noexcept = 0;
  /// Index of the end-of-sequence token, or -1 when the source never ends.
  virtual int end_token() const noexcept = 0;
  /// Raw logits (one per vocabulary entry) given the generated history.
  virtual Eigen::VectorXd logits(std::span<const int> history) const = 0;
};

/// First-order table: the row for the last generated token (or the start
/// row for an empty history) gives the next-token logits.
class MarkovFixture final : public LogitSource {
 public:
  static constexpr const char* kStartRow = "<start>";

  MarkovFixture(std::vector<std::string> vocabulary, std::map<std::string, std::vector<double>> rows,
                std::string end_token = {});

  /// JSON: {"vocabulary": [...], "end": "</s>", "transitions": {"<start>": [...], token: [...]}}
  static MarkovFixture from_json(const std::string& json_text);

  const std::vector<std::string>& vocabulary() const noexcept override { return vocab_; }
  int end_token() const noexcept override { return end_; }
  Eigen::VectorXd logits(std::span<const int> history) const override;

 private:
  std::vector<std::string> vocab_;
  Eigen::VectorXd start_;
  std::vector<Eigen::VectorXd> rows_;  // indexed by token
  int end_ = -1;
};

/// POST {"history": [token, ...]} -> {"logits": [...]}
class RemoteLogitSource final : public LogitSource {
 public:
  RemoteLogitSource(std::string endpoint, std::vector<std::string> vocabulary, std::string end_token,
                    std::chrono::milliseconds timeout);

  const std::vector<std::string>& vocabulary() const noexcept override { return vocab_; }
  int end_token() const noexcept override { return end_; }
  Eigen::VectorXd logits(std::span<const int> history) const override;

 private:
  std::string endpoint_;
  std::vector<std::string> vocab_;
  int end_ = -1;
  std::chrono::milliseconds timeout_;
};

struct GeneratedPrompt {
  std::string text;
  std::vector<int> tokens;
};

/// penalty -> temperature -> top-k -> nucleus -> sample, until the end token
/// or cfg.max_tokens.
GeneratedPrompt generate_prompt(const LogitSource& source, const SamplingConfig& cfg);

}  // namespace agentrec
