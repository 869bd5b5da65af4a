#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "agentrec/corpus.hpp"
#include "agentrec/embedding.hpp"
#include "agentrec/error.hpp"

namespace agentrec {

enum class Aggregation { max, arithmetic, geometric, p_means };

struct ScoreConfig {
  Aggregation kind = Aggregation::p_means;
  double p = 200.0;
  double epsilon = 1e-6;

  friend bool operator==(const ScoreConfig&, const ScoreConfig&) = default;
};

void validate(const ScoreConfig& cfg);

/// "max", "arith", "geo", "pmeans:<p>" (long forms "arithmetic", "geometric",
/// "p-means:<p>" are accepted too).
ScoreConfig parse_score_config(std::string_view text);
std::string to_string(const ScoreConfig& cfg);

namespace detail {

template <typename Derived>
void check_similarities(const Eigen::DenseBase<Derived>& sims) {
  if (sims.size() == 0) throw Error(ErrorCode::invalid_input, "no similarities to aggregate");
  if (!sims.derived().array().isFinite().all()) {
    throw Error(ErrorCode::invalid_input, "similarities must be finite");
  }
}

template <typename Scalar>
void check_epsilon(Scalar epsilon) {
  if (!(epsilon > Scalar(0) && epsilon < Scalar(1))) {
    throw Error(ErrorCode::invalid_input, "epsilon must lie in (0, 1)");
  }
}

}  // namespace detail

/// Logarithm of the generalized p-mean of the similarities, each clamped to
/// [epsilon, 1] first:
///
///   S = (1/p) ln( (1/n) Σ sᵢᵖ )
///
/// evaluated entirely in the log domain as
///
///   S = m + (1/p) log1p( mean( expm1(p (ln sᵢ − m)) ) ),   m = max ln sᵢ
///
/// which stays finite for p = 200 even when every sᵢᵖ underflows a double.
template <typename Derived>
typename Derived::Scalar score_pmeans(const Eigen::DenseBase<Derived>& sims, typename Derived::Scalar p,
                                      typename Derived::Scalar epsilon) {
  using Scalar = typename Derived::Scalar;
  detail::check_similarities(sims);
  detail::check_epsilon(epsilon);
  if (!(p > Scalar(0)) || !std::isfinite(p)) throw Error(ErrorCode::invalid_input, "p must be a finite value > 0");

  const Eigen::Array<Scalar, Eigen::Dynamic, 1> logs =
      sims.derived().array().max(epsilon).min(Scalar(1)).log();
  const Scalar top = logs.maxCoeff();
  const Scalar mean_m1 = ((logs - top) * p).expm1().mean();
  return top + std::log1p(mean_m1) / p;
}

/// max, arithmetic mean, or geometric mean (exp of the mean log of the
/// epsilon-clamped entries).
template <typename Derived>
typename Derived::Scalar aggregate(const Eigen::DenseBase<Derived>& sims, Aggregation kind,
                                   typename Derived::Scalar epsilon = 1e-6) {
  using Scalar = typename Derived::Scalar;
  detail::check_similarities(sims);
  switch (kind) {
    case Aggregation::max:
      return sims.maxCoeff();
    case Aggregation::arithmetic:
      return sims.derived().array().mean();
    case Aggregation::geometric:
      detail::check_epsilon(epsilon);
      return std::exp(sims.derived().array().max(epsilon).min(Scalar(1)).log().mean());
    case Aggregation::p_means:
      break;
  }
  throw Error(ErrorCode::invalid_input, "aggregate() handles max, arithmetic and geometric; use score_pmeans");
}

/// Agent score under cfg. p-means reports the logarithmic form S.
template <typename Derived>
typename Derived::Scalar score(const Eigen::DenseBase<Derived>& sims, const ScoreConfig& cfg) {
  if (cfg.kind == Aggregation::p_means) return score_pmeans(sims, cfg.p, cfg.epsilon);
  return aggregate(sims, cfg.kind, cfg.epsilon);
}

/// Cosine of the query against every corpus row.
Eigen::VectorXd similarities(const Embedding& query, const AgentCorpus& corpus);

// ---------------------------------------------------------------------------
// Ranking

struct RankedAgent {
  std::string agent;
  double score = 0.0;

  friend bool operator==(const RankedAgent&, const RankedAgent&) = default;
};

struct Recommendation {
  std::vector<RankedAgent> ranked;  // score descending, agent id ascending on ties
  int k = 1;
  bool rephrased = false;
};

/// Scores every corpus and keeps the top min(k, agents).
Recommendation rank_agents(const Embedding& query, const CorpusMap& corpora, const ScoreConfig& cfg, int k);

/// Preprocess, embed, score and rank a prompt.
class Recommender {
 public:
  Recommender(std::shared_ptr<const TextEmbedder> embedder, RephraseSpec rephrase, ScoreConfig cfg);
  Recommender(const EmbeddingProviderSpec& provider, RephraseSpec rephrase, ScoreConfig cfg);

  Recommendation recommend(const std::string& prompt, const CorpusMap& corpora, int k) const;

  const TextEmbedder& embedder() const noexcept { return *embedder_; }
  const ScoreConfig& score_config() const noexcept { return cfg_; }

 private:
  std::shared_ptr<const TextEmbedder> embedder_;
  PromptPreprocessor preprocess_;
  ScoreConfig cfg_;
};

Recommendation recommend(const std::string& prompt, const CorpusMap& corpora, const ScoreConfig& cfg,
                         const RephraseSpec& rephrase, const EmbeddingProviderSpec& provider, int k);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
  std::map<int, double> accuracy;  // k -> top-k accuracy
  std::map<int, std::size_t> hits;
  // true agent -> top-1 predicted agent -> count
  std::map<std::string, std::map<std::string, std::size_t>> confusion;
  std::size_t n_evaluated = 0;
};

EvalReport top_k_accuracy(const CorpusMap& corpora, std::span<const PromptRecord> labeled, const ScoreConfig& cfg,
                          const TextEmbedder& embedder, std::span<const int> ks);

struct SweepRow {
  ScoreConfig config;
  EvalReport report;
};

/// One report per config over the same prompts; prompts are embedded once.
std::vector<SweepRow> score_function_sweep(const CorpusMap& corpora, std::span<const PromptRecord> labeled,
                                           const TextEmbedder& embedder, std::span<const ScoreConfig> configs,
                                           std::span<const int> ks);

struct LatencyReport {
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double mean_ms = 0.0;
  std::size_t n = 0;
};

/// Times Recommender::recommend over prompts × repetitions after warmup
/// passes. The recommender's rephrase spec should be identity to measure the
/// scoring path alone.
LatencyReport latency_benchmark(const CorpusMap& corpora, std::span<const std::string> prompts,
                                const Recommender& recommender, int repetitions, int warmup = 1, int k = 1);

nlohmann::json to_json(const Recommendation& rec);
nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(std::span<const SweepRow> sweep);
nlohmann::json to_json(const LatencyReport& report);

}  // namespace agentrec
