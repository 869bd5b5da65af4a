#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agentrec/embedding.hpp"
#include "agentrec/prompt.hpp"

namespace agentrec {

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Cached embeddings of one agent's representative prompts. Rows are stored
/// as 32-bit floats, exactly as they appear in the cache file; their
/// reciprocal norms are kept in double so cosines stay exact at query time.
class AgentCorpus {
 public:
  /// Throws invalid_input for an empty corpus or a row/id count mismatch and
  /// norm_violation when a row is not unit length.
  AgentCorpus(std::string agent, RowMatrixXf embeddings, std::vector<std::string> prompt_ids);

  const std::string& agent() const noexcept { return agent_; }
  const RowMatrixXf& embeddings() const noexcept { return embeddings_; }
  const std::vector<std::string>& prompt_ids() const noexcept { return prompt_ids_; }
  const Eigen::VectorXd& inverse_norms() const noexcept { return inverse_norms_; }
  Eigen::Index size() const noexcept { return embeddings_.rows(); }
  Eigen::Index dim() const noexcept { return embeddings_.cols(); }

  friend bool operator==(const AgentCorpus& a, const AgentCorpus& b) {
    return a.agent_ == b.agent_ && a.prompt_ids_ == b.prompt_ids_ &&
           a.embeddings_.rows() == b.embeddings_.rows() && a.embeddings_.cols() == b.embeddings_.cols() &&
           a.embeddings_ == b.embeddings_;
  }

 private:
  std::string agent_;
  RowMatrixXf embeddings_;
  std::vector<std::string> prompt_ids_;
  Eigen::VectorXd inverse_norms_;
};

using CorpusMap = std::map<std::string, AgentCorpus>;

/// Builds a corpus from provider embeddings (rounded to float32 storage).
AgentCorpus make_corpus(std::string agent, std::span<const Embedding> rows, std::vector<std::string> prompt_ids);

// ---------------------------------------------------------------------------
// Splits

struct SplitRatios {
  double train = 0.8;             // fraction of each agent's prompts
  double finetune_of_train = 0.75;  // fraction of each agent's train prompts
};

struct DatasetSplits {
  std::vector<PromptRecord> train;
  std::vector<PromptRecord> test;
  std::vector<PromptRecord> finetune;
  std::vector<PromptRecord> reward;
  std::uint64_t seed = 0;
};

/// Per-agent seeded shuffle followed by equal per-agent cuts. Throws
/// invalid_configuration when any agent's split sizes are not integral or
/// agents have unequal prompt counts.
DatasetSplits split_dataset(std::span<const PromptRecord> prompts, const SplitRatios& ratios, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Corpus construction and cache

/// Embeds up to per_agent_limit prompts per agent, in input order. Each
/// agent's prompts go to the provider as one batch.
CorpusMap build_agent_corpora(std::span<const PromptRecord> prompts, const TextEmbedder& embedder,
                              std::optional<std::size_t> per_agent_limit = std::nullopt);
CorpusMap build_agent_corpora(std::span<const PromptRecord> prompts, const EmbeddingProviderSpec& provider,
                              std::optional<std::size_t> per_agent_limit = std::nullopt);

inline constexpr char kCacheMagic[8] = {'A', 'R', 'E', 'C', 'C', 'A', 'C', 'H'};
inline constexpr std::uint32_t kCacheVersion = 1;

std::vector<std::uint8_t> serialize_corpus_cache(const CorpusMap& corpora);
CorpusMap parse_corpus_cache(std::span<const std::uint8_t> bytes);

/// Returns the number of bytes written.
std::size_t save_corpus_cache(const CorpusMap& corpora, const std::filesystem::path& path);
CorpusMap load_corpus_cache(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// JSON-lines prompt datasets

/// Reads {"id", "agent", "text"} lines; "id" may be absent (left empty).
std::vector<PromptRecord> read_prompts_jsonl(const std::filesystem::path& path);
std::vector<PromptRecord> parse_prompts_jsonl(std::istream& in, const std::string& source_name = "<stream>");
void write_prompts_jsonl(std::span<const PromptRecord> prompts, const std::filesystem::path& path);
void write_prompts_jsonl(std::span<const PromptRecord> prompts, std::ostream& out);

/// Normalizes whitespace, assigns "<agent>-<n>" ids where missing and checks
/// id uniqueness, non-empty text and (when given) the agent registry.
std::vector<PromptRecord> ingest_prompts(std::span<const PromptRecord> raw,
                                         const std::set<std::string>& registry = {});

}  // namespace agentrec
