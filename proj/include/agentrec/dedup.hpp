#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "agentrec/prompt.hpp"

namespace agentrec {

struct ShingleSet {
  std::set<std::string> shingles;
  int width = 3;
};

struct MinHashSignature {
  std::vector<std::uint64_t> mins;
  std::uint64_t seed = 0;

  std::size_t num_hashes() const noexcept { return mins.size(); }
  friend bool operator==(const MinHashSignature&, const MinHashSignature&) = default;
};

/// Word w-shingles of the lowercased text. Texts shorter than w tokens yield
/// one shingle holding every token.
ShingleSet shingle(std::string_view text, int width);

/// Value of the i-th seeded hash function on a shingle.
std::uint64_t minhash_function(std::uint64_t seed, std::size_t i, std::string_view shingle) noexcept;

MinHashSignature minhash_signature(const ShingleSet& s, int num_hashes, std::uint64_t seed);

/// Fraction of agreeing signature slots.
double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

struct DedupParams {
  int width = 3;
  int num_hashes = 128;
  std::uint64_t seed = 0;
  double threshold = 0.8;
  // LSH banding for large inputs; 0 means the exhaustive pairwise scan.
  // Must divide num_hashes when set.
  int bands = 0;
};

struct DedupDrop {
  std::string dropped;
  std::string kept;
  double estimate = 0.0;

  friend bool operator==(const DedupDrop&, const DedupDrop&) = default;
};

struct DedupResult {
  std::vector<PromptRecord> retained;
  std::vector<DedupDrop> report;
};

/// First occurrence wins: a prompt is dropped when its estimated Jaccard
/// against any already-retained prompt reaches the threshold. Prompts that
/// cannot be shingled are retained as-is and logged.
DedupResult deduplicate(std::span<const PromptRecord> prompts, const DedupParams& params = {});

}  // namespace agentrec
