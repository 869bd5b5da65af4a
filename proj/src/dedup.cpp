#include "agentrec/dedup.hpp"

#include <iostream>
#include <limits>
#include <unordered_map>

#include "agentrec/error.hpp"
#include "agentrec/text.hpp"

namespace agentrec {

ShingleSet shingle(std::string_view text, int width) {
  if (width < 1) throw Error(ErrorCode::invalid_input, "shingle width must be >= 1");
  const auto tokens = tokenize_lower(text);
  if (tokens.empty()) throw Error(ErrorCode::invalid_input, "cannot shingle empty text");

  ShingleSet out;
  out.width = width;
  const std::size_t w = static_cast<std::size_t>(width);
  const std::size_t windows = tokens.size() < w ? 1 : tokens.size() - w + 1;
  const std::size_t span = std::min(w, tokens.size());
  for (std::size_t start = 0; start < windows; ++start) {
    std::string s = tokens[start];
    for (std::size_t j = 1; j < span; ++j) {
      s += ' ';
      s += tokens[start + j];
    }
    out.shingles.insert(std::move(s));
  }
  return out;
}

namespace {

std::uint64_t function_key(std::uint64_t seed, std::size_t i) noexcept {
  return mix64(seed ^ mix64(static_cast<std::uint64_t>(i) + 0x5851f42d4c957f2dULL));
}

}  // namespace

std::uint64_t minhash_function(std::uint64_t seed, std::size_t i, std::string_view shingle) noexcept {
  return mix64(fnv1a64(shingle) ^ function_key(seed, i));
}

MinHashSignature minhash_signature(const ShingleSet& s, int num_hashes, std::uint64_t seed) {
  if (num_hashes < 1) throw Error(ErrorCode::invalid_input, "number of hash functions must be >= 1");
  if (s.shingles.empty()) throw Error(ErrorCode::invalid_input, "cannot sign an empty shingle set");

  MinHashSignature sig;
  sig.seed = seed;
  const auto h = static_cast<std::size_t>(num_hashes);
  std::vector<std::uint64_t> keys(h);
  for (std::size_t i = 0; i < h; ++i) keys[i] = function_key(seed, i);
  sig.mins.assign(h, std::numeric_limits<std::uint64_t>::max());
  for (const auto& sh : s.shingles) {
    const std::uint64_t base = fnv1a64(sh);
    for (std::size_t i = 0; i < h; ++i) sig.mins[i] = std::min(sig.mins[i], mix64(base ^ keys[i]));
  }
  return sig;
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
  if (a.num_hashes() != b.num_hashes() || a.seed != b.seed) {
    throw Error(ErrorCode::contract_violation, "estimate_jaccard: signatures use different (h, seed)");
  }
  if (a.mins.empty()) throw Error(ErrorCode::contract_violation, "estimate_jaccard: empty signatures");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.mins.size(); ++i) agree += a.mins[i] == b.mins[i];
  return static_cast<double>(agree) / static_cast<double>(a.mins.size());
}

namespace {

std::uint64_t band_key(const MinHashSignature& sig, int band, int rows) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(band));
  for (int r = 0; r < rows; ++r) h = mix64(h ^ sig.mins[static_cast<std::size_t>(band * rows + r)]);
  return h;
}

}  // namespace

DedupResult deduplicate(std::span<const PromptRecord> prompts, const DedupParams& params) {
  if (!(params.threshold > 0.0 && params.threshold <= 1.0)) {
    throw Error(ErrorCode::invalid_configuration, "dedup threshold must lie in (0, 1]");
  }
  if (params.bands < 0 || (params.bands > 0 && params.num_hashes % params.bands != 0)) {
    throw Error(ErrorCode::invalid_configuration, "dedup bands must divide the number of hashes");
  }

  DedupResult result;
  std::vector<MinHashSignature> kept_sigs;
  std::vector<std::size_t> kept_index;  // index into result.retained
  const int rows = params.bands > 0 ? params.num_hashes / params.bands : 0;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;

  for (const auto& prompt : prompts) {
    MinHashSignature sig;
    try {
      sig = minhash_signature(shingle(prompt.text, params.width), params.num_hashes, params.seed);
    } catch (const Error& e) {
      std::cerr << "[dedup] retaining '" << prompt.id << "' unchecked: " << e.what() << "\n";
      result.retained.push_back(prompt);
      continue;
    }

    double best = -1.0;
    std::size_t best_at = 0;
    auto consider = [&](std::size_t k) {
      const double est = estimate_jaccard(sig, kept_sigs[k]);
      if (est > best || (est == best && k < best_at)) {
        best = est;
        best_at = k;
      }
    };
    if (params.bands == 0) {
      for (std::size_t k = 0; k < kept_sigs.size(); ++k) consider(k);
    } else {
      for (int b = 0; b < params.bands; ++b) {
        auto it = buckets.find(band_key(sig, b, rows));
        if (it == buckets.end()) continue;
        for (std::size_t k : it->second) consider(k);
      }
    }

    if (best >= params.threshold) {
      result.report.push_back({prompt.id, result.retained[kept_index[best_at]].id, best});
      continue;
    }
    const std::size_t k = kept_sigs.size();
    if (params.bands > 0) {
      for (int b = 0; b < params.bands; ++b) buckets[band_key(sig, b, rows)].push_back(k);
    }
    kept_sigs.push_back(std::move(sig));
    kept_index.push_back(result.retained.size());
    result.retained.push_back(prompt);
  }
  return result;
}

}  // namespace agentrec
