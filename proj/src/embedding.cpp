#include "agentrec/embedding.hpp"


#include "agentrec/text.hpp"
#include "http_util.hpp"

namespace agentrec {

Embedding Embedding::from_unit(Eigen::VectorXd values) {
  if (values.size() == 0) throw Error(ErrorCode::invalid_embedding, "embedding has zero dimension");
  if (!values.allFinite()) throw Error(ErrorCode::invalid_embedding, "embedding has non-finite components");
  const double norm = values.norm();
  if (std::abs(norm - 1.0) > kUnitNormTolerance) {
    throw Error(ErrorCode::invalid_embedding,
                "embedding is not unit length (norm " + std::to_string(norm) + ")");
  }
  return Embedding(std::move(values));
}

Embedding normalize(const Eigen::Ref<const Eigen::VectorXd>& raw) {
  if (raw.size() == 0) throw Error(ErrorCode::invalid_embedding, "cannot normalize an empty vector");
  if (!raw.allFinite()) throw Error(ErrorCode::invalid_embedding, "cannot normalize a non-finite vector");
  // stableNorm guards against overflow for very large components.
  const double norm = raw.stableNorm();
  if (!(norm > 0.0)) throw Error(ErrorCode::invalid_embedding, "cannot normalize a zero vector");
  return Embedding(raw / norm);
}

// ---------------------------------------------------------------------------

HashEmbedder::HashEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw Error(ErrorCode::invalid_configuration, "embedding dim must be >= 1");
}

Embedding HashEmbedder::embed_one(const std::string& text) const {
  const auto tokens = tokenize_lower(text);
  if (tokens.empty()) throw Error(ErrorCode::invalid_input, "text has no tokens");

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim_);
  for (const auto& token : tokens) {
    std::uint64_t state = mix64(fnv1a64(token) ^ mix64(seed_));
    std::uint64_t bits = 0;
    for (int j = 0; j < dim_; ++j) {
      if (j % 64 == 0) {
        state = mix64(state);
        bits = state;
      }
      acc[j] += (bits & 1U) ? 1.0 : -1.0;
      bits >>= 1;
    }
  }
  // Opposite-sign tokens can cancel exactly; the zero vector has no direction.
  if (acc.isZero(0.0)) {
    throw Error(ErrorCode::invalid_input, "token vectors cancel to zero for text '" + text + "'");
  }
  return normalize(acc);
}

std::vector<Embedding> HashEmbedder::embed(std::span<const std::string> texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

RemoteEmbedder::RemoteEmbedder(std::string endpoint, int dim, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), dim_(dim), timeout_(timeout) {
  if (dim < 1) throw Error(ErrorCode::invalid_configuration, "embedding dim must be >= 1");
  detail::parse_url(endpoint_);
}

std::vector<Embedding> RemoteEmbedder::embed(std::span<const std::string> texts) const {
  nlohmann::json body;
  body["texts"] = nlohmann::json::array();
  for (const auto& t : texts) body["texts"].push_back(t);

  const nlohmann::json response = detail::post_json(endpoint_, body, timeout_);
  if (!response.is_object() || !response.contains("embeddings") || !response["embeddings"].is_array()) {
    throw Error(ErrorCode::provider_error, "embedding response lacks an 'embeddings' array");
  }
  const auto& rows = response["embeddings"];
  if (rows.size() != texts.size()) {
    throw Error(ErrorCode::provider_error, "embedding response has " + std::to_string(rows.size()) +
                                               " rows for " + std::to_string(texts.size()) + " texts");
  }
  std::vector<Embedding> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(dim_)) {
      throw Error(ErrorCode::provider_error, "embedding row " + std::to_string(i) + " has dim " +
                                                 std::to_string(row.is_array() ? row.size() : 0) +
                                                 ", expected " + std::to_string(dim_));
    }
    Eigen::VectorXd v(dim_);
    for (int j = 0; j < dim_; ++j) {
      if (!row[j].is_number()) {
        throw Error(ErrorCode::provider_error, "embedding row " + std::to_string(i) + " has a non-numeric entry");
      }
      v[j] = row[j].get<double>();
    }
    try {
      out.push_back(normalize(v));
    } catch (const Error& e) {
      throw Error(ErrorCode::provider_error, "embedding row " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

std::unique_ptr<TextEmbedder> make_embedder(const EmbeddingProviderSpec& spec) {
  switch (spec.kind) {
    case ProviderKind::deterministic_hash:
      return std::make_unique<HashEmbedder>(spec.dim, spec.seed);
    case ProviderKind::remote_http:
      return std::make_unique<RemoteEmbedder>(spec.endpoint, spec.dim, spec.timeout);
  }
  throw Error(ErrorCode::invalid_configuration, "unknown provider kind");
}

std::vector<Embedding> embed_texts(const TextEmbedder& embedder, std::span<const std::string> texts) {
  if (texts.empty()) throw Error(ErrorCode::invalid_input, "embed_texts: no texts given");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (normalize_whitespace(texts[i]).empty()) {
      throw Error(ErrorCode::invalid_input, "embed_texts: text " + std::to_string(i) + " is empty");
    }
  }
  auto out = embedder.embed(texts);
  for (const auto& e : out) {
    if (e.dim() != embedder.dim()) {
      throw Error(ErrorCode::provider_error, "provider returned dim " + std::to_string(e.dim()) +
                                                 ", expected " + std::to_string(embedder.dim()));
    }
  }
  return out;
}

std::vector<Embedding> embed_texts(const EmbeddingProviderSpec& spec, std::span<const std::string> texts) {
  return embed_texts(*make_embedder(spec), texts);
}

// ---------------------------------------------------------------------------

PreprocessedPrompt PromptPreprocessor::operator()(const std::string& raw) const {
  std::string normalized = normalize_whitespace(raw);
  if (normalized.empty()) throw Error(ErrorCode::invalid_prompt, "prompt is empty");
  if (spec_.kind == RephraseKind::identity) return {std::move(normalized), false};

  try {
    const nlohmann::json response = detail::post_json(spec_.endpoint, {{"text", raw}}, spec_.timeout);
    if (response.is_object() && response.contains("text") && response["text"].is_string()) {
      std::string rephrased = normalize_whitespace(response["text"].get<std::string>());
      if (!rephrased.empty()) return {std::move(rephrased), true};
    }
  } catch (const Error&) {
    // degrade to identity
  }
  return {std::move(normalized), false};
}

PreprocessedPrompt preprocess_prompt(const std::string& raw, const RephraseSpec& spec) {
  return PromptPreprocessor(spec)(raw);
}

}  // namespace agentrec
