#include "agentrec/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "agentrec/error.hpp"
#include "http_util.hpp"

namespace agentrec {

TokenDistribution::TokenDistribution(Eigen::VectorXd probs) : probs_(std::move(probs)) {
  if (probs_.size() == 0) throw Error(ErrorCode::invalid_input, "empty token distribution");
  if (!probs_.allFinite() || (probs_.array() < 0.0).any()) {
    throw Error(ErrorCode::invalid_input, "token distribution has negative or non-finite entries");
  }
  const double total = probs_.sum();
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::invalid_input, "token distribution sums to " + std::to_string(total));
  }
}

Eigen::Index TokenDistribution::support() const noexcept {
  return (probs_.array() > 0.0).count();
}

void validate(const SamplingConfig& cfg) {
  if (cfg.top_k < 1) throw Error(ErrorCode::invalid_configuration, "top_k must be >= 1");
  if (!(cfg.nucleus_p > 0.0 && cfg.nucleus_p <= 1.0)) {
    throw Error(ErrorCode::invalid_configuration, "nucleus_p must lie in (0, 1]");
  }
  if (!(cfg.repetition_penalty >= 1.0)) {
    throw Error(ErrorCode::invalid_configuration, "repetition_penalty must be >= 1");
  }
  if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature)) {
    throw Error(ErrorCode::invalid_configuration, "temperature must be > 0");
  }
  if (cfg.max_tokens < 1) throw Error(ErrorCode::invalid_configuration, "max_tokens must be >= 1");
}

TokenDistribution apply_temperature(const Eigen::Ref<const Eigen::VectorXd>& logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::invalid_input, "temperature must be a finite value > 0");
  }
  if (logits.size() == 0 || !logits.allFinite()) {
    throw Error(ErrorCode::invalid_input, "logits must be non-empty and finite");
  }
  const Eigen::ArrayXd scaled = logits.array() / temperature;
  Eigen::VectorXd e = (scaled - scaled.maxCoeff()).exp().matrix();
  e /= e.sum();
  return TokenDistribution(std::move(e));
}

Eigen::VectorXd apply_repetition_penalty(const Eigen::Ref<const Eigen::VectorXd>& logits,
                                         std::span<const int> history, double penalty) {
  if (!(penalty >= 1.0)) throw Error(ErrorCode::contract_violation, "repetition penalty must be >= 1");
  Eigen::VectorXd out = logits;
  const std::set<int> seen(history.begin(), history.end());
  for (int t : seen) {
    if (t < 0 || t >= out.size()) {
      throw Error(ErrorCode::contract_violation,
                  "history token " + std::to_string(t) + " outside vocabulary of " + std::to_string(out.size()));
    }
    out[t] = out[t] > 0.0 ? out[t] / penalty : out[t] * penalty;
  }
  return out;
}

namespace {

// Indices sorted by descending probability, lower index first among ties.
std::vector<Eigen::Index> descending_order(const Eigen::VectorXd& p) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(p.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return p[a] > p[b]; });
  return idx;
}

TokenDistribution keep_and_rescale(const Eigen::VectorXd& p, std::span<const Eigen::Index> keep) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p.size());
  double mass = 0.0;
  for (Eigen::Index i : keep) mass += p[i];
  if (!(mass > 0.0)) throw Error(ErrorCode::invalid_input, "no probability mass to keep");
  // whole support kept and already normalized: leave it bit-for-bit alone
  if (static_cast<Eigen::Index>(keep.size()) == (p.array() > 0.0).count() && std::abs(p.sum() - 1.0) <= 1e-12) {
    return TokenDistribution(p);
  }
  for (Eigen::Index i : keep) out[i] = p[i] / mass;
  return TokenDistribution(std::move(out));
}

}  // namespace

TokenDistribution top_k_filter(const TokenDistribution& dist, int k) {
  if (k < 1) throw Error(ErrorCode::invalid_input, "top-k requires k >= 1");
  const auto order = descending_order(dist.probs());
  const std::size_t keep = std::min(order.size(), static_cast<std::size_t>(k));
  return keep_and_rescale(dist.probs(), std::span(order).first(keep));
}

TokenDistribution nucleus_filter(const TokenDistribution& dist, double nucleus_p) {
  if (!(nucleus_p > 0.0 && nucleus_p <= 1.0)) {
    throw Error(ErrorCode::invalid_input, "nucleus_p must lie in (0, 1]");
  }
  const auto order = descending_order(dist.probs());
  double cumulative = 0.0;
  std::size_t keep = 0;
  while (keep < order.size() && dist[order[keep]] > 0.0) {
    cumulative += dist[order[keep]];
    ++keep;
    if (cumulative >= nucleus_p) break;
  }
  return keep_and_rescale(dist.probs(), std::span(order).first(keep));
}

int sample_token(const TokenDistribution& dist, std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double cumulative = 0.0;
  int last_nonzero = 0;
  for (Eigen::Index i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0.0) continue;
    cumulative += dist[i];
    last_nonzero = static_cast<int>(i);
    if (u < cumulative) return last_nonzero;
  }
  return last_nonzero;
}

// ---------------------------------------------------------------------------

namespace {

int find_token(const std::vector<std::string>& vocab, const std::string& token) {
  if (token.empty()) return -1;
  const auto it = std::find(vocab.begin(), vocab.end(), token);
  if (it == vocab.end()) {
    throw Error(ErrorCode::invalid_configuration, "end token '" + token + "' is not in the vocabulary");
  }
  return static_cast<int>(it - vocab.begin());
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

MarkovFixture::MarkovFixture(std::vector<std::string> vocabulary,
                             std::map<std::string, std::vector<double>> rows, std::string end_token)
    : vocab_(std::move(vocabulary)) {
  if (vocab_.empty()) throw Error(ErrorCode::invalid_configuration, "fixture vocabulary is empty");
  end_ = find_token(vocab_, end_token);
  const auto width = vocab_.size();
  auto take_row = [&](const std::string& key) {
    auto it = rows.find(key);
    if (it == rows.end()) {
      throw Error(ErrorCode::invalid_configuration, "fixture has no transition row for '" + key + "'");
    }
    if (it->second.size() != width) {
      throw Error(ErrorCode::invalid_configuration, "fixture row '" + key + "' has " +
                                                        std::to_string(it->second.size()) + " logits, expected " +
                                                        std::to_string(width));
    }
    Eigen::VectorXd v = to_vector(it->second);
    if (!v.allFinite()) throw Error(ErrorCode::invalid_configuration, "fixture row '" + key + "' is not finite");
    return v;
  };
  start_ = take_row(kStartRow);
  rows_.resize(width);
  for (std::size_t t = 0; t < width; ++t) {
    if (static_cast<int>(t) == end_) continue;
    rows_[t] = take_row(vocab_[t]);
  }
}

MarkovFixture MarkovFixture::from_json(const std::string& json_text) {
  try {
    const auto j = nlohmann::json::parse(json_text);
    auto vocab = j.at("vocabulary").get<std::vector<std::string>>();
    auto rows = j.at("transitions").get<std::map<std::string, std::vector<double>>>();
    std::string end = j.value("end", std::string{});
    return MarkovFixture(std::move(vocab), std::move(rows), std::move(end));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_configuration, std::string("malformed fixture: ") + e.what());
  }
}

Eigen::VectorXd MarkovFixture::logits(std::span<const int> history) const {
  if (history.empty()) return start_;
  const int last = history.back();
  if (last < 0 || static_cast<std::size_t>(last) >= rows_.size() || last == end_) {
    throw Error(ErrorCode::contract_violation, "no transition out of token " + std::to_string(last));
  }
  return rows_[static_cast<std::size_t>(last)];
}

RemoteLogitSource::RemoteLogitSource(std::string endpoint, std::vector<std::string> vocabulary,
                                     std::string end_token, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), vocab_(std::move(vocabulary)), timeout_(timeout) {
  if (vocab_.empty()) throw Error(ErrorCode::invalid_configuration, "remote source vocabulary is empty");
  end_ = find_token(vocab_, end_token);
  detail::parse_url(endpoint_);
}

Eigen::VectorXd RemoteLogitSource::logits(std::span<const int> history) const {
  nlohmann::json body;
  body["history"] = nlohmann::json::array();
  for (int t : history) body["history"].push_back(vocab_.at(static_cast<std::size_t>(t)));
  const auto response = detail::post_json(endpoint_, body, timeout_);
  if (!response.is_object() || !response.contains("logits") || !response["logits"].is_array()) {
    throw Error(ErrorCode::provider_error, "logit response lacks a 'logits' array");
  }
  const auto& arr = response["logits"];
  if (arr.size() != vocab_.size()) {
    throw Error(ErrorCode::provider_error, "logit response has " + std::to_string(arr.size()) +
                                               " entries, vocabulary has " + std::to_string(vocab_.size()));
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw Error(ErrorCode::provider_error, "non-numeric logit");
    out[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string join_tokens(const std::vector<std::string>& vocab, std::span<const int> tokens) {
  std::string out;
  for (int t : tokens) {
    if (!out.empty()) out += ' ';
    out += vocab[static_cast<std::size_t>(t)];
  }
  return out;
}

}  // namespace

GeneratedPrompt generate_prompt(const LogitSource& source, const SamplingConfig& cfg) {
  validate(cfg);
  const auto& vocab = source.vocabulary();
  std::mt19937_64 rng(cfg.seed);
  GeneratedPrompt out;

  while (static_cast<int>(out.tokens.size()) < cfg.max_tokens) {
    Eigen::VectorXd raw;
    try {
      raw = source.logits(out.tokens);
    } catch (const Error& e) {
      throw Error(ErrorCode::generation_error, std::string("logit source failed after ") +
                                                   std::to_string(out.tokens.size()) + " tokens (partial: \"" +
                                                   join_tokens(vocab, out.tokens) + "\"): " + e.what());
    }
    if (raw.size() != static_cast<Eigen::Index>(vocab.size())) {
      throw Error(ErrorCode::generation_error, "logit source returned " + std::to_string(raw.size()) +
                                                   " logits for a vocabulary of " + std::to_string(vocab.size()));
    }
    const Eigen::VectorXd penalized = apply_repetition_penalty(raw, out.tokens, cfg.repetition_penalty);
    const TokenDistribution dist =
        nucleus_filter(top_k_filter(apply_temperature(penalized, cfg.temperature), cfg.top_k), cfg.nucleus_p);
    const int next = sample_token(dist, rng);
    if (next == source.end_token()) break;
    out.tokens.push_back(next);
  }
  out.text = join_tokens(vocab, out.tokens);
  return out;
}

}  // namespace agentrec
