#include "agentrec/scoring.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "agentrec/text.hpp"

namespace agentrec {

void validate(const ScoreConfig& cfg) {
  if (cfg.kind == Aggregation::p_means && (!(cfg.p > 0.0) || !std::isfinite(cfg.p))) {
    throw Error(ErrorCode::invalid_configuration, "p-means exponent must be a finite value > 0");
  }
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) {
    throw Error(ErrorCode::invalid_configuration, "epsilon must lie in (0, 1)");
  }
}

ScoreConfig parse_score_config(std::string_view text) {
  ScoreConfig cfg;
  const std::string s = normalize_whitespace(text);
  if (s == "max") {
    cfg.kind = Aggregation::max;
  } else if (s == "arith" || s == "arithmetic" || s == "mean") {
    cfg.kind = Aggregation::arithmetic;
  } else if (s == "geo" || s == "geometric") {
    cfg.kind = Aggregation::geometric;
  } else if (s == "pmeans" || s == "p-means") {
    cfg.kind = Aggregation::p_means;
  } else if (s.starts_with("pmeans:") || s.starts_with("p-means:")) {
    cfg.kind = Aggregation::p_means;
    const std::string value = s.substr(s.find(':') + 1);
    try {
      std::size_t used = 0;
      cfg.p = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_configuration, "bad p-means exponent '" + value + "'");
    }
  } else {
    throw Error(ErrorCode::invalid_configuration, "unknown score function '" + s + "'");
  }
  validate(cfg);
  return cfg;
}

std::string to_string(const ScoreConfig& cfg) {
  switch (cfg.kind) {
    case Aggregation::max: return "max";
    case Aggregation::arithmetic: return "arith";
    case Aggregation::geometric: return "geo";
    case Aggregation::p_means: {
      std::ostringstream out;
      out << "pmeans:" << cfg.p;
      return out.str();
    }
  }
  return "unknown";
}

Eigen::VectorXd similarities(const Embedding& query, const AgentCorpus& corpus) {
  if (query.dim() != corpus.dim()) {
    throw Error(ErrorCode::contract_violation, "query dim " + std::to_string(query.dim()) + " does not match corpus '" +
                                                   corpus.agent() + "' dim " + std::to_string(corpus.dim()));
  }
  const auto& rows = corpus.embeddings();
  const Eigen::VectorXd& q = query.values();
  Eigen::VectorXd sims(rows.rows());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    sims[i] = rows.row(i).cast<double>().dot(q.transpose()) * corpus.inverse_norms()[i];
  }
  return sims.cwiseMax(-1.0).cwiseMin(1.0);
}

// ---------------------------------------------------------------------------

Recommendation rank_agents(const Embedding& query, const CorpusMap& corpora, const ScoreConfig& cfg, int k) {
  if (k < 1) throw Error(ErrorCode::invalid_input, "k must be >= 1");
  if (corpora.empty()) throw Error(ErrorCode::invalid_input, "no agent corpora loaded");
  validate(cfg);

  Recommendation rec;
  rec.k = k;
  rec.ranked.reserve(corpora.size());
  for (const auto& [agent, corpus] : corpora) {
    rec.ranked.push_back({agent, score(similarities(query, corpus), cfg)});
  }
  const auto keep = std::min(rec.ranked.size(), static_cast<std::size_t>(k));
  std::partial_sort(rec.ranked.begin(), rec.ranked.begin() + static_cast<std::ptrdiff_t>(keep), rec.ranked.end(),
                    [](const RankedAgent& a, const RankedAgent& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.agent < b.agent;
                    });
  rec.ranked.resize(keep);
  return rec;
}

Recommender::Recommender(std::shared_ptr<const TextEmbedder> embedder, RephraseSpec rephrase, ScoreConfig cfg)
    : embedder_(std::move(embedder)), preprocess_(std::move(rephrase)), cfg_(cfg) {
  if (!embedder_) throw Error(ErrorCode::invalid_configuration, "recommender needs an embedder");
  validate(cfg_);
}

Recommender::Recommender(const EmbeddingProviderSpec& provider, RephraseSpec rephrase, ScoreConfig cfg)
    : Recommender(std::shared_ptr<const TextEmbedder>(make_embedder(provider)), std::move(rephrase), cfg) {}

Recommendation Recommender::recommend(const std::string& prompt, const CorpusMap& corpora, int k) const {
  const PreprocessedPrompt pre = preprocess_(prompt);
  std::vector<Embedding> query;
  try {
    query = embed_texts(*embedder_, std::span(&pre.text, 1));
  } catch (const Error& e) {
    throw Error(e.code(), std::string("embedding stage: ") + e.what());
  }
  Recommendation rec = rank_agents(query.front(), corpora, cfg_, k);
  rec.rephrased = pre.rephrased;
  return rec;
}

Recommendation recommend(const std::string& prompt, const CorpusMap& corpora, const ScoreConfig& cfg,
                         const RephraseSpec& rephrase, const EmbeddingProviderSpec& provider, int k) {
  return Recommender(provider, rephrase, cfg).recommend(prompt, corpora, k);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Embedding> embed_labeled(const CorpusMap& corpora, std::span<const PromptRecord> labeled,
                                     const TextEmbedder& embedder, std::span<const int> ks) {
  if (labeled.empty()) throw Error(ErrorCode::invalid_input, "no labeled prompts to evaluate");
  if (ks.empty()) throw Error(ErrorCode::invalid_input, "no k values requested");
  for (int k : ks) {
    if (k < 1) throw Error(ErrorCode::invalid_input, "k must be >= 1");
  }
  std::vector<std::string> texts;
  texts.reserve(labeled.size());
  for (const auto& p : labeled) {
    if (!corpora.count(p.agent)) {
      throw Error(ErrorCode::invalid_input, "prompt '" + p.id + "' has unregistered label '" + p.agent + "'");
    }
    texts.push_back(normalize_whitespace(p.text));
  }
  return embed_texts(embedder, texts);
}

EvalReport evaluate_embedded(const CorpusMap& corpora, std::span<const PromptRecord> labeled,
                             std::span<const Embedding> queries, const ScoreConfig& cfg, std::span<const int> ks) {
  const int max_k = *std::max_element(ks.begin(), ks.end());
  EvalReport report;
  for (int k : ks) report.hits[k] = 0;
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    const Recommendation rec = rank_agents(queries[i], corpora, cfg, max_k);
    const auto pos = std::find_if(rec.ranked.begin(), rec.ranked.end(),
                                  [&](const RankedAgent& r) { return r.agent == labeled[i].agent; });
    const auto rank = static_cast<int>(pos - rec.ranked.begin());  // == size when absent
    for (auto& [k, hits] : report.hits) hits += rank < k;
    ++report.confusion[labeled[i].agent][rec.ranked.front().agent];
  }
  report.n_evaluated = labeled.size();
  for (const auto& [k, hits] : report.hits) {
    report.accuracy[k] = static_cast<double>(hits) / static_cast<double>(report.n_evaluated);
  }
  return report;
}

}  // namespace

EvalReport top_k_accuracy(const CorpusMap& corpora, std::span<const PromptRecord> labeled, const ScoreConfig& cfg,
                          const TextEmbedder& embedder, std::span<const int> ks) {
  validate(cfg);
  const auto queries = embed_labeled(corpora, labeled, embedder, ks);
  return evaluate_embedded(corpora, labeled, queries, cfg, ks);
}

std::vector<SweepRow> score_function_sweep(const CorpusMap& corpora, std::span<const PromptRecord> labeled,
                                           const TextEmbedder& embedder, std::span<const ScoreConfig> configs,
                                           std::span<const int> ks) {
  if (configs.empty()) throw Error(ErrorCode::invalid_input, "no score configurations to sweep");
  for (const auto& cfg : configs) validate(cfg);
  const auto queries = embed_labeled(corpora, labeled, embedder, ks);
  std::vector<SweepRow> table;
  table.reserve(configs.size());
  for (const auto& cfg : configs) table.push_back({cfg, evaluate_embedded(corpora, labeled, queries, cfg, ks)});
  return table;
}

LatencyReport latency_benchmark(const CorpusMap& corpora, std::span<const std::string> prompts,
                                const Recommender& recommender, int repetitions, int warmup, int k) {
  if (repetitions < 1) throw Error(ErrorCode::invalid_input, "repetitions must be >= 1");
  if (prompts.empty()) throw Error(ErrorCode::invalid_input, "no prompts to benchmark");
  if (warmup < 0) throw Error(ErrorCode::invalid_input, "warmup must be >= 0");

  for (int w = 0; w < warmup; ++w) {
    for (const auto& p : prompts) recommender.recommend(p, corpora, k);
  }
  std::vector<double> samples;
  samples.reserve(prompts.size() * static_cast<std::size_t>(repetitions));
  for (int r = 0; r < repetitions; ++r) {
    for (const auto& p : prompts) {
      const auto start = std::chrono::steady_clock::now();
      const auto rec = recommender.recommend(p, corpora, k);
      const auto stop = std::chrono::steady_clock::now();
      samples.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
  }
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  // Nearest-rank percentiles.
  auto percentile = [&](double q) {
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
  };
  LatencyReport report;
  report.n = samples.size();
  report.p50_ms = percentile(0.50);
  report.p95_ms = percentile(0.95);
  double total = 0.0;
  for (double s : samples) total += s;
  report.mean_ms = total / static_cast<double>(samples.size());
  return report;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const Recommendation& rec) {
  nlohmann::json ranked = nlohmann::json::array();
  for (const auto& r : rec.ranked) ranked.push_back({{"agent", r.agent}, {"score", r.score}});
  return {{"ranked", std::move(ranked)}, {"k", rec.k}, {"rephrased", rec.rephrased}};
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json acc = nlohmann::json::object();
  for (const auto& [k, a] : report.accuracy) acc[std::to_string(k)] = a;
  nlohmann::json hits = nlohmann::json::object();
  for (const auto& [k, h] : report.hits) hits[std::to_string(k)] = h;
  return {{"accuracy", std::move(acc)},
          {"hits", std::move(hits)},
          {"confusion", report.confusion},
          {"n_evaluated", report.n_evaluated}};
}

nlohmann::json to_json(std::span<const SweepRow> sweep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : sweep) {
    nlohmann::json r;
    r["config"] = to_string(row.config);
    r["report"] = to_json(row.report);
    rows.push_back(std::move(r));
  }
  return rows;
}

nlohmann::json to_json(const LatencyReport& report) {
  return {{"p50_ms", report.p50_ms}, {"p95_ms", report.p95_ms}, {"mean_ms", report.mean_ms}, {"n", report.n}};
}

}  // namespace agentrec
