// Deterministic datasets shared by the unit suites and the acceptance run.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agentrec/corpus.hpp"
#include "agentrec/prompt.hpp"

namespace fixtures {

struct LabeledFixture {
  std::vector<agentrec::PromptRecord> corpus;   // prompts embedded into the corpora
  std::vector<agentrec::PromptRecord> heldout;  // labeled queries
};

inline std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

// Four agents with disjoint 30-word topic vocabularies. Every prompt is a
// short shared lead-in plus four distinct topic words.
inline LabeledFixture topic_fixture(std::uint64_t seed, int corpus_per_agent = 100, int heldout_per_agent = 10) {
  static const std::vector<std::string> agents = {"cooking", "finance", "health", "travel"};
  static const std::vector<std::string> leads = {"how do i", "what is the best way to", "can you help me with",
                                                 "tell me about"};
  std::mt19937_64 rng(seed);
  LabeledFixture fx;
  for (const auto& agent : agents) {
    std::vector<std::string> vocab;
    for (int w = 0; w < 30; ++w) vocab.push_back(agent.substr(0, 4) + "word" + std::to_string(w));
    auto make = [&](int i, const std::string& tag) {
      std::vector<std::string> pool = vocab;
      std::string text = leads[draw(rng, leads.size())];
      for (int t = 0; t < 4; ++t) {
        const auto at = draw(rng, pool.size());
        text += " " + pool[at];
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(at));
      }
      return agentrec::PromptRecord{agent + "-" + tag + std::to_string(i), agent, text};
    };
    for (int i = 0; i < corpus_per_agent; ++i) fx.corpus.push_back(make(i, "c"));
    for (int i = 0; i < heldout_per_agent; ++i) fx.heldout.push_back(make(i, "q"));
  }
  return fx;
}

// Adversarial layout. Each query is a long run of tokens unique to it. Its
// own agent's corpus holds many moderate paraphrases (query plus two fresh
// tokens); every other agent's corpus holds one closer near-duplicate
// (query plus one fresh token) among that agent's own paraphrase rows.
inline LabeledFixture adversarial_fixture(int agents = 4, int queries_per_agent = 5, int paraphrases = 40,
                                          int query_tokens = 100) {
  LabeledFixture fx;
  auto query_text = [&](int a, int q) {
    std::string text;
    for (int t = 0; t < query_tokens; ++t) {
      text += (t ? " " : "") + std::string("a") + std::to_string(a) + "q" + std::to_string(q) + "t" +
              std::to_string(t);
    }
    return text;
  };
  for (int a = 0; a < agents; ++a) {
    const std::string agent = "agent" + std::to_string(a);
    for (int q = 0; q < queries_per_agent; ++q) {
      const std::string base = query_text(a, q);
      fx.heldout.push_back({agent + "-q" + std::to_string(q), agent, base});
      for (int r = 0; r < paraphrases; ++r) {
        const std::string tag = "a" + std::to_string(a) + "q" + std::to_string(q) + "p" + std::to_string(r);
        fx.corpus.push_back({agent + "-" + tag, agent, base + " " + tag + "x " + tag + "y"});
      }
    }
    for (int b = 0; b < agents; ++b) {
      if (b == a) continue;
      for (int q = 0; q < queries_per_agent; ++q) {
        const std::string tag = "dup" + std::to_string(a) + "of" + std::to_string(b) + "q" + std::to_string(q);
        fx.corpus.push_back({agent + "-" + tag, agent, query_text(b, q) + " " + tag});
      }
    }
  }
  return fx;
}

// Random unit rows, stored as float.
inline agentrec::CorpusMap random_corpora(int agents, int rows, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  agentrec::CorpusMap out;
  for (int a = 0; a < agents; ++a) {
    agentrec::RowMatrixXf m(rows, dim);
    std::vector<std::string> ids;
    for (int r = 0; r < rows; ++r) {
      Eigen::VectorXd v(dim);
      for (int j = 0; j < dim; ++j) v[j] = gauss(rng);
      m.row(r) = (v / v.norm()).cast<float>().transpose();
      ids.push_back("a" + std::to_string(a) + "-r" + std::to_string(r));
    }
    const std::string agent = "agent" + std::to_string(a);
    out.emplace(agent, agentrec::AgentCorpus(agent, std::move(m), std::move(ids)));
  }
  return out;
}

inline std::vector<agentrec::PromptRecord> uniform_dataset(int agents, int per_agent) {
  std::vector<agentrec::PromptRecord> out;
  for (int a = 0; a < agents; ++a) {
    for (int i = 0; i < per_agent; ++i) {
      const std::string agent = "agent" + std::to_string(a);
      out.push_back({agent + "-" + std::to_string(i), agent, "prompt " + std::to_string(i) + " for " + agent});
    }
  }
  return out;
}

}  // namespace fixtures
