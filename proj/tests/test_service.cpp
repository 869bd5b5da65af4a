#include <atomic>
#include <thread>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "agentrec/error.hpp"
#include "agentrec/config.hpp"
#include "agentrec/service.hpp"
#include "support/fixtures.hpp"

#include <httplib.h>

using namespace agentrec;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no agentrec::Error thrown";
  return ErrorCode::not_found;
}

EngineConfig small_config() {
  EngineConfig cfg;
  cfg.provider.dim = 128;
  cfg.provider.seed = 5;
  cfg.default_k = 2;
  return cfg;
}

CorpusMap topic_corpora(const EngineConfig& cfg) {
  return build_agent_corpora(fixtures::topic_fixture(3, 30, 0).corpus, cfg.provider);
}

struct Running {
  explicit Running(std::shared_ptr<Engine> e) : service(std::move(e)) {
    port = service.start("127.0.0.1", 0);
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(10, 0);
    return c;
  }
  Service service;
  int port = 0;
};

json post(httplib::Client& c, const std::string& path, const json& body, int expect_status) {
  const auto res = c.Post(path, body.dump(), "application/json");
  EXPECT_TRUE(res);
  if (!res) return {};
  EXPECT_EQ(res->status, expect_status) << res->body;
  return json::parse(res->body);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

TEST(Config, DefaultsAndKeys) {
  EngineConfig cfg;
  EXPECT_EQ(cfg.provider.dim, 768);
  EXPECT_EQ(cfg.score.kind, Aggregation::p_means);
  EXPECT_EQ(cfg.score.p, 200.0);
  EXPECT_EQ(cfg.default_k, 3);
  EXPECT_EQ(config_keys().size(), 14U);
  EXPECT_EQ(env_var_name("provider.timeout_ms"), "AGENTREC_PROVIDER_TIMEOUT_MS");
  EXPECT_EQ(env_var_name("default_k"), "AGENTREC_DEFAULT_K");
}

TEST(Config, FileTextWithSections) {
  EngineConfig cfg;
  apply_config_text(cfg, R"(
# engine settings
cache_path = "/var/lib/agentrec/cache.bin"
default_k = 5

[provider]
kind = "deterministic-hash"
dim = 384      # smaller for tests
seed = 18446744073709551615

[score]
kind = "geo"
epsilon = 1e-4
)");
  EXPECT_EQ(cfg.cache_path, "/var/lib/agentrec/cache.bin");
  EXPECT_EQ(cfg.default_k, 5);
  EXPECT_EQ(cfg.provider.dim, 384);
  EXPECT_EQ(cfg.provider.seed, 18446744073709551615ULL);
  EXPECT_EQ(cfg.score.kind, Aggregation::geometric);
  EXPECT_EQ(cfg.score.epsilon, 1e-4);
  validate(cfg);
}

TEST(Config, Errors) {
  EngineConfig cfg;
  EXPECT_EQ(code_of([&] { apply_config_text(cfg, "nope = 1"); }), ErrorCode::invalid_configuration);
  EXPECT_EQ(code_of([&] { apply_config_text(cfg, "default_k"); }), ErrorCode::invalid_configuration);
  EXPECT_EQ(code_of([&] { apply_config_text(cfg, "provider.dim = ten"); }), ErrorCode::invalid_configuration);
  EXPECT_EQ(code_of([&] { apply_config_text(cfg, "cache_path = \"unterminated"); }),
            ErrorCode::invalid_configuration);
  EXPECT_EQ(code_of([&] { apply_config_file(cfg, "/nonexistent/agentrec.toml"); }), ErrorCode::io_error);
  cfg = {};
  cfg.provider.kind = ProviderKind::remote_http;
  EXPECT_EQ(code_of([&] { validate(cfg); }), ErrorCode::invalid_configuration);
  cfg = {};
  cfg.default_k = 0;
  EXPECT_EQ(code_of([&] { validate(cfg); }), ErrorCode::invalid_configuration);
}

TEST(Config, EnvironmentOverridesFile) {
  EngineConfig cfg;
  apply_config_text(cfg, "default_k = 4\nscore.kind = max\n");
  const std::map<std::string, std::string> env = {{"AGENTREC_DEFAULT_K", "7"},
                                                  {"AGENTREC_PROVIDER_ENDPOINT", "http://10.0.0.1:9000/embed"}};
  apply_env_overrides(cfg, [&](const std::string& name) -> std::optional<std::string> {
    const auto it = env.find(name);
    if (it == env.end()) return std::nullopt;
    return it->second;
  });
  EXPECT_EQ(cfg.default_k, 7);
  EXPECT_EQ(cfg.score.kind, Aggregation::max);
  EXPECT_EQ(cfg.provider.endpoint, "http://10.0.0.1:9000/embed");
}

TEST(Config, ListenAddress) {
  EXPECT_EQ(parse_listen_address("127.0.0.1:8080"), (std::pair<std::string, int>{"127.0.0.1", 8080}));
  EXPECT_EQ(parse_listen_address("0.0.0.0:0").second, 0);
  EXPECT_EQ(code_of([] { parse_listen_address("localhost"); }), ErrorCode::invalid_configuration);
  EXPECT_EQ(code_of([] { parse_listen_address("h:99999"); }), ErrorCode::invalid_configuration);
}

// ---------------------------------------------------------------------------
// Engine

TEST(Engine, DimensionMismatchRejected) {
  auto cfg = small_config();
  auto corpora = topic_corpora(cfg);
  cfg.provider.dim = 64;
  EXPECT_EQ(code_of([&] { Engine(cfg, corpora); }), ErrorCode::invalid_configuration);
}

TEST(Engine, AppendAndDelete) {
  const auto cfg = small_config();
  Engine engine(cfg, topic_corpora(cfg));
  const auto before = engine.corpora();
  engine.enqueue_append("cooking", {"extra prompt about cookword1", "another cookword2 prompt"}).get();
  EXPECT_EQ(engine.corpora()->at("cooking").size(), 32);
  EXPECT_EQ(before->at("cooking").size(), 30);  // old snapshot untouched
  engine.enqueue_append("newagent", {"brand new topic"}).get();
  EXPECT_EQ(engine.corpora()->at("newagent").size(), 1);
  engine.enqueue_delete("newagent").get();
  EXPECT_EQ(engine.corpora()->count("newagent"), 0U);
  EXPECT_EQ(code_of([&] { engine.enqueue_delete("ghost").get(); }), ErrorCode::not_found);
  EXPECT_EQ(code_of([&] { engine.enqueue_append("cooking", {"   "}).get(); }), ErrorCode::invalid_input);
  EXPECT_EQ(engine.corpora()->at("cooking").size(), 32);
}

// ---------------------------------------------------------------------------
// HTTP

TEST(Service, HealthAndAgents) {
  const auto cfg = small_config();
  Running srv(std::make_shared<Engine>(cfg, topic_corpora(cfg)));
  auto c = srv.client();
  const auto health = c.Get("/healthz");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body), json::parse(R"({"status":"ok","agents":4})"));
  const auto agents = json::parse(c.Get("/v1/agents")->body);
  ASSERT_EQ(agents["agents"].size(), 4U);
  EXPECT_EQ(agents["agents"][0], json::parse(R"({"id":"cooking","corpus_size":30})"));
}

TEST(Service, ValidationErrors) {
  const auto cfg = small_config();
  Running srv(std::make_shared<Engine>(cfg, topic_corpora(cfg)));
  auto c = srv.client();
  EXPECT_EQ(post(c, "/v1/recommend", {{"prompt", ""}}, 400)["error"]["code"], "invalid_prompt");
  EXPECT_EQ(post(c, "/v1/recommend", {{"prompt", " \n "}}, 400)["error"]["code"], "invalid_prompt");
  EXPECT_EQ(post(c, "/v1/recommend", {{"k", 1}}, 400)["error"]["code"], "invalid_prompt");
  EXPECT_EQ(post(c, "/v1/recommend", {{"prompt", "x"}, {"k", 0}}, 400)["error"]["code"], "invalid_input");
  const auto bad = c.Post("/v1/recommend", "{not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(json::parse(bad->body)["error"]["code"], "invalid_request");
  EXPECT_EQ(post(c, "/v1/corpus/cooking/prompts", {{"prompts", "nope"}}, 400)["error"]["code"], "invalid_input");
  const auto missing = c.Delete("/v1/corpus/ghost");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(json::parse(missing->body)["error"]["code"], "not_found");
}

TEST(Service, ResponseEqualsLibraryResult) {
  const auto cfg = small_config();
  const auto corpora = topic_corpora(cfg);
  Running srv(std::make_shared<Engine>(cfg, corpora));
  auto c = srv.client();
  const Recommender lib(cfg.provider, cfg.rephrase, cfg.score);
  for (const auto& p : fixtures::topic_fixture(99, 0, 5).heldout) {
    for (int k : {1, 2, 4, 9}) {
      const auto body = post(c, "/v1/recommend", {{"prompt", p.text}, {"k", k}}, 200);
      const auto expect = to_json(lib.recommend(p.text, corpora, k));
      EXPECT_EQ(body["ranked"].dump(), expect["ranked"].dump());
      EXPECT_EQ(body["rephrased"], false);
      EXPECT_TRUE(body["elapsed_ms"].is_number());
      EXPECT_FALSE(body.contains("k"));
    }
  }
  // default k from config
  const auto dflt = post(c, "/v1/recommend", {{"prompt", "cookword3 cookword4"}}, 200);
  EXPECT_EQ(dflt["ranked"].size(), 2U);
}

TEST(Service, ConcurrentRequestsMatchSerial) {
  const auto cfg = small_config();
  Running srv(std::make_shared<Engine>(cfg, topic_corpora(cfg)));
  const auto prompts = fixtures::topic_fixture(7, 0, 3).heldout;
  std::vector<std::string> serial;
  {
    auto c = srv.client();
    for (const auto& p : prompts) serial.push_back(post(c, "/v1/recommend", {{"prompt", p.text}}, 200)["ranked"].dump());
  }
  std::atomic<int> mismatches{0};
  std::vector<std::thread> workers;
  for (int t = 0; t < 6; ++t) {
    workers.emplace_back([&, t] {
      auto c = srv.client();
      for (int round = 0; round < 5; ++round) {
        for (std::size_t i = 0; i < prompts.size(); ++i) {
          const std::size_t at = (i + static_cast<std::size_t>(t)) % prompts.size();
          const auto res = c.Post("/v1/recommend", json{{"prompt", prompts[at].text}}.dump(), "application/json");
          if (!res || json::parse(res->body)["ranked"].dump() != serial[at]) ++mismatches;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  EXPECT_EQ(mismatches.load(), 0);
}

TEST(Service, AdminRebuildIsAtomic) {
  const auto cfg = small_config();
  const auto corpora = topic_corpora(cfg);
  auto engine = std::make_shared<Engine>(cfg, corpora);
  Running srv(engine);
  const std::string query = "how do i cookword1 cookword2";
  const std::vector<std::string> added = {query, "tell me about cookword1 cookword2 cookword9"};

  // the two admissible answers: entirely old corpora or entirely new
  const Recommender lib(cfg.provider, cfg.rephrase, cfg.score);
  const auto old_ranked = to_json(lib.recommend(query, corpora, 4))["ranked"].dump();
  Engine preview(cfg, corpora);
  preview.enqueue_append("travel", added).get();
  const auto new_ranked = to_json(lib.recommend(query, *preview.corpora(), 4))["ranked"].dump();
  ASSERT_NE(old_ranked, new_ranked);

  std::atomic<bool> done{false};
  std::atomic<int> bad{0}, seen_new{0};
  std::thread reader([&] {
    auto c = srv.client();
    while (!done) {
      const auto res = c.Post("/v1/recommend", json{{"prompt", query}, {"k", 4}}.dump(), "application/json");
      if (!res) {
        ++bad;
        continue;
      }
      const auto ranked = json::parse(res->body)["ranked"].dump();
      if (ranked == new_ranked) {
        ++seen_new;
      } else if (ranked != old_ranked) {
        ++bad;
      }
    }
  });
  auto c = srv.client();
  const auto accepted = post(c, "/v1/corpus/travel/prompts", {{"prompts", added}}, 202);
  EXPECT_EQ(accepted["queued"], 2);
  engine->wait_admin_idle();
  while (seen_new.load() == 0) std::this_thread::yield();
  done = true;
  reader.join();
  EXPECT_EQ(bad.load(), 0);
  EXPECT_EQ(engine->corpora()->at("travel").size(), 32);

  const auto del = c.Delete("/v1/corpus/travel");
  ASSERT_TRUE(del);
  EXPECT_EQ(del->status, 200);
  EXPECT_EQ(json::parse(c.Get("/healthz")->body)["agents"], 3);
}

TEST(Service, NoCorporaIsUnavailable) {
  const auto cfg = small_config();
  auto engine = std::make_shared<Engine>(cfg, topic_corpora(cfg));
  Running srv(engine);
  auto c = srv.client();
  for (const char* a : {"cooking", "finance", "health", "travel"}) {
    EXPECT_EQ(c.Delete(std::string("/v1/corpus/") + a)->status, 200);
  }
  EXPECT_EQ(post(c, "/v1/recommend", {{"prompt", "anything"}}, 503)["error"]["code"], "no_corpora");
}
