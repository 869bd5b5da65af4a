#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentrec/config.hpp"
#include "agentrec/corpus.hpp"
#include "agentrec/scoring.hpp"

namespace httplib {
class Server;
}

namespace agentrec {

/// Immutable corpora published by atomic pointer swap.
class CorpusSnapshot {
 public:
  explicit CorpusSnapshot(CorpusMap corpora);

  std::shared_ptr<const CorpusMap> get() const;
  void publish(std::shared_ptr<const CorpusMap> next);

 private:
  mutable std::mutex mu_;  // guards the pointer only, never held during scoring
  std::shared_ptr<const CorpusMap> current_;
};

/// The routing engine behind the HTTP service: a recommender over swappable
/// corpora plus a serialized admin queue for rebuilds.
class Engine {
 public:
  Engine(const EngineConfig& config, CorpusMap corpora);
  Engine(const EngineConfig& config, CorpusMap corpora, std::shared_ptr<const TextEmbedder> embedder);
  ~Engine();

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  Recommendation recommend(const std::string& prompt, std::optional<int> k = std::nullopt) const;
  std::shared_ptr<const CorpusMap> corpora() const { return snapshot_.get(); }
  const EngineConfig& config() const noexcept { return config_; }

  /// Queues a rebuild that embeds the prompts and appends them to the
  /// agent's corpus (creating it if needed), then swaps the corpora.
  std::future<void> enqueue_append(const std::string& agent, std::vector<std::string> prompts);
  /// Queues removal of an agent. The future throws not_found for unknown agents.
  std::future<void> enqueue_delete(const std::string& agent);
  /// Blocks until every queued admin task has finished.
  void wait_admin_idle();

 private:
  void admin_loop();
  std::future<void> enqueue(std::function<void()> task);

  EngineConfig config_;
  Recommender recommender_;
  CorpusSnapshot snapshot_;
  std::size_t admin_seq_ = 0;

  std::mutex admin_mu_;
  std::condition_variable admin_cv_;
  std::condition_variable idle_cv_;
  std::deque<std::packaged_task<void()>> admin_queue_;
  bool admin_busy_ = false;
  bool stopping_ = false;
  std::thread admin_thread_;
};

/// HTTP/JSON front end:
///   GET    /healthz
///   GET    /v1/agents
///   POST   /v1/recommend                {prompt, k?}
///   POST   /v1/corpus/{agent}/prompts   {prompts: [...]}   -> 202, rebuild queued
///   DELETE /v1/corpus/{agent}
class Service {
 public:
  explicit Service(std::shared_ptr<Engine> engine);
  ~Service();

  /// Binds host:port (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  /// bind + listen on a background thread; returns the bound port.
  int start(const std::string& host, int port);
  void stop();
  /// Asks the server loop to exit without joining (signal-handler use).
  void stop_async();

  Engine& engine() noexcept { return *engine_; }

 private:
  void install_routes();

  std::shared_ptr<Engine> engine_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

/// Parses "host:port".
std::pair<std::string, int> parse_listen_address(const std::string& address);

/// Loads the cache named by config, binds and serves until interrupted.
/// Returns a process exit code.
int run_service(const EngineConfig& config);

}  // namespace agentrec
