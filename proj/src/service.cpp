#include "agentrec/service.hpp"

#include <chrono>
#include <csignal>
#include <iostream>

#include <httplib.h>

#include "agentrec/text.hpp"

namespace agentrec {

CorpusSnapshot::CorpusSnapshot(CorpusMap corpora)
    : current_(std::make_shared<const CorpusMap>(std::move(corpora))) {}

std::shared_ptr<const CorpusMap> CorpusSnapshot::get() const {
  std::lock_guard lock(mu_);
  return current_;
}

void CorpusSnapshot::publish(std::shared_ptr<const CorpusMap> next) {
  std::lock_guard lock(mu_);
  current_ = std::move(next);
}

// ---------------------------------------------------------------------------

Engine::Engine(const EngineConfig& config, CorpusMap corpora)
    : Engine(config, std::move(corpora), std::shared_ptr<const TextEmbedder>(make_embedder(config.provider))) {}

Engine::Engine(const EngineConfig& config, CorpusMap corpora, std::shared_ptr<const TextEmbedder> embedder)
    : config_(config), recommender_(std::move(embedder), config.rephrase, config.score), snapshot_(std::move(corpora)) {
  validate(config_);
  for (const auto& [agent, corpus] : *snapshot_.get()) {
    if (corpus.dim() != recommender_.embedder().dim()) {
      throw Error(ErrorCode::invalid_configuration, "corpus '" + agent + "' has dim " +
                                                        std::to_string(corpus.dim()) + " but the provider produces " +
                                                        std::to_string(recommender_.embedder().dim()));
    }
  }
  admin_thread_ = std::thread([this] { admin_loop(); });
}

Engine::~Engine() {
  {
    std::lock_guard lock(admin_mu_);
    stopping_ = true;
  }
  admin_cv_.notify_all();
  if (admin_thread_.joinable()) admin_thread_.join();
}

Recommendation Engine::recommend(const std::string& prompt, std::optional<int> k) const {
  const auto corpora = snapshot_.get();  // one snapshot for the whole request
  return recommender_.recommend(prompt, *corpora, k.value_or(config_.default_k));
}

void Engine::admin_loop() {
  for (;;) {
    std::packaged_task<void()> task;
    {
      std::unique_lock lock(admin_mu_);
      admin_cv_.wait(lock, [&] { return stopping_ || !admin_queue_.empty(); });
      if (admin_queue_.empty()) return;
      task = std::move(admin_queue_.front());
      admin_queue_.pop_front();
      admin_busy_ = true;
    }
    task();
    {
      std::lock_guard lock(admin_mu_);
      admin_busy_ = false;
    }
    idle_cv_.notify_all();
  }
}

std::future<void> Engine::enqueue(std::function<void()> fn) {
  std::packaged_task<void()> task(std::move(fn));
  auto fut = task.get_future();
  {
    std::lock_guard lock(admin_mu_);
    admin_queue_.push_back(std::move(task));
  }
  admin_cv_.notify_all();
  return fut;
}

std::future<void> Engine::enqueue_append(const std::string& agent, std::vector<std::string> prompts) {
  if (agent.empty()) throw Error(ErrorCode::invalid_input, "agent id is empty");
  if (prompts.empty()) throw Error(ErrorCode::invalid_input, "no prompts given");
  for (const auto& p : prompts) {
    if (normalize_whitespace(p).empty()) throw Error(ErrorCode::invalid_input, "prompt text is empty");
  }
  return enqueue([this, agent, prompts = std::move(prompts)] {
    std::vector<Embedding> rows;
    try {
      rows = embed_texts(recommender_.embedder(), prompts);
    } catch (const Error& e) {
      std::cerr << "[service] rebuild of '" << agent << "' failed: " << e.what() << "\n";
      throw;
    }
    const auto current = snapshot_.get();
    auto next = std::make_shared<CorpusMap>(*current);

    const auto dim = static_cast<Eigen::Index>(recommender_.embedder().dim());
    RowMatrixXf matrix;
    std::vector<std::string> ids;
    if (auto it = next->find(agent); it != next->end()) {
      matrix = it->second.embeddings();
      ids = it->second.prompt_ids();
      next->erase(it);
    } else {
      matrix.resize(0, dim);
    }
    const Eigen::Index old_rows = matrix.rows();
    matrix.conservativeResize(old_rows + static_cast<Eigen::Index>(rows.size()), dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      matrix.row(old_rows + static_cast<Eigen::Index>(i)) = rows[i].values().cast<float>().transpose();
      ids.push_back(agent + "-admin-" + std::to_string(admin_seq_++));
    }
    next->emplace(agent, AgentCorpus(agent, std::move(matrix), std::move(ids)));
    snapshot_.publish(std::move(next));
  });
}

std::future<void> Engine::enqueue_delete(const std::string& agent) {
  return enqueue([this, agent] {
    const auto current = snapshot_.get();
    if (!current->count(agent)) throw Error(ErrorCode::not_found, "unknown agent '" + agent + "'");
    auto next = std::make_shared<CorpusMap>(*current);
    next->erase(agent);
    snapshot_.publish(std::move(next));
  });
}

void Engine::wait_admin_idle() {
  std::unique_lock lock(admin_mu_);
  idle_cv_.wait(lock, [&] { return admin_queue_.empty() && !admin_busy_; });
}

// ---------------------------------------------------------------------------

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input:
    case ErrorCode::invalid_prompt:
    case ErrorCode::invalid_embedding:
    case ErrorCode::contract_violation:
      return 400;
    case ErrorCode::not_found:
      return 404;
    case ErrorCode::provider_error:
      return 502;
    default:
      return 500;
  }
}

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

void send_error(httplib::Response& res, const Error& e) {
  send_error(res, http_status(e.code()), code_name(e.code()), e.what());
}

std::optional<nlohmann::json> parse_body(const httplib::Request& req, httplib::Response& res) {
  try {
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) {
      send_error(res, 400, "invalid_request", "request body must be a JSON object");
      return std::nullopt;
    }
    return j;
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, "invalid_request", std::string("malformed JSON: ") + e.what());
    return std::nullopt;
  }
}

}  // namespace

Service::Service(std::shared_ptr<Engine> engine)
    : engine_(std::move(engine)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

Service::~Service() { stop(); }

void Service::install_routes() {
  auto& srv = *server_;

  srv.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"agents", engine_->corpora()->size()}});
  });

  srv.Get("/v1/agents", [this](const httplib::Request&, httplib::Response& res) {
    nlohmann::json agents = nlohmann::json::array();
    for (const auto& [id, corpus] : *engine_->corpora()) {
      agents.push_back({{"id", id}, {"corpus_size", corpus.size()}});
    }
    send_json(res, 200, {{"agents", std::move(agents)}});
  });

  srv.Post("/v1/recommend", [this](const httplib::Request& req, httplib::Response& res) {
    const auto start = std::chrono::steady_clock::now();
    auto body = parse_body(req, res);
    if (!body) return;
    if (!body->contains("prompt") || !(*body)["prompt"].is_string()) {
      send_error(res, 400, "invalid_prompt", "\"prompt\" must be a string");
      return;
    }
    std::optional<int> k;
    if (body->contains("k") && !(*body)["k"].is_null()) {
      const auto& jk = (*body)["k"];
      if (!jk.is_number_integer() || jk.get<long long>() < 1 || jk.get<long long>() > 1'000'000) {
        send_error(res, 400, "invalid_input", "\"k\" must be a positive integer");
        return;
      }
      k = jk.get<int>();
    }
    try {
      const Recommendation rec = engine_->recommend((*body)["prompt"].get<std::string>(), k);
      const double elapsed =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      nlohmann::json out = to_json(rec);
      out.erase("k");
      out["elapsed_ms"] = elapsed;
      send_json(res, 200, out);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::invalid_input && engine_->corpora()->empty()) {
        send_error(res, 503, "no_corpora", e.what());
      } else {
        send_error(res, e);
      }
    }
  });

  srv.Post(R"(/v1/corpus/([^/]+)/prompts)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string agent = req.matches[1].str();
    auto body = parse_body(req, res);
    if (!body) return;
    if (!body->contains("prompts") || !(*body)["prompts"].is_array()) {
      send_error(res, 400, "invalid_input", "\"prompts\" must be an array of strings");
      return;
    }
    std::vector<std::string> prompts;
    for (const auto& p : (*body)["prompts"]) {
      if (!p.is_string()) {
        send_error(res, 400, "invalid_input", "\"prompts\" must be an array of strings");
        return;
      }
      prompts.push_back(p.get<std::string>());
    }
    try {
      const auto count = prompts.size();
      engine_->enqueue_append(agent, std::move(prompts));
      send_json(res, 202, {{"status", "accepted"}, {"agent", agent}, {"queued", count}});
    } catch (const Error& e) {
      send_error(res, e);
    }
  });

  srv.Delete(R"(/v1/corpus/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string agent = req.matches[1].str();
    try {
      engine_->enqueue_delete(agent).get();
      send_json(res, 200, {{"status", "deleted"}, {"agent", agent}});
    } catch (const Error& e) {
      send_error(res, e);
    }
  });

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_error(res, 500, "internal_error", e.what());
    } catch (...) {
      send_error(res, 500, "internal_error", "unknown error");
    }
  });
}

int Service::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    throw Error(ErrorCode::io_error, "cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void Service::listen() { server_->listen_after_bind(); }

int Service::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  thread_ = std::thread([this] { listen(); });
  server_->wait_until_ready();
  return bound;
}

void Service::stop_async() {
  if (server_) server_->stop();
}

void Service::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::pair<std::string, int> parse_listen_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw Error(ErrorCode::invalid_configuration, "listen address must be host:port, got '" + address + "'");
  }
  const std::string port_text = address.substr(colon + 1);
  int port = -1;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    if (used != port_text.size()) port = -1;
  } catch (const std::exception&) {
  }
  if (port < 0 || port > 65535) {
    throw Error(ErrorCode::invalid_configuration, "bad port in listen address '" + address + "'");
  }
  return {address.substr(0, colon), port};
}

namespace {

Service* g_running = nullptr;

extern "C" void handle_stop_signal(int) {
  if (g_running) g_running->stop_async();
}

}  // namespace

int run_service(const EngineConfig& config) {
  try {
    validate(config);
    if (config.cache_path.empty()) throw Error(ErrorCode::invalid_configuration, "cache_path is required to serve");
    CorpusMap corpora = load_corpus_cache(config.cache_path);
    auto engine = std::make_shared<Engine>(config, std::move(corpora));
    Service service(engine);
    const auto [host, port] = parse_listen_address(config.listen_address);
    const int bound = service.bind(host, port);
    std::cerr << "[service] " << engine->corpora()->size() << " agents loaded; listening on " << host << ":" << bound
              << "\n";
    g_running = &service;
    std::signal(SIGINT, handle_stop_signal);
    std::signal(SIGTERM, handle_stop_signal);
    service.listen();
    g_running = nullptr;
    return 0;
  } catch (const Error& e) {
    std::cerr << "error [" << code_name(e.code()) << "]: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace agentrec
