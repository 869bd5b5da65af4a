#include "http_util.hpp"

#include <regex>

#include <httplib.h>

#include "agentrec/error.hpp"

namespace agentrec::detail {

ParsedUrl parse_url(const std::string& url) {
  static const std::regex re(R"(^(http://[^/\s]+)(/[^\s]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw Error(ErrorCode::invalid_configuration, "unsupported endpoint URL: '" + url + "'");
  }
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         std::chrono::milliseconds timeout) {
  const ParsedUrl target = parse_url(url);
  httplib::Client client(target.origin);
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  auto res = client.Post(target.path, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::provider_error,
                "POST " + url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::provider_error,
                "POST " + url + " returned status " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::provider_error, "POST " + url + " returned malformed JSON: " + e.what());
  }
}

}  // namespace agentrec::detail
