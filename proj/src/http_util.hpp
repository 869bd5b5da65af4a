#pragma once

#include <chrono>
#include <string>

#include <nlohmann/json.hpp>

namespace agentrec::detail {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

// Accepts http://host[:port][/path]. Throws invalid_configuration otherwise.
ParsedUrl parse_url(const std::string& url);

// POSTs a JSON body and returns the parsed JSON response. Any transport
// failure, non-2xx status or malformed body throws provider_error.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         std::chrono::milliseconds timeout);

}  // namespace agentrec::detail
