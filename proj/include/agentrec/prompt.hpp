#pragma once

#include <string>

namespace agentrec {

struct PromptRecord {
  std::string id;
  std::string agent;
  std::string text;

  friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

}  // namespace agentrec
