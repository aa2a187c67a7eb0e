#pragma once

#include <chrono>
#include <string>

#include "lbc/backend.hpp"

namespace lbc {

struct HttpOptions {
  std::string base_url;  // "http://host:port"
  std::chrono::milliseconds timeout{30000};
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{500};  // doubled after every failed attempt
};

/// Client for this toolkit's POST /v1/logits protocol:
///   request  {"prompt", "candidate_words", "max_generate"}
///   response {"logits": {word: number}, "generated_text": string|null}
///   error    {"error": {"code", "message"}}
/// Transport failures are retried; error responses are not.
class WireBackend final : public LogitBackend {
 public:
  explicit WireBackend(HttpOptions options);

  [[nodiscard]] LogitResponse query(const LogitRequest& request) const override;
  [[nodiscard]] std::string name() const override { return "wire(" + options_.base_url + ")"; }

 private:
  HttpOptions options_;
};

/// Adapter onto OpenAI-compatible POST /v1/completions. Candidate logits are
/// read from the first position's top_logprobs (as " word" or "word"); a
/// candidate outside the returned top list is a contract error.
class OpenAiCompletionsBackend final : public LogitBackend {
 public:
  OpenAiCompletionsBackend(HttpOptions options, std::string model, std::string api_key = {}, int top_logprobs = 20);

  [[nodiscard]] LogitResponse query(const LogitRequest& request) const override;
  [[nodiscard]] std::string name() const override { return "openai(" + options_.base_url + ")"; }

 private:
  HttpOptions options_;
  std::string model_;
  std::string api_key_;
  int top_logprobs_;
};

/// Environment variable consulted for the backend URL when the config has none.
inline constexpr const char* kBackendUrlEnv = "LBC_BACKEND_URL";

}  // namespace lbc
