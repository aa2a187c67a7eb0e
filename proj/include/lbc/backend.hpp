#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbc/verbalizer.hpp"

namespace lbc {

struct LogitRequest {
  std::string prompt;
  std::vector<std::string> candidate_words;  // words whose next-token logits are wanted
  std::size_t max_generate = 0;              // > 0 asks for generated text as well
};

struct LogitResponse {
  LogitMap logits;
  std::optional<std::string> generated_text;
};

/// A source of next-token logits. Implementations must tolerate concurrent
/// calls to query().
class LogitBackend {
 public:
  virtual ~LogitBackend() = default;
  [[nodiscard]] virtual LogitResponse query(const LogitRequest& request) const = 0;
  [[nodiscard]] virtual std::string name() const = 0;
};

/// Checks the request preconditions, queries, and verifies that every
/// candidate word came back with a finite logit.
LogitResponse query_logits(const LogitBackend& backend, const LogitRequest& request);

/// Issues the requests with at most `parallelism` in flight. Result i always
/// answers request i. The first failure (by request index) is rethrown.
std::vector<LogitResponse> query_batch(const LogitBackend& backend, std::span<const LogitRequest> requests,
                                       std::size_t parallelism);

/// Text before the first occurrence of `stop` (all of it when absent).
std::string truncate_at_stop(std::string_view text, std::string_view stop);

/// Black-box mode: generate up to `max_generate` tokens and cut at `stop`.
std::string generate_text(const LogitBackend& backend, std::string_view prompt, std::string_view stop = "@@@",
                          std::size_t max_generate = 16);

/// Trimmed, case-sensitive exact match against the class names. nullopt means
/// the output names no class and is scored as incorrect.
std::optional<std::string> parse_generated_label(std::string_view text, std::span<const std::string> class_names);

// Wire format of POST /v1/logits.
nlohmann::json to_json(const LogitRequest& request);
LogitRequest logit_request_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LogitResponse& response);
LogitResponse logit_response_from_json(const nlohmann::json& j);
nlohmann::json error_json(std::string_view code, std::string_view message);

}  // namespace lbc
