#include "lbc/backend.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "lbc/error.hpp"

namespace lbc {

namespace {
constexpr const char* kModule = "llm_backend";
}

LogitResponse query_logits(const LogitBackend& backend, const LogitRequest& request) {
  if (request.prompt.empty()) {
    throw Error(ErrorKind::contract, kModule, "query_logits", "prompt must be non-empty");
  }
  if (request.candidate_words.empty() && request.max_generate == 0) {
    throw Error(ErrorKind::contract, kModule, "query_logits", "request asks for neither logits nor text");
  }
  auto response = backend.query(request);
  for (const auto& w : request.candidate_words) {
    const auto it = response.logits.find(w);
    if (it == response.logits.end()) {
      throw Error(ErrorKind::contract, kModule, "query_logits",
                  backend.name() + " returned no logit for candidate '" + w + "'");
    }
    if (!std::isfinite(it->second)) {
      throw Error(ErrorKind::contract, kModule, "query_logits",
                  backend.name() + " returned a non-finite logit for '" + w + "'");
    }
  }
  if (request.max_generate > 0 && !response.generated_text) {
    throw Error(ErrorKind::contract, kModule, "query_logits", backend.name() + " returned no generated text");
  }
  return response;
}

std::vector<LogitResponse> query_batch(const LogitBackend& backend, std::span<const LogitRequest> requests,
                                       std::size_t parallelism) {
  std::vector<LogitResponse> results(requests.size());
  std::vector<std::exception_ptr> errors(requests.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(parallelism, requests.size()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) {
      try {
        results[i] = query_logits(backend, requests[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::string truncate_at_stop(std::string_view text, std::string_view stop) {
  if (stop.empty()) return std::string(text);
  return std::string(text.substr(0, text.find(stop)));
}

std::string generate_text(const LogitBackend& backend, std::string_view prompt, std::string_view stop,
                          std::size_t max_generate) {
  if (stop.empty()) throw Error(ErrorKind::config, kModule, "generate_text", "stop sequence must be non-empty");
  LogitRequest req{std::string(prompt), {}, std::max<std::size_t>(1, max_generate)};
  const auto response = query_logits(backend, req);
  return truncate_at_stop(*response.generated_text, stop);
}

std::optional<std::string> parse_generated_label(std::string_view text, std::span<const std::string> class_names) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return std::nullopt;
  const auto last = text.find_last_not_of(" \t\r\n");
  const auto trimmed = text.substr(first, last - first + 1);
  for (const auto& name : class_names) {
    if (name == trimmed) return name;
  }
  return std::nullopt;
}

nlohmann::json to_json(const LogitRequest& request) {
  return nlohmann::json{{"prompt", request.prompt},
                        {"candidate_words", request.candidate_words},
                        {"max_generate", request.max_generate}};
}

LogitRequest logit_request_from_json(const nlohmann::json& j) {
  try {
    LogitRequest req;
    req.prompt = j.at("prompt").get<std::string>();
    req.candidate_words = j.value("candidate_words", std::vector<std::string>{});
    req.max_generate = j.value("max_generate", std::size_t{0});
    return req;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::contract, kModule, "logit_request_from_json", e.what());
  }
}

nlohmann::json to_json(const LogitResponse& response) {
  nlohmann::json logits = nlohmann::json::object();
  for (const auto& [w, l] : response.logits) logits[w] = l;
  nlohmann::json j{{"logits", logits}};
  j["generated_text"] = response.generated_text ? nlohmann::json(*response.generated_text) : nlohmann::json(nullptr);
  return j;
}

LogitResponse logit_response_from_json(const nlohmann::json& j) {
  try {
    LogitResponse resp;
    for (const auto& [w, l] : j.at("logits").items()) resp.logits[w] = l.get<double>();
    if (j.contains("generated_text") && !j.at("generated_text").is_null()) {
      resp.generated_text = j.at("generated_text").get<std::string>();
    }
    return resp;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::contract, kModule, "logit_response_from_json", e.what());
  }
}

nlohmann::json error_json(std::string_view code, std::string_view message) {
  return nlohmann::json{{"error", {{"code", code}, {"message", message}}}};
}

}  // namespace lbc
