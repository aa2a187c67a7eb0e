#include "lbc/http_backend.hpp"

#include <thread>

#include <httplib.h>

#include "lbc/error.hpp"

namespace lbc {

namespace {

constexpr const char* kModule = "llm_backend";

/// POSTs `body` to `path`, retrying transport failures with exponential backoff.
nlohmann::json post_json(const HttpOptions& opt, const std::string& path, const nlohmann::json& body,
                         const httplib::Headers& headers, const std::string& stage) {
  const auto payload = body.dump();
  auto delay = opt.backoff_base;
  const int attempts = std::max(1, opt.max_attempts);
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    httplib::Client client(opt.base_url);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opt.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opt.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(path, headers, payload, "application/json");
    if (res) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::contract, kModule, stage,
                    "HTTP " + std::to_string(res->status) + " with a non-JSON body from " + opt.base_url + path);
      }
      if (res->status != 200) {
        std::string message = "HTTP " + std::to_string(res->status);
        if (j.contains("error") && j["error"].is_object()) {
          message += " " + j["error"].value("code", std::string{}) + ": " + j["error"].value("message", std::string{});
        }
        throw Error(ErrorKind::contract, kModule, stage, message);
      }
      return j;
    }
    last_error = httplib::to_string(res.error());
    if (attempt < attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw BackendError(stage, "transport failure talking to " + opt.base_url + path + ": " + last_error, attempts);
}

}  // namespace

WireBackend::WireBackend(HttpOptions options) : options_(std::move(options)) {
  if (options_.base_url.empty()) {
    throw Error(ErrorKind::config, kModule, "wire_backend", "backend URL is empty");
  }
}

LogitResponse WireBackend::query(const LogitRequest& request) const {
  const auto j = post_json(options_, "/v1/logits", to_json(request), {}, "query_logits");
  return logit_response_from_json(j);
}

OpenAiCompletionsBackend::OpenAiCompletionsBackend(HttpOptions options, std::string model, std::string api_key,
                                                   int top_logprobs)
    : options_(std::move(options)), model_(std::move(model)), api_key_(std::move(api_key)), top_logprobs_(top_logprobs) {
  if (options_.base_url.empty()) {
    throw Error(ErrorKind::config, kModule, "openai_backend", "backend URL is empty");
  }
}

LogitResponse OpenAiCompletionsBackend::query(const LogitRequest& request) const {
  nlohmann::json body{{"model", model_},
                      {"prompt", request.prompt},
                      {"max_tokens", std::max<std::size_t>(1, request.max_generate)},
                      {"temperature", 0},
                      {"logprobs", top_logprobs_}};
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  const auto j = post_json(options_, "/v1/completions", body, headers, "query_logits");

  LogitResponse resp;
  try {
    const auto& choice = j.at("choices").at(0);
    if (request.max_generate > 0) resp.generated_text = choice.at("text").get<std::string>();
    if (!request.candidate_words.empty()) {
      const auto& top = choice.at("logprobs").at("top_logprobs").at(0);
      for (const auto& w : request.candidate_words) {
        const std::string spaced = " " + w;
        if (top.contains(spaced)) {
          resp.logits[w] = top.at(spaced).get<double>();
        } else if (top.contains(w)) {
          resp.logits[w] = top.at(w).get<double>();
        } else {
          throw Error(ErrorKind::contract, kModule, "query_logits",
                      "completion endpoint returned no logprob for candidate '" + w + "'");
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::contract, kModule, "query_logits", std::string("malformed completion response: ") + e.what());
  }
  return resp;
}

}  // namespace lbc
