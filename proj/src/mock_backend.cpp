#include "lbc/mock_backend.hpp"

#include <cctype>
#include <cmath>

#include "lbc/error.hpp"
#include "lbc/rng.hpp"

namespace lbc {

namespace {

constexpr const char* kModule = "llm_backend";

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool is_strip_char(char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?': case '"': case '\'': case '(': case ')':
      return true;
    default:
      return false;
  }
}

}  // namespace

void MockModelSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, kModule, "mock_spec", msg); };
  const std::size_t n = bias.size();
  if (n < 2) fail("bias must have one entry per class (at least two)");
  if (class_words.size() != n) fail("class_words must have one word list per class");
  for (const auto& words : class_words) {
    if (words.empty()) fail("every class needs at least one word");
  }
  for (const auto& [token, w] : token_weights) {
    if (w.size() != n) fail("weight vector for '" + token + "' has the wrong dimension");
  }
  if (!(position_decay > 0.0)) fail("position_decay must be positive");
  if (!(perturb_rate >= 0.0 && perturb_rate <= 1.0)) fail("perturb_rate must lie in [0, 1]");
  if (!(noise_scale >= 0.0)) fail("noise_scale must be non-negative");
}

MockModelSpec mock_spec_from_json(const nlohmann::json& j) {
  MockModelSpec spec;
  try {
    spec.bias = j.at("bias").get<std::vector<double>>();
    if (j.contains("token_weights")) {
      for (const auto& [k, v] : j.at("token_weights").items()) spec.token_weights[k] = v.get<std::vector<double>>();
    }
    spec.class_words = j.value("class_words", std::vector<std::vector<std::string>>{});
    spec.noise_seed = j.value("noise_seed", std::uint64_t{0});
    spec.noise_scale = j.value("noise_scale", 0.0);
    spec.position_decay = j.value("position_decay", 1.0);
    spec.perturb_rate = j.value("perturb_rate", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config, kModule, "mock_spec", e.what());
  }
  return spec;
}

nlohmann::json to_json(const MockModelSpec& spec) {
  nlohmann::json weights = nlohmann::json::object();
  for (const auto& [k, v] : spec.token_weights) weights[k] = v;
  return nlohmann::json{{"bias", spec.bias},
                        {"token_weights", weights},
                        {"class_words", spec.class_words},
                        {"noise_seed", spec.noise_seed},
                        {"noise_scale", spec.noise_scale},
                        {"position_decay", spec.position_decay},
                        {"perturb_rate", spec.perturb_rate}};
}

std::vector<std::string> mock_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t b = i;
    std::size_t e = j;
    while (b < e && is_strip_char(text[b])) ++b;
    while (e > b && is_strip_char(text[e - 1])) --e;
    if (e > b) tokens.emplace_back(text.substr(b, e - b));
    i = j;
  }
  return tokens;
}

MockBackend::MockBackend(MockModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  for (const auto& [key, weights] : spec_.token_weights) {
    auto tokens = mock_tokenize(key);
    if (tokens.empty()) continue;
    auto first = tokens.front();
    patterns_by_first_token_[first].push_back(Pattern{std::move(tokens), &weights});
  }
  for (std::size_t c = 0; c < spec_.class_words.size(); ++c) {
    for (const auto& w : spec_.class_words[c]) {
      if (!word_class_.emplace(w, c).second) {
        throw Error(ErrorKind::config, kModule, "mock_spec", "word '" + w + "' assigned to two classes");
      }
    }
  }
}

std::vector<double> MockBackend::class_scores(std::string_view prompt) const {
  std::vector<double> scores = spec_.bias;
  const auto tokens = mock_tokenize(prompt);
  double scale = 1.0;
  for (std::size_t p = 0; p < tokens.size(); ++p, scale *= spec_.position_decay) {
    const auto it = patterns_by_first_token_.find(tokens[p]);
    if (it == patterns_by_first_token_.end()) continue;
    for (const auto& pat : it->second) {
      if (p + pat.tokens.size() > tokens.size()) continue;
      bool match = true;
      for (std::size_t t = 1; t < pat.tokens.size() && match; ++t) match = tokens[p + t] == pat.tokens[t];
      if (!match) continue;
      for (std::size_t c = 0; c < scores.size(); ++c) scores[c] += scale * (*pat.weights)[c];
    }
  }
  if (spec_.noise_scale > 0.0) {
    SplitMix64 rng(fnv1a(prompt) ^ spec_.noise_seed);
    for (auto& s : scores) s += spec_.noise_scale * (2.0 * rng.uniform() - 1.0);
  }
  return scores;
}

std::size_t MockBackend::argmax_class(const std::vector<double>& scores) const {
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return best;
}

LogitMap MockBackend::full_logits(std::string_view prompt) const {
  const auto scores = class_scores(prompt);
  LogitMap out;
  for (const auto& [w, c] : word_class_) out[w] = scores[c];
  return out;
}

LogitResponse MockBackend::query(const LogitRequest& request) const {
  if (request.prompt.empty()) {
    throw Error(ErrorKind::contract, kModule, "query_logits", "prompt must be non-empty");
  }
  const auto scores = class_scores(request.prompt);
  LogitResponse resp;
  for (const auto& w : request.candidate_words) {
    const auto it = word_class_.find(w);
    if (it == word_class_.end()) {
      throw Error(ErrorKind::contract, kModule, "query_logits", "mock has no logit for word '" + w + "'");
    }
    resp.logits[w] = scores[it->second];
  }
  if (request.max_generate > 0) {
    const auto& words = spec_.class_words[argmax_class(scores)];
    std::string word = words.front();
    if (spec_.perturb_rate > 0.0 && words.size() > 1) {
      SplitMix64 rng(fnv1a(request.prompt) ^ (spec_.noise_seed + 0x5bd1e995ULL));
      if (rng.uniform() < spec_.perturb_rate) word = words[1];
    }
    resp.generated_text = word + "@@@";
  }
  return resp;
}

}  // namespace lbc
