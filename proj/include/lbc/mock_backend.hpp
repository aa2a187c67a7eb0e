#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbc/backend.hpp"

namespace lbc {

/// Planted-weight model used as a deterministic stand-in for a fine-tuned LLM.
///
/// The prompt is split on whitespace and each token is stripped of leading and
/// trailing punctuation (.,;:!?"'()). A `token_weights` key is a sequence of
/// such tokens ("x1 is Category 4" is four tokens) and contributes its weight
/// vector every time the sequence occurs, scaled by position_decay^p where p
/// is the token index of the match. Class scores are bias + contributions
/// (+ optional uniform noise in [-noise_scale, noise_scale] keyed by prompt
/// and noise_seed). Every word in class_words[c] gets class c's score as its
/// logit; class_words[c][0] is the word the mock generates.
struct MockModelSpec {
  std::unordered_map<std::string, std::vector<double>> token_weights;
  std::vector<double> bias;
  std::vector<std::vector<std::string>> class_words;
  std::uint64_t noise_seed = 0;
  double noise_scale = 0.0;
  double position_decay = 1.0;
  /// Probability that generated text uses the class's second word (a synonym)
  /// instead of its central word.
  double perturb_rate = 0.0;

  void validate() const;
};

MockModelSpec mock_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MockModelSpec& spec);

std::vector<std::string> mock_tokenize(std::string_view text);

class MockBackend final : public LogitBackend {
 public:
  explicit MockBackend(MockModelSpec spec);

  [[nodiscard]] LogitResponse query(const LogitRequest& request) const override;
  [[nodiscard]] std::string name() const override { return "mock"; }

  [[nodiscard]] std::vector<double> class_scores(std::string_view prompt) const;

  /// Logits for every word the mock knows.
  [[nodiscard]] LogitMap full_logits(std::string_view prompt) const;

  [[nodiscard]] const MockModelSpec& spec() const noexcept { return spec_; }

 private:
  struct Pattern {
    std::vector<std::string> tokens;
    const std::vector<double>* weights;
  };

  [[nodiscard]] std::size_t argmax_class(const std::vector<double>& scores) const;

  MockModelSpec spec_;
  std::unordered_map<std::string, std::vector<Pattern>> patterns_by_first_token_;
  std::unordered_map<std::string, std::size_t> word_class_;
};

}  // namespace lbc
