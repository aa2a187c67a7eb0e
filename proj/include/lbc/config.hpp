#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbc/baselines.hpp"
#include "lbc/prompt.hpp"
#include "lbc/verbalizer.hpp"

namespace lbc {

enum class InferenceMode {
  logits,  // verbalizer over next-token logits
  icl,     // in-context examples + generated text
  lift,    // generated text matched exactly against class names
};

InferenceMode inference_mode_from_string(std::string_view s);
std::string_view to_string(InferenceMode mode);

struct ModelConfig {
  std::string kind = "mock";  // mock | wire | openai | logreg | knn | dtree
  InferenceMode mode = InferenceMode::logits;
  std::string url;
  std::int64_t timeout_ms = 30000;
  std::size_t parallelism = 4;
  std::size_t icl_k = 4;
  std::string openai_model;
  std::string api_key_env = "OPENAI_API_KEY";
  nlohmann::json mock_spec;  // null unless kind == mock

  [[nodiscard]] bool is_language_model() const { return kind == "mock" || kind == "wire" || kind == "openai"; }
};

struct OrderExperimentConfig {
  std::size_t rows = 10;
  std::size_t n_prompts = 100;
  std::uint64_t seed = 3;
  bool randomize_ao_oov = true;
};

enum class RandomWordPolicy { none, train, both };

struct ExperimentConfig {
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> test_dataset;
  std::string class_column = "class";
  double test_fraction = 0.2;
  std::uint64_t split_seed = 7;

  double oov_ratio = 0.5;
  std::uint64_t oov_seed = 11;
  bool oov_redraw = false;  // new OOV split for every repetition

  bool discretize = true;
  std::size_t n_categories = 4;
  std::vector<std::string> keep_numeric;

  PromptTemplate tmpl;
  std::vector<std::string> random_words;
  RandomWordPolicy random_word_policy = RandomWordPolicy::train;
  bool random_training_order = false;
  std::uint64_t training_order_seed = 0;
  std::uint64_t oov_order_seed = 0;

  nlohmann::json verbalizer;  // null: derived from the class names
  double alpha1 = 0.9;
  double alpha2 = 0.1;
  LossMode loss_mode = LossMode::restricted;

  ModelConfig model;
  std::vector<std::string> baselines = {"logreg", "knn", "dtree"};
  BaselineParams baseline_params;

  std::size_t repetitions = 1;
  std::optional<std::string> positive_label;
  std::vector<double> sweep_ratios = {0.0, 0.3, 0.5, 0.7};
  OrderExperimentConfig order;

  /// The fully resolved configuration, defaults included, as written to reports.
  nlohmann::json resolved;
};

/// Sets the value at a dotted path ("model.kind=mock"). The right-hand side
/// is parsed as JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& config, std::string_view assignment);

/// Relative dataset paths are resolved against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// (dotted key, description) for every recognized configuration key.
const std::vector<std::pair<std::string, std::string>>& config_key_docs();

}  // namespace lbc
