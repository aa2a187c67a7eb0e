#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbc/dataset.hpp"

namespace lbc {

/// Wording of rendered prompts. `pair_format` must contain "{name}" and
/// "{value}". `max_chars` = 0 disables the length guard.
struct PromptTemplate {
  std::string oov_indicator = "New information:";
  std::string iv_indicator = "Known information:";
  std::string question = "What is the class?";
  std::string pair_format = "{name} is {value}";
  std::string separator = ", ";
  std::string part_end = ".";
  std::string terminator = "@@@";
  std::size_t max_chars = 0;

  /// Throws a config error when the template is unusable.
  void validate() const;
};

PromptTemplate template_from_json(const nlohmann::json& j, PromptTemplate base = {});
nlohmann::json to_json(const PromptTemplate& tmpl);

/// 64 common concrete nouns used for end-of-prompt random word injection.
const std::vector<std::string>& default_random_words();

struct TextSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  [[nodiscard]] std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const TextSpan&, const TextSpan&) = default;
};

struct RenderedPrompt {
  std::string text;
  TextSpan iv_span;                    // the rendered IV pairs, without the part terminator
  std::optional<TextSpan> oov_span;    // present only when OOV pairs were rendered
  std::vector<std::size_t> variable_order;  // rendered columns, in text order
  std::optional<std::string> random_word;

  [[nodiscard]] std::string_view iv_text() const { return std::string_view(text).substr(iv_span.begin, iv_span.size()); }
  [[nodiscard]] std::optional<std::string_view> oov_text() const {
    if (!oov_span) return std::nullopt;
    return std::string_view(text).substr(oov_span->begin, oov_span->size());
  }

  friend bool operator==(const RenderedPrompt&, const RenderedPrompt&) = default;
};

struct LabeledExample {
  RenderedPrompt prompt;
  std::string completion;  // " " + label + terminator

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

/// "V_1 is x_1, ..., V_K is x_K. What is the class?" over `order` (schema
/// order when empty). Missing cells are omitted.
RenderedPrompt render_basic(const Row& row, std::span<const ColumnSchema> schema, const PromptTemplate& tmpl,
                            std::span<const std::size_t> order = {});

LabeledExample label_example(RenderedPrompt prompt, std::string_view label, const PromptTemplate& tmpl);

enum class PromptMode { train, test };

/// Advanced prompt. Train: iv_indicator + IV pairs in training_order +
/// question. Test: oov_indicator + OOV pairs + the same IV segment. OOV pairs
/// are in ascending column order, or shuffled with `oov_order_seed` when it
/// is non-zero. The OOV segment is dropped when no OOV pair is rendered.
RenderedPrompt render_advanced(const Row& row, std::span<const ColumnSchema> schema, const OovSplit& split,
                               std::span<const std::size_t> training_order, const PromptTemplate& tmpl, PromptMode mode,
                               std::uint64_t oov_order_seed = 0);

/// Seeded uniform permutation of `columns` (Fisher-Yates over SplitMix64).
std::vector<std::size_t> randomize_order(std::span<const std::size_t> columns, std::uint64_t seed);

/// Appends " <word>" after the question, word drawn from `pool` with `seed`.
RenderedPrompt inject_random_word(RenderedPrompt prompt, std::span<const std::string> pool, std::uint64_t seed);

/// First k examples as "<prompt><completion>" lines followed by the query text.
std::string assemble_icl_prompt(std::span<const LabeledExample> examples, const RenderedPrompt& query, std::size_t k);

/// One {"prompt", "completion"} object per line. Returns the line count.
std::size_t export_jsonl(std::span<const LabeledExample> examples, const std::filesystem::path& path);

struct PromptCompletion {
  std::string prompt;
  std::string completion;
  friend bool operator==(const PromptCompletion&, const PromptCompletion&) = default;
};

std::vector<PromptCompletion> read_jsonl(const std::filesystem::path& path);

}  // namespace lbc
