#include "lbc/prompt.hpp"

#include <algorithm>
#include <fstream>

#include "lbc/error.hpp"
#include "lbc/rng.hpp"

namespace lbc {

namespace {

constexpr const char* kModule = "prompt_gen";

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::string render_pair(const PromptTemplate& tmpl, std::string_view name, std::string_view value) {
  // Substitute the value last so a value containing "{name}" is left alone.
  const auto value_pos = tmpl.pair_format.find("{value}");
  std::string head = replace_all(tmpl.pair_format.substr(0, value_pos), "{name}", name);
  std::string tail = replace_all(tmpl.pair_format.substr(value_pos + 7), "{name}", name);
  return head + std::string(value) + tail;
}

/// Joined pairs for the non-missing columns of `order`; appends rendered columns to `rendered`.
std::string render_pairs(const Row& row, std::span<const ColumnSchema> schema, std::span<const std::size_t> order,
                         const PromptTemplate& tmpl, std::vector<std::size_t>& rendered) {
  std::string out;
  bool first = true;
  for (auto c : order) {
    if (c >= schema.size() || c >= row.size()) {
      throw Error(ErrorKind::schema, kModule, "render", "column index " + std::to_string(c) + " out of range");
    }
    if (is_missing(row[c])) continue;
    if (!first) out += tmpl.separator;
    out += render_pair(tmpl, schema[c].name, cell_text(row[c]));
    rendered.push_back(c);
    first = false;
  }
  return out;
}

void check_length(const PromptTemplate& tmpl, const std::string& text) {
  if (tmpl.max_chars != 0 && text.size() > tmpl.max_chars) {
    throw Error(ErrorKind::render, kModule, "render",
                "prompt of " + std::to_string(text.size()) + " characters exceeds max_chars " +
                    std::to_string(tmpl.max_chars));
  }
}

}  // namespace

void PromptTemplate::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, kModule, "template", msg); };
  if (question.empty()) fail("question must be non-empty");
  if (terminator.empty()) fail("terminator must be non-empty");
  if (oov_indicator.empty() || iv_indicator.empty()) fail("indicators must be non-empty");
  if (oov_indicator.find(iv_indicator) != std::string::npos || iv_indicator.find(oov_indicator) != std::string::npos) {
    fail("indicators must be distinct and neither may contain the other");
  }
  if (pair_format.find("{name}") == std::string::npos || pair_format.find("{value}") == std::string::npos) {
    fail("pair_format must contain {name} and {value}");
  }
}

PromptTemplate template_from_json(const nlohmann::json& j, PromptTemplate base) {
  try {
    if (j.contains("oov_indicator")) base.oov_indicator = j.at("oov_indicator").get<std::string>();
    if (j.contains("iv_indicator")) base.iv_indicator = j.at("iv_indicator").get<std::string>();
    if (j.contains("question")) base.question = j.at("question").get<std::string>();
    if (j.contains("pair_format")) base.pair_format = j.at("pair_format").get<std::string>();
    if (j.contains("separator")) base.separator = j.at("separator").get<std::string>();
    if (j.contains("part_end")) base.part_end = j.at("part_end").get<std::string>();
    if (j.contains("terminator")) base.terminator = j.at("terminator").get<std::string>();
    if (j.contains("max_chars")) base.max_chars = j.at("max_chars").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config, kModule, "template", e.what());
  }
  base.validate();
  return base;
}

nlohmann::json to_json(const PromptTemplate& tmpl) {
  return nlohmann::json{{"oov_indicator", tmpl.oov_indicator}, {"iv_indicator", tmpl.iv_indicator},
                        {"question", tmpl.question},           {"pair_format", tmpl.pair_format},
                        {"separator", tmpl.separator},         {"part_end", tmpl.part_end},
                        {"terminator", tmpl.terminator},       {"max_chars", tmpl.max_chars}};
}

const std::vector<std::string>& default_random_words() {
  static const std::vector<std::string> words = {
      "apple",  "anchor",  "basket", "bicycle", "blanket", "bottle",  "bridge", "bucket", "candle", "carpet", "castle",
      "chair",  "cloud",   "coffee", "compass", "crayon",  "desk",    "dragon", "drum",   "engine", "feather", "garden",
      "guitar", "hammer",  "helmet", "island",  "jacket",  "kettle",  "kiwi",   "ladder", "lamp",   "lemon",  "mirror",
      "mountain", "needle", "ocean", "orange",  "paddle",  "pencil",  "pillow", "planet", "pocket", "puzzle", "rabbit",
      "river",  "rocket",  "saddle", "shovel",  "silver",  "spoon",   "statue", "sugar",  "table",  "teapot", "tiger",
      "tomato", "tractor", "tunnel", "umbrella", "violin", "wagon",   "window", "wallet", "zipper"};
  return words;
}

RenderedPrompt render_basic(const Row& row, std::span<const ColumnSchema> schema, const PromptTemplate& tmpl,
                            std::span<const std::size_t> order) {
  std::vector<std::size_t> default_order;
  if (order.empty()) {
    default_order.resize(schema.size());
    for (std::size_t i = 0; i < schema.size(); ++i) default_order[i] = i;
    order = default_order;
  }
  RenderedPrompt p;
  const std::string pairs = render_pairs(row, schema, order, tmpl, p.variable_order);
  if (p.variable_order.empty()) {
    throw Error(ErrorKind::render, kModule, "render_basic", "every value in the row is missing");
  }
  p.iv_span = TextSpan{0, pairs.size()};
  p.text = pairs + tmpl.part_end + " " + tmpl.question;
  check_length(tmpl, p.text);
  return p;
}

LabeledExample label_example(RenderedPrompt prompt, std::string_view label, const PromptTemplate& tmpl) {
  if (label.empty()) throw Error(ErrorKind::render, kModule, "label_example", "empty label");
  if (label.find(tmpl.terminator) != std::string_view::npos) {
    throw Error(ErrorKind::render, kModule, "label_example", "label contains the terminator");
  }
  return LabeledExample{std::move(prompt), " " + std::string(label) + tmpl.terminator};
}

RenderedPrompt render_advanced(const Row& row, std::span<const ColumnSchema> schema, const OovSplit& split,
                               std::span<const std::size_t> training_order, const PromptTemplate& tmpl, PromptMode mode,
                               std::uint64_t oov_order_seed) {
  std::vector<std::size_t> sorted_order(training_order.begin(), training_order.end());
  std::sort(sorted_order.begin(), sorted_order.end());
  std::vector<std::size_t> sorted_iv = split.iv_columns;
  std::sort(sorted_iv.begin(), sorted_iv.end());
  if (sorted_order != sorted_iv) {
    throw Error(ErrorKind::order, kModule, "render_advanced", "training order is not a permutation of the IV columns");
  }

  RenderedPrompt p;
  std::string text;
  if (mode == PromptMode::test && !split.oov_columns.empty()) {
    std::vector<std::size_t> oov_order = split.oov_columns;
    std::sort(oov_order.begin(), oov_order.end());
    if (oov_order_seed != 0) oov_order = randomize_order(oov_order, oov_order_seed);
    const std::string oov_pairs = render_pairs(row, schema, oov_order, tmpl, p.variable_order);
    if (!oov_pairs.empty()) {
      text = tmpl.oov_indicator + " ";
      p.oov_span = TextSpan{text.size(), text.size() + oov_pairs.size()};
      text += oov_pairs + tmpl.part_end + " ";
    }
  }

  text += tmpl.iv_indicator;
  const std::string iv_pairs = render_pairs(row, schema, training_order, tmpl, p.variable_order);
  if (!iv_pairs.empty()) {
    text += " ";
    p.iv_span = TextSpan{text.size(), text.size() + iv_pairs.size()};
    text += iv_pairs + tmpl.part_end;
  } else {
    p.iv_span = TextSpan{text.size(), text.size()};
  }
  if (p.variable_order.empty()) {
    throw Error(ErrorKind::render, kModule, "render_advanced", "every value in the row is missing");
  }
  text += " " + tmpl.question;
  p.text = std::move(text);
  check_length(tmpl, p.text);
  return p;
}

std::vector<std::size_t> randomize_order(std::span<const std::size_t> columns, std::uint64_t seed) {
  std::vector<std::size_t> out(columns.begin(), columns.end());
  SplitMix64 rng(seed);
  shuffle(std::span<std::size_t>(out), rng);
  return out;
}

RenderedPrompt inject_random_word(RenderedPrompt prompt, std::span<const std::string> pool, std::uint64_t seed) {
  if (pool.empty()) {
    throw Error(ErrorKind::config, kModule, "inject_random_word", "random word pool is empty");
  }
  SplitMix64 rng(seed);
  const auto& word = pool[static_cast<std::size_t>(rng.below(pool.size()))];
  prompt.text += " " + word;
  prompt.random_word = word;
  return prompt;
}

std::string assemble_icl_prompt(std::span<const LabeledExample> examples, const RenderedPrompt& query, std::size_t k) {
  if (k > examples.size()) {
    throw Error(ErrorKind::config, kModule, "assemble_icl_prompt",
                "k=" + std::to_string(k) + " exceeds the " + std::to_string(examples.size()) + " available examples");
  }
  std::string out;
  for (std::size_t i = 0; i < k; ++i) {
    out += examples[i].prompt.text;
    out += examples[i].completion;
    out += '\n';
  }
  out += query.text;
  return out;
}

std::size_t export_jsonl(std::span<const LabeledExample> examples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, kModule, "export_jsonl", "cannot write '" + path.string() + "'");
  std::size_t count = 0;
  for (const auto& ex : examples) {
    nlohmann::ordered_json line;
    line["prompt"] = ex.prompt.text;
    line["completion"] = ex.completion;
    try {
      out << line.dump() << '\n';
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::io, kModule, "export_jsonl", std::string("cannot encode example: ") + e.what());
    }
    ++count;
  }
  out.flush();
  if (!out) throw Error(ErrorKind::io, kModule, "export_jsonl", "write failed for '" + path.string() + "'");
  return count;
}

std::vector<PromptCompletion> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, kModule, "read_jsonl", "cannot open '" + path.string() + "'");
  std::vector<PromptCompletion> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("prompt").get<std::string>(), j.at("completion").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse, kModule, "read_jsonl", "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace lbc
