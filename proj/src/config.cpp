#include "lbc/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lbc/error.hpp"

namespace lbc {

namespace {

constexpr const char* kModule = "config";

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorKind::config, kModule, "load_config", msg); }

const std::set<std::string>& section_keys(const std::string& section) {
  static const auto table = [] {
    std::map<std::string, std::set<std::string>> t;
    for (const auto& [key, doc] : config_key_docs()) {
      const auto dot = key.find('.');
      if (dot == std::string::npos) {
        t[""].insert(key);
      } else {
        t[""].insert(key.substr(0, dot));
        const auto rest = key.substr(dot + 1);
        t[key.substr(0, dot)].insert(rest.substr(0, rest.find('.')));
      }
    }
    return t;
  }();
  static const std::set<std::string> empty;
  const auto it = table.find(section);
  return it == table.end() ? empty : it->second;
}

void check_keys(const nlohmann::json& j, const std::string& section) {
  if (!j.is_object()) fail((section.empty() ? std::string("config") : section) + " must be a JSON object");
  const auto& known = section_keys(section);
  for (const auto& [k, v] : j.items()) {
    if (known.count(k) == 0) fail("unknown config key '" + (section.empty() ? k : section + "." + k) + "'");
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

}  // namespace

InferenceMode inference_mode_from_string(std::string_view s) {
  if (s == "logits") return InferenceMode::logits;
  if (s == "icl") return InferenceMode::icl;
  if (s == "lift") return InferenceMode::lift;
  fail("unknown model.mode '" + std::string(s) + "' (expected logits, icl or lift)");
}

std::string_view to_string(InferenceMode mode) {
  switch (mode) {
    case InferenceMode::logits: return "logits";
    case InferenceMode::icl: return "icl";
    case InferenceMode::lift: return "lift";
  }
  return "unknown";
}

const std::vector<std::pair<std::string, std::string>>& config_key_docs() {
  static const std::vector<std::pair<std::string, std::string>> docs = {
      {"dataset", "training CSV path (relative to the config file)"},
      {"test_dataset", "optional separate test CSV with the same columns; disables the train/test split"},
      {"class_column", "name of the label column (default \"class\")"},
      {"test_fraction", "held-out fraction for the seeded train/test split (default 0.2)"},
      {"split_seed", "seed of the train/test split; repetition r uses split_seed + r (default 7)"},
      {"oov.ratio", "fraction of feature columns hidden from training (default 0.5)"},
      {"oov.seed", "seed of the OOV column draw (default 11)"},
      {"oov.redraw_per_repetition", "draw a new OOV split for every repetition (default false)"},
      {"discretizer.enabled", "apply categorical change to numeric columns (default true)"},
      {"discretizer.n", "number of categories N (default 4)"},
      {"discretizer.keep_numeric", "column names left numeric"},
      {"prompt.oov_indicator", "marker before the OOV part (default \"New information:\")"},
      {"prompt.iv_indicator", "marker before the IV part (default \"Known information:\")"},
      {"prompt.question", "question closing every prompt (default \"What is the class?\")"},
      {"prompt.pair_format", "pattern for one variable (default \"{name} is {value}\")"},
      {"prompt.separator", "text between variables (default \", \")"},
      {"prompt.part_end", "text closing each variable part (default \".\")"},
      {"prompt.terminator", "completion terminator (default \"@@@\")"},
      {"prompt.max_chars", "reject prompts longer than this; 0 disables (default 0)"},
      {"prompt.random_words", "word pool for end-of-prompt injection (default: 64 built-in nouns)"},
      {"prompt.inject_random_word", "none | train | both (default train)"},
      {"prompt.training_order", "schema | random order of the IV part (default schema)"},
      {"prompt.training_order_seed", "seed when training_order is random"},
      {"prompt.oov_order_seed", "0 keeps OOV pairs in column order, otherwise shuffles them"},
      {"verbalizer.classes", "[{label, central_word, synonyms}] (default derived from class names)"},
      {"verbalizer.alpha1", "central word weight (default 0.9)"},
      {"verbalizer.alpha2", "synonym weight (default 0.1)"},
      {"verbalizer.loss", "restricted | full_vocabulary softmax for the loss (default restricted)"},
      {"model.kind", "mock | wire | openai | logreg | knn | dtree (default mock)"},
      {"model.mode", "logits | icl | lift for language-model kinds (default logits)"},
      {"model.url", "backend base URL; falls back to $LBC_BACKEND_URL"},
      {"model.timeout_ms", "per-request timeout (default 30000)"},
      {"model.parallelism", "maximum concurrent backend requests (default 4)"},
      {"model.icl_k", "in-context examples per query in icl mode (default 4)"},
      {"model.openai_model", "model name sent to OpenAI-compatible endpoints"},
      {"model.api_key_env", "environment variable holding the API key (default OPENAI_API_KEY)"},
      {"model.mock_spec", "{bias, token_weights, class_words, noise_seed, noise_scale, position_decay, perturb_rate}"},
      {"baselines.models", "traditional models evaluated alongside (default [logreg, knn, dtree])"},
      {"baselines.knn", "{k} (default 5)"},
      {"baselines.logreg", "{l2, epochs, lr} (default 1e-3, 300, 1.0)"},
      {"baselines.dtree", "{max_depth, min_leaf} (default 6, 2)"},
      {"repetitions", "number of repeated runs (default 1)"},
      {"positive_label", "positive class for binary F1/AUC (default: second class name)"},
      {"metrics", "accepted for documentation; accuracy, f1 and auc are always reported"},
      {"sweep.ratios", "OOV ratios for the sweep command (default [0, 0.3, 0.5, 0.7])"},
      {"order_experiment.rows", "test rows probed by order-exp (default 10)"},
      {"order_experiment.n_prompts", "prompts per ordering method and row (default 100)"},
      {"order_experiment.seed", "seed for row selection and orders (default 3)"},
      {"order_experiment.randomize_ao_oov", "shuffle OOV pairs in AO prompts (default true)"},
  };
  return docs;
}

void apply_override(nlohmann::json& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    fail("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string path(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  nlohmann::json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) fail("override path '" + path + "' has an empty component");
    if (node->is_null()) *node = nlohmann::json::object();
    if (!node->is_object()) fail("override path '" + path + "' descends into a non-object value");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  try {
    check_keys(j, "");
    if (!j.contains("dataset")) fail("missing required key 'dataset'");
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    cfg.dataset = resolve(j.at("dataset").get<std::string>());
    if (j.contains("test_dataset") && !j.at("test_dataset").is_null()) {
      cfg.test_dataset = resolve(j.at("test_dataset").get<std::string>());
    }
    cfg.class_column = get_or(j, "class_column", cfg.class_column);
    cfg.test_fraction = get_or(j, "test_fraction", cfg.test_fraction);
    cfg.split_seed = get_or(j, "split_seed", cfg.split_seed);

    if (j.contains("oov")) {
      const auto& o = j.at("oov");
      check_keys(o, "oov");
      cfg.oov_ratio = get_or(o, "ratio", cfg.oov_ratio);
      cfg.oov_seed = get_or(o, "seed", cfg.oov_seed);
      cfg.oov_redraw = get_or(o, "redraw_per_repetition", cfg.oov_redraw);
    }
    if (!(cfg.oov_ratio >= 0.0 && cfg.oov_ratio < 1.0)) fail("oov.ratio must lie in [0, 1)");

    if (j.contains("discretizer")) {
      const auto& d = j.at("discretizer");
      check_keys(d, "discretizer");
      cfg.discretize = get_or(d, "enabled", cfg.discretize);
      cfg.n_categories = get_or(d, "n", cfg.n_categories);
      cfg.keep_numeric = get_or(d, "keep_numeric", cfg.keep_numeric);
    }
    if (cfg.n_categories < 2) fail("discretizer.n must be at least 2");

    cfg.random_words = default_random_words();
    if (j.contains("prompt")) {
      const auto& p = j.at("prompt");
      check_keys(p, "prompt");
      cfg.tmpl = template_from_json(p);
      cfg.random_words = get_or(p, "random_words", cfg.random_words);
      const auto policy = get_or<std::string>(p, "inject_random_word", "train");
      if (policy == "none") cfg.random_word_policy = RandomWordPolicy::none;
      else if (policy == "train") cfg.random_word_policy = RandomWordPolicy::train;
      else if (policy == "both") cfg.random_word_policy = RandomWordPolicy::both;
      else fail("prompt.inject_random_word must be none, train or both");
      const auto order = get_or<std::string>(p, "training_order", "schema");
      if (order != "schema" && order != "random") fail("prompt.training_order must be schema or random");
      cfg.random_training_order = order == "random";
      cfg.training_order_seed = get_or(p, "training_order_seed", cfg.training_order_seed);
      cfg.oov_order_seed = get_or(p, "oov_order_seed", cfg.oov_order_seed);
    }
    cfg.tmpl.validate();
    if (cfg.random_word_policy != RandomWordPolicy::none && cfg.random_words.empty()) {
      fail("prompt.random_words is empty but random word injection is enabled");
    }

    if (j.contains("verbalizer")) {
      const auto& v = j.at("verbalizer");
      check_keys(v, "verbalizer");
      cfg.alpha1 = get_or(v, "alpha1", cfg.alpha1);
      cfg.alpha2 = get_or(v, "alpha2", cfg.alpha2);
      cfg.loss_mode = loss_mode_from_string(get_or<std::string>(v, "loss", "restricted"));
      if (v.contains("classes")) cfg.verbalizer = v;
    }

    if (j.contains("model")) {
      const auto& m = j.at("model");
      check_keys(m, "model");
      cfg.model.kind = get_or(m, "kind", cfg.model.kind);
      cfg.model.mode = inference_mode_from_string(get_or<std::string>(m, "mode", "logits"));
      cfg.model.url = get_or(m, "url", cfg.model.url);
      cfg.model.timeout_ms = get_or(m, "timeout_ms", cfg.model.timeout_ms);
      cfg.model.parallelism = get_or(m, "parallelism", cfg.model.parallelism);
      cfg.model.icl_k = get_or(m, "icl_k", cfg.model.icl_k);
      cfg.model.openai_model = get_or(m, "openai_model", cfg.model.openai_model);
      cfg.model.api_key_env = get_or(m, "api_key_env", cfg.model.api_key_env);
      if (m.contains("mock_spec")) cfg.model.mock_spec = m.at("mock_spec");
    }
    static const std::set<std::string> kinds = {"mock", "wire", "openai", "logreg", "knn", "dtree"};
    if (kinds.count(cfg.model.kind) == 0) fail("unknown model.kind '" + cfg.model.kind + "'");

    if (j.contains("baselines")) {
      const auto& b = j.at("baselines");
      check_keys(b, "baselines");
      cfg.baselines = get_or(b, "models", cfg.baselines);
      cfg.baseline_params = baseline_params_from_json(b);
    }
    for (const auto& b : cfg.baselines) baseline_kind_from_string(b);

    cfg.repetitions = get_or(j, "repetitions", cfg.repetitions);
    if (cfg.repetitions < 1) fail("repetitions must be at least 1");
    if (j.contains("positive_label") && !j.at("positive_label").is_null()) {
      cfg.positive_label = j.at("positive_label").get<std::string>();
    }
    if (j.contains("sweep")) {
      check_keys(j.at("sweep"), "sweep");
      cfg.sweep_ratios = get_or(j.at("sweep"), "ratios", cfg.sweep_ratios);
    }
    if (j.contains("order_experiment")) {
      const auto& o = j.at("order_experiment");
      check_keys(o, "order_experiment");
      cfg.order.rows = get_or(o, "rows", cfg.order.rows);
      cfg.order.n_prompts = get_or(o, "n_prompts", cfg.order.n_prompts);
      cfg.order.seed = get_or(o, "seed", cfg.order.seed);
      cfg.order.randomize_ao_oov = get_or(o, "randomize_ao_oov", cfg.order.randomize_ao_oov);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  }

  auto& r = cfg.resolved;
  r["dataset"] = cfg.dataset.string();
  r["test_dataset"] = cfg.test_dataset ? nlohmann::json(cfg.test_dataset->string()) : nlohmann::json(nullptr);
  r["class_column"] = cfg.class_column;
  r["test_fraction"] = cfg.test_fraction;
  r["split_seed"] = cfg.split_seed;
  r["oov"] = {{"ratio", cfg.oov_ratio}, {"seed", cfg.oov_seed}, {"redraw_per_repetition", cfg.oov_redraw}};
  r["discretizer"] = {{"enabled", cfg.discretize}, {"n", cfg.n_categories}, {"keep_numeric", cfg.keep_numeric}};
  auto prompt = to_json(cfg.tmpl);
  prompt["random_words"] = cfg.random_words;
  prompt["inject_random_word"] = cfg.random_word_policy == RandomWordPolicy::none    ? "none"
                                 : cfg.random_word_policy == RandomWordPolicy::train ? "train"
                                                                                     : "both";
  prompt["training_order"] = cfg.random_training_order ? "random" : "schema";
  prompt["training_order_seed"] = cfg.training_order_seed;
  prompt["oov_order_seed"] = cfg.oov_order_seed;
  r["prompt"] = prompt;
  r["verbalizer"] = {{"alpha1", cfg.alpha1}, {"alpha2", cfg.alpha2}, {"loss", std::string(to_string(cfg.loss_mode))}};
  if (!cfg.verbalizer.is_null()) r["verbalizer"]["classes"] = cfg.verbalizer.at("classes");
  r["model"] = {{"kind", cfg.model.kind},
                {"mode", std::string(to_string(cfg.model.mode))},
                {"url", cfg.model.url},
                {"timeout_ms", cfg.model.timeout_ms},
                {"parallelism", cfg.model.parallelism},
                {"icl_k", cfg.model.icl_k},
                {"openai_model", cfg.model.openai_model},
                {"api_key_env", cfg.model.api_key_env},
                {"mock_spec", cfg.model.mock_spec}};
  r["baselines"] = {{"models", cfg.baselines},
                    {"knn", {{"k", cfg.baseline_params.knn_k}}},
                    {"logreg",
                     {{"l2", cfg.baseline_params.l2},
                      {"epochs", cfg.baseline_params.epochs},
                      {"lr", cfg.baseline_params.lr}}},
                    {"dtree", {{"max_depth", cfg.baseline_params.max_depth}, {"min_leaf", cfg.baseline_params.min_leaf}}}};
  r["repetitions"] = cfg.repetitions;
  r["positive_label"] = cfg.positive_label ? nlohmann::json(*cfg.positive_label) : nlohmann::json(nullptr);
  r["sweep"] = {{"ratios", cfg.sweep_ratios}};
  r["order_experiment"] = {{"rows", cfg.order.rows},
                           {"n_prompts", cfg.order.n_prompts},
                           {"seed", cfg.order.seed},
                           {"randomize_ao_oov", cfg.order.randomize_ao_oov}};
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, kModule, "load_config", "cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, kModule, "load_config", "config '" + path.string() + "': " + e.what());
  }
  for (const auto& o : overrides) apply_override(j, o);
  return parse_config(j, path.parent_path());
}

}  // namespace lbc
