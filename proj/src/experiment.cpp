#include "lbc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>

#include "lbc/baselines.hpp"
#include "lbc/error.hpp"
#include "lbc/http_backend.hpp"
#include "lbc/mock_backend.hpp"
#include "lbc/rng.hpp"

namespace lbc {

namespace {

constexpr const char* kModule = "evaluation";

std::vector<std::size_t> keep_numeric_indices(const ExperimentConfig& cfg, const TabularDataset& ds) {
  std::vector<std::size_t> out;
  for (const auto& name : cfg.keep_numeric) {
    const auto idx = ds.find_column(name);
    if (!idx) {
      throw Error(ErrorKind::config, "discretizer", "fit_thresholds",
                  "discretizer.keep_numeric names unknown column '" + name + "'");
    }
    out.push_back(*idx);
  }
  // Columns with no observed training value cannot be binned; they stay numeric.
  for (const auto& col : ds.schema()) {
    if (col.kind != ColumnKind::numeric) continue;
    const bool any = std::any_of(ds.rows().begin(), ds.rows().end(),
                                 [&](const Row& r) { return std::holds_alternative<double>(r[col.index]); });
    if (!any && std::find(out.begin(), out.end(), col.index) == out.end()) out.push_back(col.index);
  }
  return out;
}

ModelSummary summarize(const std::string& model, const std::vector<const RunResult*>& runs) {
  ModelSummary s;
  s.model = model;
  double f1 = 0.0;
  double auc = 0.0;
  bool all_auc = true;
  for (const auto* r : runs) {
    s.accuracies.push_back(r->report.accuracy);
    f1 += r->report.f1;
    if (r->report.auc) auc += *r->report.auc;
    else all_auc = false;
  }
  const double n = static_cast<double>(runs.size());
  s.mean_accuracy = mean(s.accuracies);
  s.std_accuracy = runs.size() >= 2 ? std::sqrt(sample_variance(s.accuracies)) : 0.0;
  s.mean_f1 = f1 / n;
  if (all_auc && !runs.empty()) s.mean_auc = auc / n;
  return s;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

std::pair<TabularDataset, TabularDataset> align_datasets(const TabularDataset& train, const TabularDataset& test) {
  if (train.num_features() != test.num_features()) {
    throw Error(ErrorKind::schema, "dataset_core", "align_datasets", "train and test files have different columns");
  }
  for (std::size_t c = 0; c < train.num_features(); ++c) {
    if (train.schema()[c].name != test.schema()[c].name) {
      throw Error(ErrorKind::schema, "dataset_core", "align_datasets",
                  "column " + std::to_string(c) + " is '" + train.schema()[c].name + "' in train but '" +
                      test.schema()[c].name + "' in test");
    }
  }
  std::set<std::string> classes(train.class_names().begin(), train.class_names().end());
  classes.insert(test.class_names().begin(), test.class_names().end());
  std::vector<std::string> class_names(classes.begin(), classes.end());

  auto schema = train.schema();
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (test.schema()[c].kind != ColumnKind::numeric) schema[c].kind = ColumnKind::categorical;
  }
  auto rebuild = [&](const TabularDataset& ds) {
    std::vector<Row> rows = ds.rows();
    for (auto& row : rows) {
      for (std::size_t c = 0; c < schema.size(); ++c) {
        if (schema[c].kind == ColumnKind::categorical && std::holds_alternative<double>(row[c])) {
          row[c] = cell_text(row[c]);
        }
      }
    }
    return TabularDataset(schema, std::move(rows), ds.labels(), class_names, ds.label_name());
  };
  return {rebuild(train), rebuild(test)};
}

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
  auto train = load_csv(cfg.dataset, cfg.class_column);
  if (!cfg.test_dataset) return ExperimentData{std::move(train), std::nullopt};
  auto test = load_csv(*cfg.test_dataset, cfg.class_column);
  auto [a, b] = align_datasets(train, test);
  return ExperimentData{std::move(a), std::move(b)};
}

ClassVerbalizer make_verbalizer(const ExperimentConfig& cfg, const std::vector<std::string>& class_names) {
  if (cfg.verbalizer.is_null()) return default_verbalizer(class_names, cfg.alpha1, cfg.alpha2);
  auto j = cfg.verbalizer;
  j["alpha1"] = cfg.alpha1;
  j["alpha2"] = cfg.alpha2;
  return verbalizer_from_json(j).aligned_to(class_names);
}

std::unique_ptr<LogitBackend> make_backend(const ExperimentConfig& cfg, const ClassVerbalizer& verbalizer) {
  const auto& m = cfg.model;
  if (m.kind == "mock") {
    if (m.mock_spec.is_null()) {
      throw Error(ErrorKind::config, "llm_backend", "make_backend", "model.kind=mock requires model.mock_spec");
    }
    auto spec = mock_spec_from_json(m.mock_spec);
    if (spec.class_words.empty()) {
      for (const auto& s : verbalizer.specs()) {
        std::vector<std::string> words{s.central_word};
        words.insert(words.end(), s.synonyms.begin(), s.synonyms.end());
        spec.class_words.push_back(std::move(words));
      }
    }
    return std::make_unique<MockBackend>(std::move(spec));
  }
  if (m.kind == "wire" || m.kind == "openai") {
    HttpOptions opt;
    opt.base_url = m.url;
    if (opt.base_url.empty()) {
      if (const char* env = std::getenv(kBackendUrlEnv)) opt.base_url = env;
    }
    if (opt.base_url.empty()) {
      throw Error(ErrorKind::config, "llm_backend", "make_backend",
                  "no backend URL: set model.url or $" + std::string(kBackendUrlEnv));
    }
    opt.timeout = std::chrono::milliseconds(m.timeout_ms);
    if (m.kind == "wire") return std::make_unique<WireBackend>(opt);
    std::string key;
    if (const char* env = std::getenv(m.api_key_env.c_str())) key = env;
    return std::make_unique<OpenAiCompletionsBackend>(opt, m.openai_model, key);
  }
  throw Error(ErrorKind::config, "llm_backend", "make_backend", "model.kind '" + m.kind + "' is not a language model");
}

PreparedPrompts prepare_prompts(const ExperimentConfig& cfg, const TabularDataset& train, const TabularDataset& test,
                                const OovSplit& split) {
  PreparedPrompts out{{}, train, test, {}, {}, {}};
  if (cfg.discretize) {
    const auto keep = keep_numeric_indices(cfg, train);
    out.binners = fit_all(train, cfg.n_categories, keep);
    out.train_view = transform_dataset(train, out.binners, keep);
    out.test_view = transform_dataset(test, out.binners, keep);
  }
  out.training_order =
      cfg.random_training_order ? randomize_order(split.iv_columns, cfg.training_order_seed) : split.iv_columns;

  const auto& schema = out.train_view.schema();
  SplitMix64 word_seeds(cfg.split_seed ^ 0xA5A5A5A5ULL);
  out.train_examples.reserve(out.train_view.num_rows());
  for (std::size_t r = 0; r < out.train_view.num_rows(); ++r) {
    auto p = render_advanced(out.train_view.rows()[r], schema, split, out.training_order, cfg.tmpl, PromptMode::train);
    const auto seed = word_seeds.next();
    if (cfg.random_word_policy != RandomWordPolicy::none) p = inject_random_word(std::move(p), cfg.random_words, seed);
    out.train_examples.push_back(label_example(std::move(p), out.train_view.labels()[r], cfg.tmpl));
  }
  out.test_prompts.reserve(out.test_view.num_rows());
  for (std::size_t r = 0; r < out.test_view.num_rows(); ++r) {
    auto p = render_advanced(out.test_view.rows()[r], out.test_view.schema(), split, out.training_order, cfg.tmpl,
                             PromptMode::test, cfg.oov_order_seed);
    const auto seed = word_seeds.next();
    if (cfg.random_word_policy == RandomWordPolicy::both) p = inject_random_word(std::move(p), cfg.random_words, seed);
    out.test_prompts.push_back(std::move(p));
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentData& data, const LogitBackend* backend) {
  ExperimentResult result;
  result.class_names = data.train.class_names();
  const std::size_t n_classes = result.class_names.size();
  std::size_t positive = 1;
  if (cfg.positive_label) positive = data.train.class_index(*cfg.positive_label);

  std::vector<std::string> models{cfg.model.kind};
  for (const auto& b : cfg.baselines) {
    if (std::find(models.begin(), models.end(), b) == models.end()) models.push_back(b);
  }

  std::unique_ptr<LogitBackend> owned;
  std::optional<ClassVerbalizer> verbalizer;
  if (cfg.model.is_language_model()) {
    verbalizer = make_verbalizer(cfg, result.class_names);
    if (backend == nullptr) {
      owned = make_backend(cfg, *verbalizer);
      backend = owned.get();
    }
  }

  for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
    const std::uint64_t split_seed = cfg.split_seed + rep;
    std::optional<TrainTestSplit> tts;
    if (!data.test) tts = train_test_split(data.train, cfg.test_fraction, split_seed);
    const TabularDataset& train = data.test ? data.train : tts->train;
    const TabularDataset& test = data.test ? *data.test : tts->test;
    const auto oov = make_oov_split(train, cfg.oov_ratio, cfg.oov_redraw ? cfg.oov_seed + rep : cfg.oov_seed);
    const auto truth = label_indices(test);

    for (const auto& model : models) {
      RunResult run;
      run.model = model;
      run.repetition = rep;
      run.split_seed = split_seed;
      run.oov = oov;
      run.truth = truth;
      if (model == cfg.model.kind && cfg.model.is_language_model()) {
        const auto prompts = prepare_prompts(cfg, train, test, oov);
        std::vector<LogitRequest> requests;
        requests.reserve(prompts.test_prompts.size());
        for (const auto& p : prompts.test_prompts) {
          LogitRequest req;
          switch (cfg.model.mode) {
            case InferenceMode::logits:
              req.prompt = p.text;
              req.candidate_words = verbalizer->words();
              break;
            case InferenceMode::icl:
              req.prompt = assemble_icl_prompt(prompts.train_examples, p, cfg.model.icl_k);
              req.max_generate = 16;
              break;
            case InferenceMode::lift:
              req.prompt = p.text;
              req.max_generate = 16;
              break;
          }
          requests.push_back(std::move(req));
        }
        const auto responses = query_batch(*backend, requests, cfg.model.parallelism);
        for (const auto& resp : responses) {
          if (cfg.model.mode == InferenceMode::logits) {
            auto probs = class_probabilities(*verbalizer, resp.logits);
            run.predictions.push_back(verbalizer->index_of(predict(*verbalizer, resp.logits)));
            run.probabilities.push_back(std::move(probs));
          } else {
            const auto text = truncate_at_stop(*resp.generated_text, cfg.tmpl.terminator);
            const auto label = parse_generated_label(text, result.class_names);
            run.predictions.push_back(label ? data.train.class_index(*label) : n_classes);
          }
        }
      } else {
        const auto kind = baseline_kind_from_string(model);
        const auto train_iv = project_columns(train, oov.iv_columns);
        const auto test_iv = project_columns(test, oov.iv_columns);
        const auto fitted = BaselineModel::fit(kind, cfg.baseline_params, train_iv);
        auto pred = fitted.predict(test_iv);
        run.predictions = std::move(pred.labels);
        run.probabilities = std::move(pred.probabilities);
      }
      std::vector<double> pos_prob;
      if (n_classes == 2 && !run.probabilities.empty()) {
        for (const auto& p : run.probabilities) pos_prob.push_back(p[positive]);
      }
      run.report = evaluate_predictions(run.truth, run.predictions, result.class_names, positive, pos_prob);
      result.runs.push_back(std::move(run));
    }
  }

  for (const auto& model : models) {
    std::vector<const RunResult*> runs;
    for (const auto& r : result.runs) {
      if (r.model == model) runs.push_back(&r);
    }
    result.summaries.push_back(summarize(model, runs));
  }

  if (cfg.model.is_language_model() && models.size() > 1) {
    const ModelSummary* lm = &result.summaries.front();
    const ModelSummary* best = nullptr;
    for (std::size_t i = 1; i < result.summaries.size(); ++i) {
      if (best == nullptr || result.summaries[i].mean_accuracy > best->mean_accuracy) best = &result.summaries[i];
    }
    result.ttest_models = {lm->model, best->model};
    if (cfg.repetitions < 2) {
      result.ttest_note = "t-test needs at least two repetitions";
    } else {
      try {
        result.ttest = welch_ttest(lm->accuracies, best->accuracies);
      } catch (const Error& e) {
        result.ttest_note = e.what();
      }
    }
  }
  return result;
}

nlohmann::json to_json(const ExperimentResult& result, const ExperimentConfig& cfg) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : result.runs) {
    runs.push_back({{"model", r.model},
                    {"repetition", r.repetition},
                    {"split_seed", r.split_seed},
                    {"oov_split", to_json(r.oov)},
                    {"n_test", r.truth.size()},
                    {"metrics", to_json(r.report)}});
  }
  nlohmann::json summaries = nlohmann::json::array();
  for (const auto& s : result.summaries) {
    summaries.push_back({{"model", s.model},
                         {"mean_accuracy", s.mean_accuracy},
                         {"std_accuracy", s.std_accuracy},
                         {"mean_f1", s.mean_f1},
                         {"mean_auc", s.mean_auc ? nlohmann::json(*s.mean_auc) : nlohmann::json(nullptr)},
                         {"accuracies", s.accuracies}});
  }
  nlohmann::json j{{"class_names", result.class_names}, {"config", cfg.resolved}, {"runs", runs},
                   {"summaries", summaries}};
  if (result.ttest || result.ttest_note) {
    nlohmann::json t{{"model_a", result.ttest_models.first}, {"model_b", result.ttest_models.second}};
    if (result.ttest) t["result"] = to_json(*result.ttest);
    if (result.ttest_note) t["note"] = *result.ttest_note;
    j["ttest"] = t;
  } else {
    j["ttest"] = nullptr;
  }
  return j;
}

std::string format_report_table(const ExperimentResult& result) {
  std::size_t width = 5;
  for (const auto& s : result.summaries) width = std::max(width, s.model.size());
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  std::string out = pad("model", width) + "  mean_acc  std_acc   mean_f1   mean_auc\n";
  for (const auto& s : result.summaries) {
    out += pad(s.model, width) + "  " + fixed(s.mean_accuracy) + "    " + fixed(s.std_accuracy) + "    " +
           fixed(s.mean_f1) + "    " + (s.mean_auc ? fixed(*s.mean_auc) : std::string("  -   ")) + "\n";
  }
  if (result.ttest) {
    out += "\nWelch t-test " + result.ttest_models.first + " vs " + result.ttest_models.second +
           ": t = " + fixed(result.ttest->t_stat) + ", dof = " + fixed(result.ttest->dof, 2) +
           ", p = " + fixed(result.ttest->p_value) + (result.ttest->reject ? " *" : "") + "\n";
  } else if (result.ttest_note) {
    out += "\nWelch t-test skipped: " + *result.ttest_note + "\n";
  }
  return out;
}

std::vector<SweepRow> oov_sweep(const ExperimentConfig& cfg, const ExperimentData& data,
                                const std::vector<double>& ratios, const LogitBackend* backend) {
  if (ratios.empty()) throw Error(ErrorKind::config, kModule, "oov_sweep", "ratio list is empty");
  std::vector<SweepRow> rows;
  for (double ratio : ratios) {
    if (!(ratio >= 0.0 && ratio < 1.0)) {
      throw Error(ErrorKind::config, kModule, "oov_sweep", "ratio " + format_number(ratio) + " outside [0, 1)");
    }
    auto local = cfg;
    local.oov_ratio = ratio;
    const auto result = run_experiment(local, data, backend);
    for (const auto& s : result.summaries) rows.push_back({ratio, s.model, s.mean_accuracy, s.std_accuracy});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "ratio,model,mean,stddev\n";
  for (const auto& r : rows) {
    out += format_number(r.ratio) + "," + r.model + "," + format_number(r.mean) + "," + format_number(r.stddev) + "\n";
  }
  return out;
}

OrderVarianceResult order_variance_experiment(const Row& row, std::size_t true_class,
                                              std::span<const ColumnSchema> schema, const OovSplit& split,
                                              std::span<const std::size_t> training_order,
                                              const PromptTemplate& tmpl, const ClassVerbalizer& verbalizer,
                                              const LogitBackend& backend, const OrderVarianceOptions& options) {
  if (options.n_prompts < 2) {
    throw Error(ErrorKind::config, kModule, "order_variance_experiment", "n_prompts must be at least 2");
  }
  if (true_class >= verbalizer.specs().size()) {
    throw Error(ErrorKind::config, kModule, "order_variance_experiment", "true class index out of range");
  }
  std::vector<std::size_t> all(schema.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto words = verbalizer.words();
  auto p_correct = [&](const std::string& prompt) {
    const auto resp = query_logits(backend, LogitRequest{prompt, words, 0});
    return class_probabilities(verbalizer, resp.logits)[true_class];
  };
  OrderVarianceResult out;
  SplitMix64 seeds(options.seed);
  for (std::size_t i = 0; i < options.n_prompts; ++i) {
    const std::uint64_t s = seeds.next() | 1ULL;
    const auto ro = render_basic(row, schema, tmpl, randomize_order(all, s));
    const auto ao = render_advanced(row, schema, split, training_order, tmpl, PromptMode::test,
                                    options.randomize_ao_oov ? s : 0);
    out.random_order.push_back(p_correct(ro.text));
    out.advanced_order.push_back(p_correct(ao.text));
  }
  out.var_random = sample_variance(out.random_order);
  out.var_advanced = sample_variance(out.advanced_order);
  return out;
}

}  // namespace lbc
