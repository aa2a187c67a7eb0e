#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbc/backend.hpp"
#include "lbc/config.hpp"
#include "lbc/dataset.hpp"
#include "lbc/discretizer.hpp"
#include "lbc/metrics.hpp"
#include "lbc/prompt.hpp"
#include "lbc/stats.hpp"
#include "lbc/verbalizer.hpp"

namespace lbc {

/// Training and test datasets for one experiment. With a separate test file
/// the two are aligned (same columns, shared class names); otherwise the test
/// side is produced per repetition by train_test_split.
struct ExperimentData {
  TabularDataset train;
  std::optional<TabularDataset> test;
};

ExperimentData load_experiment_data(const ExperimentConfig& cfg);

/// Gives two datasets with identical feature names the same class names and
/// column kinds (a column numeric in only one of them becomes categorical).
std::pair<TabularDataset, TabularDataset> align_datasets(const TabularDataset& train, const TabularDataset& test);

/// The verbalizer from the config, or the default for the class names,
/// ordered like `class_names`.
ClassVerbalizer make_verbalizer(const ExperimentConfig& cfg, const std::vector<std::string>& class_names);

/// Backend for a language-model kind (mock, wire, openai).
std::unique_ptr<LogitBackend> make_backend(const ExperimentConfig& cfg, const ClassVerbalizer& verbalizer);

/// Advanced prompts for one train/test pair, after categorical change.
struct PreparedPrompts {
  std::vector<NTileBinner> binners;
  TabularDataset train_view;  // discretized training rows
  TabularDataset test_view;   // discretized test rows
  std::vector<std::size_t> training_order;
  std::vector<LabeledExample> train_examples;
  std::vector<RenderedPrompt> test_prompts;
};

PreparedPrompts prepare_prompts(const ExperimentConfig& cfg, const TabularDataset& train, const TabularDataset& test,
                                const OovSplit& split);

struct RunResult {
  std::string model;
  std::size_t repetition = 0;
  std::uint64_t split_seed = 0;
  OovSplit oov;
  std::vector<std::size_t> truth;
  std::vector<std::size_t> predictions;  // n_classes marks "no class"
  std::vector<std::vector<double>> probabilities;  // empty for text-matching modes
  EvalReport report;
};

struct ModelSummary {
  std::string model;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_f1 = 0.0;
  std::optional<double> mean_auc;
  std::vector<double> accuracies;
};

struct ExperimentResult {
  std::vector<std::string> class_names;
  std::vector<RunResult> runs;  // ordered by repetition, then model
  std::vector<ModelSummary> summaries;
  /// Best language model vs best baseline by mean accuracy, when both exist
  /// and there are at least two repetitions.
  std::optional<TTestResult> ttest;
  std::optional<std::string> ttest_note;
  std::pair<std::string, std::string> ttest_models;
};

/// Runs every configured model (the primary model plus the baselines) for
/// each repetition. Language models see the advanced prompts (OOV part at
/// test time); baselines are trained and evaluated on IV columns only.
/// `backend` overrides the one built from the config.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                                const LogitBackend* backend = nullptr);

nlohmann::json to_json(const ExperimentResult& result, const ExperimentConfig& cfg);

/// Fixed-width text table of the summaries.
std::string format_report_table(const ExperimentResult& result);

struct SweepRow {
  double ratio = 0.0;
  std::string model;
  double mean = 0.0;
  double stddev = 0.0;
};

/// run_experiment at each OOV ratio; baselines are retrained on each IV set.
std::vector<SweepRow> oov_sweep(const ExperimentConfig& cfg, const ExperimentData& data,
                                const std::vector<double>& ratios, const LogitBackend* backend = nullptr);

std::string sweep_csv(const std::vector<SweepRow>& rows);

struct OrderVarianceResult {
  std::vector<double> random_order;    // P(correct) per RO prompt
  std::vector<double> advanced_order;  // P(correct) per AO prompt
  double var_random = 0.0;
  double var_advanced = 0.0;
};

struct OrderVarianceOptions {
  std::size_t n_prompts = 100;
  std::uint64_t seed = 3;
  bool randomize_ao_oov = true;  // false: every AO prompt is identical
};

/// RO prompts list every variable in a fresh random order; AO prompts keep
/// the IV part in `training_order` and only shuffle the OOV part.
OrderVarianceResult order_variance_experiment(const Row& row, std::size_t true_class,
                                              std::span<const ColumnSchema> schema, const OovSplit& split,
                                              std::span<const std::size_t> training_order,
                                              const PromptTemplate& tmpl, const ClassVerbalizer& verbalizer,
                                              const LogitBackend& backend, const OrderVarianceOptions& options);

}  // namespace lbc
