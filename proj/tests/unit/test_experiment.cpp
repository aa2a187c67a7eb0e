#include <doctest.h>

#include "lbc/config.hpp"
#include "lbc/error.hpp"
#include "lbc/experiment.hpp"
#include "lbc/mock_backend.hpp"
#include "lbc/rng.hpp"
#include "lbc/synthetic.hpp"

using namespace lbc;
using nlohmann::json;

namespace {

/// Three categorical votes; the label is the majority. The mock counts votes.
struct VoteTask {
  TabularDataset data;
  json mock;
};

VoteTask vote_task(std::size_t rows, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<ColumnSchema> schema{{"a", ColumnKind::categorical, 0},
                                   {"b", ColumnKind::categorical, 1},
                                   {"c", ColumnKind::categorical, 2}};
  std::vector<Row> data;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < rows; ++i) {
    Row r;
    int hi = 0;
    for (int c = 0; c < 3; ++c) {
      const bool h = rng.below(2) == 1;
      hi += h;
      r.emplace_back(std::string(h ? "hi" : "lo"));
    }
    data.push_back(r);
    labels.emplace_back(hi >= 2 ? "Yes" : "No");
  }
  const json mock{{"bias", {0.0, 0.0}}, {"token_weights", {{"hi", {0.0, 1.0}}, {"lo", {1.0, 0.0}}}}};
  return {TabularDataset(schema, data, labels, {"No", "Yes"}), mock};
}

ExperimentConfig config(json extra) {
  json j{{"dataset", "unused.csv"}};
  j.merge_patch(extra);
  return parse_config(j);
}

}  // namespace

TEST_CASE("planted rule through the mock") {
  const auto task = vote_task(200, 3);
  const auto cfg = config({{"model", {{"mock_spec", task.mock}}},
                           {"baselines", {{"models", json::array()}}},
                           {"repetitions", 5},
                           {"oov", {{"ratio", 0.3}}}});
  const auto result = run_experiment(cfg, {task.data, std::nullopt});
  CHECK(result.runs.size() == 5);
  CHECK(result.summaries.front().mean_accuracy >= 0.95);
  CHECK_FALSE(result.ttest.has_value());
}

TEST_CASE("logreg on linear data without OOV columns") {
  const auto task = make_additive_task(400, 3, 4, 5);
  const auto cfg = config({{"model", {{"kind", "logreg"}}},
                           {"baselines", {{"models", json::array()}}},
                           {"oov", {{"ratio", 0.0}}}});
  const auto result = run_experiment(cfg, {task.data, std::nullopt});
  REQUIRE(result.runs.size() == 1);
  CHECK(result.runs[0].report.accuracy >= 0.95);
}

TEST_CASE("repetitions, summaries and t-test wiring") {
  const auto task = vote_task(120, 8);
  auto cfg = config({{"model", {{"mock_spec", task.mock}}}, {"repetitions", 1}});
  const ExperimentData data{task.data, std::nullopt};
  auto one = run_experiment(cfg, data);
  CHECK(one.runs.size() == 4);
  CHECK(one.summaries.size() == 4);
  CHECK(one.ttest_note.has_value());
  CHECK(to_json(one, cfg).at("ttest").at("note").is_string());

  cfg = config({{"model", {{"mock_spec", task.mock}}}, {"repetitions", 3}});
  const auto three = run_experiment(cfg, data);
  CHECK(three.runs.size() == 12);
  CHECK(three.ttest_models.first == "mock");
  for (const auto& r : three.runs) CHECK(r.split_seed == cfg.split_seed + r.repetition);
  const auto table = format_report_table(three);
  CHECK(table.find("mock") != std::string::npos);
  CHECK(table.find("dtree") != std::string::npos);
}

TEST_CASE("fixed seeds give identical reports") {
  const auto task = make_additive_task(150, 4, 4, 9);
  const auto cfg = config({{"model", {{"mock_spec", to_json(task.mock)}}}, {"repetitions", 2}});
  const ExperimentData data{task.data, std::nullopt};
  CHECK(to_json(run_experiment(cfg, data), cfg).dump() == to_json(run_experiment(cfg, data), cfg).dump());
}

TEST_CASE("baselines never see OOV columns") {
  const auto task = vote_task(100, 2);
  const auto cfg = config({{"model", {{"kind", "dtree"}}}, {"baselines", {{"models", {"knn"}}}}, {"oov", {{"ratio", 0.5}}}});
  const auto result = run_experiment(cfg, {task.data, std::nullopt});
  for (const auto& r : result.runs) {
    CHECK(r.oov.oov_columns.size() == 2);
    CHECK(r.oov.iv_columns.size() == 1);
  }
}

TEST_CASE("prepared prompts") {
  const auto task = make_additive_task(60, 4, 4, 10);
  const auto cfg = config({{"model", {{"mock_spec", to_json(task.mock)}}}, {"prompt", {{"oov_order_seed", 3}}}});
  const auto tts = train_test_split(task.data, 0.25, 1);
  const auto split = make_oov_split(tts.train, 0.5, 2);
  const auto p = prepare_prompts(cfg, tts.train, tts.test, split);
  CHECK(p.binners.size() == 4);
  CHECK(p.train_examples.size() == 45);
  CHECK(p.test_prompts.size() == 15);
  for (const auto& ex : p.train_examples) {
    CHECK(ex.prompt.text.find("New information:") == std::string::npos);
    CHECK(ex.prompt.random_word.has_value());
  }
  for (std::size_t i = 0; i < p.test_prompts.size(); ++i) {
    const auto& tp = p.test_prompts[i];
    CHECK(tp.text.find("New information:") < tp.text.find("Known information:"));
    CHECK_FALSE(tp.random_word.has_value());
    const auto as_train = render_advanced(p.test_view.rows()[i], p.test_view.schema(), split, p.training_order,
                                          cfg.tmpl, PromptMode::train);
    CHECK(tp.iv_text() == as_train.iv_text());
  }
}

TEST_CASE("icl and lift modes") {
  const auto task = vote_task(80, 4);
  for (const char* mode : {"icl", "lift"}) {
    const auto cfg = config({{"model", {{"mock_spec", task.mock}, {"mode", mode}, {"icl_k", 2}}},
                             {"baselines", {{"models", json::array()}}},
                             {"prompt", {{"inject_random_word", "none"}}}});
    const auto result = run_experiment(cfg, {task.data, std::nullopt});
    const auto& run = result.runs.front();
    CHECK(run.probabilities.empty());
    CHECK(run.report.unparsed == 0);
    CHECK_FALSE(run.report.auc.has_value());
    // In icl mode the examples' own tokens shift the mock's scores, so only lift is held to the rule.
    if (std::string(mode) == "lift") CHECK(run.report.accuracy == 1.0);
  }
}

TEST_CASE("separate test file") {
  const auto train = parse_csv("a,b,class\n1,x,No\n2,y,Yes\n3,x,No\n4,y,Yes\n", "class");
  const auto test = parse_csv("a,b,class\n1.5,z,No\n3.5,9,Maybe\n", "class");
  const auto [tr, te] = align_datasets(train, test);
  CHECK(tr.class_names() == std::vector<std::string>{"Maybe", "No", "Yes"});
  CHECK(te.schema()[1].kind == ColumnKind::categorical);
  CHECK(tr.schema()[0].kind == ColumnKind::numeric);
  const auto other = parse_csv("a,c,class\n1,x,No\n2,y,Yes\n", "class");
  CHECK_THROWS_AS(align_datasets(train, other), Error);
}

TEST_CASE("sweep") {
  const auto task = make_additive_task(150, 4, 4, 12);
  const auto cfg = config({{"model", {{"mock_spec", to_json(task.mock)}}}, {"oov", {{"ratio", 0.0}}}});
  const ExperimentData data{task.data, std::nullopt};
  const auto rows = oov_sweep(cfg, data, {0.0});
  const auto direct = run_experiment(cfg, data);
  REQUIRE(rows.size() == direct.summaries.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].model == direct.summaries[i].model);
    CHECK(rows[i].mean == direct.summaries[i].mean_accuracy);
  }
  CHECK(sweep_csv(rows).rfind("ratio,model,mean,stddev\n0,mock,", 0) == 0);
  CHECK_THROWS_AS(oov_sweep(cfg, data, {}), Error);
  CHECK_THROWS_AS(oov_sweep(cfg, data, {1.0}), Error);
}

TEST_CASE("order variance experiment") {
  const auto task = make_additive_task(20, 6, 4, 13, 0.8);
  const auto binners = fit_all(task.data, 4);
  const auto view = transform_dataset(task.data, binners);
  const auto split = make_oov_split(view, 0.5, 1);
  const auto v = default_verbalizer({"No", "Yes"});
  const MockBackend mock(task.mock);
  const auto& row = view.rows()[0];
  const auto truth = view.class_index(view.labels()[0]);

  OrderVarianceOptions fixed{20, 1, false};
  const auto r = order_variance_experiment(row, truth, view.schema(), split, split.iv_columns, {}, v, mock, fixed);
  CHECK(r.var_advanced == 0.0);
  CHECK(r.random_order.size() == 20);

  OrderVarianceOptions shuffled{100, 2, true};
  const auto s = order_variance_experiment(row, truth, view.schema(), split, split.iv_columns, {}, v, mock, shuffled);
  CHECK(s.var_random > s.var_advanced);

  OrderVarianceOptions bad{1, 1, true};
  CHECK_THROWS_AS(order_variance_experiment(row, truth, view.schema(), split, split.iv_columns, {}, v, mock, bad), Error);
}

TEST_CASE("backend construction") {
  const auto v = default_verbalizer({"No", "Yes"});
  CHECK_THROWS_AS(make_backend(config({}), v), Error);
  const auto mock = make_backend(config({{"model", {{"mock_spec", {{"bias", {0.0, 1.0}}}}}}}), v);
  const auto r = query_logits(*mock, {"x", v.words(), 0});
  CHECK(r.logits.at("yeah") == 1.0);
  CHECK(r.logits.at("nope") == 0.0);
  CHECK_THROWS_AS(make_backend(config({{"model", {{"kind", "knn"}}}}), v), Error);
}
