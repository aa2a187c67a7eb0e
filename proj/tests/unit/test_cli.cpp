#include <doctest.h>

#include <cstdio>
#include <regex>
#include <sstream>

#include "lbc/cli.hpp"
#include "lbc/config.hpp"
#include "lbc/dataset.hpp"
#include "lbc/mock_backend.hpp"
#include "lbc/synthetic.hpp"
#include "stub_server.hpp"
#include "test_util.hpp"

using namespace lbc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

/// Synthetic dataset plus mock config in a fresh directory.
fs::path workspace(const std::string& name, std::size_t rows = 80, json extra = json::object()) {
  const auto dir = test::scratch_dir(name);
  const auto task = make_additive_task(rows, 4, 4, 17);
  save_csv(task.data, dir / "data.csv");
  json cfg{{"dataset", "data.csv"},
           {"model", {{"kind", "mock"}, {"mock_spec", to_json(task.mock)}}},
           {"repetitions", 2},
           {"order_experiment", {{"rows", 3}, {"n_prompts", 10}}}};
  cfg.merge_patch(extra);
  test::write_file(dir / "cfg.json", cfg.dump(2));
  return dir;
}

std::vector<json> json_lines(const fs::path& p) {
  std::vector<json> out;
  std::istringstream in(test::read_file(p));
  for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
  return out;
}

}  // namespace

TEST_CASE("evaluate writes reports and is repeatable") {
  const auto dir = workspace("cli_evaluate");
  const auto cfg = (dir / "cfg.json").string();
  const auto a = run({"evaluate", "--config", cfg, "--override", "model.kind=mock", "--out", (dir / "a").string()});
  REQUIRE(a.code == 0);
  for (const char* f : {"report.json", "report.txt", "metadata.json"}) CHECK(fs::exists(dir / "a" / f));
  CHECK(a.out.find("mock") != std::string::npos);
  const auto b = run({"evaluate", "--config", cfg, "--out", (dir / "b").string()});
  REQUIRE(b.code == 0);
  CHECK(test::read_file(dir / "a" / "report.json") == test::read_file(dir / "b" / "report.json"));
  const auto report = json::parse(test::read_file(dir / "a" / "report.json"));
  CHECK(report.at("config").at("model").at("kind") == "mock");
  CHECK(report.at("runs").size() == 8);
  CHECK(json::parse(test::read_file(dir / "a" / "metadata.json")).contains("timestamp"));
}

TEST_CASE("usage errors exit 2") {
  auto r = run({"evaluate", "--config", "x.json", "--frobnicate"});
  CHECK(r.code == 2);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(run({"launch"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"evaluate"}).code == 2);
  CHECK(run({"ttest"}).code == 2);
  CHECK(run({"ttest", "--a", "1,2", "--b", "3,4", "--report", "r.json"}).code == 2);
}

TEST_CASE("help exits 0 and lists every config key") {
  for (const char* verb : {"inspect", "split", "bucketize", "gen-prompts", "export-finetune", "infer", "evaluate",
                           "sweep", "order-exp", "ttest"}) {
    const auto r = run({verb, "--help"});
    CHECK(r.code == 0);
    for (const auto& [key, doc] : config_key_docs()) CHECK(r.out.find(key) != std::string::npos);
  }
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("domain errors exit 1 and name module and stage") {
  const auto dir = test::scratch_dir("cli_missing");
  test::write_file(dir / "cfg.json", R"({"dataset": "nope.csv"})");
  const auto r = run({"inspect", "--config", (dir / "cfg.json").string(), "--out", (dir / "o").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("dataset_core/load_csv") != std::string::npos);

  const auto j = run({"inspect", "--config", (dir / "cfg.json").string(), "--json-errors"});
  CHECK(j.code == 1);
  const auto e = json::parse(j.err).at("error");
  CHECK(e.at("module") == "dataset_core");
  CHECK(e.at("stage") == "load_csv");
  CHECK(e.at("kind") == "io");

  const auto bad = run({"inspect", "--config", (dir / "cfg.json").string(), "--override", "oov.ratio=2"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("config") != std::string::npos);
}

TEST_CASE("gen-prompts on a two-row test file") {
  const auto dir = test::scratch_dir("cli_gen");
  test::write_file(dir / "train.csv", "Age,Income,class\n30,0,Yes\n40,1,No\n50,2,Yes\n");
  test::write_file(dir / "test.csv", "Age,Income,class\n35,5,No\n45,1,Yes\n");
  test::write_file(dir / "cfg.json", json{{"dataset", "train.csv"},
                                          {"test_dataset", "test.csv"},
                                          {"discretizer", {{"enabled", false}}},
                                          {"oov", {{"ratio", 0.5}}}}
                                         .dump());
  const auto r = run({"gen-prompts", "--config", (dir / "cfg.json").string(), "--out", (dir / "o").string()});
  REQUIRE(r.code == 0);
  const auto lines = json_lines(dir / "o" / "test_prompts.jsonl");
  REQUIRE(lines.size() == 2);
  for (const auto& l : lines) {
    const auto text = l.at("prompt").get<std::string>();
    const auto oov = text.find("New information:");
    const auto iv = text.find("Known information:");
    CHECK(oov != std::string::npos);
    CHECK(iv != std::string::npos);
    CHECK(oov < iv);
    // Spans agree with a plain text search.
    const auto ivb = l.at("iv_span")[0].get<std::size_t>();
    const auto ive = l.at("iv_span")[1].get<std::size_t>();
    CHECK(ivb == iv + std::string("Known information: ").size());
    CHECK(text.substr(ive, std::string(". What is the class?").size()) == ". What is the class?");
  }
  CHECK(json_lines(dir / "o" / "train.jsonl").size() == 3);

  const auto preview = test::read_file(dir / "o" / "preview.txt");
  for (const auto& l : lines) {
    const auto text = l.at("prompt").get<std::string>();
    const auto b = l.at("oov_span")[0].get<std::size_t>();
    const auto e = l.at("oov_span")[1].get<std::size_t>();
    const auto annotation = "OOV [" + std::to_string(b) + ", " + std::to_string(e) + "): " + text.substr(b, e - b);
    CHECK(preview.find(annotation) != std::string::npos);
  }

  const auto zero = run({"gen-prompts", "--config", (dir / "cfg.json").string(), "--override", "oov.ratio=0",
                         "--out", (dir / "z").string()});
  REQUIRE(zero.code == 0);
  for (const auto& l : json_lines(dir / "z" / "test_prompts.jsonl")) {
    CHECK(l.at("prompt").get<std::string>().find("New information:") == std::string::npos);
    CHECK(l.at("oov_span").is_null());
  }
}

TEST_CASE("inspect, split, bucketize") {
  const auto dir = workspace("cli_data");
  const auto cfg = (dir / "cfg.json").string();
  const auto out = (dir / "o").string();
  REQUIRE(run({"inspect", "--config", cfg, "--out", out}).code == 0);
  CHECK(json::parse(test::read_file(dir / "o" / "inspect.json")).at("rows") == 80);
  REQUIRE(run({"split", "--config", cfg, "--out", out}).code == 0);
  CHECK(load_csv(dir / "o" / "test.csv", "class").num_rows() == 16);
  CHECK(load_csv(dir / "o" / "train.csv", "class").num_rows() == 64);
  CHECK(json::parse(test::read_file(dir / "o" / "oov_split.json")).at("oov_columns").size() == 2);
  REQUIRE(run({"bucketize", "--config", cfg, "--out", out}).code == 0);
  CHECK(json::parse(test::read_file(dir / "o" / "binners.json")).size() == 4);
  const auto disc = load_csv(dir / "o" / "train_discretized.csv", "class");
  CHECK(std::get<std::string>(disc.rows()[0][0]).rfind("Category ", 0) == 0);
}

TEST_CASE("export-finetune bundle") {
  const auto dir = workspace("cli_export");
  const auto r = run({"export-finetune", "--config", (dir / "cfg.json").string(), "--out", (dir / "o").string()});
  REQUIRE(r.code == 0);
  CHECK(json_lines(dir / "o" / "train.jsonl").size() == 64);
  const auto v = json::parse(test::read_file(dir / "o" / "verbalizer.json"));
  CHECK(v.at("loss") == "restricted");
  CHECK(v.at("classes").size() == 2);
  const auto fx = json::parse(test::read_file(dir / "o" / "loss_fixtures.json"));
  REQUIRE(fx.at("cases").size() == 32);
  const auto verb = verbalizer_from_json(v);
  for (const auto& c : fx.at("cases")) {
    const ClassVerbalizer local(verb.specs(), c.at("alpha1"), c.at("alpha2"));
    const auto logits = c.at("logits").get<LogitMap>();
    CHECK(verbalizer_loss(local, logits, c.at("true_class").get<std::string>()) ==
          c.at("loss_restricted").get<double>());
  }
}

TEST_CASE("infer, sweep, order-exp") {
  const auto dir = workspace("cli_runs");
  const auto cfg = (dir / "cfg.json").string();
  const auto out = (dir / "o").string();
  REQUIRE(run({"infer", "--config", cfg, "--out", out}).code == 0);
  const auto preds = json_lines(dir / "o" / "predictions.jsonl");
  CHECK(preds.size() == 16);
  CHECK(preds[0].contains("prompt"));
  CHECK(preds[0].at("probabilities").size() == 2);

  REQUIRE(run({"sweep", "--config", cfg, "--override", "sweep.ratios=[0,0.5]", "--override", "repetitions=1",
               "--out", out})
              .code == 0);
  const auto csv = test::read_file(dir / "o" / "sweep.csv");
  CHECK(test::count_occurrences(csv, "\n") == 1 + 2 * 4);

  REQUIRE(run({"order-exp", "--config", cfg, "--out", out}).code == 0);
  CHECK(json::parse(test::read_file(dir / "o" / "order_exp.json")).at("rows").size() == 3);
  CHECK(run({"order-exp", "--config", cfg, "--override", "model.kind=knn", "--out", out}).code == 1);
}

TEST_CASE("ttest verb") {
  auto r = run({"ttest", "--a", "1,2,3", "--b", "1,2,3,4,5"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(std::abs(j.at("p_value").get<double>() - 0.31613342192639328687) < 1e-9);
  CHECK(run({"ttest", "--a", "1", "--b", "1,2"}).code == 1);

  const auto dir = workspace("cli_ttest");
  REQUIRE(run({"evaluate", "--config", (dir / "cfg.json").string(), "--override", "repetitions=3", "--out",
               (dir / "o").string()})
              .code == 0);
  const auto t = run({"ttest", "--report", (dir / "o" / "report.json").string(), "--model-b", "knn"});
  REQUIRE(t.code == 0);
  CHECK(json::parse(t.out).at("model_b") == "knn");
  CHECK(run({"ttest", "--report", (dir / "o" / "report.json").string(), "--model-b", "svm"}).code == 1);
}

TEST_CASE("wire backend selected from the command line") {
  const auto task = make_additive_task(80, 4, 4, 17);
  const MockBackend mock(task.mock);
  test::StubServer stub;
  test::serve_logits(stub, mock);
  stub.start();
  const auto dir = workspace("cli_wire");
  const auto cfg = (dir / "cfg.json").string();
  REQUIRE(run({"evaluate", "--config", cfg, "--out", (dir / "mock").string()}).code == 0);
  REQUIRE(run({"evaluate", "--config", cfg, "--override", "model.kind=wire", "--backend-url", stub.url(), "--timeout",
               "5000", "--out", (dir / "wire").string()})
              .code == 0);
  const auto a = json::parse(test::read_file(dir / "mock" / "report.json"));
  const auto b = json::parse(test::read_file(dir / "wire" / "report.json"));
  REQUIRE(a.at("runs").size() == b.at("runs").size());
  for (std::size_t i = 0; i < a.at("runs").size(); ++i) CHECK(a["runs"][i]["metrics"] == b["runs"][i]["metrics"]);
  CHECK(b.at("config").at("model").at("url") == stub.url());
}

TEST_CASE("installed binary honours the exit-code contract") {
  const auto dir = workspace("cli_binary");
  const std::string bin = LBC_CLI_PATH;
  auto status = [](const std::string& cmd) {
    const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(raw);
  };
  CHECK(status(bin + " evaluate --config " + (dir / "cfg.json").string() + " --out " + (dir / "o").string()) == 0);
  CHECK(fs::exists(dir / "o" / "report.json"));
  CHECK(status(bin + " evaluate --bogus") == 2);
  CHECK(status(bin + " inspect --config " + (dir / "missing.json").string()) == 1);
  CHECK(status(bin + " --help") == 0);
}
