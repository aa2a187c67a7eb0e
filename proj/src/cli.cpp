#include "lbc/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lbc/config.hpp"
#include "lbc/error.hpp"
#include "lbc/experiment.hpp"
#include "lbc/http_backend.hpp"
#include "lbc/rng.hpp"

namespace lbc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kModule = "cli";
constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string out = "out";
  bool json_errors = false;
  std::string backend_url;
  std::int64_t timeout_ms = 0;
  // ttest
  std::vector<double> a;
  std::vector<double> b;
  std::string report;
  std::string model_a;
  std::string model_b;
};

std::string key_listing() {
  std::string s = "Config keys (JSON document; override with --override key=value):\n";
  std::size_t width = 0;
  for (const auto& [k, d] : config_key_docs()) width = std::max(width, k.size());
  for (const auto& [k, d] : config_key_docs()) {
    s += "  " + k + std::string(width - k.size() + 2, ' ') + d + "\n";
  }
  s += "\nEnvironment: " + std::string(kBackendUrlEnv) + " supplies model.url when unset.\n";
  return s;
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, kModule, "write_output", "cannot write '" + path.string() + "'");
  f << content;
  if (!f) throw Error(ErrorKind::io, kModule, "write_output", "write failed for '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

fs::path prepare_out(const Options& o) {
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw Error(ErrorKind::io, kModule, "write_output", "cannot create '" + o.out + "': " + ec.message());
  return fs::path(o.out);
}

ExperimentConfig load(const Options& o) {
  auto overrides = o.overrides;
  if (!o.backend_url.empty()) overrides.push_back("model.url=\"" + o.backend_url + "\"");
  if (o.timeout_ms > 0) overrides.push_back("model.timeout_ms=" + std::to_string(o.timeout_ms));
  return load_config(o.config, overrides);
}

/// Train/test sides of repetition 0.
struct FirstSplit {
  TabularDataset train;
  TabularDataset test;
  OovSplit oov;
};

FirstSplit first_split(const ExperimentConfig& cfg, const ExperimentData& data) {
  if (data.test) {
    auto oov = make_oov_split(data.train, cfg.oov_ratio, cfg.oov_seed);
    return {data.train, *data.test, std::move(oov)};
  }
  auto tts = train_test_split(data.train, cfg.test_fraction, cfg.split_seed);
  auto oov = make_oov_split(tts.train, cfg.oov_ratio, cfg.oov_seed);
  return {std::move(tts.train), std::move(tts.test), std::move(oov)};
}

json span_json(const std::optional<TextSpan>& s) {
  if (!s) return nullptr;
  return json::array({s->begin, s->end});
}

json names_json(const std::vector<std::size_t>& cols, std::span<const ColumnSchema> schema) {
  json a = json::array();
  for (auto c : cols) a.push_back(schema[c].name);
  return a;
}

std::string annotate(const RenderedPrompt& p) {
  // Bracket the spans in the text, then underline them on the next line.
  std::string marks(p.text.size(), ' ');
  for (std::size_t i = p.iv_span.begin; i < p.iv_span.end; ++i) marks[i] = '~';
  if (p.oov_span) {
    for (std::size_t i = p.oov_span->begin; i < p.oov_span->end; ++i) marks[i] = '^';
  }
  while (!marks.empty() && marks.back() == ' ') marks.pop_back();
  std::string s = p.text + "\n" + marks + "\n";
  s += "  IV  [" + std::to_string(p.iv_span.begin) + ", " + std::to_string(p.iv_span.end) + "): " +
       std::string(p.iv_text()) + "\n";
  if (p.oov_span) {
    s += "  OOV [" + std::to_string(p.oov_span->begin) + ", " + std::to_string(p.oov_span->end) + "): " +
         std::string(*p.oov_text()) + "\n";
  } else {
    s += "  OOV none\n";
  }
  return s;
}

int cmd_inspect(const Options& o, std::ostream& out) {
  const auto cfg = load(o);
  const auto data = load_experiment_data(cfg);
  const auto& ds = data.train;
  json cols = json::array();
  for (const auto& c : ds.schema()) {
    std::size_t missing = 0;
    std::set<std::string> distinct;
    for (const auto& row : ds.rows()) {
      if (is_missing(row[c.index])) ++missing;
      else distinct.insert(cell_text(row[c.index]));
    }
    cols.push_back({{"name", c.name}, {"kind", to_string(c.kind)}, {"missing", missing}, {"distinct", distinct.size()}});
  }
  json counts = json::object();
  for (const auto& name : ds.class_names()) counts[name] = 0;
  for (const auto& l : ds.labels()) counts[l] = counts[l].get<std::size_t>() + 1;
  const json j{{"rows", ds.num_rows()}, {"columns", cols}, {"class_column", ds.label_name()}, {"class_counts", counts},
               {"oov_columns_at_ratio", oov_count(cfg.oov_ratio, ds.num_features())}};
  write_json(prepare_out(o) / "inspect.json", j);
  out << ds.num_rows() << " rows, " << ds.num_features() << " features, " << ds.class_names().size()
      << " classes\n";
  for (const auto& c : cols) {
    out << "  " << c["name"].get<std::string>() << " (" << c["kind"].get<std::string>()
        << "): " << c["distinct"] << " distinct, " << c["missing"] << " missing\n";
  }
  for (const auto& [k, v] : counts.items()) out << "  class " << k << ": " << v << "\n";
  return ok;
}

int cmd_split(const Options& o, std::ostream& out) {
  const auto cfg = load(o);
  const auto data = load_experiment_data(cfg);
  const auto s = first_split(cfg, data);
  const auto dir = prepare_out(o);
  save_csv(s.train, dir / "train.csv");
  save_csv(s.test, dir / "test.csv");
  write_json(dir / "oov_split.json", to_json(s.oov));
  out << "train " << s.train.num_rows() << " rows, test " << s.test.num_rows() << " rows; OOV columns:";
  for (auto c : s.oov.oov_columns) out << " " << s.train.schema()[c].name;
  out << "\n";
  return ok;
}

int cmd_bucketize(const Options& o, std::ostream& out) {
  auto cfg = load(o);
  cfg.discretize = true;
  const auto data = load_experiment_data(cfg);
  const auto s = first_split(cfg, data);
  const auto p = prepare_prompts(cfg, s.train, s.test, s.oov);
  const auto dir = prepare_out(o);
  json binners = json::array();
  for (const auto& b : p.binners) binners.push_back(to_json(b));
  write_json(dir / "binners.json", binners);
  save_csv(p.train_view, dir / "train_discretized.csv");
  save_csv(p.test_view, dir / "test_discretized.csv");
  out << p.binners.size() << " numeric columns discretized into " << cfg.n_categories << " categories\n";
  return ok;
}

int cmd_gen_prompts(const Options& o, std::ostream& out) {
  const auto cfg = load(o);
  const auto data = load_experiment_data(cfg);
  const auto s = first_split(cfg, data);
  const auto p = prepare_prompts(cfg, s.train, s.test, s.oov);
  const auto dir = prepare_out(o);
  export_jsonl(p.train_examples, dir / "train.jsonl");

  const auto& schema = p.test_view.schema();
  std::string lines;
  for (std::size_t i = 0; i < p.test_prompts.size(); ++i) {
    const auto& tp = p.test_prompts[i];
    json j;
    j["index"] = i;
    j["prompt"] = tp.text;
    j["label"] = p.test_view.labels()[i];
    j["iv_span"] = span_json(tp.iv_span);
    j["oov_span"] = span_json(tp.oov_span);
    j["variable_order"] = names_json(tp.variable_order, schema);
    j["random_word"] = tp.random_word ? json(*tp.random_word) : json(nullptr);
    lines += j.dump() + "\n";
  }
  write_file(dir / "test_prompts.jsonl", lines);

  std::string preview = "Legend: ~ IV part, ^ OOV part\n";
  for (std::size_t i = 0; i < std::min<std::size_t>(5, p.test_prompts.size()); ++i) {
    preview += "\n[" + std::to_string(i) + "] label " + p.test_view.labels()[i] + "\n" + annotate(p.test_prompts[i]);
  }
  write_file(dir / "preview.txt", preview);
  out << p.train_examples.size() << " training examples, " << p.test_prompts.size() << " test prompts written to "
      << dir.string() << "\n";
  return ok;
}

json loss_fixtures(const ExperimentConfig& cfg, const ClassVerbalizer& v) {
  const auto words = v.words();
  const std::vector<std::pair<double, double>> alphas = {
      {v.alpha1(), v.alpha2()}, {1.0, 0.0}, {0.5, 0.5}, {0.9, 0.1}};
  SplitMix64 rng(cfg.split_seed ^ 0x5EEDF1C5ULL);
  json cases = json::array();
  for (std::size_t i = 0; i < 32; ++i) {
    const auto [a1, a2] = alphas[i % alphas.size()];
    const ClassVerbalizer local(v.specs(), a1, a2);
    LogitMap logits;
    for (const auto& w : words) logits[w] = std::round(3.0 * rng.normal() * 1e6) / 1e6;
    const auto& label = v.specs()[rng.below(v.specs().size())].label;
    cases.push_back({{"logits", logits},
                     {"true_class", label},
                     {"alpha1", a1},
                     {"alpha2", a2},
                     {"loss_restricted", verbalizer_loss(local, logits, label, LossMode::restricted)},
                     {"loss_full_vocabulary", verbalizer_loss(local, logits, label, LossMode::full_vocabulary)}});
  }
  return {{"cases", cases}};
}

int cmd_export_finetune(const Options& o, std::ostream& out) {
  const auto cfg = load(o);
  const auto data = load_experiment_data(cfg);
  const auto s = first_split(cfg, data);
  const auto p = prepare_prompts(cfg, s.train, s.test, s.oov);
  const auto v = make_verbalizer(cfg, data.train.class_names());
  const auto dir = prepare_out(o);
  export_jsonl(p.train_examples, dir / "train.jsonl");
  auto vj = to_json(v);
  vj["loss"] = to_string(cfg.loss_mode);
  write_json(dir / "verbalizer.json", vj);
  write_json(dir / "loss_fixtures.json", loss_fixtures(cfg, v));
  out << p.train_examples.size() << " examples exported to " << (dir / "train.jsonl").string() << "\n";
  return ok;
}

int cmd_infer(const Options& o, std::ostream& out) {
  auto cfg = load(o);
  cfg.baselines.clear();
  cfg.repetitions = 1;
  const auto data = load_experiment_data(cfg);
  const auto result = run_experiment(cfg, data);
  const auto& run = result.runs.front();
  std::optional<PreparedPrompts> prompts;
  if (cfg.model.is_language_model()) {
    const auto s = first_split(cfg, data);
    prompts = prepare_prompts(cfg, s.train, s.test, s.oov);
  }
  std::string lines;
  for (std::size_t i = 0; i < run.predictions.size(); ++i) {
    json j;
    j["index"] = i;
    if (prompts) j["prompt"] = prompts->test_prompts[i].text;
    j["truth"] = result.class_names[run.truth[i]];
    j["prediction"] =
        run.predictions[i] < result.class_names.size() ? json(result.class_names[run.predictions[i]]) : json(nullptr);
    if (!run.probabilities.empty()) {
      json probs = json::object();
      for (std::size_t c = 0; c < result.class_names.size(); ++c) probs[result.class_names[c]] = run.probabilities[i][c];
      j["probabilities"] = probs;
    }
    lines += j.dump() + "\n";
  }
  write_file(prepare_out(o) / "predictions.jsonl", lines);
  out << run.predictions.size() << " predictions, accuracy " << run.report.accuracy << "\n";
  return ok;
}

void write_metadata(const fs::path& dir, const std::string& verb) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  write_json(dir / "metadata.json", {{"command", verb}, {"timestamp", buf}, {"version", kVersion}});
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  const auto cfg = load(o);
  const auto data = load_experiment_data(cfg);
  const auto result = run_experiment(cfg, data);
  const auto dir = prepare_out(o);
  const auto table = format_report_table(result);
  write_json(dir / "report.json", to_json(result, cfg));
  write_file(dir / "report.txt", table);
  write_metadata(dir, "evaluate");
  out << table;
  return ok;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const auto cfg = load(o);
  const auto data = load_experiment_data(cfg);
  const auto rows = oov_sweep(cfg, data, cfg.sweep_ratios);
  const auto dir = prepare_out(o);
  const auto csv = sweep_csv(rows);
  json j = json::array();
  for (const auto& r : rows) j.push_back({{"ratio", r.ratio}, {"model", r.model}, {"mean", r.mean}, {"stddev", r.stddev}});
  write_file(dir / "sweep.csv", csv);
  write_json(dir / "sweep.json", {{"config", cfg.resolved}, {"rows", j}});
  write_metadata(dir, "sweep");
  out << csv;
  return ok;
}

int cmd_order_exp(const Options& o, std::ostream& out) {
  const auto cfg = load(o);
  if (!cfg.model.is_language_model()) {
    throw Error(ErrorKind::config, "evaluation", "order_variance_experiment",
                "order-exp needs a language-model kind, got '" + cfg.model.kind + "'");
  }
  const auto data = load_experiment_data(cfg);
  const auto s = first_split(cfg, data);
  const auto p = prepare_prompts(cfg, s.train, s.test, s.oov);
  const auto v = make_verbalizer(cfg, data.train.class_names());
  const auto backend = make_backend(cfg, v);

  const std::size_t n_rows = std::min(cfg.order.rows, p.test_view.num_rows());
  auto perm = seeded_permutation(p.test_view.num_rows(), cfg.order.seed);
  perm.resize(n_rows);

  OrderVarianceOptions opts{cfg.order.n_prompts, cfg.order.seed, cfg.order.randomize_ao_oov};
  json rows = json::array();
  std::string csv = "row,var_random,var_advanced\n";
  std::size_t wins = 0;
  for (auto r : perm) {
    const auto res = order_variance_experiment(p.test_view.rows()[r], p.test_view.class_index(p.test_view.labels()[r]),
                                               p.test_view.schema(), s.oov, p.training_order, cfg.tmpl, v, *backend,
                                               opts);
    if (res.var_random > res.var_advanced) ++wins;
    rows.push_back({{"row", r},
                    {"var_random", res.var_random},
                    {"var_advanced", res.var_advanced},
                    {"random_order", res.random_order},
                    {"advanced_order", res.advanced_order}});
    csv += std::to_string(r) + "," + format_number(res.var_random) + "," + format_number(res.var_advanced) + "\n";
  }
  const auto dir = prepare_out(o);
  write_file(dir / "order_exp.csv", csv);
  write_json(dir / "order_exp.json", {{"config", cfg.resolved}, {"rows", rows}, {"ro_exceeds_ao", wins}});
  write_metadata(dir, "order-exp");
  out << csv << "RO variance exceeds AO variance on " << wins << " of " << n_rows << " rows\n";
  return ok;
}

int cmd_ttest(const Options& o, std::ostream& out) {
  std::vector<double> a = o.a;
  std::vector<double> b = o.b;
  std::string name_a = "a";
  std::string name_b = "b";
  if (!o.report.empty()) {
    std::ifstream in(o.report);
    if (!in) throw Error(ErrorKind::io, kModule, "ttest", "cannot open report '" + o.report + "'");
    json r;
    try {
      r = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::parse, kModule, "ttest", std::string("report: ") + e.what());
    }
    std::map<std::string, std::vector<double>> acc;
    std::vector<std::string> order;
    for (const auto& s : r.at("summaries")) {
      order.push_back(s.at("model").get<std::string>());
      acc[order.back()] = s.at("accuracies").get<std::vector<double>>();
    }
    if (order.size() < 2) throw Error(ErrorKind::config, kModule, "ttest", "report has fewer than two models");
    name_a = o.model_a.empty() ? order[0] : o.model_a;
    name_b = o.model_b.empty() ? order[1] : o.model_b;
    for (const auto& n : {name_a, name_b}) {
      if (!acc.count(n)) throw Error(ErrorKind::config, kModule, "ttest", "model '" + n + "' not in report");
    }
    a = acc[name_a];
    b = acc[name_b];
  }
  const auto t = welch_ttest(a, b);
  auto j = to_json(t);
  j["model_a"] = name_a;
  j["model_b"] = name_b;
  out << j.dump(2) << "\n";
  if (!o.out.empty()) write_json(prepare_out(o) / "ttest.json", j);
  return ok;
}

void report_error(std::ostream& err, bool as_json, std::string_view kind, std::string_view module,
                  std::string_view stage, std::string_view message) {
  if (as_json) {
    err << json{{"error", {{"kind", kind}, {"module", module}, {"stage", stage}, {"message", message}}}}.dump() << "\n";
  } else {
    err << "error [" << module << "/" << stage << "] " << kind << ": " << message << "\n";
  }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Tabular classification with language-model prompts", "lbc"};
  app.require_subcommand(1);
  app.footer(key_listing());
  app.set_version_flag("--version", kVersion);

  using Handler = int (*)(const Options&, std::ostream&);
  struct Verb {
    const char* name;
    const char* help;
    Handler run;
  };
  const Verb verbs[] = {
      {"inspect", "Summarize the dataset schema and class balance (inspect.json)", cmd_inspect},
      {"split", "Write the seeded train/test split and OOV split (train.csv, test.csv, oov_split.json)", cmd_split},
      {"bucketize", "Fit N-tile thresholds on the training side (binners.json, *_discretized.csv)", cmd_bucketize},
      {"gen-prompts", "Render prompts (train.jsonl, test_prompts.jsonl, preview.txt)", cmd_gen_prompts},
      {"export-finetune", "Fine-tuning bundle (train.jsonl, verbalizer.json, loss_fixtures.json)", cmd_export_finetune},
      {"infer", "Predict the test split with the configured model (predictions.jsonl)", cmd_infer},
      {"evaluate", "Run all models over the repetitions (report.json, report.txt, metadata.json)", cmd_evaluate},
      {"sweep", "Accuracy across OOV ratios (sweep.csv, sweep.json)", cmd_sweep},
      {"order-exp", "Variance of P(correct) for random vs advanced order (order_exp.csv, order_exp.json)",
       cmd_order_exp},
      {"ttest", "Welch t-test on two accuracy samples or two models of a report", cmd_ttest},
  };

  std::map<std::string, Handler> handlers;
  for (const auto& v : verbs) {
    auto* sub = app.add_subcommand(v.name, v.help);
    sub->footer(key_listing());
    sub->add_flag("--json-errors", o.json_errors, "Print errors as one JSON object on stderr");
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    if (std::string_view(v.name) == "ttest") {
      sub->add_option("--a", o.a, "First sample")->delimiter(',');
      sub->add_option("--b", o.b, "Second sample")->delimiter(',');
      auto* rep = sub->add_option("--report", o.report, "report.json from evaluate");
      sub->add_option("--model-a", o.model_a, "Model in the report (default: first)")->needs(rep);
      sub->add_option("--model-b", o.model_b, "Model in the report (default: second)")->needs(rep);
    } else {
      sub->add_option("--config", o.config, "Experiment config JSON")->required();
      sub->add_option("--override", o.overrides, "Dotted key=value applied after loading")->allow_extra_args(false);
      sub->add_option("--backend-url", o.backend_url, "Backend base URL (sets model.url)");
      sub->add_option("--timeout", o.timeout_ms, "Backend timeout in milliseconds (sets model.timeout_ms)");
    }
    handlers[v.name] = v.run;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return usage_error;
  }

  const auto* sub = app.get_subcommands().front();
  if (sub->get_name() == "ttest") {
    const bool samples = !o.a.empty() || !o.b.empty();
    if (samples == !o.report.empty()) {
      err << "usage error: ttest needs either --a and --b, or --report\n\n" << sub->help();
      return usage_error;
    }
    if (!sub->count("--out")) o.out.clear();
  }

  try {
    return handlers.at(sub->get_name())(o, out);
  } catch (const Error& e) {
    report_error(err, o.json_errors, to_string(e.kind()), e.module(), e.stage(), e.what());
  } catch (const nlohmann::json::exception& e) {
    report_error(err, o.json_errors, "parse", kModule, sub->get_name(), e.what());
  } catch (const std::exception& e) {
    report_error(err, o.json_errors, "internal", kModule, sub->get_name(), e.what());
  }
  return domain_error;
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, out, err);
}

}  // namespace lbc::cli
