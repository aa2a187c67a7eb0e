#include "lbc/verbalizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "lbc/error.hpp"

namespace lbc {

namespace {

constexpr const char* kModule = "verbalizer";

double lookup(const LogitMap& logits, std::string_view word) {
  const auto it = logits.find(word);
  if (it == logits.end()) {
    throw Error(ErrorKind::contract, kModule, "score_class", "no logit for word '" + std::string(word) + "'");
  }
  if (!std::isfinite(it->second)) {
    throw Error(ErrorKind::contract, kModule, "score_class", "non-finite logit for word '" + std::string(word) + "'");
  }
  return it->second;
}

double log_sum_exp(const std::vector<double>& xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - m);
  return m + std::log(sum);
}

/// Words the loss softmax normalizes over, with their logits.
std::vector<std::pair<std::string, double>> normalization_set(const ClassVerbalizer& v, const LogitMap& logits,
                                                              LossMode mode) {
  std::vector<std::pair<std::string, double>> out;
  if (mode == LossMode::full_vocabulary) {
    for (const auto& w : v.words()) lookup(logits, w);
    for (const auto& [w, l] : logits) out.emplace_back(w, lookup(logits, w));
  } else {
    for (const auto& w : v.words()) out.emplace_back(w, lookup(logits, w));
  }
  return out;
}

}  // namespace

ClassVerbalizer::ClassVerbalizer(std::vector<ClassSpec> specs, double alpha1, double alpha2, FirstToken first_token)
    : specs_(std::move(specs)), alpha1_(alpha1), alpha2_(alpha2) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, kModule, "verbalizer", msg); };
  if (!(alpha1_ > 0.0) || !std::isfinite(alpha1_)) fail("alpha1 must be positive");
  if (!(alpha2_ >= 0.0) || !std::isfinite(alpha2_)) fail("alpha2 must be non-negative");
  if (specs_.size() < 2) fail("a verbalizer needs at least two classes");
  std::set<std::string> labels;
  std::set<std::string> seen_words;
  std::set<std::string> seen_tokens;
  for (const auto& spec : specs_) {
    if (!labels.insert(spec.label).second) fail("duplicate class label '" + spec.label + "'");
    if (spec.central_word.empty()) fail("class '" + spec.label + "' has an empty central word");
    std::vector<const std::string*> all{&spec.central_word};
    for (const auto& s : spec.synonyms) all.push_back(&s);
    for (const auto* w : all) {
      if (w->empty()) fail("class '" + spec.label + "' has an empty synonym");
      if (!seen_words.insert(*w).second) fail("word '" + *w + "' appears more than once in the verbalizer");
      if (first_token) {
        const auto tok = first_token(*w);
        if (!seen_tokens.insert(tok).second) {
          fail("word '" + *w + "' shares its first token '" + tok + "' with another verbalizer word");
        }
      }
    }
  }
}

std::vector<std::string> ClassVerbalizer::words() const {
  std::vector<std::string> out;
  for (const auto& spec : specs_) {
    out.push_back(spec.central_word);
    out.insert(out.end(), spec.synonyms.begin(), spec.synonyms.end());
  }
  return out;
}

std::size_t ClassVerbalizer::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].label == label) return i;
  }
  throw Error(ErrorKind::config, kModule, "verbalizer", "unknown class '" + std::string(label) + "'");
}

ClassVerbalizer ClassVerbalizer::aligned_to(const std::vector<std::string>& class_names) const {
  if (class_names.size() != specs_.size()) {
    throw Error(ErrorKind::config, kModule, "verbalizer",
                "verbalizer has " + std::to_string(specs_.size()) + " classes, dataset has " +
                    std::to_string(class_names.size()));
  }
  std::vector<ClassSpec> ordered;
  ordered.reserve(specs_.size());
  for (const auto& name : class_names) ordered.push_back(specs_[index_of(name)]);
  return ClassVerbalizer(std::move(ordered), alpha1_, alpha2_);
}

double score_class(const ClassVerbalizer& v, const ClassSpec& spec, const LogitMap& logits) {
  double synonym_sum = 0.0;
  for (const auto& w : spec.synonyms) synonym_sum += lookup(logits, w);
  return v.alpha1() * lookup(logits, spec.central_word) + v.alpha2() * synonym_sum;
}

std::vector<double> class_scores(const ClassVerbalizer& v, const LogitMap& logits) {
  std::vector<double> scores;
  scores.reserve(v.specs().size());
  for (const auto& spec : v.specs()) scores.push_back(score_class(v, spec, logits));
  return scores;
}

std::vector<double> softmax(const std::vector<double>& scores) {
  const double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - m);
    sum += out[i];
  }
  for (auto& p : out) p /= sum;
  return out;
}

std::vector<double> class_probabilities(const ClassVerbalizer& v, const LogitMap& logits) {
  return softmax(class_scores(v, logits));
}

std::string predict(const ClassVerbalizer& v, const LogitMap& logits) {
  const auto probs = class_probabilities(v, logits);
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best] ||
        (probs[i] == probs[best] && v.specs()[i].central_word < v.specs()[best].central_word)) {
      best = i;
    }
  }
  return v.specs()[best].label;
}

double verbalizer_loss(const ClassVerbalizer& v, const LogitMap& logits, std::string_view true_class, LossMode mode) {
  const auto& spec = v.specs()[v.index_of(true_class)];
  const auto set = normalization_set(v, logits, mode);
  std::vector<double> values;
  values.reserve(set.size());
  for (const auto& [w, l] : set) values.push_back(l);
  const double lse = log_sum_exp(values);
  double loss = v.alpha1() * (lse - lookup(logits, spec.central_word));
  for (const auto& w : spec.synonyms) loss += v.alpha2() * (lse - lookup(logits, w));
  return loss;
}

LogitMap verbalizer_loss_gradient(const ClassVerbalizer& v, const LogitMap& logits, std::string_view true_class,
                                  LossMode mode) {
  const auto& spec = v.specs()[v.index_of(true_class)];
  const auto set = normalization_set(v, logits, mode);
  std::vector<double> values;
  values.reserve(set.size());
  for (const auto& [w, l] : set) values.push_back(l);
  const auto probs = softmax(values);
  // J = sum_t c_t (lse - l_t)  =>  dJ/dl_u = (sum_t c_t) p_u - c_u
  const double total_weight = v.alpha1() + v.alpha2() * static_cast<double>(spec.synonyms.size());
  LogitMap grad;
  for (std::size_t i = 0; i < set.size(); ++i) grad[set[i].first] = total_weight * probs[i];
  grad[spec.central_word] -= v.alpha1();
  for (const auto& w : spec.synonyms) grad[w] -= v.alpha2();
  return grad;
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

ClassVerbalizer default_verbalizer(const std::vector<std::string>& class_names, double alpha1, double alpha2) {
  std::vector<ClassSpec> specs;
  for (const auto& name : class_names) {
    if (name == "Yes") {
      specs.push_back({name, name, {"yes", "yeah", "true"}});
    } else if (name == "No") {
      specs.push_back({name, name, {"no", "false", "nope"}});
    } else {
      specs.push_back({name, name, {}});
    }
  }
  return ClassVerbalizer(std::move(specs), alpha1, alpha2);
}

ClassVerbalizer verbalizer_from_json(const nlohmann::json& j) {
  try {
    std::vector<ClassSpec> specs;
    for (const auto& c : j.at("classes")) {
      ClassSpec spec;
      spec.label = c.at("label").get<std::string>();
      spec.central_word = c.value("central_word", spec.label);
      spec.synonyms = c.value("synonyms", std::vector<std::string>{});
      specs.push_back(std::move(spec));
    }
    return ClassVerbalizer(std::move(specs), j.value("alpha1", 0.9), j.value("alpha2", 0.1));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config, kModule, "verbalizer_from_json", e.what());
  }
}

nlohmann::json to_json(const ClassVerbalizer& v) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& s : v.specs()) {
    classes.push_back({{"label", s.label}, {"central_word", s.central_word}, {"synonyms", s.synonyms}});
  }
  return nlohmann::json{{"classes", classes}, {"alpha1", v.alpha1()}, {"alpha2", v.alpha2()}};
}

LossMode loss_mode_from_string(std::string_view s) {
  if (s == "restricted") return LossMode::restricted;
  if (s == "full_vocabulary" || s == "full") return LossMode::full_vocabulary;
  throw Error(ErrorKind::config, kModule, "verbalizer", "unknown loss mode '" + std::string(s) + "'");
}

std::string_view to_string(LossMode mode) {
  return mode == LossMode::restricted ? "restricted" : "full_vocabulary";
}

}  // namespace lbc
