#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace lbc {

/// Word -> next-token logit. Only the words a caller asked for are present,
/// unless a backend returned its full vocabulary.
using LogitMap = std::map<std::string, double, std::less<>>;

struct ClassSpec {
  std::string label;
  std::string central_word;
  std::vector<std::string> synonyms;

  friend bool operator==(const ClassSpec&, const ClassSpec&) = default;
};

/// Which word set the loss softmax normalizes over.
enum class LossMode {
  restricted,       // the union of all central words and synonyms
  full_vocabulary,  // every entry of the LogitMap
};

/// Maps word logits to class scores:
///
///   Score(C_k) = alpha1 * l_k + alpha2 * sum_{w in S_k} l_w
///   P(C_k)     = softmax over classes of Score
///   J          = alpha1 * CE(l, k) + alpha2 * sum_{w in S_k} CE(l, w)
///
/// where k is the class's central word and S_k its synonyms.
class ClassVerbalizer {
 public:
  /// Maps a word to its first token; used to reject words that would share a
  /// first token across the verbalizer. Defaults to the identity.
  using FirstToken = std::function<std::string(std::string_view)>;

  ClassVerbalizer(std::vector<ClassSpec> specs, double alpha1, double alpha2, FirstToken first_token = {});

  [[nodiscard]] const std::vector<ClassSpec>& specs() const noexcept { return specs_; }
  [[nodiscard]] double alpha1() const noexcept { return alpha1_; }
  [[nodiscard]] double alpha2() const noexcept { return alpha2_; }

  /// Every central word and synonym, class by class.
  [[nodiscard]] std::vector<std::string> words() const;

  [[nodiscard]] std::size_t index_of(std::string_view label) const;

  /// Checks the specs cover `class_names` one-to-one and returns the specs
  /// reordered to match it.
  [[nodiscard]] ClassVerbalizer aligned_to(const std::vector<std::string>& class_names) const;

 private:
  std::vector<ClassSpec> specs_;
  double alpha1_;
  double alpha2_;
};

double score_class(const ClassVerbalizer& v, const ClassSpec& spec, const LogitMap& logits);

std::vector<double> class_scores(const ClassVerbalizer& v, const LogitMap& logits);

/// Max-subtracted softmax.
std::vector<double> softmax(const std::vector<double>& scores);

std::vector<double> class_probabilities(const ClassVerbalizer& v, const LogitMap& logits);

/// Label of the most probable class; ties go to the lexicographically
/// smallest central word.
std::string predict(const ClassVerbalizer& v, const LogitMap& logits);

double verbalizer_loss(const ClassVerbalizer& v, const LogitMap& logits, std::string_view true_class,
                       LossMode mode = LossMode::restricted);

/// dJ/dl_w for every word in the normalization set of `mode`.
LogitMap verbalizer_loss_gradient(const ClassVerbalizer& v, const LogitMap& logits, std::string_view true_class,
                                  LossMode mode = LossMode::restricted);

/// Logistic function 1 / (1 + e^-x), evaluated without overflow.
double logistic(double x);

/// Binary defaults: "Yes" -> {yes, yeah, true}, "No" -> {no, false, nope};
/// any other label is its own central word with no synonyms.
ClassVerbalizer default_verbalizer(const std::vector<std::string>& class_names, double alpha1 = 0.9,
                                   double alpha2 = 0.1);

/// {"classes": [{label, central_word, synonyms}], "alpha1", "alpha2"}
ClassVerbalizer verbalizer_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ClassVerbalizer& v);

LossMode loss_mode_from_string(std::string_view s);
std::string_view to_string(LossMode mode);

}  // namespace lbc
