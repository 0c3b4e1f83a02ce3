#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fairtext/corpus.h"

namespace fairtext {

enum class ClassWeighting { kNone, kInverseFrequency };

// How a corpus with more than two classes is modelled. Binary corpora always
// use a single logistic weight vector.
enum class MulticlassMode { kSoftmax, kOneVsRest };

// "none" / "inverse-frequency".
std::string to_string(ClassWeighting weighting);
ClassWeighting parse_class_weighting(const std::string& name);
// "softmax" / "one-vs-rest" ("ovr" is accepted when parsing).
std::string to_string(MulticlassMode mode);
MulticlassMode parse_multiclass_mode(const std::string& name);

struct TrainConfig {
  int epochs = 20;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  ClassWeighting class_weighting = ClassWeighting::kNone;
  std::uint64_t seed = 13;
  int batch_size = 32;
  MulticlassMode multiclass = MulticlassMode::kSoftmax;
  // Binary tasks only; defaults to the lexicographically last class.
  std::optional<std::string> positive_class;

  // Throws ValidationError when a field is out of range.
  void validate() const;
};

// Sorted (feature index, count) pairs.
using SparseFeatures = std::vector<std::pair<std::size_t, double>>;

class LinearModel {
 public:
  LinearModel() = default;
  LinearModel(std::vector<std::string> vocabulary,
              std::vector<std::string> classes, TrainConfig config);

  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const std::vector<std::string>& classes() const { return classes_; }
  const TrainConfig& config() const { return config_; }
  bool is_binary() const { return classes_.size() == 2; }
  // Binary models: the class whose log-odds the single weight vector scores.
  const std::string& positive_class() const;

  std::optional<std::size_t> feature_index(const std::string& token) const;
  SparseFeatures featurize(std::span<const std::string> tokens) const;

  // Number of stored weight vectors: 1 for binary, one per class otherwise.
  std::size_t num_outputs() const { return weights_.size(); }
  std::span<const double> weights(std::size_t output) const {
    return weights_[output];
  }
  std::span<double> mutable_weights(std::size_t output) {
    return weights_[output];
  }
  double bias(std::size_t output) const { return bias_[output]; }
  double& mutable_bias(std::size_t output) { return bias_[output]; }

  // Contribution of one occurrence of `token` to the score of
  // `target_class`: w for the positive class of a binary model, -w for its
  // negative class, the class's own vector otherwise. Out-of-vocabulary
  // tokens contribute 0. Throws ValidationError for an unknown class.
  double token_weight(const std::string& token,
                      const std::string& target_class) const;
  // Convenience setter for hand-built models (binary: positive class vector).
  void set_token_weight(const std::string& token, const std::string& class_name,
                        double weight);

  ClassProbabilities predict_tokens(std::span<const std::string> tokens) const;
  ClassProbabilities predict_features(const SparseFeatures& features) const;

  // Mean training loss recorded before the first epoch and after each epoch.
  const std::vector<double>& loss_history() const { return loss_history_; }
  void set_loss_history(std::vector<double> history) {
    loss_history_ = std::move(history);
  }

  bool operator==(const LinearModel& other) const;

 private:
  std::size_t output_for(const std::string& class_name) const;

  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> classes_;
  std::vector<std::vector<double>> weights_;
  std::vector<double> bias_;
  TrainConfig config_;
  std::vector<double> loss_history_;
};

// Regularised, optionally class-weighted cross-entropy over a featurized
// corpus. Parameters are flattened as [w_0 | b_0 | w_1 | b_1 | ...].
class TrainingObjective {
 public:
  TrainingObjective(const LinearModel& shape,
                    std::vector<SparseFeatures> features,
                    std::vector<std::size_t> labels,
                    std::vector<double> example_weights, double l2);

  std::size_t num_parameters() const;
  std::vector<double> parameters(const LinearModel& model) const;
  void assign(std::span<const double> params, LinearModel& model) const;

  // Mean weighted loss over `rows` (all rows when empty) plus the L2 term.
  double loss(std::span<const double> params,
              std::span<const std::size_t> rows = {}) const;
  // Analytic gradient of loss() with respect to params.
  std::vector<double> gradient(std::span<const double> params,
                               std::span<const std::size_t> rows = {}) const;
  // Per-class sum of weighted example losses (no regulariser).
  std::vector<double> class_loss_contributions(
      std::span<const double> params) const;

  std::size_t num_rows() const { return features_.size(); }

 private:
  // Per-output logits for one row.
  void logits(std::span<const double> params, std::size_t row,
              std::vector<double>& out) const;
  double row_loss(std::span<const double> params, std::size_t row,
                  std::vector<double>& scratch) const;

  std::size_t vocab_size_;
  std::size_t num_outputs_;
  std::size_t num_classes_;
  bool binary_;
  bool softmax_;
  std::vector<SparseFeatures> features_;
  std::vector<std::size_t> labels_;
  std::vector<double> example_weights_;
  double l2_;
};

// Per-class example weights N / (C * n_c), or all ones.
std::vector<double> example_weights(std::span<const std::size_t> labels,
                                    std::size_t num_classes,
                                    ClassWeighting weighting);

LinearModel train(const LabeledCorpus& corpus, const TrainConfig& config);

ClassProbabilities predict(const LinearModel& model, const Document& doc);

// Black-box view of any classifier over token sequences.
using PredictFn =
    std::function<ClassProbabilities(std::span<const std::string> tokens)>;
PredictFn as_predict_fn(const LinearModel& model);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct Metrics {
  double f1_macro = 0.0;
  double f1_weighted = 0.0;
  double accuracy = 0.0;
  // Binary tasks only.
  std::optional<double> auc;
  std::map<std::string, ClassScores> per_class;
};

// F1 from raw counts; 0 when precision and recall are both undefined.
double f1_score(std::size_t tp, std::size_t fp, std::size_t fn);

// Probability that a random positive outranks a random negative, ties
// counted one half. Throws MetricError when either list is empty.
double rank_auc(std::span<const double> positive_scores,
                std::span<const double> negative_scores);

// Metrics from gold labels and predicted class names (no AUC).
Metrics classification_metrics(std::span<const std::string> gold,
                               std::span<const std::string> predicted,
                               std::span<const std::string> classes);

// Decision rule: binary models predict the positive class when its
// probability is >= threshold; otherwise argmax.
std::string decide(const LinearModel& model, const ClassProbabilities& probs,
                   double threshold = 0.5);

Metrics evaluate(const LinearModel& model, const LabeledCorpus& corpus,
                 double threshold = 0.5);

void save_model(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_model(const std::filesystem::path& path);

struct ExternalPredictions {
  std::map<std::string, ClassProbabilities> by_id;
  std::vector<std::string> unresolved;
};

// JSONL records {"id": ..., "probabilities": {class: p, ...}}. Ids that do
// not occur in `corpus` are listed in `unresolved`.
ExternalPredictions load_external_predictions(const std::filesystem::path& path,
                                              const LabeledCorpus& corpus);
void save_predictions(const LabeledCorpus& corpus,
                      const std::vector<ClassProbabilities>& predictions,
                      const std::filesystem::path& path);

}  // namespace fairtext
