#include "fairtext/classifier.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "fairtext/error.h"
#include "fairtext/random.h"
#include "json.hpp"

namespace fairtext {

namespace {

using json = nlohmann::json;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) {
  if (z > 0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

json config_to_json(const TrainConfig& c) {
  json j;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["l2"] = c.l2;
  j["class_weighting"] = to_string(c.class_weighting);
  j["seed"] = c.seed;
  j["batch_size"] = c.batch_size;
  j["multiclass"] = to_string(c.multiclass);
  if (c.positive_class) j["positive_class"] = *c.positive_class;
  return j;
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.l2 = j.value("l2", c.l2);
  c.class_weighting =
      parse_class_weighting(j.value("class_weighting", std::string("none")));
  c.seed = j.value("seed", c.seed);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.multiclass = parse_multiclass_mode(j.value("multiclass", std::string("softmax")));
  if (j.contains("positive_class") && !j["positive_class"].is_null()) {
    c.positive_class = j["positive_class"].get<std::string>();
  }
  return c;
}

}  // namespace

std::string to_string(ClassWeighting weighting) {
  return weighting == ClassWeighting::kInverseFrequency ? "inverse-frequency" : "none";
}

ClassWeighting parse_class_weighting(const std::string& name) {
  if (name == "none") return ClassWeighting::kNone;
  if (name == "inverse-frequency") return ClassWeighting::kInverseFrequency;
  throw ValidationError("unknown class weighting '" + name + "'");
}

std::string to_string(MulticlassMode mode) {
  return mode == MulticlassMode::kOneVsRest ? "one-vs-rest" : "softmax";
}

MulticlassMode parse_multiclass_mode(const std::string& name) {
  if (name == "softmax") return MulticlassMode::kSoftmax;
  if (name == "one-vs-rest" || name == "ovr") return MulticlassMode::kOneVsRest;
  throw ValidationError("unknown multiclass mode '" + name + "'");
}

void TrainConfig::validate() const {
  if (epochs <= 0) throw ValidationError("epochs must be positive");
  if (!(learning_rate > 0)) {
    throw ValidationError("learning_rate must be positive");
  }
  if (!(l2 >= 0)) throw ValidationError("l2 must be non-negative");
  if (batch_size <= 0) throw ValidationError("batch_size must be positive");
}

// ---------------------------------------------------------------------------
// LinearModel

LinearModel::LinearModel(std::vector<std::string> vocabulary,
                         std::vector<std::string> classes, TrainConfig config)
    : vocabulary_(std::move(vocabulary)),
      classes_(std::move(classes)),
      config_(std::move(config)) {
  if (classes_.size() < 2) {
    throw ValidationError("a model needs at least two classes");
  }
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    if (!index_.emplace(vocabulary_[i], i).second) {
      throw ValidationError("duplicate vocabulary entry '" + vocabulary_[i] +
                            "'");
    }
  }
  if (is_binary()) {
    if (config_.positive_class) {
      if (std::find(classes_.begin(), classes_.end(), *config_.positive_class) ==
          classes_.end()) {
        throw ValidationError("positive class '" + *config_.positive_class +
                              "' is not a model class");
      }
    } else {
      config_.positive_class = classes_.back();
    }
  }
  const std::size_t outputs = is_binary() ? 1 : classes_.size();
  weights_.assign(outputs, std::vector<double>(vocabulary_.size(), 0.0));
  bias_.assign(outputs, 0.0);
}

const std::string& LinearModel::positive_class() const {
  return *config_.positive_class;
}

std::optional<std::size_t> LinearModel::feature_index(
    const std::string& token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

SparseFeatures LinearModel::featurize(std::span<const std::string> tokens) const {
  std::map<std::size_t, double> counts;
  for (const auto& token : tokens) {
    if (const auto idx = feature_index(token)) counts[*idx] += 1.0;
  }
  return {counts.begin(), counts.end()};
}

std::size_t LinearModel::output_for(const std::string& class_name) const {
  const auto it = std::find(classes_.begin(), classes_.end(), class_name);
  if (it == classes_.end()) {
    throw ValidationError("unknown class '" + class_name + "'");
  }
  return is_binary() ? 0 : static_cast<std::size_t>(it - classes_.begin());
}

double LinearModel::token_weight(const std::string& token,
                                 const std::string& target_class) const {
  const std::size_t output = output_for(target_class);
  const auto idx = feature_index(token);
  if (!idx) return 0.0;
  const double w = weights_[output][*idx];
  if (is_binary() && target_class != positive_class()) return -w;
  return w;
}

void LinearModel::set_token_weight(const std::string& token,
                                   const std::string& class_name,
                                   double weight) {
  const std::size_t output = output_for(class_name);
  const auto idx = feature_index(token);
  if (!idx) throw ValidationError("token '" + token + "' not in vocabulary");
  if (is_binary() && class_name != positive_class()) weight = -weight;
  weights_[output][*idx] = weight;
}

ClassProbabilities LinearModel::predict_tokens(
    std::span<const std::string> tokens) const {
  return predict_features(featurize(tokens));
}

ClassProbabilities LinearModel::predict_features(
    const SparseFeatures& features) const {
  std::vector<double> z(weights_.size());
  for (std::size_t o = 0; o < weights_.size(); ++o) {
    double s = bias_[o];
    for (const auto& [idx, count] : features) s += weights_[o][idx] * count;
    z[o] = s;
  }

  ClassProbabilities probs;
  if (is_binary()) {
    const double p = sigmoid(z[0]);
    for (const auto& c : classes_) {
      probs.values[c] = c == positive_class() ? p : 1.0 - p;
    }
    return probs;
  }
  std::vector<double> p(z.size());
  if (config_.multiclass == MulticlassMode::kSoftmax) {
    const double m = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (std::size_t o = 0; o < z.size(); ++o) {
      p[o] = std::exp(z[o] - m);
      total += p[o];
    }
    for (auto& v : p) v /= total;
  } else {
    double total = 0.0;
    for (std::size_t o = 0; o < z.size(); ++o) {
      p[o] = sigmoid(z[o]);
      total += p[o];
    }
    for (auto& v : p) v /= total;
  }
  for (std::size_t o = 0; o < classes_.size(); ++o) {
    probs.values[classes_[o]] = p[o];
  }
  return probs;
}

bool LinearModel::operator==(const LinearModel& other) const {
  return vocabulary_ == other.vocabulary_ && classes_ == other.classes_ &&
         weights_ == other.weights_ && bias_ == other.bias_ &&
         config_.positive_class == other.config_.positive_class &&
         config_.multiclass == other.config_.multiclass;
}

// ---------------------------------------------------------------------------
// TrainingObjective

TrainingObjective::TrainingObjective(const LinearModel& shape,
                                     std::vector<SparseFeatures> features,
                                     std::vector<std::size_t> labels,
                                     std::vector<double> example_weights,
                                     double l2)
    : vocab_size_(shape.vocabulary().size()),
      num_outputs_(shape.num_outputs()),
      num_classes_(shape.classes().size()),
      binary_(shape.is_binary()),
      softmax_(shape.config().multiclass == MulticlassMode::kSoftmax),
      features_(std::move(features)),
      labels_(std::move(labels)),
      example_weights_(std::move(example_weights)),
      l2_(l2) {
  if (features_.size() != labels_.size() ||
      features_.size() != example_weights_.size()) {
    throw ValidationError("objective inputs have mismatched lengths");
  }
}

std::size_t TrainingObjective::num_parameters() const {
  return num_outputs_ * (vocab_size_ + 1);
}

std::vector<double> TrainingObjective::parameters(
    const LinearModel& model) const {
  std::vector<double> params;
  params.reserve(num_parameters());
  for (std::size_t o = 0; o < num_outputs_; ++o) {
    const auto w = model.weights(o);
    params.insert(params.end(), w.begin(), w.end());
    params.push_back(model.bias(o));
  }
  return params;
}

void TrainingObjective::assign(std::span<const double> params,
                               LinearModel& model) const {
  const std::size_t stride = vocab_size_ + 1;
  for (std::size_t o = 0; o < num_outputs_; ++o) {
    auto w = model.mutable_weights(o);
    std::copy_n(params.begin() + o * stride, vocab_size_, w.begin());
    model.mutable_bias(o) = params[o * stride + vocab_size_];
  }
}

void TrainingObjective::logits(std::span<const double> params, std::size_t row,
                               std::vector<double>& out) const {
  const std::size_t stride = vocab_size_ + 1;
  out.assign(num_outputs_, 0.0);
  for (std::size_t o = 0; o < num_outputs_; ++o) {
    const double* w = params.data() + o * stride;
    double s = w[vocab_size_];
    for (const auto& [idx, count] : features_[row]) s += w[idx] * count;
    out[o] = s;
  }
}

double TrainingObjective::row_loss(std::span<const double> params,
                                   std::size_t row,
                                   std::vector<double>& z) const {
  logits(params, row, z);
  const std::size_t y = labels_[row];
  if (binary_) {
    const double target = y == 1 ? 1.0 : 0.0;
    return softplus(z[0]) - target * z[0];
  }
  if (softmax_) {
    const double m = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (const double v : z) total += std::exp(v - m);
    return m + std::log(total) - z[y];
  }
  double loss = 0.0;
  for (std::size_t o = 0; o < num_outputs_; ++o) {
    loss += softplus(z[o]) - (o == y ? z[o] : 0.0);
  }
  return loss;
}

double TrainingObjective::loss(std::span<const double> params,
                               std::span<const std::size_t> rows) const {
  std::vector<double> z;
  double total = 0.0;
  std::size_t n = 0;
  auto add = [&](std::size_t r) {
    total += example_weights_[r] * row_loss(params, r, z);
    ++n;
  };
  if (rows.empty()) {
    for (std::size_t r = 0; r < features_.size(); ++r) add(r);
  } else {
    for (const auto r : rows) add(r);
  }
  double reg = 0.0;
  const std::size_t stride = vocab_size_ + 1;
  for (std::size_t o = 0; o < num_outputs_; ++o) {
    for (std::size_t i = 0; i < vocab_size_; ++i) {
      const double w = params[o * stride + i];
      reg += w * w;
    }
  }
  return (n == 0 ? 0.0 : total / static_cast<double>(n)) + 0.5 * l2_ * reg;
}

std::vector<double> TrainingObjective::gradient(
    std::span<const double> params, std::span<const std::size_t> rows) const {
  const std::size_t stride = vocab_size_ + 1;
  std::vector<double> grad(num_parameters(), 0.0);
  std::vector<double> z;
  std::vector<double> dz(num_outputs_);
  std::size_t n = 0;

  auto add = [&](std::size_t r) {
    ++n;
    logits(params, r, z);
    const std::size_t y = labels_[r];
    if (binary_) {
      dz[0] = sigmoid(z[0]) - (y == 1 ? 1.0 : 0.0);
    } else if (softmax_) {
      const double m = *std::max_element(z.begin(), z.end());
      double total = 0.0;
      for (std::size_t o = 0; o < num_outputs_; ++o) {
        dz[o] = std::exp(z[o] - m);
        total += dz[o];
      }
      for (std::size_t o = 0; o < num_outputs_; ++o) {
        dz[o] = dz[o] / total - (o == y ? 1.0 : 0.0);
      }
    } else {
      for (std::size_t o = 0; o < num_outputs_; ++o) {
        dz[o] = sigmoid(z[o]) - (o == y ? 1.0 : 0.0);
      }
    }
    const double weight = example_weights_[r];
    for (std::size_t o = 0; o < num_outputs_; ++o) {
      const double g = weight * dz[o];
      double* out = grad.data() + o * stride;
      for (const auto& [idx, count] : features_[r]) out[idx] += g * count;
      out[vocab_size_] += g;
    }
  };
  if (rows.empty()) {
    for (std::size_t r = 0; r < features_.size(); ++r) add(r);
  } else {
    for (const auto r : rows) add(r);
  }
  const double scale = n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
  for (std::size_t o = 0; o < num_outputs_; ++o) {
    for (std::size_t i = 0; i <= vocab_size_; ++i) {
      const std::size_t p = o * stride + i;
      grad[p] *= scale;
      if (i < vocab_size_) grad[p] += l2_ * params[p];
    }
  }
  return grad;
}

std::vector<double> TrainingObjective::class_loss_contributions(
    std::span<const double> params) const {
  std::vector<double> per_class(num_classes_, 0.0);
  std::vector<double> z;
  for (std::size_t r = 0; r < features_.size(); ++r) {
    per_class[labels_[r]] += example_weights_[r] * row_loss(params, r, z);
  }
  return per_class;
}

std::vector<double> example_weights(std::span<const std::size_t> labels,
                                    std::size_t num_classes,
                                    ClassWeighting weighting) {
  std::vector<double> weights(labels.size(), 1.0);
  if (weighting == ClassWeighting::kNone) return weights;
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto y : labels) ++counts[y];
  const double n = static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    weights[i] = n / (static_cast<double>(num_classes) *
                      static_cast<double>(counts[labels[i]]));
  }
  return weights;
}

// ---------------------------------------------------------------------------
// Training

LinearModel train(const LabeledCorpus& corpus, const TrainConfig& config) {
  config.validate();
  if (corpus.empty()) throw ValidationError("cannot train on an empty corpus");

  std::set<std::string> vocab_set;
  std::set<std::string> class_set;
  for (const auto& doc : corpus.documents) {
    if (!doc.label) {
      throw ValidationError("document '" + doc.id + "' has no label");
    }
    class_set.insert(*doc.label);
    vocab_set.insert(doc.tokens.begin(), doc.tokens.end());
  }
  if (class_set.size() < 2) {
    throw ValidationError("training needs at least two classes, found " +
                          std::to_string(class_set.size()));
  }

  std::vector<std::string> classes(class_set.begin(), class_set.end());
  LinearModel model({vocab_set.begin(), vocab_set.end()}, classes, config);

  std::vector<SparseFeatures> features;
  std::vector<std::size_t> labels;
  features.reserve(corpus.size());
  labels.reserve(corpus.size());
  for (const auto& doc : corpus.documents) {
    features.push_back(model.featurize(doc.tokens));
    std::size_t y;
    if (model.is_binary()) {
      y = *doc.label == model.positive_class() ? 1 : 0;
    } else {
      y = static_cast<std::size_t>(
          std::find(classes.begin(), classes.end(), *doc.label) -
          classes.begin());
    }
    labels.push_back(y);
  }
  auto weights = example_weights(labels, model.is_binary() ? 2 : classes.size(),
                                 config.class_weighting);
  TrainingObjective objective(model, std::move(features), labels,
                              std::move(weights), config.l2);

  std::vector<double> params = objective.parameters(model);
  std::vector<double> history{objective.loss(params)};
  std::vector<std::size_t> order(objective.num_rows());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[uniform_below(rng, i)]);
    }
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const auto grad = objective.gradient(
          params, std::span<const std::size_t>(order).subspan(start, end - start));
      for (std::size_t p = 0; p < params.size(); ++p) {
        params[p] -= config.learning_rate * grad[p];
      }
    }
    history.push_back(objective.loss(params));
  }
  objective.assign(params, model);
  model.set_loss_history(std::move(history));
  return model;
}

ClassProbabilities predict(const LinearModel& model, const Document& doc) {
  return model.predict_tokens(doc.tokens);
}

PredictFn as_predict_fn(const LinearModel& model) {
  return [&model](std::span<const std::string> tokens) {
    return model.predict_tokens(tokens);
  };
}

// ---------------------------------------------------------------------------
// Metrics

double f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double rank_auc(std::span<const double> positive_scores,
                std::span<const double> negative_scores) {
  if (positive_scores.empty() || negative_scores.empty()) {
    throw MetricError("AUC is undefined without both positive and negative "
                      "instances");
  }
  // Mann-Whitney U via a sorted merge: average ranks handle ties.
  struct Scored {
    double score;
    bool positive;
  };
  std::vector<Scored> all;
  all.reserve(positive_scores.size() + negative_scores.size());
  for (const double s : positive_scores) all.push_back({s, true});
  for (const double s : negative_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const Scored& a, const Scored& b) { return a.score < b.score; });
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].positive) positive_rank_sum += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(positive_scores.size());
  const double nn = static_cast<double>(negative_scores.size());
  return (positive_rank_sum - np * (np + 1) / 2.0) / (np * nn);
}

Metrics classification_metrics(std::span<const std::string> gold,
                               std::span<const std::string> predicted,
                               std::span<const std::string> classes) {
  if (gold.size() != predicted.size()) {
    throw ValidationError("gold and predicted label counts differ");
  }
  Metrics m;
  std::map<std::string, std::size_t> tp, fp, fn, support, predicted_count;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++support[gold[i]];
    ++predicted_count[predicted[i]];
    if (gold[i] == predicted[i]) {
      ++tp[gold[i]];
      ++correct;
    } else {
      ++fn[gold[i]];
      ++fp[predicted[i]];
    }
  }
  std::set<std::string> labels(classes.begin(), classes.end());
  double macro = 0.0;
  double weighted = 0.0;
  std::size_t counted = 0;
  for (const auto& c : labels) {
    if (support[c] == 0 && predicted_count[c] == 0) continue;
    ClassScores s;
    s.support = support[c];
    const std::size_t p_denom = tp[c] + fp[c];
    const std::size_t r_denom = tp[c] + fn[c];
    s.precision = p_denom == 0 ? 0.0 : static_cast<double>(tp[c]) / static_cast<double>(p_denom);
    s.recall = r_denom == 0 ? 0.0 : static_cast<double>(tp[c]) / static_cast<double>(r_denom);
    s.f1 = f1_score(tp[c], fp[c], fn[c]);
    macro += s.f1;
    weighted += s.f1 * static_cast<double>(s.support);
    ++counted;
    m.per_class[c] = s;
  }
  if (counted > 0) m.f1_macro = macro / static_cast<double>(counted);
  if (!gold.empty()) {
    m.f1_weighted = weighted / static_cast<double>(gold.size());
    m.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  }
  return m;
}

std::string decide(const LinearModel& model, const ClassProbabilities& probs,
                   double threshold) {
  if (model.is_binary()) {
    const auto& positive = model.positive_class();
    if (probs.of(positive) >= threshold) return positive;
    return model.classes().front() == positive ? model.classes().back()
                                               : model.classes().front();
  }
  return probs.argmax();
}

Metrics evaluate(const LinearModel& model, const LabeledCorpus& corpus,
                 double threshold) {
  std::vector<std::string> gold;
  std::vector<std::string> predicted;
  std::vector<double> positive_scores;
  std::vector<double> negative_scores;
  gold.reserve(corpus.size());
  predicted.reserve(corpus.size());
  for (const auto& doc : corpus.documents) {
    if (!doc.label) {
      throw ValidationError("document '" + doc.id + "' has no label");
    }
    const auto probs = predict(model, doc);
    gold.push_back(*doc.label);
    predicted.push_back(decide(model, probs, threshold));
    if (model.is_binary()) {
      const double s = probs.of(model.positive_class());
      (*doc.label == model.positive_class() ? positive_scores : negative_scores)
          .push_back(s);
    }
  }
  Metrics m = classification_metrics(gold, predicted, model.classes());
  if (model.is_binary()) m.auc = rank_auc(positive_scores, negative_scores);
  return m;
}

// ---------------------------------------------------------------------------
// Persistence

void save_model(const LinearModel& model, const std::filesystem::path& path) {
  json j;
  j["format"] = "fairtext-linear-model";
  j["version"] = 1;
  j["classes"] = model.classes();
  j["vocabulary"] = model.vocabulary();
  json weights = json::array();
  json bias = json::array();
  for (std::size_t o = 0; o < model.num_outputs(); ++o) {
    const auto w = model.weights(o);
    weights.push_back(std::vector<double>(w.begin(), w.end()));
    bias.push_back(model.bias(o));
  }
  j["weights"] = std::move(weights);
  j["bias"] = std::move(bias);
  j["config"] = config_to_json(model.config());
  j["loss_history"] = model.loss_history();

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

LinearModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("model file " + path.string() + " is not JSON: " +
                          e.what());
  }
  try {
    if (j.value("format", std::string()) != "fairtext-linear-model") {
      throw ValidationError("unrecognised model format");
    }
    LinearModel model(j.at("vocabulary").get<std::vector<std::string>>(),
                      j.at("classes").get<std::vector<std::string>>(),
                      config_from_json(j.at("config")));
    const auto& weights = j.at("weights");
    const auto& bias = j.at("bias");
    if (weights.size() != model.num_outputs() ||
        bias.size() != model.num_outputs()) {
      throw ValidationError("weight vector count does not match classes");
    }
    for (std::size_t o = 0; o < model.num_outputs(); ++o) {
      const auto w = weights[o].get<std::vector<double>>();
      if (w.size() != model.vocabulary().size()) {
        throw ValidationError("weight vector length differs from vocabulary");
      }
      std::copy(w.begin(), w.end(), model.mutable_weights(o).begin());
      model.mutable_bias(o) = bias[o].get<double>();
    }
    if (j.contains("loss_history")) {
      model.set_loss_history(j["loss_history"].get<std::vector<double>>());
    }
    return model;
  } catch (const json::exception& e) {
    throw ValidationError("invalid model file " + path.string() + ": " +
                          e.what());
  }
}

ExternalPredictions load_external_predictions(const std::filesystem::path& path,
                                              const LabeledCorpus& corpus) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open predictions file " + path.string());
  std::set<std::string> known;
  for (const auto& doc : corpus.documents) known.insert(doc.id);

  ExternalPredictions result;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!record.is_object() || !record.contains("id") ||
        !record.contains("probabilities") ||
        !record["probabilities"].is_object()) {
      throw ValidationError(where + "expected {\"id\", \"probabilities\"}");
    }
    const auto& id_value = record["id"];
    std::string id;
    if (id_value.is_string()) {
      id = id_value.get<std::string>();
    } else if (id_value.is_number_integer()) {
      id = std::to_string(id_value.get<long long>());
    } else {
      throw ValidationError(where + "\"id\" must be a string or integer");
    }
    if (!seen.insert(id).second) {
      throw ValidationError(where + "duplicate id '" + id + "'");
    }
    ClassProbabilities probs;
    for (const auto& [name, p] : record["probabilities"].items()) {
      if (!p.is_number()) {
        throw ValidationError(where + "probability for '" + name +
                              "' is not a number");
      }
      const double v = p.get<double>();
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError(where + "probability for '" + name +
                              "' is outside [0, 1]");
      }
      probs.values[name] = v;
    }
    if (known.count(id)) {
      result.by_id.emplace(id, std::move(probs));
    } else {
      result.unresolved.push_back(id);
    }
  }
  return result;
}

void save_predictions(const LabeledCorpus& corpus,
                      const std::vector<ClassProbabilities>& predictions,
                      const std::filesystem::path& path) {
  if (predictions.size() != corpus.size()) {
    throw ValidationError("prediction count differs from corpus size");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    nlohmann::ordered_json record;
    record["id"] = corpus.documents[i].id;
    nlohmann::ordered_json probs = nlohmann::ordered_json::object();
    for (const auto& [name, p] : predictions[i].values) probs[name] = p;
    record["probabilities"] = std::move(probs);
    out << record.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace fairtext
