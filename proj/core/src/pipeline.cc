#include "fairtext/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "fairtext/error.h"
#include "json.hpp"
#include "toml_subset.h"

namespace fairtext {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

// Reads one table of the config, rejecting keys that were never consumed.
class Section {
 public:
  Section(const json& node, std::string name, fs::path base_dir)
      : name_(std::move(name)), base_dir_(std::move(base_dir)) {
    if (!node.is_null() && !node.is_object()) {
      throw ValidationError("config: '" + name_ + "' must be a table");
    }
    if (node.is_object()) node_ = node;
  }

  bool has(const std::string& key) const {
    return node_.contains(key) && !node_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return node_.at(key);
  }

  template <typename T>
  std::optional<T> get(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) return std::nullopt;
    try {
      return node_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config: " + where(key) + " has the wrong type");
    }
  }

  std::optional<fs::path> path(const std::string& key) {
    const auto value = get<std::string>(key);
    if (!value) return std::nullopt;
    fs::path p(*value);
    if (p.is_relative() && !base_dir_.empty()) p = base_dir_ / p;
    return p.lexically_normal();
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(has(key) ? node_.at(key) : json(), where(key), base_dir_);
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) throw ValidationError("config: unknown key " + where(key));
    }
  }

 private:
  std::string where(const std::string& key) const {
    return "'" + (name_.empty() ? key : name_ + "." + key) + "'";
  }

  json node_ = json::object();
  std::string name_;
  fs::path base_dir_;
  std::set<std::string> seen_;
};

std::size_t as_count(long long value, const std::string& key) {
  if (value < 0) throw ValidationError("config: '" + key + "' must be non-negative");
  return static_cast<std::size_t>(value);
}

Metrics metrics_without_auc(const LinearModel& model, const LabeledCorpus& corpus,
                            double threshold) {
  std::vector<std::string> gold;
  std::vector<std::string> predicted;
  for (const auto& doc : corpus.documents) {
    gold.push_back(*doc.label);
    predicted.push_back(decide(model, predict(model, doc), threshold));
  }
  return classification_metrics(gold, predicted, model.classes());
}

void annotate(Measurement& m, const ExplainerConfig& explainer, Identifier& identifier) {
  Stopwatch explain_clock;
  m.top_words = select_top(m.ranking, explainer);
  m.timings.explain += explain_clock.seconds();

  Stopwatch identify_clock;
  m.annotations = identifier.identify(m.top_words);
  m.timings.identify += identify_clock.seconds();
  if (m.annotations.size() != m.top_words.size()) {
    throw Error("identifier '" + identifier.name() + "' returned " +
                std::to_string(m.annotations.size()) + " annotations for " +
                std::to_string(m.top_words.size()) + " words");
  }
  std::size_t failed = 0;
  for (const auto& a : m.annotations) {
    if (a.is_protected()) m.protected_words.push_back(a.word);
    if (a.failed) ++failed;
  }
  if (failed > 0) {
    m.warnings.push_back(std::to_string(failed) +
                         " word(s) could not be annotated and count as not protected");
  }
  m.fairness = fairness_stats(m.protected_words.size(), m.top_words.size());
}

ojson metrics_json(const std::optional<Metrics>& metrics) {
  if (!metrics) return nullptr;
  ojson j;
  j["f1_macro"] = metrics->f1_macro;
  j["f1_weighted"] = metrics->f1_weighted;
  j["accuracy"] = metrics->accuracy;
  j["auc"] = metrics->auc ? ojson(*metrics->auc) : ojson(nullptr);
  ojson per_class = ojson::object();
  for (const auto& [name, s] : metrics->per_class) {
    per_class[name] = {{"precision", s.precision},
                       {"recall", s.recall},
                       {"f1", s.f1},
                       {"support", s.support}};
  }
  j["per_class"] = std::move(per_class);
  return j;
}

ojson fairness_json(const FairnessStats& f) {
  ojson j;
  j["protected_count"] = f.protected_count;
  j["top_n"] = f.top_n;
  j["percent"] = f.percent;
  j["retained_from_original"] =
      f.retained_from_original ? ojson(*f.retained_from_original) : ojson(nullptr);
  j["ratio"] = f.ratio();
  j["percent_label"] = f.percent_label();
  return j;
}

ojson measurement_json(const Measurement& m) {
  ojson j;
  j["metrics"] = metrics_json(m.metrics);
  j["fairness"] = fairness_json(m.fairness);
  j["explained_documents"] = m.explained_documents;
  j["top_words"] = m.top_words;
  j["protected_words"] = m.protected_words;
  return j;
}

ojson annotation_json(const Annotation& a) {
  ojson j;
  j["word"] = a.word;
  j["category"] = a.category ? ojson(std::string(category_id(*a.category))) : ojson(nullptr);
  j["reliability"] = a.reliability;
  j["source"] = std::string(to_string(a.source));
  j["explanation"] = a.explanation;
  j["flagged"] = a.flagged;
  j["failed"] = a.failed;
  return j;
}

std::string fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

std::string pad(std::string text, std::size_t width) {
  if (text.size() < width) text.append(width - text.size(), ' ');
  return text;
}

MitigationDelta& operator+=(MitigationDelta& a, const MitigationDelta& b) {
  a.documents_removed += b.documents_removed;
  a.documents_added += b.documents_added;
  a.tokens_removed += b.tokens_removed;
  a.tokens_replaced += b.tokens_replaced;
  return a;
}

struct LoadedResources {
  EmbeddingTable embeddings;
  HypernymLexicon lexicon;
  MitigationResources view;
};

}  // namespace

// ---------------------------------------------------------------------------
// Identifier backends

std::vector<Annotation> DictionaryIdentifier::identify(std::span<const std::string> words) {
  return identify_dictionary(words, dictionary_);
}

FixedAnnotationIdentifier::FixedAnnotationIdentifier(std::vector<Annotation> annotations) {
  for (auto& a : annotations) {
    const std::string key = fold_case(a.word);
    by_word_.emplace(key, std::move(a));
  }
}

std::vector<Annotation> FixedAnnotationIdentifier::identify(
    std::span<const std::string> words) {
  std::vector<Annotation> out;
  out.reserve(words.size());
  for (const auto& word : words) {
    const auto it = by_word_.find(fold_case(word));
    if (it != by_word_.end()) {
      Annotation a = it->second;
      a.word = word;
      out.push_back(std::move(a));
    } else {
      Annotation a;
      a.word = word;
      a.explanation = "no annotation";
      out.push_back(std::move(a));
    }
  }
  return out;
}

LlmIdentifier::LlmIdentifier(LlmConfig config, std::shared_ptr<ChatTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  config_.validate();
  if (!transport_) throw ValidationError("LLM identifier needs a transport");
}

std::vector<Annotation> LlmIdentifier::identify(std::span<const std::string> words) {
  std::vector<std::string> missing;
  std::set<std::string> queued;
  for (const auto& w : words) {
    if (!cache_.count(w) && queued.insert(w).second) missing.push_back(w);
  }
  std::map<std::string, Annotation> fresh;
  if (!missing.empty()) {
    auto answers = identify_llm(missing, config_, *transport_);
    for (auto& a : answers) {
      if (!a.failed) cache_[a.word] = a;
      fresh.emplace(a.word, std::move(a));
    }
  }
  std::vector<Annotation> out;
  out.reserve(words.size());
  for (const auto& w : words) {
    const auto it = cache_.find(w);
    out.push_back(it != cache_.end() ? it->second : fresh.at(w));
  }
  return out;
}

IdentifierBackend parse_identifier_backend(const std::string& name) {
  if (name == "dictionary") return IdentifierBackend::kDictionary;
  if (name == "llm") return IdentifierBackend::kLlm;
  if (name == "annotations" || name == "human") return IdentifierBackend::kAnnotations;
  throw ValidationError("unknown identifier backend '" + name + "'");
}

std::string to_string(IdentifierBackend backend) {
  switch (backend) {
    case IdentifierBackend::kDictionary: return "dictionary";
    case IdentifierBackend::kLlm: return "llm";
    case IdentifierBackend::kAnnotations: return "annotations";
  }
  return "dictionary";
}

std::unique_ptr<Identifier> make_identifier(const IdentifierSettings& settings) {
  switch (settings.backend) {
    case IdentifierBackend::kDictionary:
      return std::make_unique<DictionaryIdentifier>(load_dictionary(settings.dictionary));
    case IdentifierBackend::kAnnotations:
      return std::make_unique<FixedAnnotationIdentifier>(
          load_annotations(settings.annotations));
    case IdentifierBackend::kLlm: {
      LlmConfig config = settings.llm;
      apply_environment_overrides(config);
      auto transport = std::make_shared<HttpChatTransport>(config);
      return std::make_unique<LlmIdentifier>(config, std::move(transport));
    }
  }
  throw ValidationError("unknown identifier backend");
}

// ---------------------------------------------------------------------------
// Configuration

void PipelineConfig::validate() const {
  if (training_corpus.empty()) throw ValidationError("training_corpus is required");
  if (unlabeled_corpus.empty()) throw ValidationError("unlabeled_corpus is required");
  if (output_dir.empty()) throw ValidationError("output_dir is required");
  if (target_class.empty()) throw ValidationError("target_class is required");
  const auto norm = [](const fs::path& p) { return p.lexically_normal(); };
  if (norm(training_corpus) == norm(unlabeled_corpus)) {
    throw ValidationError("training and unlabeled corpora must be different files");
  }
  if (norm(output_dir) == norm(training_corpus) || norm(output_dir) == norm(unlabeled_corpus)) {
    throw ValidationError("output_dir must not be an input path");
  }
  explainer.validate();
  train.validate();
  if (plan.k == 0) throw ValidationError("mitigation k must be at least 1");
  if (rounds < 1) throw ValidationError("rounds must be at least 1");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError("threshold must lie in (0, 1)");
  }
  if ((plan.strategy == Strategy::kRandomSynonym ||
       plan.strategy == Strategy::kKSynonymExpansion) &&
      embeddings.empty()) {
    throw ValidationError(to_string(plan.strategy) + " needs an embeddings file");
  }
  if (plan.strategy == Strategy::kHypernymReplacement && hypernyms.empty()) {
    throw ValidationError("MS5 needs a hypernym lexicon");
  }
  switch (identifier.backend) {
    case IdentifierBackend::kDictionary:
      if (identifier.dictionary.empty()) {
        throw ValidationError("the dictionary backend needs a dictionary file");
      }
      break;
    case IdentifierBackend::kAnnotations:
      if (identifier.annotations.empty()) {
        throw ValidationError("the annotations backend needs an annotations file");
      }
      break;
    case IdentifierBackend::kLlm:
      identifier.llm.validate();
      break;
  }
  const bool external = external_predictions.has_value() || external_attributions.has_value();
  if (external_predictions.has_value() != external_attributions.has_value()) {
    throw ValidationError("external predictions and attributions must be given together");
  }
  if (external != (explainer.method == AttributionMethod::kExternalFile)) {
    throw ValidationError(
        "the external-file explainer method requires external predictions and attributions");
  }
  if (external && model) {
    throw ValidationError("model and external predictions are mutually exclusive");
  }
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  const std::string text = read_text(path);
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return parse_pipeline_config(text, ext == ".json", path.parent_path());
}

PipelineConfig parse_pipeline_config(std::string_view text, bool is_json,
                                     const fs::path& base_dir) {
  json root;
  if (is_json) {
    try {
      root = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ValidationError(std::string("config: ") + e.what());
    }
  } else {
    root = detail::parse_toml_subset(text);
  }
  if (!root.is_object()) throw ValidationError("config: top level must be an object");

  PipelineConfig c;
  Section top(root, "", base_dir);
  c.training_corpus = top.path("training_corpus").value_or(fs::path());
  c.unlabeled_corpus = top.path("unlabeled_corpus").value_or(fs::path());
  c.output_dir = top.path("output_dir").value_or(fs::path());
  c.target_class = top.get<std::string>("target_class").value_or("");
  c.model = top.path("model");
  c.embeddings = top.path("embeddings").value_or(fs::path());
  c.hypernyms = top.path("hypernyms").value_or(fs::path());
  c.rounds = top.get<int>("rounds").value_or(c.rounds);
  c.threshold = top.get<double>("threshold").value_or(c.threshold);

  {
    Section s = top.child("explainer");
    const auto method = s.get<std::string>("method");
    const auto top_k = s.get<long long>("top_k");
    const auto top_fraction = s.get<double>("top_fraction");
    ExplainerConfig e;
    if (method) e.method = parse_attribution_method(*method);
    if (top_k) e.top_k = as_count(*top_k, "explainer.top_k");
    if (top_fraction) e.top_fraction = *top_fraction;
    if (!top_k && !top_fraction) e.top_k = 400;
    c.explainer = e;
    s.finish();
  }
  {
    Section s = top.child("identifier");
    if (const auto b = s.get<std::string>("backend")) {
      c.identifier.backend = parse_identifier_backend(*b);
    }
    c.identifier.dictionary = s.path("dictionary").value_or(fs::path());
    c.identifier.annotations = s.path("annotations").value_or(fs::path());
    Section l = s.child("llm");
    LlmConfig& llm = c.identifier.llm;
    llm.endpoint = l.get<std::string>("endpoint").value_or(llm.endpoint);
    llm.model = l.get<std::string>("model").value_or(llm.model);
    llm.temperature = l.get<double>("temperature").value_or(llm.temperature);
    llm.max_retries = l.get<int>("max_retries").value_or(llm.max_retries);
    if (const auto v = l.get<long long>("request_timeout_ms")) {
      llm.request_timeout = std::chrono::milliseconds(*v);
    }
    llm.max_concurrency = l.get<int>("max_concurrency").value_or(llm.max_concurrency);
    if (const auto v = l.get<long long>("session_size")) {
      llm.session_size = as_count(*v, "identifier.llm.session_size");
    }
    if (const auto v = l.get<long long>("backoff_ms")) {
      llm.backoff = std::chrono::milliseconds(*v);
    }
    llm.api_key_env = l.get<std::string>("api_key_env").value_or(llm.api_key_env);
    l.finish();
    s.finish();
  }
  {
    Section s = top.child("mitigation");
    MitigationPlan& p = c.plan;
    if (const auto v = s.get<std::string>("strategy")) p.strategy = parse_strategy(*v);
    if (const auto v = s.get<std::vector<std::string>>("categories")) {
      std::set<ProtectedCategory> scope;
      for (const auto& name : *v) {
        const auto cat = parse_category(name);
        if (!cat) throw ValidationError("config: unknown category '" + name + "'");
        scope.insert(*cat);
      }
      p.category_scope = std::move(scope);
    }
    p.class_scope = s.get<std::string>("class_scope");
    if (const auto v = s.get<long long>("k")) p.k = as_count(*v, "mitigation.k");
    if (const auto v = s.get<long long>("seed")) {
      p.seed = static_cast<std::uint64_t>(as_count(*v, "mitigation.seed"));
    }
    p.keep_original = s.get<bool>("keep_original").value_or(p.keep_original);
    s.finish();
  }
  {
    Section s = top.child("train");
    TrainConfig& t = c.train;
    t.epochs = s.get<int>("epochs").value_or(t.epochs);
    t.learning_rate = s.get<double>("learning_rate").value_or(t.learning_rate);
    t.l2 = s.get<double>("l2").value_or(t.l2);
    if (const auto v = s.get<std::string>("class_weighting")) {
      t.class_weighting = parse_class_weighting(*v);
    }
    if (const auto v = s.get<long long>("seed")) {
      t.seed = static_cast<std::uint64_t>(as_count(*v, "train.seed"));
    }
    t.batch_size = s.get<int>("batch_size").value_or(t.batch_size);
    if (const auto v = s.get<std::string>("multiclass")) {
      t.multiclass = parse_multiclass_mode(*v);
    }
    t.positive_class = s.get<std::string>("positive_class");
    s.finish();
  }
  {
    Section s = top.child("external");
    c.external_predictions = s.path("predictions");
    c.external_attributions = s.path("attributions");
    s.finish();
  }
  top.finish();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Measurement

std::string FairnessStats::ratio() const {
  std::string out = std::to_string(protected_count) + "/" + std::to_string(top_n);
  if (retained_from_original) out += " {" + std::to_string(*retained_from_original) + "}";
  return out;
}

std::string FairnessStats::percent_label() const {
  return std::to_string(std::lround(percent)) + "%";
}

FairnessStats fairness_stats(std::size_t protected_count, std::size_t top_n) {
  if (protected_count > top_n) {
    throw ValidationError("protected count exceeds the number of top words");
  }
  FairnessStats f;
  f.protected_count = protected_count;
  f.top_n = top_n;
  f.percent = top_n == 0 ? 0.0
                         : 100.0 * static_cast<double>(protected_count) /
                               static_cast<double>(top_n);
  return f;
}

Measurement measure(const LinearModel& model, const LabeledCorpus& unlabeled,
                    const std::string& target_class, const ExplainerConfig& explainer,
                    Identifier& identifier, double threshold) {
  explainer.validate();
  if (std::find(model.classes().begin(), model.classes().end(), target_class) ==
      model.classes().end()) {
    throw ValidationError("target class '" + target_class + "' is not a model class");
  }
  if (explainer.method == AttributionMethod::kExternalFile) {
    throw ValidationError("external-file attributions need external predictions");
  }
  Measurement m;

  Stopwatch predict_clock;
  std::vector<const Document*> positives;
  for (const auto& doc : unlabeled.documents) {
    if (decide(model, predict(model, doc), threshold) == target_class) {
      positives.push_back(&doc);
    }
  }
  if (!unlabeled.empty() && unlabeled.fully_labeled()) {
    try {
      m.metrics = evaluate(model, unlabeled, threshold);
    } catch (const MetricError& e) {
      m.metrics = metrics_without_auc(model, unlabeled, threshold);
      m.warnings.push_back(std::string("AUC undefined: ") + e.what());
    }
  }
  m.timings.predict = predict_clock.seconds();
  if (positives.empty()) {
    throw Error("no document of the unlabeled corpus is predicted as '" + target_class +
                "'; nothing to explain");
  }

  Stopwatch explain_clock;
  std::vector<AttributionRecord> records;
  records.reserve(positives.size());
  if (explainer.method == AttributionMethod::kLinearExact) {
    for (const Document* doc : positives) {
      records.push_back(attribute_linear(model, *doc, target_class));
    }
  } else {
    const PredictFn fn = as_predict_fn(model);
    for (const Document* doc : positives) {
      records.push_back(attribute_occlusion(fn, *doc, target_class));
    }
  }
  m.explained_documents = records.size();
  m.ranking = aggregate_global(records);
  m.timings.explain = explain_clock.seconds();

  annotate(m, explainer, identifier);
  return m;
}

Measurement measure_external(const std::map<std::string, ClassProbabilities>& predictions,
                             std::span<const AttributionRecord> attributions,
                             const LabeledCorpus& unlabeled, const std::string& target_class,
                             const ExplainerConfig& explainer, Identifier& identifier) {
  explainer.validate();
  Measurement m;

  Stopwatch predict_clock;
  std::set<std::string> positive_ids;
  std::vector<std::string> gold;
  std::vector<std::string> decided;
  std::vector<double> pos_scores;
  std::vector<double> neg_scores;
  std::size_t missing = 0;
  for (const auto& doc : unlabeled.documents) {
    const auto it = predictions.find(doc.id);
    if (it == predictions.end()) {
      ++missing;
      continue;
    }
    const std::string label = it->second.argmax();
    if (label == target_class) positive_ids.insert(doc.id);
    if (doc.label) {
      gold.push_back(*doc.label);
      decided.push_back(label);
      (*doc.label == target_class ? pos_scores : neg_scores)
          .push_back(it->second.of(target_class));
    }
  }
  if (missing > 0) {
    m.warnings.push_back(std::to_string(missing) + " document(s) have no external prediction");
  }
  if (!gold.empty() && gold.size() + missing == unlabeled.size()) {
    std::set<std::string> class_set(unlabeled.classes.begin(), unlabeled.classes.end());
    for (const auto& [id, probs] : predictions) {
      for (const auto& [name, p] : probs.values) class_set.insert(name);
    }
    const std::vector<std::string> classes(class_set.begin(), class_set.end());
    m.metrics = classification_metrics(gold, decided, classes);
    if (classes.size() == 2) {
      try {
        m.metrics->auc = rank_auc(pos_scores, neg_scores);
      } catch (const MetricError& e) {
        m.warnings.push_back(std::string("AUC undefined: ") + e.what());
      }
    }
  }
  m.timings.predict = predict_clock.seconds();
  if (positive_ids.empty()) {
    throw Error("no document of the unlabeled corpus is predicted as '" + target_class +
                "'; nothing to explain");
  }

  Stopwatch explain_clock;
  std::vector<AttributionRecord> records;
  for (const auto& r : attributions) {
    if (positive_ids.count(r.document_id) && r.target_class == target_class) {
      records.push_back(r);
    }
  }
  if (records.size() < positive_ids.size()) {
    m.warnings.push_back(std::to_string(positive_ids.size() - records.size()) +
                         " positively predicted document(s) have no attribution record");
  }
  if (records.empty()) throw Error("no attribution records for the positively predicted documents");
  m.explained_documents = records.size();
  m.ranking = aggregate_global(records);
  m.timings.explain = explain_clock.seconds();

  annotate(m, explainer, identifier);
  return m;
}

Measurement run_measurement(const PipelineConfig& config, Identifier& identifier) {
  config.validate();
  const LabeledCorpus unlabeled = load_corpus(config.unlabeled_corpus);
  if (config.external_predictions) {
    const auto preds = load_external_predictions(*config.external_predictions, unlabeled);
    const auto attrs = load_external_attributions(*config.external_attributions, unlabeled);
    Measurement m = measure_external(preds.by_id, attrs.records, unlabeled,
                                     config.target_class, config.explainer, identifier);
    if (!preds.unresolved.empty()) {
      m.warnings.push_back(std::to_string(preds.unresolved.size()) +
                           " prediction id(s) do not occur in the unlabeled corpus");
    }
    for (const auto& e : attrs.errors) {
      m.warnings.push_back("attributions line " + std::to_string(e.line) + " (" +
                           e.document_id + "): " + e.message);
    }
    return m;
  }
  Stopwatch train_clock;
  LinearModel model;
  if (config.model) {
    model = load_model(*config.model);
  } else {
    model = train(load_corpus(config.training_corpus), config.train);
  }
  const double train_seconds = train_clock.seconds();
  Measurement m = measure(model, unlabeled, config.target_class, config.explainer, identifier,
                          config.threshold);
  m.timings.train = train_seconds;
  return m;
}

// ---------------------------------------------------------------------------
// Mitigation loop

std::vector<Annotation> MitigationReport::annotations_used() const {
  std::vector<Annotation> out;
  std::set<std::string> seen;
  for (const auto* m : {&original, &mitigated}) {
    for (const auto& a : m->annotations) {
      if (seen.insert(a.word).second) out.push_back(a);
    }
  }
  return out;
}

MitigationReport run_mitigation(const PipelineConfig& config, Identifier& identifier,
                                MitigationArtifacts* artifacts) {
  config.validate();
  MitigationReport report;
  report.target_class = config.target_class;
  report.plan = config.plan;
  report.plan.protected_words.clear();
  report.delta.strategy = config.plan.strategy;

  const LabeledCorpus training = load_corpus(config.training_corpus);
  const LabeledCorpus unlabeled = load_corpus(config.unlabeled_corpus);
  if (!training.fully_labeled()) {
    throw ValidationError("every training document needs a label");
  }
  if (!training.classes.count(config.target_class)) {
    throw ValidationError("target class '" + config.target_class +
                          "' does not occur in the training corpus");
  }
  report.original_training_size = training.size();

  LoadedResources resources;
  if (!config.embeddings.empty()) {
    auto loaded = load_embeddings(config.embeddings);
    resources.embeddings = std::move(loaded.table);
    resources.view.embeddings = &resources.embeddings;
    for (auto& w : loaded.warnings) report.warnings.push_back(std::move(w));
  }
  if (!config.hypernyms.empty()) {
    auto loaded = load_hypernyms(config.hypernyms);
    resources.lexicon = std::move(loaded.lexicon);
    resources.view.lexicon = &resources.lexicon;
    for (auto& w : loaded.warnings) report.warnings.push_back(std::move(w));
  }

  // Original classifier and measurement.
  LinearModel original_model;
  if (config.external_predictions) {
    const auto preds = load_external_predictions(*config.external_predictions, unlabeled);
    const auto attrs = load_external_attributions(*config.external_attributions, unlabeled);
    report.original = measure_external(preds.by_id, attrs.records, unlabeled,
                                       config.target_class, config.explainer, identifier);
    for (const auto& e : attrs.errors) {
      report.warnings.push_back("attributions line " + std::to_string(e.line) + " (" +
                                e.document_id + "): " + e.message);
    }
  } else {
    Stopwatch train_clock;
    original_model = config.model ? load_model(*config.model) : train(training, config.train);
    report.timings.train = train_clock.seconds();
    report.original = measure(original_model, unlabeled, config.target_class, config.explainer,
                              identifier, config.threshold);
  }
  for (const auto& w : report.original.warnings) report.warnings.push_back("original: " + w);

  const std::size_t top_n = report.original.fairness.top_n;
  ExplainerConfig follow_up = ExplainerConfig::with_top_k(
      std::max<std::size_t>(top_n, 1),
      config.explainer.method == AttributionMethod::kExternalFile
          ? AttributionMethod::kLinearExact
          : config.explainer.method);

  LabeledCorpus current = training;
  LinearModel current_model = original_model;
  const Measurement* latest = &report.original;
  Measurement mitigated;
  bool retrained = false;

  for (int round = 0; round < config.rounds; ++round) {
    const auto words = scope_words(latest->annotations, config.plan.category_scope);
    if (words.empty()) {
      report.warnings.push_back("round " + std::to_string(round + 1) +
                                ": no protected words in scope; corpus left unchanged");
      break;
    }
    MitigationPlan plan = config.plan;
    plan.protected_words = words;
    for (const auto& w : words) {
      if (std::find(report.plan.protected_words.begin(), report.plan.protected_words.end(),
                    w) == report.plan.protected_words.end()) {
        report.plan.protected_words.push_back(w);
      }
    }

    Stopwatch moderate_clock;
    MitigationResult result = moderate(current, plan, resources.view);
    report.timings.moderate += moderate_clock.seconds();
    report.delta += result.delta;
    for (auto& w : result.warnings) report.warnings.push_back(std::move(w));
    current = std::move(result.corpus);

    Stopwatch retrain_clock;
    current_model = train(current, config.train);
    report.timings.retrain += retrain_clock.seconds();
    retrained = true;

    mitigated = measure(current_model, unlabeled, config.target_class, follow_up, identifier,
                        config.threshold);
    latest = &mitigated;
    ++report.rounds_run;
  }

  if (retrained) {
    report.mitigated = std::move(mitigated);
    for (const auto& w : report.mitigated.warnings) report.warnings.push_back("mitigated: " + w);
  } else {
    report.mitigated = report.original;
    report.mitigated.timings = StageTimings{};
    report.mitigated.warnings.clear();
  }
  report.mitigated_training_size = current.size();

  std::set<std::string> original_set(report.original.protected_words.begin(),
                                     report.original.protected_words.end());
  std::size_t retained = 0;
  for (const auto& w : report.mitigated.protected_words) retained += original_set.count(w);
  report.mitigated.fairness.retained_from_original = retained;

  for (const auto* m : {&report.original, &report.mitigated}) {
    report.timings.predict += m->timings.predict;
    report.timings.explain += m->timings.explain;
    report.timings.identify += m->timings.identify;
  }

  if (artifacts) {
    artifacts->original_model = std::move(original_model);
    artifacts->mitigated_model = retrained ? std::move(current_model) : artifacts->original_model;
    artifacts->mitigated_corpus = std::move(current);
  }
  return report;
}

MitigationReport run_pipeline(const PipelineConfig& config, Identifier& identifier) {
  MitigationArtifacts artifacts;
  MitigationReport report = run_mitigation(config, identifier, &artifacts);

  const fs::path& dir = config.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  write_text(dir / "report.json", report_json(report));
  write_text(dir / "report.txt", report_table(report));
  write_text(dir / "timings.json", timings_json(report));
  save_ranking_csv(report.original.ranking, dir / "ranking_original.csv");
  save_ranking_csv(report.mitigated.ranking, dir / "ranking_mitigated.csv");
  const auto used = report.annotations_used();
  save_annotations(used, dir / "annotations.tsv");
  save_corpus(artifacts.mitigated_corpus, dir / "mitigated_train.jsonl");
  if (!config.external_predictions) {
    save_model(artifacts.original_model, dir / "model_original.json");
  }
  if (!artifacts.mitigated_model.vocabulary().empty()) {
    save_model(artifacts.mitigated_model, dir / "model_mitigated.json");
  }
  return report;
}

// ---------------------------------------------------------------------------
// Rendering

std::string report_json(const MitigationReport& report) {
  ojson j;
  j["target_class"] = report.target_class;
  ojson plan;
  plan["strategy"] = to_string(report.plan.strategy);
  if (report.plan.category_scope) {
    std::vector<std::string> ids;
    for (const auto c : *report.plan.category_scope) ids.emplace_back(category_id(c));
    plan["category_scope"] = ids;
  } else {
    plan["category_scope"] = nullptr;
  }
  plan["class_scope"] =
      report.plan.class_scope ? ojson(*report.plan.class_scope) : ojson(nullptr);
  plan["k"] = report.plan.k;
  plan["seed"] = report.plan.seed;
  plan["keep_original"] = report.plan.keep_original;
  plan["protected_words"] = report.plan.protected_words;
  j["plan"] = std::move(plan);
  j["training_size"] = {{"original", report.original_training_size},
                        {"mitigated", report.mitigated_training_size}};
  j["rounds_run"] = report.rounds_run;
  j["original"] = measurement_json(report.original);
  j["mitigated"] = measurement_json(report.mitigated);
  j["delta"] = {{"documents_removed", report.delta.documents_removed},
                {"documents_added", report.delta.documents_added},
                {"tokens_removed", report.delta.tokens_removed},
                {"tokens_replaced", report.delta.tokens_replaced}};
  ojson annotations = ojson::array();
  for (const auto& a : report.annotations_used()) annotations.push_back(annotation_json(a));
  j["annotations"] = std::move(annotations);
  j["warnings"] = report.warnings;
  return j.dump(2) + "\n";
}

std::string report_table(const MitigationReport& report) {
  std::ostringstream out;
  out << "target class: " << report.target_class << "\n";
  out << "strategy:     " << to_string(report.plan.strategy);
  if (report.plan.class_scope) out << " (class " << *report.plan.class_scope << ")";
  out << "\n";
  out << "training set: " << report.original_training_size << " -> "
      << report.mitigated_training_size << " documents\n\n";

  const auto metric = [](const std::optional<Metrics>& m, auto field) -> std::string {
    if (!m) return "-";
    return field(*m);
  };
  out << pad("model", 11) << pad("F1 macro", 10) << pad("F1 weighted", 13) << pad("AUC", 8)
      << pad("% PA", 7) << "Ratio PA\n";
  const auto row = [&](const char* name, const Measurement& m) {
    out << pad(name, 11)
        << pad(metric(m.metrics, [](const Metrics& x) { return fixed(x.f1_macro, 4); }), 10)
        << pad(metric(m.metrics, [](const Metrics& x) { return fixed(x.f1_weighted, 4); }), 13)
        << pad(metric(m.metrics,
                      [](const Metrics& x) { return x.auc ? fixed(*x.auc, 4) : "-"; }),
               8)
        << pad(m.fairness.percent_label(), 7) << m.fairness.ratio() << "\n";
  };
  row("original", report.original);
  row("mitigated", report.mitigated);

  out << "\ndocuments removed: " << report.delta.documents_removed
      << ", added: " << report.delta.documents_added
      << ", tokens removed: " << report.delta.tokens_removed
      << ", replaced: " << report.delta.tokens_replaced << "\n";
  if (!report.warnings.empty()) {
    out << "\nwarnings:\n";
    for (const auto& w : report.warnings) out << "  " << w << "\n";
  }
  return out.str();
}

std::string timings_json(const MitigationReport& report) {
  const StageTimings& t = report.timings;
  ojson j;
  j["train"] = t.train;
  j["predict"] = t.predict;
  j["explain"] = t.explain;
  j["identify"] = t.identify;
  j["moderate"] = t.moderate;
  j["retrain"] = t.retrain;
  j["total"] = t.total();
  return j.dump(2) + "\n";
}

Overlap compare_rankings(const Measurement& run_a, const Measurement& run_b) {
  if (run_a.fairness.top_n != run_b.fairness.top_n) {
    throw ValidationError("rankings were cut at different top_n (" +
                          std::to_string(run_a.fairness.top_n) + " vs " +
                          std::to_string(run_b.fairness.top_n) + ")");
  }
  return overlap(run_a.top_words, run_b.top_words);
}

}  // namespace fairtext
