#include "cli.h"

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "annotate_server.h"
#include "annotation_service.h"
#include "fairtext/classifier.h"
#include "fairtext/corpus.h"
#include "fairtext/error.h"
#include "fairtext/explainer.h"
#include "fairtext/identifier.h"
#include "fairtext/lexical.h"
#include "fairtext/llm_client.h"
#include "fairtext/moderator.h"
#include "fairtext/pipeline.h"
#include "json.hpp"

namespace fairtext {

namespace {

using json = nlohmann::ordered_json;

struct TrainOptions {
  std::string corpus;
  std::string out;
  TrainConfig config;
  std::string class_weighting = "none";
  std::string multiclass = "softmax";
  std::string positive_class;
};

struct PredictOptions {
  std::string model;
  std::string corpus;
  std::string out;
  double threshold = 0.5;
};

struct ExplainOptions {
  std::string model;
  std::string predictions;
  std::string attributions;
  std::string corpus;
  std::string target;
  std::string method = "linear-exact";
  std::optional<std::size_t> top_k;
  std::optional<double> top_fraction;
  std::string out;
  std::string attributions_out;
  std::string render_id;
  std::string render_format = "ansi";
  std::vector<std::size_t> ablation_steps;
  std::string ablation_corpus;
  std::string ablation_out;
  double threshold = 0.5;
};

struct IdentifyOptions {
  std::string backend = "dictionary";
  std::string words;
  std::string ranking;
  std::optional<std::size_t> top_k;
  std::string dictionary;
  std::string annotations;
  LlmConfig llm;
  long long timeout_ms = 30000;
  long long backoff_ms = 500;
  std::size_t session_size = 20;
  std::string out;
};

struct ModerateOptions {
  std::string corpus;
  std::string strategy = "MS2";
  std::string words;
  std::string annotations;
  std::vector<std::string> categories;
  std::string class_scope;
  std::size_t k = 5;
  std::uint64_t seed = 0;
  bool drop_original = false;
  std::string embeddings;
  std::string hypernyms;
  std::string out;
};

struct RunOptions {
  std::string config;
  std::string output_dir;
};

struct CompareOptions {
  std::string ranking_a;
  std::string ranking_b;
  std::optional<std::size_t> top_k;
  std::string annotations_a;
  std::string annotations_b;
};

struct ServeOptions {
  std::string words;
  std::string traps;
  std::string votes;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  std::size_t words_per_session = 20;
  double trap_rate = 0.2;
  std::size_t target_per_word = 5;
};

std::atomic<AnnotateServer*> g_server{nullptr};

extern "C" void handle_stop_signal(int) {
  if (AnnotateServer* s = g_server.load()) s->stop();
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

json metrics_json(const Metrics& m) {
  json j;
  j["f1_macro"] = m.f1_macro;
  j["f1_weighted"] = m.f1_weighted;
  j["accuracy"] = m.accuracy;
  j["auc"] = m.auc ? json(*m.auc) : json(nullptr);
  json per_class = json::object();
  for (const auto& [name, s] : m.per_class) {
    per_class[name] = {{"precision", s.precision},
                       {"recall", s.recall},
                       {"f1", s.f1},
                       {"support", s.support}};
  }
  j["per_class"] = std::move(per_class);
  return j;
}

int run_train(const TrainOptions& o, std::ostream&, std::ostream& err) {
  TrainConfig config = o.config;
  config.class_weighting = parse_class_weighting(o.class_weighting);
  config.multiclass = parse_multiclass_mode(o.multiclass);
  if (!o.positive_class.empty()) config.positive_class = o.positive_class;
  const LabeledCorpus corpus = load_corpus(o.corpus);
  const LinearModel model = train(corpus, config);
  save_model(model, o.out);
  err << "trained on " << corpus.size() << " documents, " << model.vocabulary().size()
      << " features, final loss " << model.loss_history().back() << "\n";
  return kExitOk;
}

int run_predict(const PredictOptions& o, std::ostream& out, std::ostream& err) {
  const LinearModel model = load_model(o.model);
  const LabeledCorpus corpus = load_corpus(o.corpus);
  std::vector<ClassProbabilities> predictions;
  predictions.reserve(corpus.size());
  for (const auto& doc : corpus.documents) predictions.push_back(predict(model, doc));
  save_predictions(corpus, predictions, o.out);
  err << "wrote " << predictions.size() << " predictions to " << o.out << "\n";
  if (!corpus.empty() && corpus.fully_labeled()) {
    Metrics m;
    try {
      m = evaluate(model, corpus, o.threshold);
    } catch (const MetricError& e) {
      err << "warning: " << e.what() << "\n";
      std::vector<std::string> gold;
      std::vector<std::string> decided;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        gold.push_back(*corpus.documents[i].label);
        decided.push_back(decide(model, predictions[i], o.threshold));
      }
      m = classification_metrics(gold, decided, model.classes());
    }
    out << metrics_json(m).dump(2) << "\n";
  }
  return kExitOk;
}

int run_explain(const ExplainOptions& o, std::ostream& out, std::ostream& err) {
  ExplainerConfig config;
  config.method = parse_attribution_method(o.method);
  config.top_k = o.top_k;
  config.top_fraction = o.top_fraction;
  if (!config.top_k && !config.top_fraction) config.top_k = 400;
  config.validate();

  const LabeledCorpus corpus = load_corpus(o.corpus);
  std::vector<AttributionRecord> records;
  std::optional<LinearModel> model;

  if (config.method == AttributionMethod::kExternalFile) {
    if (o.predictions.empty() || o.attributions.empty()) {
      throw ValidationError("external-file needs --predictions and --attributions");
    }
    const auto preds = load_external_predictions(o.predictions, corpus);
    const auto attrs = load_external_attributions(o.attributions, corpus);
    for (const auto& e : attrs.errors) {
      err << "warning: " << o.attributions << ":" << e.line << " (" << e.document_id
          << "): " << e.message << "\n";
    }
    for (const auto& r : attrs.records) {
      const auto it = preds.by_id.find(r.document_id);
      if (it != preds.by_id.end() && it->second.argmax() == o.target &&
          r.target_class == o.target) {
        records.push_back(r);
      }
    }
  } else {
    if (o.model.empty()) throw ValidationError("--model is required for " + o.method);
    model = load_model(o.model);
    const PredictFn fn = as_predict_fn(*model);
    for (const auto& doc : corpus.documents) {
      if (decide(*model, predict(*model, doc), o.threshold) != o.target) continue;
      records.push_back(config.method == AttributionMethod::kLinearExact
                            ? attribute_linear(*model, doc, o.target)
                            : attribute_occlusion(fn, doc, o.target));
    }
  }
  if (records.empty()) {
    throw Error("no document is predicted as '" + o.target + "'; nothing to explain");
  }

  const auto ranking = aggregate_global(records);
  const auto top = select_top(ranking, config);
  if (!o.out.empty()) save_ranking_csv(ranking, o.out);
  if (!o.attributions_out.empty()) save_attributions(records, o.attributions_out);
  err << "explained " << records.size() << " documents, " << ranking.size()
      << " distinct words\n";

  if (!o.render_id.empty()) {
    const RenderFormat format =
        o.render_format == "html" ? RenderFormat::kHtml : RenderFormat::kAnsi;
    if (o.render_format != "html" && o.render_format != "ansi") {
      throw ValidationError("--format must be 'ansi' or 'html'");
    }
    const auto it = std::find_if(records.begin(), records.end(), [&](const auto& r) {
      return r.document_id == o.render_id;
    });
    if (it != records.end()) {
      out << render_attributions(*it, format) << "\n";
      return kExitOk;
    }
    // Documents predicted as another class are still rendered against --target.
    const auto doc = std::find_if(corpus.documents.begin(), corpus.documents.end(),
                                  [&](const Document& d) { return d.id == o.render_id; });
    if (!model || doc == corpus.documents.end()) {
      throw ValidationError("document '" + o.render_id + "' was not explained");
    }
    const AttributionRecord record =
        config.method == AttributionMethod::kLinearExact
            ? attribute_linear(*model, *doc, o.target)
            : attribute_occlusion(as_predict_fn(*model), *doc, o.target);
    out << render_attributions(record, format) << "\n";
    return kExitOk;
  }

  if (!o.ablation_steps.empty()) {
    if (!model) throw ValidationError("ablation needs --model");
    const LabeledCorpus labeled =
        o.ablation_corpus.empty() ? corpus : load_corpus(o.ablation_corpus);
    std::vector<std::string> ranked;
    for (const auto& s : ranking) ranked.push_back(s.word);
    const auto curve = ablation_curve(*model, labeled, ranked, o.ablation_steps);
    std::ostringstream csv;
    csv << "words_removed,f1_macro,f1_weighted,accuracy\n";
    for (const auto& p : curve) {
      csv << p.words_removed << "," << p.f1 << "," << p.metrics.f1_weighted << ","
          << p.metrics.accuracy << "\n";
    }
    if (o.ablation_out.empty()) {
      out << csv.str();
    } else {
      std::ofstream f(o.ablation_out);
      if (!f) throw IoError("cannot write " + o.ablation_out);
      f << csv.str();
    }
    return kExitOk;
  }

  for (const auto& w : top) out << w << "\n";
  return kExitOk;
}

int run_identify(const IdentifyOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<std::string> words;
  if (!o.words.empty() == !o.ranking.empty()) {
    throw ValidationError("exactly one of --words and --ranking is required");
  }
  if (!o.words.empty()) {
    words = read_word_list(o.words);
  } else {
    for (const auto& s : load_ranking_csv(o.ranking)) words.push_back(s.word);
  }
  if (o.top_k && words.size() > *o.top_k) words.resize(*o.top_k);

  IdentifierSettings settings;
  settings.backend = parse_identifier_backend(o.backend);
  settings.dictionary = o.dictionary;
  settings.annotations = o.annotations;
  settings.llm = o.llm;
  settings.llm.request_timeout = std::chrono::milliseconds(o.timeout_ms);
  settings.llm.backoff = std::chrono::milliseconds(o.backoff_ms);
  settings.llm.session_size = o.session_size;
  if (settings.backend == IdentifierBackend::kDictionary && o.dictionary.empty()) {
    throw ValidationError("--dictionary is required for the dictionary backend");
  }
  if (settings.backend == IdentifierBackend::kAnnotations && o.annotations.empty()) {
    throw ValidationError("--annotations is required for the annotations backend");
  }
  auto identifier = make_identifier(settings);
  const auto annotations = identifier->identify(words);
  save_annotations(annotations, o.out);

  std::size_t protected_count = 0;
  std::size_t failed = 0;
  for (const auto& a : annotations) {
    protected_count += a.is_protected() ? 1 : 0;
    failed += a.failed ? 1 : 0;
  }
  if (failed > 0) err << "warning: " << failed << " word(s) could not be annotated\n";
  const FairnessStats stats = fairness_stats(protected_count, annotations.size());
  out << "protected " << stats.ratio() << " (" << stats.percent_label() << ")\n";
  return kExitOk;
}

int run_moderate(const ModerateOptions& o, std::ostream& out, std::ostream& err) {
  MitigationPlan plan;
  plan.strategy = parse_strategy(o.strategy);
  plan.k = o.k;
  plan.seed = o.seed;
  plan.keep_original = !o.drop_original;
  if (!o.class_scope.empty()) plan.class_scope = o.class_scope;
  if (!o.categories.empty()) {
    std::set<ProtectedCategory> scope;
    for (const auto& name : o.categories) {
      const auto c = parse_category(name);
      if (!c) throw ValidationError("unknown category '" + name + "'");
      scope.insert(*c);
    }
    plan.category_scope = std::move(scope);
  }
  if (!o.words.empty() == !o.annotations.empty()) {
    throw ValidationError("exactly one of --words and --annotations is required");
  }
  if (!o.words.empty()) {
    if (plan.category_scope) {
      throw ValidationError("--categories needs --annotations to know word categories");
    }
    plan.protected_words = read_word_list(o.words);
  } else {
    plan.protected_words = scope_words(load_annotations(o.annotations), plan.category_scope);
  }

  const LabeledCorpus corpus = load_corpus(o.corpus);
  MitigationResources resources;
  std::optional<EmbeddingLoadResult> embeddings;
  std::optional<LexiconLoadResult> lexicon;
  if (!o.embeddings.empty()) {
    embeddings = load_embeddings(o.embeddings);
    print_warnings(err, embeddings->warnings);
    resources.embeddings = &embeddings->table;
  }
  if (!o.hypernyms.empty()) {
    lexicon = load_hypernyms(o.hypernyms);
    print_warnings(err, lexicon->warnings);
    resources.lexicon = &lexicon->lexicon;
  }
  const MitigationResult result = moderate(corpus, plan, resources);
  print_warnings(err, result.warnings);
  save_corpus(result.corpus, o.out);
  json delta;
  delta["strategy"] = to_string(result.delta.strategy);
  delta["documents_before"] = corpus.size();
  delta["documents_after"] = result.corpus.size();
  delta["documents_removed"] = result.delta.documents_removed;
  delta["documents_added"] = result.delta.documents_added;
  delta["tokens_removed"] = result.delta.tokens_removed;
  delta["tokens_replaced"] = result.delta.tokens_replaced;
  out << delta.dump(2) << "\n";
  return kExitOk;
}

int run_run(const RunOptions& o, std::ostream& out, std::ostream& err) {
  PipelineConfig config = load_pipeline_config(o.config);
  if (!o.output_dir.empty()) {
    config.output_dir = o.output_dir;
    config.validate();
  }
  auto identifier = make_identifier(config.identifier);
  const MitigationReport report = run_pipeline(config, *identifier);
  print_warnings(err, report.warnings);
  err << "report written to " << (config.output_dir / "report.json").string() << "\n";
  out << report_table(report);
  return kExitOk;
}

int run_compare(const CompareOptions& o, std::ostream& out, std::ostream&) {
  json result;
  const bool rankings = !o.ranking_a.empty() || !o.ranking_b.empty();
  const bool annotations = !o.annotations_a.empty() || !o.annotations_b.empty();
  if (rankings == annotations) {
    throw ValidationError("compare either --ranking-a/--ranking-b or "
                          "--annotations-a/--annotations-b");
  }
  if (rankings) {
    if (o.ranking_a.empty() || o.ranking_b.empty()) {
      throw ValidationError("both --ranking-a and --ranking-b are required");
    }
    std::vector<std::string> a;
    std::vector<std::string> b;
    for (const auto& s : load_ranking_csv(o.ranking_a)) a.push_back(s.word);
    for (const auto& s : load_ranking_csv(o.ranking_b)) b.push_back(s.word);
    if (o.top_k) {
      if (a.size() > *o.top_k) a.resize(*o.top_k);
      if (b.size() > *o.top_k) b.resize(*o.top_k);
    }
    const Overlap ov = overlap(a, b);
    result["top_n"] = std::max(a.size(), b.size());
    result["overlap"] = ov.count;
    result["fraction"] = ov.fraction;
  } else {
    if (o.annotations_a.empty() || o.annotations_b.empty()) {
      throw ValidationError("both --annotations-a and --annotations-b are required");
    }
    const auto a = protected_map(load_annotations(o.annotations_a));
    const auto b = protected_map(load_annotations(o.annotations_b));
    result["words"] = a.size();
    result["kappa"] = cohen_kappa(a, b);
  }
  out << result.dump(2) << "\n";
  return kExitOk;
}

int run_serve(const ServeOptions& o, std::ostream& out, std::ostream& err) {
  AnnotationServiceConfig config;
  config.words = read_word_list(o.words);
  config.traps = load_traps(o.traps);
  config.votes_log = o.votes;
  config.words_per_session = o.words_per_session;
  config.trap_rate = o.trap_rate;
  config.target_per_word = o.target_per_word;
  AnnotationService service(std::move(config));
  AnnotateServer server(service, o.static_dir);
  const int port = server.bind(o.host, o.port);
  out << "listening on http://" << o.host << ":" << port << "\n" << std::flush;
  g_server.store(&server);
  auto previous_int = std::signal(SIGINT, handle_stop_signal);
  auto previous_term = std::signal(SIGTERM, handle_stop_signal);
  server.listen();
  std::signal(SIGINT, previous_int);
  std::signal(SIGTERM, previous_term);
  g_server.store(nullptr);
  err << "annotation service stopped\n";
  return kExitOk;
}

}  // namespace

std::vector<std::string> read_word_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open word list " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t");
    words.push_back(fold_case(line.substr(first, last - first + 1)));
  }
  return words;
}

int dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Measure and mitigate a text classifier's reliance on protected attributes",
               "fairtext"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fairtext 0.1.0");

  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train a bag-of-words logistic regression");
  train_cmd->add_option("--corpus", train_opts.corpus, "Labelled JSONL corpus")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_opts.out, "Model output path")->required();
  train_cmd->add_option("--epochs", train_opts.config.epochs)->capture_default_str();
  train_cmd->add_option("--learning-rate", train_opts.config.learning_rate)
      ->capture_default_str();
  train_cmd->add_option("--l2", train_opts.config.l2)->capture_default_str();
  train_cmd->add_option("--seed", train_opts.config.seed)->capture_default_str();
  train_cmd->add_option("--batch-size", train_opts.config.batch_size)->capture_default_str();
  train_cmd->add_option("--class-weighting", train_opts.class_weighting)
      ->check(CLI::IsMember({"none", "inverse-frequency"}))
      ->capture_default_str();
  train_cmd->add_option("--multiclass", train_opts.multiclass)
      ->check(CLI::IsMember({"softmax", "one-vs-rest", "ovr"}))
      ->capture_default_str();
  train_cmd->add_option("--positive-class", train_opts.positive_class);

  PredictOptions predict_opts;
  auto* predict_cmd = app.add_subcommand("predict", "Predict class probabilities");
  predict_cmd->add_option("--model", predict_opts.model)->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--corpus", predict_opts.corpus)
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--out", predict_opts.out, "Predictions JSONL")->required();
  predict_cmd->add_option("--threshold", predict_opts.threshold)->capture_default_str();

  ExplainOptions explain_opts;
  auto* explain_cmd =
      app.add_subcommand("explain", "Attribute, aggregate and rank the words behind a class");
  explain_cmd->add_option("--corpus", explain_opts.corpus, "Corpus to explain")
      ->required()
      ->check(CLI::ExistingFile);
  explain_cmd->add_option("--target", explain_opts.target, "Target class")->required();
  explain_cmd->add_option("--model", explain_opts.model)->check(CLI::ExistingFile);
  explain_cmd->add_option("--predictions", explain_opts.predictions)
      ->check(CLI::ExistingFile);
  explain_cmd->add_option("--attributions", explain_opts.attributions)
      ->check(CLI::ExistingFile);
  explain_cmd->add_option("--method", explain_opts.method)
      ->check(CLI::IsMember({"linear-exact", "occlusion", "external-file"}))
      ->capture_default_str();
  auto* top_k = explain_cmd->add_option("--top-k", explain_opts.top_k);
  explain_cmd->add_option("--top-fraction", explain_opts.top_fraction)->excludes(top_k);
  explain_cmd->add_option("--out", explain_opts.out, "Global ranking CSV");
  explain_cmd->add_option("--attributions-out", explain_opts.attributions_out,
                          "Local attributions JSONL");
  explain_cmd->add_option("--render", explain_opts.render_id,
                          "Print the attributions of one document");
  explain_cmd->add_option("--format", explain_opts.render_format)
      ->check(CLI::IsMember({"ansi", "html"}))
      ->capture_default_str();
  explain_cmd->add_option("--ablation-steps", explain_opts.ablation_steps,
                          "Word-removal ablation: numbers of top words to delete")
      ->delimiter(',');
  explain_cmd->add_option("--ablation-corpus", explain_opts.ablation_corpus,
                          "Labelled corpus for the ablation (default: --corpus)")
      ->check(CLI::ExistingFile);
  explain_cmd->add_option("--ablation-out", explain_opts.ablation_out);
  explain_cmd->add_option("--threshold", explain_opts.threshold)->capture_default_str();

  IdentifyOptions identify_opts;
  auto* identify_cmd =
      app.add_subcommand("identify", "Annotate words with protected categories");
  identify_cmd->add_option("--backend", identify_opts.backend)
      ->check(CLI::IsMember({"dictionary", "llm", "annotations"}))
      ->capture_default_str();
  identify_cmd->add_option("--words", identify_opts.words, "One word per line")
      ->check(CLI::ExistingFile);
  identify_cmd->add_option("--ranking", identify_opts.ranking, "Ranking CSV")
      ->check(CLI::ExistingFile);
  identify_cmd->add_option("--top-k", identify_opts.top_k);
  identify_cmd->add_option("--dictionary", identify_opts.dictionary)
      ->check(CLI::ExistingFile);
  identify_cmd->add_option("--annotations", identify_opts.annotations)
      ->check(CLI::ExistingFile);
  identify_cmd->add_option("--endpoint", identify_opts.llm.endpoint)->capture_default_str();
  identify_cmd->add_option("--llm-model", identify_opts.llm.model)->capture_default_str();
  identify_cmd->add_option("--temperature", identify_opts.llm.temperature)
      ->capture_default_str();
  identify_cmd->add_option("--max-retries", identify_opts.llm.max_retries)
      ->capture_default_str();
  identify_cmd->add_option("--concurrency", identify_opts.llm.max_concurrency)
      ->capture_default_str();
  identify_cmd->add_option("--session-size", identify_opts.session_size)
      ->capture_default_str();
  identify_cmd->add_option("--timeout-ms", identify_opts.timeout_ms)->capture_default_str();
  identify_cmd->add_option("--backoff-ms", identify_opts.backoff_ms)->capture_default_str();
  identify_cmd->add_option("--out", identify_opts.out, "Annotation TSV")->required();

  ModerateOptions moderate_opts;
  auto* moderate_cmd =
      app.add_subcommand("moderate", "Rewrite a training corpus with a mitigation strategy");
  moderate_cmd->add_option("--corpus", moderate_opts.corpus)
      ->required()
      ->check(CLI::ExistingFile);
  moderate_cmd->add_option("--strategy", moderate_opts.strategy, "MS1 .. MS5")
      ->capture_default_str();
  moderate_cmd->add_option("--words", moderate_opts.words, "Protected words, one per line")
      ->check(CLI::ExistingFile);
  moderate_cmd->add_option("--annotations", moderate_opts.annotations, "Annotation TSV")
      ->check(CLI::ExistingFile);
  moderate_cmd->add_option("--categories", moderate_opts.categories,
                           "Only moderate words of these categories")
      ->delimiter(',');
  moderate_cmd->add_option("--class-scope", moderate_opts.class_scope,
                           "Only moderate documents of this class");
  moderate_cmd->add_option("--k", moderate_opts.k)->capture_default_str();
  moderate_cmd->add_option("--seed", moderate_opts.seed)->capture_default_str();
  moderate_cmd->add_flag("--drop-original", moderate_opts.drop_original,
                         "MS4: drop documents that produced variants");
  moderate_cmd->add_option("--embeddings", moderate_opts.embeddings)
      ->check(CLI::ExistingFile);
  moderate_cmd->add_option("--hypernyms", moderate_opts.hypernyms)->check(CLI::ExistingFile);
  moderate_cmd->add_option("--out", moderate_opts.out, "Mitigated corpus JSONL")->required();

  RunOptions run_opts;
  auto* run_cmd = app.add_subcommand("run", "Run the full measure-mitigate-remeasure loop");
  run_cmd->add_option("--config", run_opts.config, "Pipeline config (.toml or .json)")
      ->required()
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--output-dir", run_opts.output_dir, "Override output_dir");

  CompareOptions compare_opts;
  auto* compare_cmd = app.add_subcommand(
      "compare", "Top-word overlap of two rankings, or kappa of two annotation files");
  compare_cmd->add_option("--ranking-a", compare_opts.ranking_a)->check(CLI::ExistingFile);
  compare_cmd->add_option("--ranking-b", compare_opts.ranking_b)->check(CLI::ExistingFile);
  compare_cmd->add_option("--top-k", compare_opts.top_k);
  compare_cmd->add_option("--annotations-a", compare_opts.annotations_a)
      ->check(CLI::ExistingFile);
  compare_cmd->add_option("--annotations-b", compare_opts.annotations_b)
      ->check(CLI::ExistingFile);

  ServeOptions serve_opts;
  auto* serve_cmd =
      app.add_subcommand("annotate-serve", "Serve the crowd annotation HTTP API");
  serve_cmd->add_option("--words", serve_opts.words, "Words to annotate, one per line")
      ->required()
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--traps", serve_opts.traps, "Trap TSV")
      ->required()
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--votes", serve_opts.votes, "Append-only votes log")->required();
  serve_cmd->add_option("--host", serve_opts.host)->capture_default_str();
  serve_cmd->add_option("--port", serve_opts.port)->capture_default_str();
  serve_cmd->add_option("--static-dir", serve_opts.static_dir)->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--words-per-session", serve_opts.words_per_session)
      ->capture_default_str();
  serve_cmd->add_option("--trap-rate", serve_opts.trap_rate)->capture_default_str();
  serve_cmd->add_option("--target-per-word", serve_opts.target_per_word)
      ->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: " << e.what() << "\n\n";
    const auto selected = app.get_subcommands();
    err << (selected.empty() ? app.help() : selected.front()->help());
    return kExitValidation;
  }

  try {
    if (*train_cmd) return run_train(train_opts, out, err);
    if (*predict_cmd) return run_predict(predict_opts, out, err);
    if (*explain_cmd) return run_explain(explain_opts, out, err);
    if (*identify_cmd) return run_identify(identify_opts, out, err);
    if (*moderate_cmd) return run_moderate(moderate_opts, out, err);
    if (*run_cmd) return run_run(run_opts, out, err);
    if (*compare_cmd) return run_compare(compare_opts, out, err);
    if (*serve_cmd) return run_serve(serve_opts, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace fairtext
