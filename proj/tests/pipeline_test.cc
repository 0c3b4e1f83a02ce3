#include "fairtext/pipeline.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "fairtext/error.h"
#include "support/synthetic.h"

namespace fairtext {
namespace {

using test::TempDir;

struct Fixture {
  TempDir dir;
  std::filesystem::path train_path;
  std::filesystem::path unlabeled_path;
  std::filesystem::path dict_path;

  Fixture() {
    train_path = dir / "train.jsonl";
    unlabeled_path = dir / "unlabeled.jsonl";
    dict_path = dir / "dict.tsv";
    save_corpus(test::planted_corpus({.documents = 800}, 1, "t"), train_path);
    save_corpus(test::planted_corpus({.documents = 400}, 2, "u"), unlabeled_path);
    std::string dict;
    for (const auto& [w, c] : test::planted_dictionary()) {
      dict += w + "\t" + std::string(category_id(c)) + "\n";
    }
    test::write_file(dict_path, dict);
  }

  std::string toml(const std::string& extra = "") const {
    return "training_corpus = \"train.jsonl\"\n"
           "unlabeled_corpus = \"unlabeled.jsonl\"\n"
           "output_dir = \"out\"\n"
           "target_class = \"toxic\"\n" +
           extra +
           "\n[explainer]\n"
           "method = \"linear-exact\"\n"
           "top_k = 50\n"
           "\n[identifier]\n"
           "backend = \"dictionary\"\n"
           "dictionary = \"dict.tsv\"\n"
           "\n[mitigation]\n"
           "strategy = \"MS2\"\n"
           "\n[train]\n"
           "epochs = 10\n";
  }
};

TEST(FairnessStats, RatioAndPercent) {
  const auto f = fairness_stats(93, 400);
  EXPECT_EQ(f.ratio(), "93/400");
  EXPECT_DOUBLE_EQ(f.percent, 23.25);
  EXPECT_EQ(f.percent_label(), "23%");
  auto g = fairness_stats(37, 400);
  g.retained_from_original = 16;
  EXPECT_EQ(g.ratio(), "37/400 {16}");
  EXPECT_EQ(fairness_stats(0, 0).percent, 0.0);
  EXPECT_THROW(fairness_stats(5, 4), ValidationError);
}

TEST(Config, TomlParsesAndResolvesRelativePaths) {
  Fixture fx;
  const auto c = parse_pipeline_config(
      fx.toml("rounds = 2\n") + "\n[identifier.llm]\nsession_size = 7\n", false, fx.dir.path());
  EXPECT_EQ(c.training_corpus, fx.train_path);
  EXPECT_EQ(c.output_dir, fx.dir / "out");
  EXPECT_EQ(c.target_class, "toxic");
  EXPECT_EQ(c.explainer.top_k, 50u);
  EXPECT_EQ(c.identifier.backend, IdentifierBackend::kDictionary);
  EXPECT_EQ(c.identifier.dictionary, fx.dict_path);
  EXPECT_EQ(c.identifier.llm.session_size, 7u);
  EXPECT_EQ(c.plan.strategy, Strategy::kWordRemoval);
  EXPECT_EQ(c.train.epochs, 10);
  EXPECT_EQ(c.rounds, 2);
}

TEST(Config, JsonMatchesToml) {
  Fixture fx;
  const std::string json = R"({
    "training_corpus": "train.jsonl", "unlabeled_corpus": "unlabeled.jsonl",
    "output_dir": "out", "target_class": "toxic",
    "explainer": {"method": "linear-exact", "top_k": 50},
    "identifier": {"backend": "dictionary", "dictionary": "dict.tsv"},
    "mitigation": {"strategy": "MS2"},
    "train": {"epochs": 10}
  })";
  const auto a = parse_pipeline_config(json, true, fx.dir.path());
  const auto b = parse_pipeline_config(fx.toml(), false, fx.dir.path());
  EXPECT_EQ(a.training_corpus, b.training_corpus);
  EXPECT_EQ(a.explainer.top_k, b.explainer.top_k);
  EXPECT_EQ(a.plan.strategy, b.plan.strategy);
  EXPECT_EQ(a.train.epochs, b.train.epochs);
}

TEST(Config, CategoriesAndScopes) {
  Fixture fx;
  auto text = fx.toml();
  text.replace(text.find("strategy = \"MS2\""), 16,
               "strategy = \"MS1\"\ncategories = [\"sex\", \"Race\"]\nclass_scope = \"toxic\"");
  const auto c = parse_pipeline_config(text, false, fx.dir.path());
  ASSERT_TRUE(c.plan.category_scope.has_value());
  EXPECT_EQ(*c.plan.category_scope,
            (std::set<ProtectedCategory>{ProtectedCategory::kSex, ProtectedCategory::kRace}));
  EXPECT_EQ(c.plan.class_scope, "toxic");
}

TEST(Config, InvalidConfigsAreRejected) {
  Fixture fx;
  const auto rejects = [&](const std::string& text) {
    EXPECT_THROW(parse_pipeline_config(text, false, fx.dir.path()), ValidationError) << text;
  };
  rejects(fx.toml("unknown_key = 1\n"));
  rejects(fx.toml("rounds = 0\n"));
  rejects(fx.toml("threshold = 1.5\n"));
  auto same = fx.toml();
  same.replace(same.find("unlabeled.jsonl"), 15, "train.jsonl");
  rejects(same);
  auto ms3 = fx.toml();
  ms3.replace(ms3.find("MS2"), 3, "MS3");
  rejects(ms3);
  auto no_target = fx.toml();
  no_target.replace(no_target.find("target_class = \"toxic\"\n"), 23, "");
  rejects(no_target);
  rejects("training_corpus = \"a\"\ntraining_corpus = \"b\"\n");
  rejects("[explainer\n");
}

TEST(Config, LoadChoosesFormatByExtension) {
  Fixture fx;
  test::write_file(fx.dir / "p.toml", fx.toml());
  EXPECT_EQ(load_pipeline_config(fx.dir / "p.toml").target_class, "toxic");
  test::write_file(fx.dir / "p.json", "{\"target_class\": 1}");
  EXPECT_THROW(load_pipeline_config(fx.dir / "p.json"), ValidationError);
}

TEST(Measure, EmptyDictionaryFindsNothing) {
  const auto train_c = test::planted_corpus({.documents = 600}, 1);
  const auto unl = test::planted_corpus({.documents = 300}, 2);
  const LinearModel m = train(train_c, TrainConfig{});
  DictionaryIdentifier identifier({});
  const auto r = measure(m, unl, "toxic", ExplainerConfig::with_top_k(50), identifier);
  EXPECT_EQ(r.fairness.protected_count, 0u);
  EXPECT_EQ(r.fairness.top_n, 50u);
  EXPECT_EQ(r.annotations.size(), 50u);
}

TEST(Measure, PlantedWordsReachTheTopWords) {
  test::PlantedBiasSpec spec;
  spec.documents = 2000;
  spec.protected_in_positive = 0.8;
  spec.protected_in_negative = 0.01;
  const LinearModel m = train(test::planted_corpus(spec, 3), TrainConfig{});
  DictionaryIdentifier identifier(test::planted_dictionary());
  const auto r = measure(m, test::planted_corpus(spec, 4, "u"), "toxic",
                         ExplainerConfig::with_top_k(60), identifier);
  const std::set<std::string> top(r.top_words.begin(), r.top_words.end());
  for (const auto& w : test::planted_protected_words()) EXPECT_TRUE(top.count(w)) << w;
  EXPECT_EQ(r.fairness.protected_count, test::planted_protected_words().size());
}

TEST(Measure, MetricsEqualEvaluate) {
  const LinearModel m = train(test::planted_corpus({.documents = 500}, 5), TrainConfig{});
  const auto unl = test::planted_corpus({.documents = 300}, 6);
  DictionaryIdentifier identifier(test::planted_dictionary());
  const auto r = measure(m, unl, "toxic", ExplainerConfig::with_top_k(20), identifier);
  ASSERT_TRUE(r.metrics.has_value());
  const Metrics e = evaluate(m, unl);
  EXPECT_EQ(r.metrics->f1_macro, e.f1_macro);
  EXPECT_EQ(r.metrics->auc, e.auc);
  std::size_t positives = 0;
  for (const auto& d : unl.documents) positives += decide(m, predict(m, d)) == "toxic";
  EXPECT_EQ(r.explained_documents, positives);
}

TEST(Measure, NoPositivePredictionIsAnError) {
  LinearModel m(std::vector<std::string>{"a"}, {"non_toxic", "toxic"}, TrainConfig{});
  m.mutable_bias(0) = -5;
  LabeledCorpus unl;
  unl.documents.push_back(make_document("1", "a b"));
  DictionaryIdentifier identifier({});
  EXPECT_THROW(measure(m, unl, "toxic", ExplainerConfig::with_top_k(5), identifier), Error);
}

TEST(Measure, OcclusionMatchesLinearTopWordsOnSingleOccurrences) {
  const LinearModel m = train(test::planted_corpus({.documents = 500}, 7), TrainConfig{});
  LabeledCorpus unl;
  // Each document holds a word once, so both methods rank by the same signal.
  for (std::size_t i = 0; i < m.vocabulary().size(); ++i) {
    unl.documents.push_back(make_document("u" + std::to_string(i), m.vocabulary()[i] + " idiot"));
  }
  DictionaryIdentifier identifier({});
  const auto lin = measure(m, unl, "toxic", ExplainerConfig::with_top_k(30), identifier);
  const auto occ = measure(m, unl, "toxic",
                           ExplainerConfig::with_top_k(30, AttributionMethod::kOcclusion),
                           identifier);
  EXPECT_GT(compare_rankings(lin, occ).fraction, 0.5);
}

TEST(Identifiers, FixedAnnotationsFoldCaseAndDefaultToNone) {
  Annotation a;
  a.word = "Woman";
  a.category = ProtectedCategory::kSex;
  a.source = AnnotationSource::kHuman;
  FixedAnnotationIdentifier identifier({a});
  const std::vector<std::string> words{"woman", "table"};
  const auto out = identifier.identify(words);
  EXPECT_EQ(out[0].category, ProtectedCategory::kSex);
  EXPECT_FALSE(out[1].is_protected());
  EXPECT_EQ(parse_identifier_backend("human"), IdentifierBackend::kAnnotations);
  EXPECT_THROW(parse_identifier_backend("oracle"), ValidationError);
}

TEST(Pipeline, RunWritesDeterministicReport) {
  Fixture fx;
  test::write_file(fx.dir / "p.toml", fx.toml());
  auto config = load_pipeline_config(fx.dir / "p.toml");
  DictionaryIdentifier identifier(load_dictionary(fx.dict_path));
  const auto report = run_pipeline(config, identifier);
  const auto first = test::read_file(fx.dir / "out" / "report.json");
  for (const char* name : {"report.txt", "timings.json", "ranking_original.csv",
                           "ranking_mitigated.csv", "annotations.tsv", "mitigated_train.jsonl",
                           "model_original.json", "model_mitigated.json"}) {
    EXPECT_TRUE(std::filesystem::exists(fx.dir / "out" / name)) << name;
  }
  EXPECT_GT(report.original.fairness.protected_count, 0u);
  EXPECT_LT(report.mitigated.fairness.protected_count, report.original.fairness.protected_count);
  ASSERT_TRUE(report.mitigated.fairness.retained_from_original.has_value());
  EXPECT_EQ(report.rounds_run, 1);

  run_pipeline(config, identifier);
  EXPECT_EQ(test::read_file(fx.dir / "out" / "report.json"), first);
}

TEST(Pipeline, NoProtectedWordsSkipsRetraining) {
  Fixture fx;
  auto config = parse_pipeline_config(fx.toml(), false, fx.dir.path());
  DictionaryIdentifier identifier({});
  const auto report = run_mitigation(config, identifier);
  EXPECT_EQ(report.rounds_run, 0);
  EXPECT_EQ(report.mitigated.top_words, report.original.top_words);
  EXPECT_FALSE(report.warnings.empty());
}

TEST(Pipeline, CategoryScopeLimitsModeratedWords) {
  Fixture fx;
  auto config = parse_pipeline_config(fx.toml(), false, fx.dir.path());
  config.plan.category_scope = std::set<ProtectedCategory>{ProtectedCategory::kSex};
  DictionaryIdentifier identifier(test::planted_dictionary());
  const auto report = run_mitigation(config, identifier);
  for (const auto& w : report.plan.protected_words) {
    EXPECT_EQ(test::planted_dictionary().at(w), ProtectedCategory::kSex) << w;
  }
}

TEST(Pipeline, CompareRankingsNeedsEqualTopN) {
  Measurement a;
  Measurement b;
  a.top_words = {"x", "y"};
  a.fairness = fairness_stats(0, 2);
  b.top_words = {"y"};
  b.fairness = fairness_stats(0, 1);
  EXPECT_THROW(compare_rankings(a, b), ValidationError);
}

}  // namespace
}  // namespace fairtext
