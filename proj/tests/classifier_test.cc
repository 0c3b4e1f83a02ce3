#include "fairtext/classifier.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "fairtext/error.h"
#include "fairtext/random.h"
#include "support/synthetic.h"

namespace fairtext {
namespace {

LabeledCorpus toy_corpus() {
  LabeledCorpus c;
  c.documents.push_back(make_document("1", "aaa x", "A"));
  c.documents.push_back(make_document("2", "aaa y", "A"));
  c.documents.push_back(make_document("3", "aaa aaa z", "A"));
  c.documents.push_back(make_document("4", "bbb x", "B"));
  c.documents.push_back(make_document("5", "bbb y", "B"));
  c.documents.push_back(make_document("6", "bbb z bbb", "B"));
  refresh_classes(c);
  return c;
}

LinearModel binary_model(const std::vector<std::string>& vocab) {
  return LinearModel(vocab, {"neg", "pos"}, TrainConfig{});
}

TEST(Train, SeparableCorpusGivesExpectedSigns) {
  const LinearModel m = train(toy_corpus(), TrainConfig{});
  ASSERT_TRUE(m.is_binary());
  EXPECT_GT(m.token_weight("aaa", "A"), 0.0);
  EXPECT_LT(m.token_weight("bbb", "A"), 0.0);
  EXPECT_GT(m.token_weight("bbb", "B"), 0.0);
}

TEST(Train, PositiveClassDefaultsToLastClass) {
  const LinearModel m = train(toy_corpus(), TrainConfig{});
  EXPECT_EQ(m.positive_class(), "B");
  TrainConfig config;
  config.positive_class = "A";
  EXPECT_EQ(train(toy_corpus(), config).positive_class(), "A");
}

TEST(Train, DeterministicForFixedSeed) {
  const auto corpus = test::planted_corpus({.documents = 300}, 5);
  EXPECT_TRUE(train(corpus, TrainConfig{}) == train(corpus, TrainConfig{}));
}

TEST(Train, LossDecreases) {
  const auto corpus = test::planted_corpus({.documents = 300}, 6);
  const LinearModel m = train(corpus, TrainConfig{});
  ASSERT_GE(m.loss_history().size(), 2u);
  EXPECT_LT(m.loss_history().back(), m.loss_history().front());
}

TEST(Train, SingleClassCorpusIsRejected) {
  LabeledCorpus c;
  c.documents.push_back(make_document("1", "a", "A"));
  c.documents.push_back(make_document("2", "b", "A"));
  refresh_classes(c);
  EXPECT_THROW(train(c, TrainConfig{}), ValidationError);
}

TEST(Train, UnlabeledDocumentIsRejected) {
  LabeledCorpus c = toy_corpus();
  c.documents.push_back(make_document("7", "ccc"));
  EXPECT_THROW(train(c, TrainConfig{}), ValidationError);
}

TEST(Train, InvalidConfigIsRejected) {
  TrainConfig config;
  config.epochs = 0;
  EXPECT_THROW(config.validate(), ValidationError);
  config = TrainConfig{};
  config.learning_rate = -1;
  EXPECT_THROW(config.validate(), ValidationError);
  config = TrainConfig{};
  config.l2 = -0.1;
  EXPECT_THROW(config.validate(), ValidationError);
}

TEST(Predict, ZeroModelGivesOneHalf) {
  const LinearModel m = binary_model({"a", "b"});
  EXPECT_DOUBLE_EQ(predict(m, make_document("d", "a b")).of("pos"), 0.5);
}

TEST(Predict, SigmoidOfSingleWeight) {
  LinearModel m = binary_model({"hate"});
  m.set_token_weight("hate", "pos", 2.0);
  EXPECT_NEAR(predict(m, make_document("d", "hate")).of("pos"), 0.880797, 1e-6);
  EXPECT_NEAR(predict(m, make_document("d", "hate")).of("neg"), 1 - 0.880797, 1e-6);
}

TEST(Predict, OutOfVocabularyOnlyGivesOneHalf) {
  LinearModel m = binary_model({"hate"});
  m.set_token_weight("hate", "pos", 2.0);
  EXPECT_DOUBLE_EQ(predict(m, make_document("d", "love peace")).of("pos"), 0.5);
}

TEST(Predict, NegativeClassTokenWeightIsMirrored) {
  LinearModel m = binary_model({"hate"});
  m.set_token_weight("hate", "pos", 2.0);
  EXPECT_DOUBLE_EQ(m.token_weight("hate", "neg"), -2.0);
  EXPECT_DOUBLE_EQ(m.token_weight("other", "pos"), 0.0);
  EXPECT_THROW(m.token_weight("hate", "nope"), ValidationError);
}

TEST(Predict, MonotoneInPositiveTokenCount) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    LinearModel m = binary_model({"a", "b", "c"});
    for (const char* t : {"a", "b", "c"}) {
      m.set_token_weight(t, "pos", uniform_unit(rng) * 4 - 2);
    }
    m.set_token_weight("a", "pos", uniform_unit(rng) * 2);
    std::vector<std::string> tokens{"b", "c"};
    double previous = m.predict_tokens(tokens).of("pos");
    for (int k = 0; k < 6; ++k) {
      tokens.push_back("a");
      const double p = m.predict_tokens(tokens).of("pos");
      EXPECT_GE(p, previous);
      previous = p;
    }
  }
}

TEST(Predict, MulticlassProbabilitiesSumToOne) {
  LabeledCorpus c;
  c.documents.push_back(make_document("1", "good great", "positive"));
  c.documents.push_back(make_document("2", "bad awful", "negative"));
  c.documents.push_back(make_document("3", "ok fine", "neutral"));
  c.documents.push_back(make_document("4", "good fine", "positive"));
  refresh_classes(c);
  for (const auto mode : {MulticlassMode::kSoftmax, MulticlassMode::kOneVsRest}) {
    TrainConfig config;
    config.multiclass = mode;
    const LinearModel m = train(c, config);
    EXPECT_EQ(m.num_outputs(), 3u);
    for (const auto& doc : c.documents) {
      const auto probs = predict(m, doc);
      double sum = 0;
      for (const auto& [name, p] : probs.values) {
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        sum += p;
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
      EXPECT_EQ(probs.argmax(), *doc.label);
    }
  }
}

TEST(Metrics, F1FromConfusionCounts) {
  EXPECT_NEAR(f1_score(2, 1, 1), 2.0 / 3.0, 1e-9);
  EXPECT_DOUBLE_EQ(f1_score(0, 0, 0), 0.0);

  std::vector<std::string> gold;
  std::vector<std::string> pred;
  const auto add = [&](const char* g, const char* p, int n) {
    for (int i = 0; i < n; ++i) {
      gold.emplace_back(g);
      pred.emplace_back(p);
    }
  };
  add("pos", "pos", 2);
  add("neg", "pos", 1);
  add("pos", "neg", 1);
  add("neg", "neg", 6);
  const std::vector<std::string> classes{"neg", "pos"};
  const Metrics m = classification_metrics(gold, pred, classes);
  EXPECT_NEAR(m.per_class.at("pos").f1, 0.6666666667, 1e-9);
  // neg: tp 6, fp 1, fn 1.
  EXPECT_NEAR(m.per_class.at("neg").f1, 12.0 / 14.0, 1e-12);
  EXPECT_NEAR(m.f1_macro, (2.0 / 3.0 + 12.0 / 14.0) / 2, 1e-12);
  EXPECT_NEAR(m.f1_weighted, (3 * 2.0 / 3.0 + 7 * 12.0 / 14.0) / 10, 1e-12);
  EXPECT_NEAR(m.accuracy, 0.8, 1e-12);
}

TEST(Metrics, RankAucCountsTiesAsHalf) {
  const std::vector<double> pos{0.9, 0.8};
  const std::vector<double> neg{0.1, 0.2};
  EXPECT_DOUBLE_EQ(rank_auc(pos, neg), 1.0);
  const std::vector<double> tied_pos{0.5};
  const std::vector<double> tied_neg{0.5};
  EXPECT_DOUBLE_EQ(rank_auc(tied_pos, tied_neg), 0.5);
  const std::vector<double> p3{0.3, 0.7, 0.5};
  const std::vector<double> n3{0.5, 0.1};
  // Pairs: (0.3>0.5)=0,(0.3>0.1)=1,(0.7,*)=2,(0.5=0.5)=.5,(0.5>0.1)=1 -> 4.5/6
  EXPECT_DOUBLE_EQ(rank_auc(p3, n3), 4.5 / 6.0);
  EXPECT_THROW(rank_auc(pos, {}), MetricError);
}

TEST(Evaluate, PerfectClassifier) {
  const LabeledCorpus c = toy_corpus();
  LinearModel m(std::vector<std::string>{"aaa", "bbb"}, {"A", "B"}, TrainConfig{});
  m.set_token_weight("bbb", "B", 5.0);
  m.set_token_weight("aaa", "B", -5.0);
  const Metrics metrics = evaluate(m, c);
  EXPECT_DOUBLE_EQ(metrics.f1_macro, 1.0);
  ASSERT_TRUE(metrics.auc.has_value());
  EXPECT_DOUBLE_EQ(*metrics.auc, 1.0);
}

TEST(Evaluate, OneClassCorpusHasUndefinedAuc) {
  LabeledCorpus c;
  c.documents.push_back(make_document("1", "aaa", "A"));
  refresh_classes(c);
  LinearModel m(std::vector<std::string>{"aaa"}, {"A", "B"}, TrainConfig{});
  EXPECT_THROW(evaluate(m, c), MetricError);
}

TEST(Evaluate, InvariantToDocumentOrder) {
  auto corpus = test::planted_corpus({.documents = 400}, 8);
  const LinearModel m = train(corpus, TrainConfig{});
  const Metrics a = evaluate(m, corpus);
  std::mt19937_64 rng(1);
  std::shuffle(corpus.documents.begin(), corpus.documents.end(), rng);
  const Metrics b = evaluate(m, corpus);
  EXPECT_DOUBLE_EQ(a.f1_macro, b.f1_macro);
  EXPECT_DOUBLE_EQ(a.f1_weighted, b.f1_weighted);
  EXPECT_DOUBLE_EQ(*a.auc, *b.auc);
}

TEST(Objective, InverseFrequencyEqualisesClassLossAtInit) {
  const auto corpus = test::planted_corpus({.documents = 500, .positive_rate = 0.2}, 9);
  std::set<std::string> vocab_set;
  for (const auto& d : corpus.documents) vocab_set.insert(d.tokens.begin(), d.tokens.end());
  const LinearModel shape(std::vector<std::string>(vocab_set.begin(), vocab_set.end()),
                          {"non_toxic", "toxic"}, TrainConfig{});
  std::vector<SparseFeatures> features;
  std::vector<std::size_t> labels;
  for (const auto& d : corpus.documents) {
    features.push_back(shape.featurize(d.tokens));
    labels.push_back(*d.label == "toxic" ? 1 : 0);
  }
  const auto weights = example_weights(labels, 2, ClassWeighting::kInverseFrequency);
  const TrainingObjective objective(shape, features, labels, weights, 0.0);
  const auto contributions =
      objective.class_loss_contributions(objective.parameters(shape));
  ASSERT_EQ(contributions.size(), 2u);
  EXPECT_NEAR(contributions[0], contributions[1], 1e-9);
}

TEST(Objective, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  for (const bool multiclass : {false, true}) {
    for (int instance = 0; instance < 5; ++instance) {
      const std::size_t vocab = 3 + uniform_below(rng, 4);
      const std::size_t classes = multiclass ? 3 : 2;
      std::vector<std::string> words;
      for (std::size_t i = 0; i < vocab; ++i) words.push_back("w" + std::to_string(i));
      std::vector<std::string> names;
      for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
      const LinearModel shape(words, names, TrainConfig{});
      std::vector<SparseFeatures> features;
      std::vector<std::size_t> labels;
      for (int r = 0; r < 8; ++r) {
        SparseFeatures f;
        for (std::size_t i = 0; i < vocab; ++i) {
          if (uniform_unit(rng) < 0.5) f.emplace_back(i, 1.0 + uniform_below(rng, 3));
        }
        features.push_back(f);
        labels.push_back(uniform_below(rng, classes));
      }
      const auto weights = example_weights(labels, classes, ClassWeighting::kInverseFrequency);
      const TrainingObjective objective(shape, features, labels, weights, 0.01);
      std::vector<double> params(objective.num_parameters());
      for (auto& p : params) p = uniform_unit(rng) * 2 - 1;
      const auto grad = objective.gradient(params);
      for (std::size_t i = 0; i < params.size(); ++i) {
        auto plus = params;
        auto minus = params;
        const double h = 1e-5;
        plus[i] += h;
        minus[i] -= h;
        const double numeric = (objective.loss(plus) - objective.loss(minus)) / (2 * h);
        const double denom = std::max({std::abs(numeric), std::abs(grad[i]), 1e-8});
        EXPECT_LE(std::abs(numeric - grad[i]) / denom, 1e-5)
            << "param " << i << " numeric " << numeric << " analytic " << grad[i];
      }
    }
  }
}

TEST(Persistence, ModelRoundTrip) {
  test::TempDir dir;
  const LinearModel m = train(toy_corpus(), TrainConfig{});
  save_model(m, dir / "m.json");
  const LinearModel back = load_model(dir / "m.json");
  EXPECT_TRUE(back == m);
  EXPECT_EQ(back.positive_class(), m.positive_class());
}

TEST(Persistence, ModelWithWrongFormatIsRejected) {
  test::TempDir dir;
  test::write_file(dir / "m.json", "{\"format\":\"other\"}");
  EXPECT_THROW(load_model(dir / "m.json"), ValidationError);
}

TEST(ExternalPredictions, LoadsMatchingRecords) {
  test::TempDir dir;
  LabeledCorpus c;
  c.documents.push_back(make_document("a", "x"));
  c.documents.push_back(make_document("b", "y"));
  test::write_file(dir / "p.jsonl",
                   "{\"id\":\"a\",\"probabilities\":{\"toxic\":0.9,\"non_toxic\":0.1}}\n"
                   "{\"id\":\"b\",\"probabilities\":{\"toxic\":0.2,\"non_toxic\":0.8}}\n");
  const auto preds = load_external_predictions(dir / "p.jsonl", c);
  EXPECT_EQ(preds.by_id.size(), 2u);
  EXPECT_DOUBLE_EQ(preds.by_id.at("a").of("toxic"), 0.9);
  EXPECT_TRUE(preds.unresolved.empty());
}

TEST(ExternalPredictions, OutOfRangeProbabilityIsRejected) {
  test::TempDir dir;
  LabeledCorpus c;
  c.documents.push_back(make_document("a", "x"));
  test::write_file(dir / "p.jsonl", "{\"id\":\"a\",\"probabilities\":{\"toxic\":1.3}}\n");
  EXPECT_THROW(load_external_predictions(dir / "p.jsonl", c), ValidationError);
}

TEST(ExternalPredictions, UnknownIdIsUnresolved) {
  test::TempDir dir;
  LabeledCorpus c;
  c.documents.push_back(make_document("a", "x"));
  test::write_file(dir / "p.jsonl", "{\"id\":\"zz\",\"probabilities\":{\"toxic\":0.3}}\n");
  const auto preds = load_external_predictions(dir / "p.jsonl", c);
  EXPECT_EQ(preds.unresolved, std::vector<std::string>{"zz"});
}

TEST(ExternalPredictions, DuplicateIdIsRejected) {
  test::TempDir dir;
  LabeledCorpus c;
  c.documents.push_back(make_document("a", "x"));
  test::write_file(dir / "p.jsonl",
                   "{\"id\":\"a\",\"probabilities\":{\"toxic\":0.3}}\n"
                   "{\"id\":\"a\",\"probabilities\":{\"toxic\":0.4}}\n");
  EXPECT_THROW(load_external_predictions(dir / "p.jsonl", c), ValidationError);
}

TEST(ExternalPredictions, SaveThenLoadRoundTrips) {
  test::TempDir dir;
  const LabeledCorpus c = toy_corpus();
  const LinearModel m = train(c, TrainConfig{});
  std::vector<ClassProbabilities> probs;
  for (const auto& d : c.documents) probs.push_back(predict(m, d));
  save_predictions(c, probs, dir / "p.jsonl");
  const auto back = load_external_predictions(dir / "p.jsonl", c);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(back.by_id.at(c.documents[i].id), probs[i]);
  }
}

}  // namespace
}  // namespace fairtext
