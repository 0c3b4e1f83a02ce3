// Acceptance gate: prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.h"
#include "fairtext/classifier.h"
#include "fairtext/explainer.h"
#include "fairtext/identifier.h"
#include "fairtext/moderator.h"
#include "fairtext/pipeline.h"
#include "fairtext/random.h"
#include "support/properties.h"
#include "support/stub_llm.h"
#include "support/synthetic.h"

#ifndef FAIRTEXT_SOURCE_DIR
#define FAIRTEXT_SOURCE_DIR "."
#endif

namespace fairtext {
namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  std::string failures;

  void require(bool condition, const std::string& what) {
    if (!condition) {
      pass = false;
      if (!failures.empty()) failures += "; ";
      failures += what;
    }
  }

  std::string line() const { return pass ? detail : failures + " [" + detail + "]"; }
};

std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

// --- AC1 ---------------------------------------------------------------------

test::PlantedBiasSpec planted_spec() {
  test::PlantedBiasSpec spec;
  spec.filler_vocabulary = 1500;
  spec.documents = 8000;
  spec.protected_in_negative = 0.01;
  return spec;
}

Outcome ac1_planted_bias() {
  Outcome o;
  test::TempDir dir;
  const auto spec = planted_spec();
  const auto training = test::planted_corpus(spec, 101, "t");
  const auto unlabeled = test::planted_corpus(spec, 202, "u");
  save_corpus(training, dir / "train.jsonl");
  save_corpus(unlabeled, dir / "unlabeled.jsonl");
  std::string dictionary;
  for (const auto& [w, c] : test::planted_dictionary()) {
    dictionary += w + "\t" + std::string(category_id(c)) + "\n";
  }
  test::write_file(dir / "dict.tsv", dictionary);

  std::set<std::string> vocabulary;
  for (const auto& d : training.documents) vocabulary.insert(d.tokens.begin(), d.tokens.end());
  o.require(vocabulary.size() >= 1500, "vocabulary " + std::to_string(vocabulary.size()));
  double min_rate = 1.0;
  for (const auto& w : test::planted_protected_words()) {
    min_rate = std::min(min_rate, test::conditional_rate(training, w, spec.positive_class));
  }
  o.require(min_rate >= 0.8, "protected co-occurrence rate " + fmt(min_rate));

  std::ostringstream detail;
  detail << "vocab=" << vocabulary.size() << " min_rate=" << fmt(min_rate, 3);
  for (const auto strategy : {Strategy::kWordRemoval, Strategy::kSentenceRemoval}) {
    const auto start = std::chrono::steady_clock::now();
    PipelineConfig config;
    config.training_corpus = dir / "train.jsonl";
    config.unlabeled_corpus = dir / "unlabeled.jsonl";
    config.output_dir = dir / ("out-" + to_string(strategy));
    config.target_class = spec.positive_class;
    config.explainer = ExplainerConfig::with_top_k(100);
    config.plan.strategy = strategy;
    config.train.class_weighting = ClassWeighting::kInverseFrequency;
    config.identifier.dictionary = dir / "dict.tsv";
    DictionaryIdentifier identifier(test::planted_dictionary());
    const auto report = run_pipeline(config, identifier);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::set<std::string> planted(test::planted_protected_words().begin(),
                                        test::planted_protected_words().end());
    const auto planted_in = [&](const Measurement& m) {
      std::size_t n = 0;
      for (const auto& w : m.top_words) n += planted.count(w);
      return n;
    };
    const std::size_t before = planted_in(report.original);
    const std::size_t after = planted_in(report.mitigated);
    const double drop = before == 0 ? 0.0 : 1.0 - static_cast<double>(after) / before;
    const double f1_before = report.original.metrics->f1_macro;
    const double f1_after = report.mitigated.metrics->f1_macro;
    const std::string tag = to_string(strategy);
    o.require(report.original.top_words.size() == 100, tag + " top_n != 100");
    o.require(before >= 16, tag + " planted in top-100 " + std::to_string(before) + "/20");
    o.require(drop >= 0.6, tag + " drop " + fmt(drop));
    o.require(std::abs(f1_after - f1_before) <= 0.02,
              tag + " F1 change " + fmt(f1_after - f1_before));
    o.require(seconds < 120, tag + " runtime " + fmt(seconds, 1) + "s");
    detail << " | " << tag << ": planted " << before << "/20 -> " << after << "/20 (drop "
           << fmt(100 * drop, 1) << "%), protected " << report.original.fairness.ratio()
           << " -> " << report.mitigated.fairness.ratio() << ", F1 " << fmt(f1_before)
           << " -> " << fmt(f1_after) << ", " << fmt(seconds, 1) << "s";
  }
  o.detail = detail.str();
  return o;
}

// --- AC2 ---------------------------------------------------------------------

Outcome ac2_occlusion_oracle() {
  Outcome o;
  std::mt19937_64 rng(2);
  std::size_t documents = 0;
  double worst = 1.0;
  for (std::size_t vocab_size = 2; vocab_size <= 50; ++vocab_size) {
    std::vector<std::string> vocab;
    for (std::size_t i = 0; i < vocab_size; ++i) vocab.push_back("v" + std::to_string(i));
    for (int model_draw = 0; model_draw < 3; ++model_draw) {
      LinearModel model(vocab, {"neg", "pos"}, TrainConfig{});
      for (const auto& w : vocab) model.set_token_weight(w, "pos", uniform_unit(rng) * 2 - 1);
      model.mutable_bias(0) = uniform_unit(rng) - 0.5;
      const PredictFn fn = as_predict_fn(model);
      // The full vocabulary once each, in a random order, plus random subsets.
      for (int doc_draw = 0; doc_draw < 4; ++doc_draw) {
        std::vector<std::string> tokens = vocab;
        std::shuffle(tokens.begin(), tokens.end(), rng);
        if (doc_draw > 0) tokens.resize(2 + uniform_below(rng, vocab_size - 1));
        Document doc;
        doc.id = "d";
        doc.tokens = tokens;
        for (const auto& target : {"pos", "neg"}) {
          const auto linear = attribute_linear(model, doc, target);
          const auto occlusion = attribute_occlusion(fn, doc, target);
          std::vector<double> a;
          std::vector<double> b;
          for (std::size_t i = 0; i < tokens.size(); ++i) {
            a.push_back(linear.token_scores[i].score);
            b.push_back(occlusion.token_scores[i].score);
          }
          const double rho = test::spearman(a, b);
          worst = std::min(worst, rho);
          ++documents;
        }
      }
    }
  }
  o.require(worst == 1.0, "minimum Spearman " + fmt(worst, 12));
  o.detail = std::to_string(documents) + " documents over 2..50-word vocabularies, min Spearman " +
             fmt(worst, 6);
  return o;
}

// --- AC3 ---------------------------------------------------------------------

Outcome ac3_aggregation() {
  Outcome o;
  std::mt19937_64 rng(3);
  std::vector<AttributionRecord> records;
  for (int r = 0; r < 200; ++r) {
    AttributionRecord rec{"d" + std::to_string(r), "toxic", {}};
    const std::size_t len = 1 + uniform_below(rng, 30);
    for (std::size_t i = 0; i < len; ++i) {
      rec.token_scores.push_back({i, "w" + std::to_string(uniform_below(rng, 80)),
                                  (uniform_unit(rng) * 2 - 1) * std::pow(10.0, uniform_below(rng, 4))});
    }
    records.push_back(rec);
  }
  // Independent oracle: per word, sum scores in record order and divide.
  std::map<std::string, std::pair<long double, std::size_t>> oracle;
  for (const auto& r : records) {
    for (const auto& ts : r.token_scores) {
      oracle[ts.token].first += ts.score;
      ++oracle[ts.token].second;
    }
  }
  const auto global = aggregate_global(records);
  o.require(global.size() == oracle.size(), "word count mismatch");
  double max_err = 0.0;
  for (const auto& g : global) {
    const auto& [sum, count] = oracle.at(g.word);
    const double mean = static_cast<double>(sum / static_cast<long double>(count));
    max_err = std::max(max_err, std::abs(g.score - mean));
    o.require(g.frequency == count, "frequency of " + g.word);
  }
  char err_text[32];
  std::snprintf(err_text, sizeof err_text, "%.2e", max_err);
  o.require(max_err <= 1e-12, std::string("max error ") + err_text);
  bool sorted = true;
  for (std::size_t i = 1; i < global.size(); ++i) sorted &= global[i - 1].score >= global[i].score;
  o.require(sorted, "not sorted by descending score");

  int identical = 0;
  for (int p = 0; p < 50; ++p) {
    auto shuffled = records;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    identical += aggregate_global(shuffled) == global;
  }
  o.require(identical == 50, "permutation changed the result");
  o.detail = "200 records, " + std::to_string(global.size()) + " words, max error " +
             err_text + ", 50/50 permutations identical";
  return o;
}

// --- AC4 ---------------------------------------------------------------------

Outcome ac4_ablation() {
  Outcome o;
  const auto spec = planted_spec();
  const LinearModel model = train(test::planted_corpus(spec, 101, "t"), TrainConfig{});
  const auto corpus = test::planted_corpus(spec, 202, "u");
  std::vector<AttributionRecord> records;
  for (const auto& d : corpus.documents) {
    if (decide(model, predict(model, d)) == spec.positive_class) {
      records.push_back(attribute_linear(model, d, spec.positive_class));
    }
  }
  const auto ranked = select_top(aggregate_global(records), ExplainerConfig::with_top_k(100));
  std::vector<std::size_t> steps{0};
  for (std::size_t s = 10; s <= 100; s += 10) steps.push_back(s);
  const auto curve = ablation_curve(model, corpus, ranked, steps);
  const double baseline = evaluate(model, corpus).f1_macro;
  o.require(curve[0].f1 == baseline, "step 0 differs from baseline");
  std::string shape = fmt(curve[0].f1, 3);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    shape += " " + fmt(curve[i].f1, 3);
    if (i >= 2) {
      o.require(curve[i].f1 <= curve[i - 1].f1 + 0.01,
                "rise at step " + std::to_string(curve[i].words_removed));
    }
  }
  o.detail = "F1 over steps 0,10..100: " + shape;
  return o;
}

// --- AC5 ---------------------------------------------------------------------

Outcome ac5_mitigation_invariants() {
  Outcome o;
  std::string counts;
  for (const auto s : {Strategy::kSentenceRemoval, Strategy::kWordRemoval,
                       Strategy::kRandomSynonym, Strategy::kKSynonymExpansion,
                       Strategy::kHypernymReplacement}) {
    const auto failures = test::check_moderation_properties(s, 250, 5000 + static_cast<int>(s));
    for (const auto& f : failures) o.require(false, f);
    counts += (counts.empty() ? "" : ", ") + to_string(s) + " " +
              std::to_string(250 - failures.size()) + "/250";
  }
  o.detail = counts;
  return o;
}

// --- AC6 ---------------------------------------------------------------------

// Oracle for the strict-exceed majority rule.
bool check_sheet(const std::array<int, kNumCategories + 1>& votes) {
  VoteSheet sheet;
  sheet.word = "w";
  int category_total = 0;
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    sheet.add(kAllCategories[i], votes[i]);
    category_total += votes[i];
  }
  const int none = votes[kNumCategories];
  sheet.add(std::nullopt, none);
  const Annotation a = majority_vote(sheet);
  const bool expect_protected = category_total > none;
  if (a.is_protected() != expect_protected) return false;
  if (!expect_protected) return !a.category.has_value();
  const int best = *std::max_element(votes.begin(), votes.begin() + kNumCategories);
  std::size_t first = 0;
  while (votes[first] != best) ++first;
  const int winners = static_cast<int>(
      std::count(votes.begin(), votes.begin() + kNumCategories, best));
  return a.category == kAllCategories[first] && a.flagged == (winners > 1);
}

std::size_t enumerate_sheets(std::array<int, kNumCategories + 1>& votes, std::size_t slot,
                             int remaining, std::size_t& failures) {
  if (slot == votes.size()) {
    const int total = std::accumulate(votes.begin(), votes.end(), 0);
    if (total == 0) return 0;
    if (!check_sheet(votes)) ++failures;
    return 1;
  }
  std::size_t n = 0;
  for (int v = 0; v <= remaining; ++v) {
    votes[slot] = v;
    n += enumerate_sheets(votes, slot + 1, remaining - v, failures);
  }
  votes[slot] = 0;
  return n;
}

Outcome ac6_identifier_arithmetic() {
  Outcome o;
  std::array<int, kNumCategories + 1> votes{};
  std::size_t sheet_failures = 0;
  const std::size_t sheets = enumerate_sheets(votes, 0, 6, sheet_failures);
  o.require(sheet_failures == 0, std::to_string(sheet_failures) + " vote sheets wrong");

  std::map<std::string, bool> a;
  std::map<std::string, bool> b;
  int idx = 0;
  for (const auto& [x, y, n] : std::vector<std::tuple<bool, bool, int>>{
           {true, true, 4}, {true, false, 1}, {false, true, 1}, {false, false, 4}}) {
    for (int k = 0; k < n; ++k, ++idx) {
      a["w" + std::to_string(idx)] = x;
      b["w" + std::to_string(idx)] = y;
    }
  }
  const double kappa = cohen_kappa(a, b);
  o.require(std::abs(kappa - 0.6) <= 1e-9, "kappa " + fmt(kappa, 12));

  const auto traps = load_traps(std::string(FAIRTEXT_SOURCE_DIR) + "/data/trap_words.tsv");
  o.require(traps.size() == 15, "trap fixture has " + std::to_string(traps.size()) + " words");
  std::size_t trap_cases = 0;
  std::size_t trap_failures = 0;
  const auto in_band_oracle = [](int v, TrapBand band) {
    return band == TrapBand::kLow ? (v == 1 || v == 2) : (v == 4 || v == 5);
  };
  // Each trap at every Likert value with the others in band, then random
  // full answer vectors.
  for (std::size_t t = 0; t < traps.size(); ++t) {
    for (int v = 1; v <= 5; ++v) {
      std::vector<std::pair<std::string, int>> answers;
      for (std::size_t j = 0; j < traps.size(); ++j) {
        answers.emplace_back(traps[j].word,
                             j == t ? v : (traps[j].expected_band == TrapBand::kLow ? 2 : 4));
      }
      const bool expect = in_band_oracle(v, traps[t].expected_band);
      trap_failures += (trap_filter(answers, traps) == SessionVerdict::kReliable) != expect;
      ++trap_cases;
    }
  }
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20000; ++trial) {
    std::vector<std::pair<std::string, int>> answers;
    bool expect = true;
    for (const auto& trap : traps) {
      // Bias towards in-band answers so that reliable sessions occur.
      int v = 1 + static_cast<int>(uniform_below(rng, 5));
      if (uniform_below(rng, 10) < 9) v = trap.expected_band == TrapBand::kLow ? 1 : 5;
      answers.emplace_back(trap.word, v);
      expect &= in_band_oracle(v, trap.expected_band);
    }
    std::shuffle(answers.begin(), answers.end(), rng);
    trap_failures += (trap_filter(answers, traps) == SessionVerdict::kReliable) != expect;
    ++trap_cases;
  }
  o.require(trap_failures == 0, std::to_string(trap_failures) + " trap decisions wrong");

  const std::string fig5 =
      "Sexual orientation | 100 | Homosexual refers to a person's sexual orientation, "
      "specifically indicating attraction to people of the same sex. It falls under the "
      "protected category of sexual orientation.";
  const std::string fig8 =
      "Religion and belief | 90 | The word 'headscarf' is commonly associated with religious "
      "beliefs, particularly in Islam, where it is worn by women as a symbol of modesty and "
      "religious observance.";
  const LlmReply r5 = parse_llm_reply(fig5);
  const LlmReply r8 = parse_llm_reply(fig8);
  o.require(r5.category == ProtectedCategory::kSexualOrientation && r5.reliability == 100,
            "homosexual reply parsed wrongly");
  o.require(r8.category == ProtectedCategory::kReligionBelief && r8.reliability == 90,
            "headscarf reply parsed wrongly");
  o.require(format_llm_reply(r5) == fig5 && format_llm_reply(r8) == fig8,
            "replies do not round-trip verbatim");
  o.detail = std::to_string(sheets) + " vote sheets, kappa " + fmt(kappa, 10) + ", " +
             std::to_string(trap_cases) + " trap sessions, both reply strings round-trip";
  return o;
}

// --- AC7 ---------------------------------------------------------------------

Outcome ac7_determinism() {
  Outcome o;
  test::TempDir dir;
  test::PlantedBiasSpec spec;
  spec.documents = 1500;
  save_corpus(test::planted_corpus(spec, 71, "t"), dir / "train.jsonl");
  save_corpus(test::planted_corpus(spec, 72, "u"), dir / "unlabeled.jsonl");
  const auto dictionary = test::planted_dictionary();
  test::StubLlmServer server([&](const std::string& word) {
    const auto it = dictionary.find(word);
    if (it == dictionary.end()) return std::string("None | 90 | no protected meaning");
    return std::string(category_display_name(it->second)) + " | 95 | planted word";
  });
  test::write_file(dir / "pipeline.toml",
                   "training_corpus = \"train.jsonl\"\n"
                   "unlabeled_corpus = \"unlabeled.jsonl\"\n"
                   "output_dir = \"out\"\n"
                   "target_class = \"toxic\"\n"
                   "\n[explainer]\nmethod = \"occlusion\"\ntop_k = 60\n"
                   "\n[identifier]\nbackend = \"llm\"\n"
                   "\n[identifier.llm]\nendpoint = \"" + server.endpoint() + "\"\n"
                   "max_concurrency = 3\nsession_size = 7\n"
                   "\n[mitigation]\nstrategy = \"MS3\"\nk = 3\nseed = 11\n"
                   "\n[train]\nseed = 5\n");
  // MS3 needs embeddings over the corpus vocabulary.
  std::vector<std::string> words = test::planted_protected_words();
  for (std::size_t i = 0; i < 200; ++i) words.push_back(test::filler_word(i));
  std::string embeddings;
  const auto table = test::random_embeddings(words, 8, 9);
  for (const auto& w : table.words()) {
    embeddings += w;
    const auto vector = table.vector(w);
    for (const float x : *vector) embeddings += " " + std::to_string(x);
    embeddings += "\n";
  }
  test::write_file(dir / "emb.txt", embeddings);
  {
    std::string text = test::read_file(dir / "pipeline.toml");
    text.insert(text.find("\n[explainer]"), "embeddings = \"emb.txt\"\n");
    test::write_file(dir / "pipeline.toml", text);
  }

  std::vector<std::string> reports;
  for (const char* out : {"run-a", "run-b"}) {
    std::ostringstream stdout_text;
    std::ostringstream stderr_text;
    const std::vector<std::string> args{"run", "--config", (dir / "pipeline.toml").string(),
                                        "--output-dir", (dir / out).string()};
    const int code = dispatch(args, stdout_text, stderr_text);
    o.require(code == 0, std::string(out) + " exited " + std::to_string(code) + ": " +
                             stderr_text.str());
    if (code != 0) return o;
    reports.push_back(test::read_file(dir / out / "report.json"));
    o.require(test::read_file(dir / out / "report.txt") == stdout_text.str(),
              "printed table differs from report.txt");
  }
  o.require(reports[0] == reports[1], "report.json differs between runs");
  o.require(server.requests() > 0, "LLM stub was never called");
  o.detail = "report.json " + std::to_string(reports[0].size()) + " bytes identical across runs, " +
             std::to_string(server.requests()) + " stub LLM requests";
  return o;
}

// --- AC8 ---------------------------------------------------------------------

Outcome ac8_gradient_check() {
  Outcome o;
  std::mt19937_64 rng(8);
  double worst = 0.0;
  std::size_t checked = 0;
  for (int instance = 0; instance < 10; ++instance) {
    const std::size_t classes = instance % 2 == 0 ? 2 : 3 + uniform_below(rng, 2);
    const std::size_t vocab = 3 + uniform_below(rng, 6);
    std::vector<std::string> words;
    for (std::size_t i = 0; i < vocab; ++i) words.push_back("w" + std::to_string(i));
    std::vector<std::string> names;
    for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
    TrainConfig config;
    config.multiclass = instance % 4 == 1 ? MulticlassMode::kOneVsRest : MulticlassMode::kSoftmax;
    const LinearModel shape(words, names, config);
    std::vector<SparseFeatures> features;
    std::vector<std::size_t> labels;
    const std::size_t rows = 5 + uniform_below(rng, 10);
    for (std::size_t r = 0; r < rows; ++r) {
      SparseFeatures f;
      for (std::size_t i = 0; i < vocab; ++i) {
        if (uniform_below(rng, 2)) f.emplace_back(i, 1.0 + uniform_below(rng, 3));
      }
      features.push_back(f);
      labels.push_back(r < classes ? r : uniform_below(rng, classes));
    }
    const auto weighting =
        instance % 3 == 0 ? ClassWeighting::kNone : ClassWeighting::kInverseFrequency;
    const TrainingObjective objective(shape, features, labels,
                                      example_weights(labels, classes, weighting), 0.01);
    std::vector<double> params(objective.num_parameters());
    for (auto& p : params) p = uniform_unit(rng) * 2 - 1;
    const auto grad = objective.gradient(params);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double h = 1e-5;
      auto plus = params;
      auto minus = params;
      plus[i] += h;
      minus[i] -= h;
      const double numeric = (objective.loss(plus) - objective.loss(minus)) / (2 * h);
      const double scale = std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
      worst = std::max(worst, std::abs(numeric - grad[i]) / scale);
      ++checked;
    }
  }
  o.require(worst <= 1e-5, "relative error " + std::to_string(worst));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", worst);
  o.detail = "10 instances, " + std::to_string(checked) + " partials, max relative error " + buf;
  return o;
}

}  // namespace
}  // namespace fairtext

int main() {
  using namespace fairtext;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"AC1 planted-bias replication", ac1_planted_bias},
      {"AC2 occlusion equals linear ranking", ac2_occlusion_oracle},
      {"AC3 aggregation brute force", ac3_aggregation},
      {"AC4 ablation curve", ac4_ablation},
      {"AC5 mitigation invariants", ac5_mitigation_invariants},
      {"AC6 identifier arithmetic", ac6_identifier_arithmetic},
      {"AC7 end-to-end determinism", ac7_determinism},
      {"AC8 gradient check", ac8_gradient_check},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.failures = std::string("exception: ") + e.what();
    }
    std::printf("%s %s: %s\n", outcome.pass ? "PASS" : "FAIL", name, outcome.line().c_str());
    std::fflush(stdout);
    failed += outcome.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
