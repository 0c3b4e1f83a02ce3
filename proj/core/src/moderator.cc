#include "fairtext/moderator.h"

#include <algorithm>
#include <cctype>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "fairtext/error.h"
#include "fairtext/random.h"

namespace fairtext {

namespace {

using WordSet = std::unordered_set<std::string>;

WordSet protected_set(const MitigationPlan& plan) {
  WordSet words;
  for (const auto& w : plan.protected_words) words.insert(fold_case(w));
  return words;
}

bool in_scope(const Document& doc, const MitigationPlan& plan) {
  return !plan.class_scope || (doc.label && *doc.label == *plan.class_scope);
}

void rewrite_text(Document& doc) {
  doc.text = join_tokens(doc.tokens);
  doc.predicted.reset();
}

// Stateful splitmix64 stream.
struct SplitMixEngine {
  std::uint64_t state;
  std::uint64_t operator()() {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

// Nearest-neighbour lists, computed once per protected word.
class NeighborCache {
 public:
  NeighborCache(const EmbeddingTable& table, std::size_t k) : table_(table), k_(k) {}

  // Empty when the word has no usable vector or no other word exists.
  const std::vector<std::string>& get(const std::string& word) {
    auto it = cache_.find(word);
    if (it != cache_.end()) return it->second;
    std::vector<std::string> neighbors;
    const auto idx = table_.index_of(word);
    if (idx && table_.norm(*idx) > 0.0) neighbors = k_nearest(table_, word, k_);
    return cache_.emplace(word, std::move(neighbors)).first->second;
  }

 private:
  const EmbeddingTable& table_;
  std::size_t k_;
  std::unordered_map<std::string, std::vector<std::string>> cache_;
};

class WarningLog {
 public:
  void once(const std::string& key, std::string message) {
    if (seen_.insert(key).second) messages_.push_back(std::move(message));
  }
  std::vector<std::string> take() { return std::move(messages_); }

 private:
  std::unordered_set<std::string> seen_;
  std::vector<std::string> messages_;
};

MitigationResult start(const LabeledCorpus& corpus, const MitigationPlan& plan,
                       Strategy expected) {
  plan.validate();
  if (plan.strategy != expected) {
    throw ValidationError("plan strategy " + to_string(plan.strategy) +
                          " does not match " + to_string(expected));
  }
  MitigationResult result;
  result.corpus.classes = corpus.classes;
  result.delta.strategy = expected;
  return result;
}

}  // namespace

std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kSentenceRemoval: return "MS1";
    case Strategy::kWordRemoval: return "MS2";
    case Strategy::kRandomSynonym: return "MS3";
    case Strategy::kKSynonymExpansion: return "MS4";
    case Strategy::kHypernymReplacement: return "MS5";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& name) {
  std::string s;
  for (const char c : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (s == "ms1" || s == "sentence-removal") return Strategy::kSentenceRemoval;
  if (s == "ms2" || s == "word-removal") return Strategy::kWordRemoval;
  if (s == "ms3" || s == "random-synonym") return Strategy::kRandomSynonym;
  if (s == "ms4" || s == "k-synonyms") return Strategy::kKSynonymExpansion;
  if (s == "ms5" || s == "hypernym") return Strategy::kHypernymReplacement;
  throw ValidationError("unknown mitigation strategy '" + name + "'");
}

void MitigationPlan::validate() const {
  if (k < 1) throw ValidationError("k must be at least 1");
  if (protected_words.empty()) {
    throw ValidationError("mitigation plan has no protected words");
  }
}

std::uint64_t occurrence_seed(std::uint64_t seed, const std::string& document_id,
                              std::size_t position) {
  return splitmix64(seed ^ splitmix64(fnv1a(document_id) ^
                                      splitmix64(static_cast<std::uint64_t>(position))));
}

MitigationResult ms1_sentence_removal(const LabeledCorpus& corpus,
                                      const MitigationPlan& plan) {
  auto result = start(corpus, plan, Strategy::kSentenceRemoval);
  const WordSet words = protected_set(plan);
  std::set<std::string> before, after;
  for (const auto& doc : corpus.documents) {
    if (doc.label) before.insert(*doc.label);
    const bool drop =
        in_scope(doc, plan) &&
        std::any_of(doc.tokens.begin(), doc.tokens.end(),
                    [&](const std::string& t) { return words.count(t) > 0; });
    if (drop) {
      ++result.delta.documents_removed;
      result.delta.tokens_removed += doc.tokens.size();
      continue;
    }
    if (doc.label) after.insert(*doc.label);
    result.corpus.documents.push_back(doc);
  }
  for (const auto& label : before) {
    if (!after.count(label)) {
      throw ValidationError("sentence removal eliminates every document of class '" +
                            label + "'");
    }
  }
  return result;
}

MitigationResult ms2_word_removal(const LabeledCorpus& corpus,
                                  const MitigationPlan& plan) {
  auto result = start(corpus, plan, Strategy::kWordRemoval);
  const WordSet words = protected_set(plan);
  result.corpus.documents.reserve(corpus.size());
  for (const auto& doc : corpus.documents) {
    result.corpus.documents.push_back(doc);
    if (!in_scope(doc, plan)) continue;
    auto& out = result.corpus.documents.back();
    const auto removed = std::erase_if(
        out.tokens, [&](const std::string& t) { return words.count(t) > 0; });
    if (removed > 0) {
      result.delta.tokens_removed += removed;
      rewrite_text(out);
    }
  }
  return result;
}

MitigationResult ms3_replace_random_synonym(const LabeledCorpus& corpus,
                                            const MitigationPlan& plan,
                                            const EmbeddingTable& embeddings) {
  auto result = start(corpus, plan, Strategy::kRandomSynonym);
  const WordSet words = protected_set(plan);
  NeighborCache neighbors(embeddings, plan.k);
  WarningLog warnings;
  result.corpus.documents.reserve(corpus.size());
  for (const auto& doc : corpus.documents) {
    result.corpus.documents.push_back(doc);
    if (!in_scope(doc, plan)) continue;
    auto& out = result.corpus.documents.back();
    std::vector<std::string> tokens;
    tokens.reserve(doc.tokens.size());
    bool changed = false;
    for (std::size_t pos = 0; pos < doc.tokens.size(); ++pos) {
      const auto& token = doc.tokens[pos];
      if (!words.count(token)) {
        tokens.push_back(token);
        continue;
      }
      changed = true;
      const auto& candidates = neighbors.get(token);
      if (candidates.empty()) {
        ++result.delta.tokens_removed;
        warnings.once(token, "'" + token +
                                 "' has no embedding neighbours; occurrences removed");
        continue;
      }
      SplitMixEngine engine{occurrence_seed(plan.seed, doc.id, pos)};
      tokens.push_back(candidates[uniform_below(engine, candidates.size())]);
      ++result.delta.tokens_replaced;
    }
    if (changed) {
      out.tokens = std::move(tokens);
      rewrite_text(out);
    }
  }
  result.warnings = warnings.take();
  return result;
}

MitigationResult ms4_expand_k_synonyms(const LabeledCorpus& corpus,
                                       const MitigationPlan& plan,
                                       const EmbeddingTable& embeddings) {
  auto result = start(corpus, plan, Strategy::kKSynonymExpansion);
  const WordSet words = protected_set(plan);
  NeighborCache neighbors(embeddings, plan.k);
  WarningLog warnings;
  std::unordered_set<std::string> ids;
  for (const auto& doc : corpus.documents) ids.insert(doc.id);

  std::vector<Document> variants;
  std::size_t originals_dropped = 0;
  for (const auto& doc : corpus.documents) {
    if (!in_scope(doc, plan)) {
      result.corpus.documents.push_back(doc);
      continue;
    }
    std::vector<std::string> types;
    for (const auto& t : doc.tokens) {
      if (words.count(t) && std::find(types.begin(), types.end(), t) == types.end()) {
        types.push_back(t);
      }
    }
    std::size_t produced = 0;
    for (const auto& word : types) {
      const auto& candidates = neighbors.get(word);
      if (candidates.empty()) {
        warnings.once(word, "'" + word + "' has no embedding neighbours; no variants");
        continue;
      }
      for (std::size_t j = 0; j < candidates.size(); ++j) {
        Document variant = doc;
        variant.id = doc.id + "~" + word + "~" + std::to_string(j + 1);
        if (!ids.insert(variant.id).second) {
          throw ValidationError("generated id '" + variant.id + "' already exists");
        }
        for (auto& t : variant.tokens) {
          if (t == word) {
            t = candidates[j];
            ++result.delta.tokens_replaced;
          }
        }
        rewrite_text(variant);
        variants.push_back(std::move(variant));
        ++produced;
      }
    }
    if (plan.keep_original || produced == 0) {
      result.corpus.documents.push_back(doc);
    } else {
      ++originals_dropped;
    }
  }
  // Net change, so that only one of the two counts is positive.
  if (variants.size() >= originals_dropped) {
    result.delta.documents_added = variants.size() - originals_dropped;
  } else {
    result.delta.documents_removed = originals_dropped - variants.size();
  }
  for (auto& v : variants) result.corpus.documents.push_back(std::move(v));
  result.warnings = warnings.take();
  return result;
}

MitigationResult ms5_replace_hypernym(const LabeledCorpus& corpus,
                                      const MitigationPlan& plan,
                                      const HypernymLexicon& lexicon) {
  auto result = start(corpus, plan, Strategy::kHypernymReplacement);
  const WordSet words = protected_set(plan);
  WarningLog warnings;
  std::unordered_map<std::string, std::optional<std::string>> lookups;
  for (const auto& w : words) {
    lookups[w] = lexicon.hypernym(w);
    if (!lookups[w]) warnings.once(w, "'" + w + "' has no hypernym; left unchanged");
  }
  result.corpus.documents.reserve(corpus.size());
  for (const auto& doc : corpus.documents) {
    result.corpus.documents.push_back(doc);
    if (!in_scope(doc, plan)) continue;
    auto& out = result.corpus.documents.back();
    bool changed = false;
    for (auto& t : out.tokens) {
      const auto it = lookups.find(t);
      if (it == lookups.end() || !it->second) continue;
      t = *it->second;
      ++result.delta.tokens_replaced;
      changed = true;
    }
    if (changed) rewrite_text(out);
  }
  auto messages = warnings.take();
  std::sort(messages.begin(), messages.end());
  result.warnings = std::move(messages);
  return result;
}

MitigationResult moderate(const LabeledCorpus& corpus, const MitigationPlan& plan,
                          const MitigationResources& resources) {
  switch (plan.strategy) {
    case Strategy::kSentenceRemoval:
      return ms1_sentence_removal(corpus, plan);
    case Strategy::kWordRemoval:
      return ms2_word_removal(corpus, plan);
    case Strategy::kRandomSynonym:
      if (!resources.embeddings) throw ValidationError("MS3 needs word embeddings");
      return ms3_replace_random_synonym(corpus, plan, *resources.embeddings);
    case Strategy::kKSynonymExpansion:
      if (!resources.embeddings) throw ValidationError("MS4 needs word embeddings");
      return ms4_expand_k_synonyms(corpus, plan, *resources.embeddings);
    case Strategy::kHypernymReplacement:
      if (!resources.lexicon) throw ValidationError("MS5 needs a hypernym lexicon");
      return ms5_replace_hypernym(corpus, plan, *resources.lexicon);
  }
  throw ValidationError("unknown strategy");
}

std::vector<std::string> scope_words(
    std::span<const Annotation> annotations,
    const std::optional<std::set<ProtectedCategory>>& category_scope) {
  std::vector<std::string> words;
  std::unordered_set<std::string> seen;
  for (const auto& a : annotations) {
    if (!a.is_protected()) continue;
    if (category_scope && !category_scope->count(*a.category)) continue;
    if (seen.insert(a.word).second) words.push_back(a.word);
  }
  return words;
}

}  // namespace fairtext
