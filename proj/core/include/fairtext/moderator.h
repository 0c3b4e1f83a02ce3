#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fairtext/corpus.h"
#include "fairtext/identifier.h"
#include "fairtext/lexical.h"

namespace fairtext {

enum class Strategy {
  kSentenceRemoval,        // MS1
  kWordRemoval,            // MS2
  kRandomSynonym,          // MS3
  kKSynonymExpansion,      // MS4
  kHypernymReplacement,    // MS5
};

// "MS1" .. "MS5".
std::string to_string(Strategy strategy);
// Accepts "MS1".."MS5" (any case) and descriptive names such as
// "word-removal".
Strategy parse_strategy(const std::string& name);

struct MitigationPlan {
  Strategy strategy = Strategy::kWordRemoval;
  std::vector<std::string> protected_words;
  std::optional<std::set<ProtectedCategory>> category_scope;
  std::optional<std::string> class_scope;
  std::size_t k = 5;
  std::uint64_t seed = 0;
  bool keep_original = true;

  // k >= 1 and a non-empty word list.
  void validate() const;
};

struct MitigationDelta {
  Strategy strategy = Strategy::kWordRemoval;
  std::size_t documents_removed = 0;
  std::size_t documents_added = 0;
  std::size_t tokens_removed = 0;
  std::size_t tokens_replaced = 0;
};

struct MitigationResult {
  LabeledCorpus corpus;
  MitigationDelta delta;
  std::vector<std::string> warnings;
};

// Lexical resources consulted by the replacement strategies.
struct MitigationResources {
  const EmbeddingTable* embeddings = nullptr;  // MS3, MS4
  const HypernymLexicon* lexicon = nullptr;    // MS5
};

// MS1: drops every in-scope document containing a protected word. Throws
// ValidationError when a class would disappear from the corpus.
MitigationResult ms1_sentence_removal(const LabeledCorpus& corpus,
                                      const MitigationPlan& plan);

// MS2: deletes protected tokens from in-scope documents; emptied documents stay.
MitigationResult ms2_word_removal(const LabeledCorpus& corpus,
                                  const MitigationPlan& plan);

// MS3: replaces each protected occurrence by a seeded uniform draw from its k
// nearest neighbours. Words missing from the table are deleted instead.
MitigationResult ms3_replace_random_synonym(const LabeledCorpus& corpus,
                                            const MitigationPlan& plan,
                                            const EmbeddingTable& embeddings);

// MS4: for each in-scope document and each distinct protected word it holds,
// appends one variant per neighbour with every occurrence of the word
// replaced. Originals stay when plan.keep_original is set.
MitigationResult ms4_expand_k_synonyms(const LabeledCorpus& corpus,
                                       const MitigationPlan& plan,
                                       const EmbeddingTable& embeddings);

// MS5: replaces each protected occurrence with its hypernym; unmapped words are
// left as they are.
MitigationResult ms5_replace_hypernym(const LabeledCorpus& corpus,
                                      const MitigationPlan& plan,
                                      const HypernymLexicon& lexicon);

// Dispatches on plan.strategy. Throws ValidationError when the strategy needs
// a resource that was not supplied.
MitigationResult moderate(const LabeledCorpus& corpus, const MitigationPlan& plan,
                          const MitigationResources& resources);

// Protected words whose category is inside `category_scope` (all categories
// when unset), in annotation order without duplicates.
std::vector<std::string> scope_words(
    std::span<const Annotation> annotations,
    const std::optional<std::set<ProtectedCategory>>& category_scope);

// Seed of the random stream used for one occurrence in MS3.
std::uint64_t occurrence_seed(std::uint64_t seed, const std::string& document_id,
                              std::size_t position);

}  // namespace fairtext
