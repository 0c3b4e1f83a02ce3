#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fairtext {

// Per-class probabilities, keyed by class name.
struct ClassProbabilities {
  std::map<std::string, double> values;

  // Probability of `class_name`, 0 when the class is not present.
  double of(const std::string& class_name) const;
  // Most probable class; ties resolve to the lexicographically first name.
  std::string argmax() const;

  bool operator==(const ClassProbabilities&) const = default;
};

struct Document {
  std::string id;
  std::string text;
  std::vector<std::string> tokens;
  std::optional<std::string> label;
  std::optional<ClassProbabilities> predicted;

  bool operator==(const Document&) const = default;
};

struct LabeledCorpus {
  std::vector<Document> documents;
  std::set<std::string> classes;

  std::size_t size() const { return documents.size(); }
  bool empty() const { return documents.empty(); }
  bool fully_labeled() const;
  // Index of the document with the given id, if any.
  std::optional<std::size_t> find(std::string_view id) const;
};

// Lowercase word tokens: runs of letters, digits and apostrophes. Leading and
// trailing apostrophes of a run are stripped, so quoting does not leak into
// tokens. Non-ASCII code points count as letters unless they fall in the
// Unicode punctuation/space blocks; ASCII and Latin-1 capitals are lowered.
std::vector<std::string> tokenize(std::string_view text);

// Lowercases ASCII and Latin-1 capitals the same way tokenize() does, without
// splitting.
std::string fold_case(std::string_view text);

// Space-joined token sequence; tokenize(join_tokens(t)) == t for tokenizer
// output.
std::string join_tokens(std::span<const std::string> tokens);

// Builds a document, tokenizing `text`.
Document make_document(std::string id, std::string text,
                       std::optional<std::string> label = std::nullopt);

// Rebuilds `classes` from the labels present in `documents`.
void refresh_classes(LabeledCorpus& corpus);

LabeledCorpus load_corpus(const std::filesystem::path& path);
void save_corpus(const LabeledCorpus& corpus, const std::filesystem::path& path);

}  // namespace fairtext
