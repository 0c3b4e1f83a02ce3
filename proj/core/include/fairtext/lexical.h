#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace fairtext {

// Word vectors loaded from a GloVe-style text file. Rows are stored
// contiguously in single precision; similarity is computed in double.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dimension) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  // Adds a row; returns false (and keeps the existing row) when the
  // case-folded word is already present. Throws ValidationError on a length
  // mismatch or a non-finite component.
  bool add(const std::string& word, std::span<const float> vector);

  bool contains(const std::string& word) const;
  std::optional<std::span<const float>> vector(const std::string& word) const;
  std::span<const float> row(std::size_t index) const {
    return {values_.data() + index * dimension_, dimension_};
  }
  double norm(std::size_t index) const { return norms_[index]; }
  std::optional<std::size_t> index_of(const std::string& word) const;

 private:
  std::size_t dimension_ = 0;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> values_;
  std::vector<double> norms_;
};

struct EmbeddingLoadResult {
  EmbeddingTable table;
  std::vector<std::string> warnings;
};

// Each line: word followed by d numbers, d constant across lines. Duplicate
// words (after case folding) keep the first row and add a warning.
EmbeddingLoadResult load_embeddings(const std::filesystem::path& path);

double cosine(std::span<const double> u, std::span<const double> v);
double cosine(std::span<const float> u, std::span<const float> v);

// Exact brute-force k nearest words to `word` by cosine similarity, excluding
// the word itself and zero vectors; ties broken lexicographically. Throws
// ValidationError when the word is absent.
std::vector<std::string> k_nearest(const EmbeddingTable& table,
                                   const std::string& word, std::size_t k);

struct Neighbor {
  std::string word;
  double similarity = 0.0;
};
std::vector<Neighbor> k_nearest_scored(const EmbeddingTable& table,
                                       const std::string& word, std::size_t k);

class HypernymLexicon {
 public:
  // Throws ValidationError for a self-mapping entry.
  void add(const std::string& word, const std::string& hypernym);
  std::optional<std::string> hypernym(const std::string& word) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

struct LexiconLoadResult {
  HypernymLexicon lexicon;
  std::vector<std::string> warnings;
};

// Two-column TSV: word \t hypernym.
LexiconLoadResult load_hypernyms(const std::filesystem::path& path);

std::optional<std::string> hypernym(const HypernymLexicon& lexicon,
                                    const std::string& word);

}  // namespace fairtext
