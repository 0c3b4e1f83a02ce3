#include "fairtext/lexical.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "fairtext/corpus.h"
#include "fairtext/error.h"

namespace fairtext {

namespace {

template <typename T>
double cosine_impl(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw ValidationError("cosine of vectors with different lengths");
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = u[i];
    const double b = v[i];
    dot += a * b;
    nu += a * a;
    nv += b * b;
  }
  if (nu == 0.0 || nv == 0.0) throw ValidationError("cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

std::string_view next_field(std::string_view line, std::size_t& pos) {
  while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
  const std::size_t start = pos;
  while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
  return line.substr(start, pos - start);
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

bool EmbeddingTable::add(const std::string& word, std::span<const float> vector) {
  if (vector.size() != dimension_) {
    throw ValidationError("vector for '" + word + "' has " +
                          std::to_string(vector.size()) + " components, expected " +
                          std::to_string(dimension_));
  }
  double sq = 0.0;
  for (const float x : vector) {
    if (!std::isfinite(x)) {
      throw ValidationError("vector for '" + word + "' has a non-finite component");
    }
    sq += static_cast<double>(x) * static_cast<double>(x);
  }
  std::string key = fold_case(word);
  if (index_.count(key)) return false;
  index_.emplace(key, words_.size());
  words_.push_back(std::move(key));
  values_.insert(values_.end(), vector.begin(), vector.end());
  norms_.push_back(std::sqrt(sq));
  return true;
}

bool EmbeddingTable::contains(const std::string& word) const {
  return index_of(word).has_value();
}

std::optional<std::size_t> EmbeddingTable::index_of(const std::string& word) const {
  const auto it = index_.find(fold_case(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::span<const float>> EmbeddingTable::vector(
    const std::string& word) const {
  const auto idx = index_of(word);
  if (!idx) return std::nullopt;
  return row(*idx);
}

EmbeddingLoadResult load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file " + path.string());

  EmbeddingLoadResult result;
  std::optional<std::size_t> dimension;
  std::vector<float> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";

    std::size_t pos = 0;
    const std::string word(next_field(line, pos));
    values.clear();
    for (std::string_view field = next_field(line, pos); !field.empty();
         field = next_field(line, pos)) {
      float x = 0.0f;
      const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), x);
      if (ec != std::errc() || end != field.data() + field.size()) {
        throw ValidationError(where + "component " + std::to_string(values.size() + 1) +
                              " ('" + std::string(field) + "') is not a number");
      }
      values.push_back(x);
    }
    if (!dimension) {
      if (values.empty()) throw ValidationError(where + "no vector components");
      dimension = values.size();
      result.table = EmbeddingTable(*dimension);
    } else if (values.size() != *dimension) {
      throw ValidationError(where + "expected " + std::to_string(*dimension) +
                            " components, found " + std::to_string(values.size()));
    }
    try {
      if (!result.table.add(word, values)) {
        result.warnings.push_back(where + "duplicate word '" + word +
                                  "' ignored, keeping the first vector");
      }
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  if (!dimension) {
    throw ValidationError("embedding file " + path.string() +
                          " is empty; dimension cannot be determined");
  }
  return result;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  return cosine_impl(u, v);
}

double cosine(std::span<const float> u, std::span<const float> v) {
  return cosine_impl(u, v);
}

std::vector<Neighbor> k_nearest_scored(const EmbeddingTable& table,
                                       const std::string& word, std::size_t k) {
  const auto query = table.index_of(word);
  if (!query) throw ValidationError("word '" + word + "' is not in the embedding table");
  if (table.norm(*query) == 0.0) {
    throw ValidationError("word '" + word + "' has a zero vector");
  }
  const auto q = table.row(*query);
  const double qn = table.norm(*query);

  struct Candidate {
    double similarity;
    std::size_t index;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (i == *query || table.norm(i) == 0.0) continue;
    const auto r = table.row(i);
    double dot = 0.0;
    for (std::size_t d = 0; d < q.size(); ++d) {
      dot += static_cast<double>(q[d]) * static_cast<double>(r[d]);
    }
    candidates.push_back({std::clamp(dot / (qn * table.norm(i)), -1.0, 1.0), i});
  }
  const auto& words = table.words();
  auto better = [&](const Candidate& a, const Candidate& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return words[a.index] < words[b.index];
  };
  const std::size_t n = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + n, candidates.end(),
                    better);
  std::vector<Neighbor> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({words[candidates[i].index], candidates[i].similarity});
  }
  return out;
}

std::vector<std::string> k_nearest(const EmbeddingTable& table,
                                   const std::string& word, std::size_t k) {
  if (k == 0) throw ValidationError("k must be positive");
  std::vector<std::string> out;
  for (auto& n : k_nearest_scored(table, word, k)) out.push_back(std::move(n.word));
  return out;
}

void HypernymLexicon::add(const std::string& word, const std::string& hypernym) {
  const std::string key = fold_case(word);
  const std::string value = fold_case(hypernym);
  if (key.empty() || value.empty()) {
    throw ValidationError("hypernym entries need a word and a hypernym");
  }
  if (key == value) {
    throw ValidationError("'" + word + "' cannot be its own hypernym");
  }
  entries_.emplace(key, value);
}

std::optional<std::string> HypernymLexicon::hypernym(const std::string& word) const {
  const auto it = entries_.find(fold_case(word));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

LexiconLoadResult load_hypernyms(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open hypernym lexicon " + path.string());
  LexiconLoadResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const std::string where =
        path.string() + ":" + std::to_string(line_no) + ": ";
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ValidationError(where + "expected word <TAB> hypernym");
    }
    const std::string word = trim(line.substr(0, tab));
    const std::string parent = trim(line.substr(tab + 1));
    if (result.lexicon.hypernym(word)) {
      result.warnings.push_back(where + "duplicate entry for '" + word +
                                "' ignored");
      continue;
    }
    try {
      result.lexicon.add(word, parent);
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  return result;
}

std::optional<std::string> hypernym(const HypernymLexicon& lexicon,
                                    const std::string& word) {
  return lexicon.hypernym(word);
}

}  // namespace fairtext
