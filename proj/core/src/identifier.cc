#include "fairtext/identifier.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "fairtext/corpus.h"
#include "fairtext/error.h"

namespace fairtext {

namespace {

constexpr std::array<std::string_view, kNumCategories> kIds = {
    "age",  "disability",      "gender_reassignment", "marriage_civil_partnership",
    "pregnancy_maternity", "race", "religion_belief", "sex", "sexual_orientation"};

constexpr std::array<std::string_view, kNumCategories> kDisplayNames = {
    "Age",  "Disability",          "Gender reassignment", "Marriage and civil partnership",
    "Pregnancy and maternity", "Race", "Religion and belief", "Sex",
    "Sexual orientation"};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// Lowercase, separators folded to single spaces, decorative quoting removed.
std::string normalize_label(std::string_view text) {
  std::string s = trim(text);
  const std::string_view strip = "\"'`*.:";
  while (!s.empty() && strip.find(s.front()) != std::string_view::npos) s.erase(0, 1);
  while (!s.empty() && strip.find(s.back()) != std::string_view::npos) s.pop_back();
  std::string out;
  bool space = false;
  for (const char c : s) {
    if (c == '_' || c == '-' || std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  // "religion or belief" and "religion and belief" are the same category.
  std::string with_and;
  std::istringstream words(out);
  std::string w;
  while (words >> w) {
    if (!with_and.empty()) with_and.push_back(' ');
    with_and += (w == "or" ? "and" : w);
  }
  return with_and;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(trim(line.substr(start, tab - start)));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

bool skip_line(const std::string& line) {
  const auto first = line.find_first_not_of(" \t\r");
  return first == std::string::npos || line[first] == '#';
}

int parse_reliability(std::string_view text) {
  const std::string s = trim(text);
  if (s.empty() || s.size() > 3 ||
      !std::all_of(s.begin(), s.end(),
                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    throw ValidationError("reliability '" + s + "' is not an integer in [0, 100]");
  }
  const int v = std::stoi(s);
  if (v > 100) {
    throw ValidationError("reliability " + s + " is outside [0, 100]");
  }
  return v;
}

std::string fold_word(const std::string& word) {
  const auto tokens = tokenize(word);
  if (tokens.empty()) return {};
  return join_tokens(tokens);
}

}  // namespace

std::string_view category_id(ProtectedCategory c) {
  return kIds[static_cast<std::size_t>(c)];
}

std::string_view category_display_name(ProtectedCategory c) {
  return kDisplayNames[static_cast<std::size_t>(c)];
}

std::optional<ProtectedCategory> parse_category(std::string_view text) {
  const std::string norm = normalize_label(text);
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    if (norm == normalize_label(kIds[i]) ||
        norm == normalize_label(kDisplayNames[i])) {
      return kAllCategories[i];
    }
  }
  return std::nullopt;
}

std::string_view to_string(AnnotationSource source) {
  switch (source) {
    case AnnotationSource::kDictionary: return "dictionary";
    case AnnotationSource::kLlm: return "llm";
    case AnnotationSource::kHuman: return "human";
    case AnnotationSource::kExpert: return "expert";
  }
  return "unknown";
}

AnnotationSource parse_annotation_source(std::string_view text) {
  const std::string s = normalize_label(text);
  if (s == "dictionary") return AnnotationSource::kDictionary;
  if (s == "llm") return AnnotationSource::kLlm;
  if (s == "human") return AnnotationSource::kHuman;
  if (s == "expert") return AnnotationSource::kExpert;
  throw ValidationError("unknown annotation source '" + std::string(text) + "'");
}

void save_annotations(std::span<const Annotation> annotations,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& a : annotations) {
    out << a.word << '\t'
        << (a.is_protected() ? category_id(*a.category) : std::string_view("none"))
        << '\t' << (a.failed ? 0 : a.reliability) << '\t' << to_string(a.source)
        << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<Annotation> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotation file " + path.string());
  return read_annotations(in, path.string());
}

std::vector<Annotation> read_annotations(std::istream& in, const std::string& name) {
  std::vector<Annotation> annotations;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto fields = split_tabs(line);
    const std::string where = name + ":" + std::to_string(line_no) + ": ";
    if (fields.size() < 4) {
      throw ValidationError(where + "expected word, category, reliability, source");
    }
    Annotation a;
    a.word = fields[0];
    if (normalize_label(fields[1]) != "none") {
      a.category = parse_category(fields[1]);
      if (!a.category) {
        throw ValidationError(where + "unknown category '" + fields[1] + "'");
      }
    }
    try {
      a.reliability = parse_reliability(fields[2]);
      a.source = parse_annotation_source(fields[3]);
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
    annotations.push_back(std::move(a));
  }
  return annotations;
}

ProtectedDictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dictionary " + path.string());
  ProtectedDictionary dictionary;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto fields = split_tabs(line);
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (fields.size() < 2) throw ValidationError(where + "expected word and category");
    if (line_no == 1 && normalize_label(fields[1]) == "category") continue;
    const auto category = parse_category(fields[1]);
    if (!category) {
      throw ValidationError(where + "unknown category '" + fields[1] + "'");
    }
    const std::string key = fold_word(fields[0]);
    if (key.empty()) throw ValidationError(where + "empty word");
    dictionary.emplace(key, *category);
  }
  return dictionary;
}

std::vector<Annotation> identify_dictionary(std::span<const std::string> words,
                                            const ProtectedDictionary& dictionary) {
  std::vector<Annotation> annotations;
  annotations.reserve(words.size());
  for (const auto& word : words) {
    Annotation a;
    a.word = word;
    a.source = AnnotationSource::kDictionary;
    const auto it = dictionary.find(fold_word(word));
    if (it != dictionary.end()) {
      a.category = it->second;
      a.reliability = 100;
      a.explanation = "dictionary entry";
    }
    annotations.push_back(std::move(a));
  }
  return annotations;
}

LlmReply parse_llm_reply(std::string_view reply) {
  const auto pipes = std::count(reply.begin(), reply.end(), '|');
  if (pipes != 2) {
    throw ValidationError("reply must contain exactly two '|' separators, found " +
                          std::to_string(pipes));
  }
  const auto first = reply.find('|');
  const auto second = reply.find('|', first + 1);
  const std::string category_text = trim(reply.substr(0, first));
  const std::string score_text = trim(reply.substr(first + 1, second - first - 1));

  LlmReply parsed;
  if (normalize_label(category_text) != "none") {
    parsed.category = parse_category(category_text);
    if (!parsed.category) {
      throw ValidationError("unknown category '" + category_text + "'");
    }
  }
  parsed.reliability = parse_reliability(score_text);
  parsed.explanation = trim(reply.substr(second + 1));
  return parsed;
}

std::string format_llm_reply(const LlmReply& reply) {
  std::string out(reply.category ? category_display_name(*reply.category)
                                 : std::string_view("None"));
  out += " | ";
  out += std::to_string(reply.reliability);
  out += " | ";
  out += reply.explanation;
  return out;
}

std::vector<TrapItem> load_traps(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trap file " + path.string());
  std::vector<TrapItem> traps;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto fields = split_tabs(line);
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (fields.size() < 2) throw ValidationError(where + "expected word and band");
    const std::string band = normalize_label(fields[1]);
    TrapItem item{fold_word(fields[0]), TrapBand::kLow};
    if (band == "low" || band == "non toxic") {
      item.expected_band = TrapBand::kLow;
    } else if (band == "high" || band == "toxic") {
      item.expected_band = TrapBand::kHigh;
    } else {
      throw ValidationError(where + "band must be 'low' or 'high'");
    }
    traps.push_back(std::move(item));
  }
  return traps;
}

bool in_band(int likert, TrapBand band) {
  return band == TrapBand::kLow ? (likert == 1 || likert == 2)
                                : (likert == 4 || likert == 5);
}

SessionVerdict trap_filter(std::span<const std::pair<std::string, int>> session,
                           std::span<const TrapItem> traps) {
  std::map<std::string, int> answers;
  for (const auto& [word, likert] : session) {
    if (likert < 1 || likert > 5) {
      throw ValidationError("Likert answer for '" + word + "' is outside 1-5");
    }
    answers[word] = likert;
  }
  bool reliable = true;
  for (const auto& trap : traps) {
    const auto it = answers.find(trap.word);
    if (it == answers.end()) {
      throw ValidationError("session has no answer for trap '" + trap.word + "'");
    }
    reliable = reliable && in_band(it->second, trap.expected_band);
  }
  return reliable ? SessionVerdict::kReliable : SessionVerdict::kRejected;
}

int VoteSheet::category_total() const {
  int total = 0;
  for (const int v : category_votes) total += v;
  return total;
}

void VoteSheet::add(std::optional<ProtectedCategory> choice, int count) {
  if (choice) {
    category_votes[static_cast<std::size_t>(*choice)] += count;
  } else {
    none_of_the_above += count;
  }
}

Annotation majority_vote(const VoteSheet& sheet, AnnotationSource source) {
  for (const int v : sheet.category_votes) {
    if (v < 0) throw ValidationError("negative vote count for '" + sheet.word + "'");
  }
  if (sheet.none_of_the_above < 0) {
    throw ValidationError("negative vote count for '" + sheet.word + "'");
  }
  const int total = sheet.total();
  if (total < 1) throw ValidationError("vote sheet for '" + sheet.word + "' is empty");

  Annotation a;
  a.word = sheet.word;
  a.source = source;
  const int category_votes = sheet.category_total();
  const bool is_protected = category_votes > sheet.none_of_the_above;
  int support = sheet.none_of_the_above;
  if (is_protected) {
    support = category_votes;
    std::size_t best = 0;
    for (std::size_t i = 1; i < kNumCategories; ++i) {
      if (sheet.category_votes[i] > sheet.category_votes[best]) best = i;
    }
    a.category = kAllCategories[best];
    a.flagged = std::count(sheet.category_votes.begin(), sheet.category_votes.end(),
                           sheet.category_votes[best]) > 1;
  }
  a.reliability = static_cast<int>(
      std::lround(100.0 * static_cast<double>(support) / static_cast<double>(total)));
  a.explanation = std::to_string(support) + " of " + std::to_string(total) + " votes";
  return a;
}

double cohen_kappa(const std::map<std::string, bool>& a,
                   const std::map<std::string, bool>& b) {
  std::map<std::string, std::string> la, lb;
  for (const auto& [w, v] : a) la[w] = v ? "protected" : "none";
  for (const auto& [w, v] : b) lb[w] = v ? "protected" : "none";
  return cohen_kappa_nominal(la, lb);
}

double cohen_kappa_nominal(const std::map<std::string, std::string>& a,
                           const std::map<std::string, std::string>& b) {
  if (a.size() != b.size()) {
    throw ValidationError("annotation sources cover different word sets");
  }
  if (a.size() < 2) throw ValidationError("kappa needs at least two words");
  std::map<std::string, double> count_a, count_b;
  double agree = 0.0;
  for (const auto& [word, label] : a) {
    const auto it = b.find(word);
    if (it == b.end()) {
      throw ValidationError("word '" + word + "' missing from second source");
    }
    count_a[label] += 1.0;
    count_b[it->second] += 1.0;
    if (label == it->second) agree += 1.0;
  }
  const double n = static_cast<double>(a.size());
  const double p_o = agree / n;
  double p_e = 0.0;
  for (const auto& [label, c] : count_a) {
    const auto it = count_b.find(label);
    if (it != count_b.end()) p_e += (c / n) * (it->second / n);
  }
  if (p_e >= 1.0) return 1.0;
  return (p_o - p_e) / (1.0 - p_e);
}

std::map<std::string, bool> protected_map(std::span<const Annotation> annotations) {
  std::map<std::string, bool> out;
  for (const auto& a : annotations) out[a.word] = a.is_protected();
  return out;
}

}  // namespace fairtext
