#include "fairtext/corpus.h"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <unordered_set>

#include "fairtext/error.h"
#include "json.hpp"

namespace fairtext {

namespace {

using ordered_json = nlohmann::ordered_json;

// Decodes one UTF-8 code point starting at `pos`; malformed bytes decode as
// U+FFFD and consume one byte.
char32_t decode_utf8(std::string_view s, std::size_t& pos) {
  const auto lead = static_cast<unsigned char>(s[pos]);
  int extra = 0;
  char32_t cp = 0;
  if (lead < 0x80) {
    ++pos;
    return lead;
  } else if ((lead & 0xE0) == 0xC0) {
    extra = 1;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    extra = 2;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    extra = 3;
    cp = lead & 0x07;
  } else {
    ++pos;
    return 0xFFFD;
  }
  if (pos + extra >= s.size()) {
    ++pos;
    return 0xFFFD;
  }
  for (int i = 1; i <= extra; ++i) {
    const auto c = static_cast<unsigned char>(s[pos + i]);
    if ((c & 0xC0) != 0x80) {
      ++pos;
      return 0xFFFD;
    }
    cp = (cp << 6) | (c & 0x3F);
  }
  pos += extra + 1;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_apostrophe(char32_t cp) { return cp == U'\'' || cp == U'’'; }

bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') ||
           (cp >= '0' && cp <= '9') || cp == '\'';
  }
  if (is_apostrophe(cp)) return true;
  if (cp == 0xFFFD) return false;
  if (cp <= 0xBF) return false;                    // Latin-1 punctuation/space
  if (cp == 0xD7 || cp == 0xF7) return false;      // multiplication, division
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // punctuation, symbols
  if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
  if (cp >= 0xFE30 && cp <= 0xFE6F) return false;  // compatibility forms
  if (cp >= 0xFF00 && cp <= 0xFF0F) return false;  // fullwidth punctuation
  if (cp >= 0x1F000) return false;                 // emoji and pictographs
  return true;
}

char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
  // Curly apostrophe folds to ASCII so "don’t" and "don't" agree.
  if (cp == U'’') return U'\'';
  return cp;
}

void flush_run(std::string& run, std::vector<std::string>& out) {
  const auto first = run.find_first_not_of('\'');
  if (first != std::string::npos) {
    const auto last = run.find_last_not_of('\'');
    out.push_back(run.substr(first, last - first + 1));
  }
  run.clear();
}

std::optional<std::string> parse_label(const ordered_json& value,
                                       std::size_t line_no) {
  if (value.is_null()) return std::nullopt;
  if (value.is_string()) {
    auto label = value.get<std::string>();
    if (label.empty()) return std::nullopt;
    return label;
  }
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  throw ValidationError("line " + std::to_string(line_no) +
                        ": unsupported label type '" +
                        std::string(value.type_name()) + "'");
}

}  // namespace

double ClassProbabilities::of(const std::string& class_name) const {
  const auto it = values.find(class_name);
  return it == values.end() ? 0.0 : it->second;
}

std::string ClassProbabilities::argmax() const {
  std::string best;
  double best_p = -1.0;
  for (const auto& [name, p] : values) {
    if (p > best_p) {
      best = name;
      best_p = p;
    }
  }
  return best;
}

bool LabeledCorpus::fully_labeled() const {
  return std::all_of(documents.begin(), documents.end(),
                     [](const Document& d) { return d.label.has_value(); });
}

std::optional<std::size_t> LabeledCorpus::find(std::string_view id) const {
  for (std::size_t i = 0; i < documents.size(); ++i) {
    if (documents[i].id == id) return i;
  }
  return std::nullopt;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string run;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const char32_t cp = decode_utf8(text, pos);
    if (is_word_char(cp)) {
      append_utf8(run, to_lower(cp));
    } else {
      flush_run(run, tokens);
    }
  }
  flush_run(run, tokens);
  return tokens;
}

std::string fold_case(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) append_utf8(out, to_lower(decode_utf8(text, pos)));
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

Document make_document(std::string id, std::string text,
                       std::optional<std::string> label) {
  Document doc;
  doc.id = std::move(id);
  doc.tokens = tokenize(text);
  doc.text = std::move(text);
  doc.label = std::move(label);
  return doc;
}

void refresh_classes(LabeledCorpus& corpus) {
  corpus.classes.clear();
  for (const auto& doc : corpus.documents) {
    if (doc.label) corpus.classes.insert(*doc.label);
  }
}

LabeledCorpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file " + path.string());

  LabeledCorpus corpus;
  std::unordered_set<std::string> explicit_ids;
  std::vector<bool> has_explicit_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json record;
    try {
      record = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": malformed JSON (" + e.what() + ")");
    }
    if (!record.is_object()) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": record is not a JSON object");
    }
    const auto text = record.find("text");
    if (text == record.end() || !text->is_string()) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": missing string field \"text\"");
    }

    Document doc;
    doc.text = text->get<std::string>();
    doc.tokens = tokenize(doc.text);
    if (const auto label = record.find("label"); label != record.end()) {
      doc.label = parse_label(*label, line_no);
    }
    bool explicit_id = false;
    if (const auto id = record.find("id"); id != record.end() && !id->is_null()) {
      if (id->is_string()) {
        doc.id = id->get<std::string>();
      } else if (id->is_number_integer()) {
        doc.id = std::to_string(id->get<long long>());
      } else {
        throw ValidationError("line " + std::to_string(line_no) +
                              ": \"id\" must be a string or integer");
      }
      if (!explicit_ids.insert(doc.id).second) {
        throw ValidationError("line " + std::to_string(line_no) +
                              ": duplicate id '" + doc.id + "'");
      }
      explicit_id = true;
    }
    if (const auto pred = record.find("predicted");
        pred != record.end() && !pred->is_null()) {
      if (!pred->is_object()) {
        throw ValidationError("line " + std::to_string(line_no) +
                              ": \"predicted\" must be an object");
      }
      ClassProbabilities probs;
      for (const auto& [name, p] : pred->items()) {
        if (!p.is_number()) {
          throw ValidationError("line " + std::to_string(line_no) +
                                ": non-numeric probability for " + name);
        }
        probs.values[name] = p.get<double>();
      }
      doc.predicted = std::move(probs);
    }
    has_explicit_id.push_back(explicit_id);
    corpus.documents.push_back(std::move(doc));
  }

  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    if (has_explicit_id[i]) continue;
    auto id = std::to_string(i);
    if (explicit_ids.count(id)) {
      throw ValidationError("generated id '" + id +
                            "' collides with an explicit id");
    }
    corpus.documents[i].id = std::move(id);
  }
  refresh_classes(corpus);
  return corpus;
}

void save_corpus(const LabeledCorpus& corpus,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& doc : corpus.documents) {
    ordered_json record;
    record["id"] = doc.id;
    record["text"] = doc.text;
    if (doc.label) record["label"] = *doc.label;
    if (doc.predicted) {
      ordered_json probs = ordered_json::object();
      for (const auto& [name, p] : doc.predicted->values) probs[name] = p;
      record["predicted"] = std::move(probs);
    }
    out << record.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace fairtext
