#include "fairtext/explainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "fairtext/error.h"
#include "json.hpp"

namespace fairtext {

namespace {

using json = nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string html_escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// 256-colour backgrounds, faint to saturated.
constexpr int kAnsiRed[kRenderLevels] = {224, 217, 210, 203, 196};
constexpr int kAnsiBlue[kRenderLevels] = {189, 153, 111, 69, 27};

std::optional<double> parse_score(const json& value) {
  if (value.is_number()) return value.get<double>();
  if (value.is_string()) {
    const auto s = value.get<std::string>();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() && *end == '\0') return v;
  }
  return std::nullopt;
}

}  // namespace

std::string to_string(AttributionMethod method) {
  switch (method) {
    case AttributionMethod::kLinearExact: return "linear-exact";
    case AttributionMethod::kOcclusion: return "occlusion";
    case AttributionMethod::kExternalFile: return "external-file";
  }
  return "unknown";
}

AttributionMethod parse_attribution_method(const std::string& name) {
  if (name == "linear-exact") return AttributionMethod::kLinearExact;
  if (name == "occlusion") return AttributionMethod::kOcclusion;
  if (name == "external-file") return AttributionMethod::kExternalFile;
  throw ValidationError("unknown attribution method '" + name + "'");
}

ExplainerConfig ExplainerConfig::with_top_k(std::size_t k, AttributionMethod m) {
  ExplainerConfig c;
  c.method = m;
  c.top_k = k;
  return c;
}

ExplainerConfig ExplainerConfig::with_top_fraction(double fraction,
                                                   AttributionMethod m) {
  ExplainerConfig c;
  c.method = m;
  c.top_fraction = fraction;
  return c;
}

void ExplainerConfig::validate() const {
  if (top_k.has_value() == top_fraction.has_value()) {
    throw ValidationError("exactly one of top_k and top_fraction must be set");
  }
  if (top_k && *top_k == 0) throw ValidationError("top_k must be positive");
  if (top_fraction && !(*top_fraction > 0.0 && *top_fraction <= 1.0)) {
    throw ValidationError("top_fraction must lie in (0, 1]");
  }
}

std::size_t ExplainerConfig::resolve_count(std::size_t available) const {
  validate();
  if (top_k) return std::min(*top_k, available);
  // The epsilon absorbs representation error, e.g. 0.1 * 4000.
  const double raw = *top_fraction * static_cast<double>(available);
  const auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(k, available);
}

AttributionRecord attribute_linear(const LinearModel& model, const Document& doc,
                                   const std::string& target_class) {
  AttributionRecord record{doc.id, target_class, {}};
  record.token_scores.reserve(doc.tokens.size());
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    record.token_scores.push_back(
        {i, doc.tokens[i], model.token_weight(doc.tokens[i], target_class)});
  }
  return record;
}

AttributionRecord attribute_occlusion(const PredictFn& predict_fn,
                                      const Document& doc,
                                      const std::string& target_class) {
  AttributionRecord record{doc.id, target_class, {}};
  record.token_scores.reserve(doc.tokens.size());
  const double full = predict_fn(doc.tokens).of(target_class);
  std::vector<std::string> reduced;
  reduced.reserve(doc.tokens.size());
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    reduced.clear();
    for (std::size_t j = 0; j < doc.tokens.size(); ++j) {
      if (j != i) reduced.push_back(doc.tokens[j]);
    }
    const double without = predict_fn(reduced).of(target_class);
    record.token_scores.push_back({i, doc.tokens[i], full - without});
  }
  return record;
}

ExternalAttributions load_external_attributions(
    const std::filesystem::path& path, const LabeledCorpus& corpus) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open attributions file " + path.string());

  ExternalAttributions result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    AttributionFileError error{line_no, "", ""};
    auto fail = [&](std::string message) {
      error.message = std::move(message);
      result.errors.push_back(error);
    };

    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(std::string("malformed JSON: ") + e.what());
      continue;
    }
    if (!record.is_object() || !record.contains("id") ||
        !record.contains("target_class") || !record.contains("scores") ||
        !record["scores"].is_array() || !record["target_class"].is_string()) {
      fail("expected {\"id\", \"target_class\", \"scores\"}");
      continue;
    }
    const auto& id_value = record["id"];
    if (id_value.is_string()) {
      error.document_id = id_value.get<std::string>();
    } else if (id_value.is_number_integer()) {
      error.document_id = std::to_string(id_value.get<long long>());
    } else {
      fail("\"id\" must be a string or integer");
      continue;
    }
    const auto doc_index = corpus.find(error.document_id);
    if (!doc_index) {
      fail("unknown document id");
      continue;
    }
    const auto& tokens = corpus.documents[*doc_index].tokens;
    const auto& scores = record["scores"];
    if (scores.size() != tokens.size()) {
      fail("score count " + std::to_string(scores.size()) +
           " differs from token count " + std::to_string(tokens.size()));
      continue;
    }

    AttributionRecord parsed{error.document_id,
                             record["target_class"].get<std::string>(),
                             {}};
    bool ok = true;
    for (std::size_t i = 0; i < scores.size() && ok; ++i) {
      const auto& entry = scores[i];
      const std::string at = "position " + std::to_string(i) + ": ";
      if (!entry.is_array() || entry.size() != 3 ||
          !entry[0].is_number_unsigned() || !entry[1].is_string()) {
        fail(at + "expected [position, token, score]");
        ok = false;
        break;
      }
      if (entry[0].get<std::size_t>() != i) {
        fail(at + "positions must be listed in order");
        ok = false;
        break;
      }
      const auto token = entry[1].get<std::string>();
      if (token != tokens[i]) {
        fail(at + "token '" + token + "' does not match corpus token '" +
             tokens[i] + "'");
        ok = false;
        break;
      }
      const auto score = parse_score(entry[2]);
      if (!score || !std::isfinite(*score)) {
        fail(at + "score is not a finite number");
        ok = false;
        break;
      }
      parsed.token_scores.push_back({i, token, *score});
    }
    if (ok) result.records.push_back(std::move(parsed));
  }
  return result;
}

void save_attributions(std::span<const AttributionRecord> records,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& record : records) {
    nlohmann::ordered_json j;
    j["id"] = record.document_id;
    j["target_class"] = record.target_class;
    auto scores = nlohmann::ordered_json::array();
    for (const auto& ts : record.token_scores) {
      scores.push_back({ts.position, ts.token, ts.score});
    }
    j["scores"] = std::move(scores);
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<GlobalWordScore> aggregate_global(
    std::span<const AttributionRecord> records) {
  std::map<std::string, std::vector<double>> occurrences;
  const std::string* target = nullptr;
  for (const auto& record : records) {
    if (target == nullptr) {
      target = &record.target_class;
    } else if (record.target_class != *target) {
      throw ValidationError("attribution records mix target classes '" +
                            *target + "' and '" + record.target_class + "'");
    }
    for (const auto& ts : record.token_scores) {
      occurrences[ts.token].push_back(ts.score);
    }
  }

  std::vector<GlobalWordScore> scores;
  scores.reserve(occurrences.size());
  for (auto& [word, values] : occurrences) {
    // Summing in sorted order makes the total independent of record order.
    std::sort(values.begin(), values.end());
    double total = 0.0;
    for (const double v : values) total += v;
    scores.push_back(
        {word, total, values.size(), total / static_cast<double>(values.size())});
  }
  std::stable_sort(scores.begin(), scores.end(),
                   [](const GlobalWordScore& a, const GlobalWordScore& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.word < b.word;
                   });
  return scores;
}

std::vector<std::string> select_top(std::span<const GlobalWordScore> scores,
                                    const ExplainerConfig& config) {
  config.validate();
  if (scores.empty()) throw ValidationError("cannot select from an empty ranking");
  const std::size_t k = config.resolve_count(scores.size());
  std::vector<std::string> words;
  words.reserve(k);
  for (std::size_t i = 0; i < k; ++i) words.push_back(scores[i].word);
  return words;
}

void save_ranking_csv(std::span<const GlobalWordScore> scores,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "word,total,frequency,score\n";
  for (const auto& s : scores) {
    out << csv_field(s.word) << ',' << format_double(s.total) << ','
        << s.frequency << ',' << format_double(s.score) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<GlobalWordScore> load_ranking_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ranking file " + path.string());
  std::vector<GlobalWordScore> scores;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("word,", 0) == 0) continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": expected 4 CSV fields");
    }
    try {
      scores.push_back({fields[0], std::stod(fields[1]),
                        static_cast<std::size_t>(std::stoull(fields[2])),
                        std::stod(fields[3])});
    } catch (const std::exception&) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": non-numeric field");
    }
  }
  return scores;
}

std::vector<AblationPoint> ablation_curve(const LinearModel& model,
                                          const LabeledCorpus& corpus,
                                          std::span<const std::string> ranked_words,
                                          std::span<const std::size_t> steps) {
  if (!std::is_sorted(steps.begin(), steps.end())) {
    throw ValidationError("ablation steps must be ascending");
  }
  std::vector<AblationPoint> curve;
  curve.reserve(steps.size());
  for (const std::size_t step : steps) {
    const std::size_t n = std::min(step, ranked_words.size());
    const std::unordered_set<std::string> removed(ranked_words.begin(),
                                                  ranked_words.begin() + n);
    LabeledCorpus reduced = corpus;
    if (!removed.empty()) {
      for (auto& doc : reduced.documents) {
        std::erase_if(doc.tokens,
                      [&](const std::string& t) { return removed.count(t) > 0; });
      }
    }
    Metrics m = evaluate(model, reduced);
    curve.push_back({step, m.f1_macro, std::move(m)});
  }
  return curve;
}

Overlap overlap(std::span<const std::string> list_a,
                std::span<const std::string> list_b) {
  const std::unordered_set<std::string> a(list_a.begin(), list_a.end());
  const std::unordered_set<std::string> b(list_b.begin(), list_b.end());
  Overlap result;
  for (const auto& w : a) {
    if (b.count(w)) ++result.count;
  }
  const std::size_t denom = std::max(list_a.size(), list_b.size());
  result.fraction = denom == 0 ? 1.0
                               : static_cast<double>(result.count) /
                                     static_cast<double>(denom);
  return result;
}

std::string render_attributions(const AttributionRecord& record,
                                RenderFormat format) {
  double max_abs = 0.0;
  for (const auto& ts : record.token_scores) {
    max_abs = std::max(max_abs, std::abs(ts.score));
  }

  std::ostringstream out;
  if (format == RenderFormat::kHtml) out << "<div class=\"attribution\">";
  for (std::size_t i = 0; i < record.token_scores.size(); ++i) {
    const auto& ts = record.token_scores[i];
    if (i > 0) out << ' ';
    const std::string text =
        format == RenderFormat::kHtml ? html_escape(ts.token) : ts.token;
    if (max_abs == 0.0 || ts.score == 0.0) {
      out << text;
      continue;
    }
    const double intensity = std::abs(ts.score) / max_abs;
    const bool positive = ts.score > 0;
    if (format == RenderFormat::kAnsi) {
      const int level = std::clamp(
          static_cast<int>(std::ceil(intensity * kRenderLevels - 1e-12)), 1,
          kRenderLevels);
      const int colour = positive ? kAnsiRed[level - 1] : kAnsiBlue[level - 1];
      out << "\x1b[48;5;" << colour << 'm' << text << "\x1b[0m";
    } else {
      char alpha[16];
      std::snprintf(alpha, sizeof(alpha), "%.3f", intensity);
      out << "<span class=\"" << (positive ? "attr-pos" : "attr-neg")
          << "\" style=\"background-color: rgba("
          << (positive ? "220, 38, 38, " : "37, 99, 235, ") << alpha
          << ")\" title=\"" << format_double(ts.score) << "\">" << text
          << "</span>";
    }
  }
  if (format == RenderFormat::kHtml) out << "</div>";
  return out.str();
}

}  // namespace fairtext
