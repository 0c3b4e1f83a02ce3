#include "toml_subset.h"

#include <cctype>
#include <charconv>
#include <string>
#include <vector>

#include "fairtext/error.h"

namespace fairtext::detail {

namespace {

using json = nlohmann::json;

class ValueParser {
 public:
  ValueParser(std::string_view text, std::size_t line_no)
      : text_(text), line_no_(line_no) {}

  json parse() {
    json value = parse_value();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing characters");
    return value;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw ValidationError("config line " + std::to_string(line_no_) + ": " + message);
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  json parse_value() {
    skip_space();
    if (pos_ >= text_.size()) fail("missing value");
    const char c = text_[pos_];
    if (c == '"') return parse_basic_string();
    if (c == '\'') return parse_literal_string();
    if (c == '[') return parse_array();
    return parse_bare();
  }

  json parse_basic_string() {
    ++pos_;
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char c = text_[pos_++];
      if (c == '\\') {
        if (pos_ >= text_.size()) fail("unterminated escape");
        const char e = text_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case 'r': c = '\r'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else if (c == '\n') {
        fail("unterminated string");
      }
      out.push_back(c);
    }
    if (pos_ >= text_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  json parse_literal_string() {
    ++pos_;
    const auto end = text_.find('\'', pos_);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string out(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  json parse_array() {
    ++pos_;
    json array = json::array();
    while (true) {
      skip_space();
      if (pos_ >= text_.size()) fail("unterminated array");
      if (text_[pos_] == ']') {
        ++pos_;
        return array;
      }
      array.push_back(parse_value());
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
      } else if (pos_ < text_.size() && text_[pos_] != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json parse_bare() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']' &&
           text_[pos_] != '#' && !std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
    std::string token(text_.substr(start, pos_ - start));
    if (token == "true") return true;
    if (token == "false") return false;
    std::string digits;
    for (const char c : token) {
      if (c != '_') digits.push_back(c);
    }
    const char* first = digits.data();
    const char* last = digits.data() + digits.size();
    if (!digits.empty() && digits.front() == '+') ++first;
    const bool floating = digits.find_first_of(".eE") != std::string::npos ||
                          digits == "inf" || digits == "nan";
    if (!floating) {
      long long v = 0;
      const auto [end, ec] = std::from_chars(first, last, v);
      if (ec == std::errc() && end == last) return v;
    } else {
      double v = 0;
      const auto [end, ec] = std::from_chars(first, last, v);
      if (ec == std::errc() && end == last) return v;
    }
    fail("cannot parse value '" + token + "'");
  }

  std::string_view text_;
  std::size_t line_no_;
  std::size_t pos_ = 0;
};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (const char c : key) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  }
  return true;
}

// Bracket depth outside strings and comments; used to join multi-line arrays.
int bracket_balance(std::string_view s) {
  int depth = 0;
  char quote = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quote) {
      if (c == '\\' && quote == '"') ++i;
      else if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      break;
    } else if (c == '[') {
      ++depth;
    } else if (c == ']') {
      --depth;
    }
  }
  return depth;
}

}  // namespace

json parse_toml_subset(std::string_view text) {
  json root = json::object();
  json* table = &root;

  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    lines.emplace_back(text.substr(start, nl == std::string_view::npos ? std::string_view::npos
                                                                        : nl - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const std::string line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";

    if (line.front() == '[') {
      const auto close = line.find(']');
      if (close == std::string::npos) throw ValidationError(where + "unterminated table header");
      const std::string rest = trim(std::string_view(line).substr(close + 1));
      if (!rest.empty() && rest.front() != '#') {
        throw ValidationError(where + "unexpected text after table header");
      }
      table = &root;
      std::string name = trim(std::string_view(line).substr(1, close - 1));
      std::size_t from = 0;
      while (true) {
        const auto dot = name.find('.', from);
        const std::string part = trim(std::string_view(name).substr(
            from, dot == std::string::npos ? std::string::npos : dot - from));
        if (!valid_key(part)) throw ValidationError(where + "invalid table name");
        json& next = (*table)[part];
        if (next.is_null()) next = json::object();
        if (!next.is_object()) throw ValidationError(where + "'" + part + "' is not a table");
        table = &next;
        if (dot == std::string::npos) break;
        from = dot + 1;
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where + "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (!valid_key(key)) throw ValidationError(where + "invalid key '" + key + "'");
    if (table->contains(key)) throw ValidationError(where + "duplicate key '" + key + "'");

    std::string value_text = line.substr(eq + 1);
    int depth = bracket_balance(value_text);
    while (depth > 0 && i + 1 < lines.size()) {
      value_text += "\n" + lines[++i];
      depth = bracket_balance(value_text);
    }
    (*table)[key] = ValueParser(value_text, line_no).parse();
  }
  return root;
}

}  // namespace fairtext::detail
