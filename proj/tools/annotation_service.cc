#include "annotation_service.h"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>

#include "fairtext/corpus.h"
#include "fairtext/error.h"
#include "fairtext/random.h"
#include "json.hpp"

namespace fairtext {

namespace {

using json = nlohmann::json;

constexpr const char* kCrowdSource = "crowd";

std::string choice_id(const std::optional<ProtectedCategory>& choice) {
  return choice ? std::string(category_id(*choice)) : "none";
}

}  // namespace

void AnnotationServiceConfig::validate() const {
  if (words.empty()) throw ValidationError("annotation service needs at least one word");
  if (traps.empty()) throw ValidationError("annotation service needs at least one trap");
  if (words_per_session == 0) throw ValidationError("words_per_session must be >= 1");
  if (!(trap_rate >= 0.0) || !std::isfinite(trap_rate)) {
    throw ValidationError("trap_rate must be a non-negative number");
  }
  if (target_per_word == 0) throw ValidationError("target_per_word must be >= 1");
  if (votes_log.empty()) throw ValidationError("a votes log path is required");
}

std::string to_string(SessionState state) {
  switch (state) {
    case SessionState::kOpen: return "open";
    case SessionState::kReliable: return "reliable";
    case SessionState::kRejected: return "rejected";
  }
  return "open";
}

std::vector<std::string> answer_options() {
  std::vector<std::string> options;
  for (const auto c : kAllCategories) options.emplace_back(category_display_name(c));
  options.emplace_back("None of the above");
  return options;
}

std::optional<ProtectedCategory> parse_choice(const std::string& text) {
  const std::string folded = fold_case(text);
  if (folded == "none" || folded == "none of the above") return std::nullopt;
  const auto c = parse_category(text);
  if (!c) throw ValidationError("unknown answer '" + text + "'");
  return c;
}

AnnotationService::AnnotationService(AnnotationServiceConfig config)
    : config_(std::move(config)) {
  config_.validate();
  for (const auto& t : config_.traps) trap_bands_[fold_case(t.word)] = t.expected_band;
  std::set<std::string> seen;
  for (const auto& raw : config_.words) {
    const std::string w = fold_case(raw);
    if (trap_bands_.count(w)) continue;
    if (!seen.insert(w).second) continue;
    pool_.push_back(w);
    assigned_[w] = 0;
    sheets_[w].word = w;
  }
  if (pool_.empty()) throw ValidationError("every configured word is a trap word");

  replay();
  log_fd_ = ::open(config_.votes_log.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (log_fd_ < 0) {
    throw IoError("cannot open votes log " + config_.votes_log.string() + ": " +
                  std::strerror(errno));
  }
}

AnnotationService::~AnnotationService() {
  if (log_fd_ >= 0) ::close(log_fd_);
}

void AnnotationService::append_line(const std::string& line) {
  const std::string data = line + "\n";
  std::size_t written = 0;
  while (written < data.size()) {
    const ssize_t n = ::write(log_fd_, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError(std::string("writing votes log failed: ") + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(log_fd_) != 0) {
    throw IoError(std::string("syncing votes log failed: ") + std::strerror(errno));
  }
}

void AnnotationService::replay() {
  std::ifstream in(config_.votes_log, std::ios::binary);
  if (!in) return;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < content.size()) {
    const auto nl = content.find('\n', start);
    // A final line without its newline was never acknowledged.
    if (nl == std::string::npos) break;
    const std::string line = content.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::string where =
        config_.votes_log.string() + ":" + std::to_string(line_no) + ": ";
    json record;
    try {
      record = json::parse(line);
      const std::string type = record.at("type");
      const std::string token = record.at("session");
      if (type == "session") {
        Session session;
        for (const auto& item : record.at("items")) {
          session.items.push_back({item.at(0).get<std::string>(), item.at(1).get<bool>()});
        }
        for (const auto& item : session.items) {
          if (item.trap && !trap_bands_.count(item.word)) {
            throw ValidationError("trap '" + item.word + "' is not in the trap list");
          }
          if (!item.trap && assigned_.count(item.word)) ++assigned_[item.word];
        }
        sessions_[token] = std::move(session);
      } else if (type == "response") {
        auto it = sessions_.find(token);
        if (it == sessions_.end()) throw ValidationError("response for unknown session");
        Response r;
        r.session = token;
        r.word = record.at("word");
        r.choice = parse_choice(record.at("choice").get<std::string>());
        r.likert = record.at("likert");
        apply_response(it->second, r);
      } else {
        throw ValidationError("unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw ValidationError(where + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  if (start < content.size()) {
    // Drop the torn tail so later appends start on a fresh line.
    std::error_code ec;
    std::filesystem::resize_file(config_.votes_log, start, ec);
    if (ec) throw IoError("cannot truncate votes log: " + ec.message());
  }
}

AnnotationService::Session& AnnotationService::create_session(const std::string& token) {
  std::vector<std::string> candidates;
  for (const auto& w : pool_) {
    if (assigned_[w] < config_.target_per_word) candidates.push_back(w);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](const std::string& a, const std::string& b) {
                     return assigned_[a] < assigned_[b];
                   });
  if (candidates.size() > config_.words_per_session) {
    candidates.resize(config_.words_per_session);
  }

  std::mt19937_64 rng(fnv1a(token));
  std::vector<TrapItem> traps = config_.traps;
  for (std::size_t i = traps.size(); i > 1; --i) {
    std::swap(traps[i - 1], traps[uniform_below(rng, i)]);
  }
  const auto wanted = static_cast<std::size_t>(
      std::llround(config_.trap_rate * static_cast<double>(candidates.size())));
  traps.resize(candidates.empty() ? 0
                                  : std::min(traps.size(), std::max<std::size_t>(1, wanted)));

  Session session;
  for (const auto& w : candidates) session.items.push_back({w, false});
  for (const auto& t : traps) {
    const auto pos = uniform_below(rng, session.items.size() + 1);
    session.items.insert(session.items.begin() + static_cast<std::ptrdiff_t>(pos),
                         {fold_case(t.word), true});
  }
  record_session(token, session);
  for (const auto& w : candidates) ++assigned_[w];
  return sessions_[token] = std::move(session);
}

void AnnotationService::record_session(const std::string& token, const Session& session) {
  json items = json::array();
  for (const auto& item : session.items) items.push_back(json::array({item.word, item.trap}));
  append_line(json{{"type", "session"}, {"session", token}, {"items", items}}.dump());
}

void AnnotationService::apply_response(Session& session, const Response& response) {
  session.responses[response.word] = response;
  close_if_complete(session);
}

void AnnotationService::close_if_complete(Session& session) {
  if (session.state != SessionState::kOpen) return;
  if (session.responses.size() < session.items.size()) return;
  std::vector<std::pair<std::string, int>> answers;
  std::vector<TrapItem> traps;
  for (const auto& item : session.items) {
    answers.emplace_back(item.word, session.responses.at(item.word).likert);
    if (item.trap) traps.push_back({item.word, trap_bands_.at(item.word)});
  }
  const SessionVerdict verdict = trap_filter(answers, traps);
  if (verdict == SessionVerdict::kRejected) {
    session.state = SessionState::kRejected;
    return;
  }
  session.state = SessionState::kReliable;
  for (const auto& item : session.items) {
    if (!item.trap) sheets_[item.word].add(session.responses.at(item.word).choice);
  }
}

std::optional<Task> AnnotationService::next_task(const std::string& token) {
  if (token.empty()) throw ValidationError("session token must not be empty");
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(token);
  Session& session = it != sessions_.end() ? it->second : create_session(token);
  for (const auto& item : session.items) {
    if (!session.responses.count(item.word)) {
      return Task{token, item.word, session.responses.size(), session.items.size()};
    }
  }
  return std::nullopt;
}

SubmitResult AnnotationService::submit(const Response& response) {
  if (response.likert < 1 || response.likert > 5) {
    throw ValidationError("likert must be between 1 and 5");
  }
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(response.session);
  if (it == sessions_.end()) {
    throw ValidationError("unknown session '" + response.session + "'");
  }
  Session& session = it->second;
  const std::string word = fold_case(response.word);
  const bool in_stream = std::any_of(session.items.begin(), session.items.end(),
                                     [&](const SessionItem& i) { return i.word == word; });
  if (!in_stream) {
    throw ValidationError("word '" + response.word + "' is not part of this session");
  }
  if (session.responses.count(word)) return {true, session.state};

  Response r = response;
  r.word = word;
  append_line(json{{"type", "response"},
                   {"session", r.session},
                   {"word", r.word},
                   {"choice", choice_id(r.choice)},
                   {"likert", r.likert}}
                  .dump());
  apply_response(session, r);
  return {false, session.state};
}

std::vector<SessionItem> AnnotationService::session_items(const std::string& token) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(token);
  if (it == sessions_.end()) throw ValidationError("unknown session '" + token + "'");
  return it->second.items;
}

SessionState AnnotationService::session_state(const std::string& token) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(token);
  if (it == sessions_.end()) throw ValidationError("unknown session '" + token + "'");
  return it->second.state;
}

std::vector<WordTally> AnnotationService::tallies() const {
  std::lock_guard lock(mutex_);
  std::vector<WordTally> out;
  for (const auto& w : pool_) {
    WordTally t;
    t.sheet = sheets_.at(w);
    if (t.sheet.total() > 0) t.decision = majority_vote(t.sheet);
    out.push_back(std::move(t));
  }
  return out;
}

SessionCounts AnnotationService::session_counts() const {
  std::lock_guard lock(mutex_);
  SessionCounts counts;
  for (const auto& [token, s] : sessions_) {
    switch (s.state) {
      case SessionState::kOpen: ++counts.open; break;
      case SessionState::kReliable: ++counts.reliable; break;
      case SessionState::kRejected: ++counts.rejected; break;
    }
  }
  return counts;
}

std::vector<Annotation> AnnotationService::decisions_locked() const {
  std::vector<Annotation> out;
  for (const auto& w : pool_) {
    const VoteSheet& sheet = sheets_.at(w);
    if (sheet.total() > 0) out.push_back(majority_vote(sheet));
  }
  return out;
}

std::vector<Annotation> AnnotationService::decisions() const {
  std::lock_guard lock(mutex_);
  return decisions_locked();
}

void AnnotationService::add_source(const std::string& name, std::vector<Annotation> annotations) {
  if (name.empty() || name == kCrowdSource) {
    throw ValidationError("source name must be non-empty and not '" +
                          std::string(kCrowdSource) + "'");
  }
  std::lock_guard lock(mutex_);
  sources_[name] = std::move(annotations);
}

std::vector<std::string> AnnotationService::sources() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> names{kCrowdSource};
  for (const auto& [name, a] : sources_) names.push_back(name);
  return names;
}

std::vector<Annotation> AnnotationService::source_locked(const std::string& name) const {
  if (name == kCrowdSource) return decisions_locked();
  const auto it = sources_.find(name);
  if (it == sources_.end()) throw ValidationError("unknown source '" + name + "'");
  return it->second;
}

KappaResult AnnotationService::kappa(const std::string& source_a,
                                     const std::string& source_b) const {
  std::lock_guard lock(mutex_);
  const auto a = protected_map(source_locked(source_a));
  const auto b = protected_map(source_locked(source_b));
  std::map<std::string, bool> shared_a;
  std::map<std::string, bool> shared_b;
  for (const auto& [word, value] : a) {
    const auto it = b.find(word);
    if (it == b.end()) continue;
    shared_a[word] = value;
    shared_b[word] = it->second;
  }
  if (shared_a.size() < 2) {
    throw ValidationError("sources '" + source_a + "' and '" + source_b +
                          "' share fewer than two words");
  }
  return {cohen_kappa(shared_a, shared_b), shared_a.size()};
}

}  // namespace fairtext
