#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fairtext/identifier.h"

namespace fairtext {

struct AnnotationServiceConfig {
  std::vector<std::string> words;
  std::vector<TrapItem> traps;
  std::filesystem::path votes_log;
  std::size_t words_per_session = 20;
  // Traps per real word in a session; every session gets at least one.
  double trap_rate = 0.2;
  // Words stop being handed out once this many sessions were assigned them.
  std::size_t target_per_word = 5;

  void validate() const;
};

struct SessionItem {
  std::string word;
  bool trap = false;
};

struct Task {
  std::string session;
  std::string word;
  std::size_t answered = 0;
  std::size_t total = 0;
};

struct Response {
  std::string session;
  std::string word;
  std::optional<ProtectedCategory> choice;  // nullopt: none of the above
  int likert = 0;
};

enum class SessionState { kOpen, kReliable, kRejected };

std::string to_string(SessionState state);

struct SubmitResult {
  bool duplicate = false;
  SessionState state = SessionState::kOpen;
};

struct WordTally {
  VoteSheet sheet;
  std::optional<Annotation> decision;  // once the word has votes
};

struct SessionCounts {
  std::size_t open = 0;
  std::size_t reliable = 0;
  std::size_t rejected = 0;
};

struct KappaResult {
  double kappa = 0.0;
  std::size_t words = 0;
};

// Crowd annotation back end: hands out per-session word streams with trap
// items mixed in, records responses in an append-only JSONL log (synced before
// returning) and tallies the votes of sessions that pass the trap check.
// Thread-safe.
class AnnotationService {
 public:
  // Replays `config.votes_log` when it exists.
  explicit AnnotationService(AnnotationServiceConfig config);
  ~AnnotationService();
  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  // Creates the session on first use. Returns nullopt once every item of the
  // session has been answered.
  std::optional<Task> next_task(const std::string& session);
  // Throws ValidationError for an unknown session, a word outside the
  // session's stream or a Likert value outside 1-5. Re-submitting an
  // answered word is acknowledged without changing anything.
  SubmitResult submit(const Response& response);

  std::vector<SessionItem> session_items(const std::string& session) const;
  SessionState session_state(const std::string& session) const;

  // One entry per configured word, in configuration order.
  std::vector<WordTally> tallies() const;
  SessionCounts session_counts() const;
  // Current decisions for words with at least one counted vote.
  std::vector<Annotation> decisions() const;

  // Named annotation sets for agreement; "crowd" always refers to decisions().
  void add_source(const std::string& name, std::vector<Annotation> annotations);
  std::vector<std::string> sources() const;
  // Kappa over the words both sources annotate. Throws ValidationError for an
  // unknown source or fewer than two shared words.
  KappaResult kappa(const std::string& source_a, const std::string& source_b) const;

 private:
  struct Session {
    std::vector<SessionItem> items;
    std::map<std::string, Response> responses;
    SessionState state = SessionState::kOpen;
  };

  Session& create_session(const std::string& token);
  void record_session(const std::string& token, const Session& session);
  void apply_response(Session& session, const Response& response);
  void close_if_complete(Session& session);
  void append_line(const std::string& line);
  void replay();
  std::vector<Annotation> decisions_locked() const;
  std::vector<Annotation> source_locked(const std::string& name) const;

  AnnotationServiceConfig config_;
  std::map<std::string, TrapBand> trap_bands_;
  std::vector<std::string> pool_;  // words minus trap words
  std::map<std::string, std::size_t> assigned_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, VoteSheet> sheets_;
  std::map<std::string, std::vector<Annotation>> sources_;
  int log_fd_ = -1;
  mutable std::mutex mutex_;
};

// Fixed answer options shown for every word: the nine categories followed by
// "None of the above".
std::vector<std::string> answer_options();
// Parses an answer option (display name, identifier or "none").
std::optional<ProtectedCategory> parse_choice(const std::string& text);

}  // namespace fairtext
