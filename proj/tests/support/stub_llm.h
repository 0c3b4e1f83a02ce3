#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace fairtext::test {

// Local OpenAI-style chat completions endpoint. `reply` receives the word of
// the latest classification prompt and returns the assistant text.
class StubLlmServer {
 public:
  using ReplyFn = std::function<std::string(const std::string& word)>;

  explicit StubLlmServer(ReplyFn reply);
  ~StubLlmServer();

  int port() const { return port_; }
  std::string endpoint() const;
  int requests() const { return requests_.load(); }

 private:
  ReplyFn reply_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> requests_{0};
};

// Extracts the quoted word from a classification prompt; empty when absent.
std::string prompt_word(const std::string& prompt);

}  // namespace fairtext::test
