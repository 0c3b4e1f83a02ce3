#pragma once

#include <chrono>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairtext/identifier.h"

namespace fairtext {

struct ChatMessage {
  std::string role;
  std::string content;
};

// One chat-completion round trip. Implementations must be safe to call from
// several threads at once.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  // Returns the assistant's reply text; throws TransportError when no reply
  // could be obtained.
  virtual std::string complete(std::span<const ChatMessage> messages) = 0;
};

struct LlmConfig {
  std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.3;
  int max_retries = 3;
  std::chrono::milliseconds request_timeout{30000};
  int max_concurrency = 4;
  // Words classified per conversation before the context prompts are re-sent.
  std::size_t session_size = 20;
  std::chrono::milliseconds backoff{500};
  // Environment variable holding the bearer token (optional).
  std::string api_key_env = "OPENAI_API_KEY";

  void validate() const;
};

// Environment variable that overrides LlmConfig::endpoint when set.
inline constexpr const char* kLlmEndpointEnv = "FAIRTEXT_LLM_ENDPOINT";
void apply_environment_overrides(LlmConfig& config);

// OpenAI-compatible chat completions endpoint over HTTP(S).
class HttpChatTransport : public ChatTransport {
 public:
  explicit HttpChatTransport(LlmConfig config);
  std::string complete(std::span<const ChatMessage> messages) override;

 private:
  LlmConfig config_;
  std::string base_url_;
  std::string path_;
  std::string api_key_;
};

// Context prompt with the definitions of the nine categories.
std::string_view category_definitions_prompt();
// Context prompt with reference links for each category.
std::string_view reference_links_prompt();
// Per-word classification request.
std::string classification_prompt(std::string_view word);

// Annotates each word through `transport`, one conversation per
// `session_size` words, at most `max_concurrency` conversations in flight.
// Malformed replies are retried `max_retries` times and then recorded as a
// failed annotation. A transport failure that survives all retries is
// rethrown as TransportError. Output order follows `words`.
std::vector<Annotation> identify_llm(std::span<const std::string> words,
                                     const LlmConfig& config,
                                     ChatTransport& transport);

// Same, over HTTP to config.endpoint.
std::vector<Annotation> identify_llm(std::span<const std::string> words,
                                     const LlmConfig& config);

}  // namespace fairtext
