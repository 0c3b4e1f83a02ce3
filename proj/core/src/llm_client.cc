#include "fairtext/llm_client.h"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <optional>
#include <thread>

#include "fairtext/error.h"
#include "httplib.h"
#include "json.hpp"

namespace fairtext {

namespace {

using json = nlohmann::json;

constexpr std::string_view kDefinitionsPrompt =
    "Consider these 9 protected categories defined by the Equality Act law to "
    "avoid discrimination of automatic decision-making algorithms:\n"
    "\"Age\": A person belonging to a particular age or range of ages (for "
    "example, teenagers).\n"
    "\"Disability\": A person has a disability if she or he has a physical or "
    "mental impairment which has a substantial and long-term adverse effect on "
    "that person's ability to carry out normal day-to-day activities.\n"
    "\"Gender reassignment\": The process of transitioning from one sex to "
    "another.\n"
    "\"Marriage and civil partnership\": Marriage is a union between a man and "
    "a woman or between a same-sex couple. Same-sex couples can also have their "
    "relationships legally recognised as 'civil partnerships'. Civil partners "
    "must not be treated less favourably than married couples.\n"
    "\"Pregnancy and maternity\": Pregnancy is the condition of being pregnant "
    "or expecting a baby. Maternity refers to the period after the birth, and is "
    "linked to maternity leave in the employment context. In the non-work "
    "context, protection against maternity discrimination is for 26 weeks after "
    "giving birth, and this includes treating a woman unfavourably because she "
    "is breastfeeding.\n"
    "\"Race\": Refers to the protected characteristic of race. It refers to a "
    "group of people defined by their race, colour, and nationality (including "
    "citizenship) ethnic or national origins.\n"
    "\"Religion and belief\": Religion refers to any religion, including a lack "
    "of religion. Belief refers to any religious or philosophical belief and "
    "includes a lack of belief. Generally, a belief should affect your life "
    "choices or the way you live for it to be included in the definition.\n"
    "\"Sex\": A man or a woman.\n"
    "\"Sexual orientation\": Whether a person's sexual attraction is towards "
    "their own sex, the opposite sex, or both sexes.";

constexpr std::string_view kLinksPrompt =
    "You can learn more about the discrimination along each protected attribute "
    "on the following URLs:\n"
    "\"Age\": https://www.equalityhumanrights.com/en/advice-and-guidance/"
    "age-discrimination\n"
    "\"Disability\": https://www.equalityhumanrights.com/en/"
    "disability-advice-and-guidance\n"
    "\"Gender reassignment\": https://www.equalityhumanrights.com/en/"
    "advice-and-guidance/gender-reassignment-discrimination\n"
    "\"Marriage and civil partnership\": https://www.equalityhumanrights.com/en/"
    "advice-and-guidance/marriage-and-civil-partnership-discrimination\n"
    "\"Pregnancy and maternity\": https://www.equalityhumanrights.com/en/node/"
    "5916\n"
    "\"Race\": https://www.equalityhumanrights.com/en/advice-and-guidance/"
    "race-discrimination\n"
    "\"Religion and belief\": https://www.equalityhumanrights.com/en/"
    "religion-or-belief-work\n"
    "\"Sex\": https://www.equalityhumanrights.com/en/advice-and-guidance/"
    "sex-discrimination\n"
    "\"Sexual orientation\": https://www.equalityhumanrights.com/en/"
    "advice-and-guidance/sexual-orientation-discrimination";

constexpr std::string_view kClassificationHead =
    "Given the previously defined protected categories \"Age\", \"Disability\", "
    "\"Gender reassignment\", \"Marriage and civil partnership\", \"Pregnancy "
    "and maternity\", \"Race\", \"Religion and belief\", \"Sex\", and \"Sexual "
    "orientation\".\nHow would you classify the word \"";

constexpr std::string_view kClassificationTail =
    "\" and which [0,100] reliability score (only one) would you give to your "
    "assessment? You must assign one category.\n"
    "If a word does not fit any categories, you must assign the category "
    "\"None\" with the reliability score and the relative explanation.\n"
    "Provide the answer in the format: \"Protected Category|Reliability Score "
    "from 0 to 100 for the protected category|Explanation of why the word "
    "belongs to the protected category\".\n"
    "In case a word does not fall into any category, provide the answer in the "
    "format: \"None|Reliability Score from 0 to 100 for the None "
    "category|Explanation of why the word does not fall under any of the "
    "defined protected categories.\n"
    "Each answer must have exactly two | symbols in only one line; otherwise, I "
    "cannot process your response.";

// Splits "scheme://host[:port]/path" into base URL and path.
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("endpoint '" + url + "' lacks a scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

// Retries `call` on TransportError with exponential backoff.
template <typename Call>
std::string with_transport_retries(const LlmConfig& config, Call&& call) {
  for (int attempt = 0;; ++attempt) {
    try {
      return call();
    } catch (const TransportError&) {
      if (attempt >= config.max_retries) throw;
      std::this_thread::sleep_for(config.backoff * (1 << std::min(attempt, 10)));
    }
  }
}

Annotation annotate_word(const std::string& word, const LlmConfig& config,
                         ChatTransport& transport,
                         std::vector<ChatMessage>& conversation) {
  conversation.push_back({"user", classification_prompt(word)});
  Annotation a;
  a.word = word;
  a.source = AnnotationSource::kLlm;
  std::string last_error;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    const std::string reply = with_transport_retries(
        config, [&] { return transport.complete(conversation); });
    try {
      const LlmReply parsed = parse_llm_reply(reply);
      a.category = parsed.category;
      a.reliability = parsed.reliability;
      a.explanation = parsed.explanation;
      conversation.push_back({"assistant", reply});
      return a;
    } catch (const ValidationError& e) {
      last_error = e.what();
    }
  }
  conversation.pop_back();
  a.failed = true;
  a.explanation = "annotation failed: " + last_error;
  return a;
}

}  // namespace

void LlmConfig::validate() const {
  if (!(temperature >= 0.0)) throw ValidationError("temperature must be >= 0");
  if (max_retries < 0) throw ValidationError("max_retries must be >= 0");
  if (max_concurrency < 1) throw ValidationError("max_concurrency must be >= 1");
  if (session_size < 1) throw ValidationError("session_size must be >= 1");
  if (request_timeout.count() <= 0) {
    throw ValidationError("request timeout must be positive");
  }
  split_url(endpoint);
}

void apply_environment_overrides(LlmConfig& config) {
  if (const char* endpoint = std::getenv(kLlmEndpointEnv);
      endpoint != nullptr && *endpoint != '\0') {
    config.endpoint = endpoint;
  }
}

HttpChatTransport::HttpChatTransport(LlmConfig config) : config_(std::move(config)) {
  std::tie(base_url_, path_) = split_url(config_.endpoint);
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }
}

std::string HttpChatTransport::complete(std::span<const ChatMessage> messages) {
  json body;
  body["model"] = config_.model;
  body["temperature"] = config_.temperature;
  body["messages"] = json::array();
  for (const auto& m : messages) {
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  }

  httplib::Client client(base_url_);
  const auto timeout_s = config_.request_timeout.count() / 1000;
  const auto timeout_us = (config_.request_timeout.count() % 1000) * 1000;
  client.set_connection_timeout(timeout_s, timeout_us);
  client.set_read_timeout(timeout_s, timeout_us);
  client.set_write_timeout(timeout_s, timeout_us);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const auto response = client.Post(path_, headers, body.dump(), "application/json");
  if (!response) {
    throw TransportError("request to " + config_.endpoint + " failed: " +
                         httplib::to_string(response.error()));
  }
  if (response->status != 200) {
    throw TransportError("endpoint " + config_.endpoint + " returned HTTP " +
                         std::to_string(response->status));
  }
  try {
    const json reply = json::parse(response->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError("unexpected response body from " + config_.endpoint +
                         ": " + e.what());
  }
}

std::string_view category_definitions_prompt() { return kDefinitionsPrompt; }

std::string_view reference_links_prompt() { return kLinksPrompt; }

std::string classification_prompt(std::string_view word) {
  std::string prompt(kClassificationHead);
  prompt += word;
  prompt += kClassificationTail;
  return prompt;
}

std::vector<Annotation> identify_llm(std::span<const std::string> words,
                                     const LlmConfig& config,
                                     ChatTransport& transport) {
  config.validate();
  std::vector<Annotation> annotations(words.size());
  const std::size_t num_batches =
      (words.size() + config.session_size - 1) / config.session_size;
  std::vector<std::exception_ptr> errors(num_batches);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t b = next++; b < num_batches; b = next++) {
      try {
        std::vector<ChatMessage> conversation{
            {"user", std::string(category_definitions_prompt())},
            {"user", std::string(reference_links_prompt())}};
        const std::size_t begin = b * config.session_size;
        const std::size_t end = std::min(words.size(), begin + config.session_size);
        for (std::size_t i = begin; i < end; ++i) {
          annotations[i] = annotate_word(words[i], config, transport, conversation);
        }
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };

  const std::size_t num_threads =
      std::min<std::size_t>(static_cast<std::size_t>(config.max_concurrency), num_batches);
  if (num_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(num_threads);
    for (std::size_t t = 0; t < num_threads; ++t) threads.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return annotations;
}

std::vector<Annotation> identify_llm(std::span<const std::string> words,
                                     const LlmConfig& config) {
  HttpChatTransport transport(config);
  return identify_llm(words, config, transport);
}

}  // namespace fairtext
