#include "beliefsim/backend.hpp"

#include <regex>
#include <thread>

#include <httplib.h>

#include "beliefsim/error.hpp"

namespace beliefsim {

namespace {
constexpr const char* kModule = "backend";
}

std::string to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::string ChatBackend::complete(const std::vector<ChatMessage>& messages, const CallTag& tag) {
  if (messages.empty()) {
    throw DomainError(kModule, "complete() needs at least one message");
  }
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const auto& message = messages[i];
    if (message.role == Role::system && i != 0) {
      throw DomainError(kModule, "a system message may only appear first");
    }
    if (message.role != Role::assistant && message.content.empty()) {
      throw DomainError(kModule, "empty " + to_string(message.role) + " message at index " +
                                     std::to_string(i));
    }
  }
  return do_complete(messages, tag);
}

HttpChatBackend::HttpChatBackend(BackendConfig config) : config_(std::move(config)) {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch match;
  if (!std::regex_match(config_.base_url, match, url)) {
    throw ConfigError(kModule, "base_url '" + config_.base_url + "' is not an http(s) URL");
  }
  if (config_.model_name.empty()) {
    throw ConfigError(kModule, "model name is empty");
  }
  if (!(config_.temperature >= 0.0)) {
    throw ConfigError(kModule, "temperature must be >= 0");
  }
  if (config_.max_retries < 0) {
    throw ConfigError(kModule, "max_retries must be >= 0");
  }
  origin_ = match[1].str();
  std::string prefix = match[2].str();
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  path_ = prefix + "/v1/chat/completions";
}

std::string HttpChatBackend::describe() const {
  return "http " + origin_ + path_ + " model=" + config_.model_name;
}

nlohmann::json HttpChatBackend::request_body(const std::vector<ChatMessage>& messages,
                                             const BackendConfig& config) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& message : messages) {
    list.push_back({{"role", to_string(message.role)}, {"content", message.content}});
  }
  return {{"model", config.model_name}, {"messages", std::move(list)},
          {"temperature", config.temperature}};
}

std::string HttpChatBackend::do_complete(const std::vector<ChatMessage>& messages, const CallTag&) {
  const std::string body = request_body(messages, config_).dump();
  httplib::Headers headers;
  if (config_.api_key && !config_.api_key->empty()) {
    headers.emplace("Authorization", "Bearer " + *config_.api_key);
  }

  std::string last_failure;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(config_.initial_backoff * (1LL << (attempt - 1)));
    }
    httplib::Client client(origin_);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());

    const auto result = client.Post(path_, headers, body, "application/json");
    if (!result) {
      last_failure = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status >= 500) {
      last_failure = "HTTP " + std::to_string(result->status);
      continue;
    }
    if (result->status != 200) {
      throw BackendError(kModule, "HTTP " + std::to_string(result->status) + " from " + origin_ +
                                      path_ + ": " + result->body.substr(0, 300));
    }
    const auto json = nlohmann::json::parse(result->body, nullptr, false);
    if (json.is_discarded()) {
      throw BackendError(kModule, "response body is not JSON");
    }
    const auto pointer = nlohmann::json::json_pointer("/choices/0/message/content");
    if (!json.contains(pointer) || !json.at(pointer).is_string()) {
      throw BackendError(kModule, "response has no choices[0].message.content");
    }
    return json.at(pointer).get<std::string>();
  }
  throw BackendError(kModule, "giving up after " + std::to_string(config_.max_retries + 1) +
                                  " attempts; last failure: " + last_failure);
}

}  // namespace beliefsim
