#pragma once

#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace beliefsim {

enum class Role { system, user, assistant };

std::string to_string(Role role);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct BackendConfig {
  std::string base_url;
  std::string model_name;
  double temperature = 0.7;
  std::chrono::milliseconds timeout{120000};
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{1000};
  std::optional<std::string> api_key;
};

// Describes who is asking and why. Backends that talk to a real model ignore
// it; the scripted backend uses it to pick responses.
struct CallTag {
  std::string debate_id;
  std::string agent;
  std::string kind;  // "speak", "reassess", "bfi2", "belief_change", ...
  int round = 0;
  int attempt = 0;  // 1 on a clarification retry
  std::map<std::string, std::string> attributes;
};

struct RecordedCall {
  CallTag tag;
  std::vector<ChatMessage> messages;
  std::string response;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  // Checks the message preconditions, then delegates to the implementation.
  std::string complete(const std::vector<ChatMessage>& messages, const CallTag& tag = {});

  virtual std::string describe() const = 0;

 protected:
  virtual std::string do_complete(const std::vector<ChatMessage>& messages, const CallTag& tag) = 0;
};

// OpenAI-style chat-completions client:
// POST {base_url}/v1/chat/completions, reads choices[0].message.content.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(BackendConfig config);

  const BackendConfig& config() const noexcept { return config_; }
  std::string describe() const override;

  static nlohmann::json request_body(const std::vector<ChatMessage>& messages,
                                     const BackendConfig& config);

 protected:
  std::string do_complete(const std::vector<ChatMessage>& messages, const CallTag& tag) override;

 private:
  BackendConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;    // path prefix + /v1/chat/completions
};

// Deterministic replay backend for tests and offline runs. Responses come
// from, in order of precedence: a response function, per-agent queues, or a
// shared queue. Every call is logged.
class ScriptedBackend : public ChatBackend {
 public:
  using ResponseFn = std::function<std::string(const CallTag&, const std::vector<ChatMessage>&)>;

  ScriptedBackend() = default;
  explicit ScriptedBackend(std::vector<std::string> queue);
  explicit ScriptedBackend(ResponseFn fn);

  void push(std::string response);
  void push(const std::string& agent, std::string response);

  // Rule-file scripts (see README) for the CLI --scripted flag.
  static std::unique_ptr<ScriptedBackend> from_rules(const nlohmann::json& script);
  static std::unique_ptr<ScriptedBackend> from_rules_file(const std::filesystem::path& path);

  std::vector<RecordedCall> log() const;
  std::size_t calls() const;
  std::string describe() const override { return "scripted"; }

 protected:
  std::string do_complete(const std::vector<ChatMessage>& messages, const CallTag& tag) override;

 private:
  mutable std::mutex mutex_;
  ResponseFn fn_;
  std::deque<std::string> queue_;
  std::map<std::string, std::deque<std::string>> agent_queues_;
  std::vector<RecordedCall> log_;
};

}  // namespace beliefsim
