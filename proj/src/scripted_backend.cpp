#include <charconv>

#include "beliefsim/backend.hpp"
#include "beliefsim/dataset.hpp"
#include "beliefsim/error.hpp"
#include "beliefsim/random.hpp"

namespace beliefsim {

namespace {

constexpr const char* kModule = "backend";

std::optional<double> as_number(const std::string& text) {
  double value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

bool attribute_matches(const nlohmann::json& condition, const std::string& value) {
  if (condition.is_string()) return condition.get<std::string>() == value;
  if (condition.is_number()) {
    const auto number = as_number(value);
    return number && *number == condition.get<double>();
  }
  if (condition.is_boolean()) return value == (condition.get<bool>() ? "true" : "false");
  if (condition.is_array()) {
    for (const auto& option : condition) {
      if (attribute_matches(option, value)) return true;
    }
    return false;
  }
  if (condition.is_object()) {
    const auto number = as_number(value);
    if (!number) return false;
    if (condition.contains("min") && *number < condition["min"].get<double>()) return false;
    if (condition.contains("max") && *number > condition["max"].get<double>()) return false;
    return true;
  }
  throw ConfigError(kModule, "unsupported attribute condition " + condition.dump());
}

struct Rule {
  nlohmann::json match;
  nlohmann::json respond;
  std::string mode;  // response | by_round | random
};

bool rule_matches(const Rule& rule, const CallTag& tag) {
  const auto& m = rule.match;
  if (m.contains("kind") && !attribute_matches(m["kind"], tag.kind)) return false;
  if (m.contains("agent") && !attribute_matches(m["agent"], tag.agent)) return false;
  if (m.contains("round") && !attribute_matches(m["round"], std::to_string(tag.round))) return false;
  if (m.contains("attempt") && !attribute_matches(m["attempt"], std::to_string(tag.attempt))) {
    return false;
  }
  if (m.contains("attributes")) {
    for (const auto& [key, condition] : m["attributes"].items()) {
      const auto it = tag.attributes.find(key);
      if (it == tag.attributes.end() || !attribute_matches(condition, it->second)) return false;
    }
  }
  return true;
}

// {name} expansion from the tag; unknown names are left as written.
std::string expand(const std::string& text, const CallTag& tag) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      const auto close = text.find('}', i + 1);
      if (close != std::string::npos) {
        const auto name = text.substr(i + 1, close - i - 1);
        std::optional<std::string> value;
        if (name == "agent") value = tag.agent;
        else if (name == "kind") value = tag.kind;
        else if (name == "round") value = std::to_string(tag.round);
        else if (name == "debate_id") value = tag.debate_id;
        else if (auto it = tag.attributes.find(name); it != tag.attributes.end()) value = it->second;
        if (value) {
          out += *value;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

const std::vector<std::string> kMatchKeys = {"kind", "agent", "round", "attempt", "attributes"};

}  // namespace

ScriptedBackend::ScriptedBackend(std::vector<std::string> queue)
    : queue_(queue.begin(), queue.end()) {}

ScriptedBackend::ScriptedBackend(ResponseFn fn) : fn_(std::move(fn)) {}

void ScriptedBackend::push(std::string response) {
  std::lock_guard lock(mutex_);
  queue_.push_back(std::move(response));
}

void ScriptedBackend::push(const std::string& agent, std::string response) {
  std::lock_guard lock(mutex_);
  agent_queues_[agent].push_back(std::move(response));
}

std::string ScriptedBackend::do_complete(const std::vector<ChatMessage>& messages,
                                         const CallTag& tag) {
  std::string response;
  if (fn_) {
    response = fn_(tag, messages);
  } else {
    std::lock_guard lock(mutex_);
    auto agent_queue = agent_queues_.find(tag.agent);
    if (agent_queue != agent_queues_.end() && !agent_queue->second.empty()) {
      response = std::move(agent_queue->second.front());
      agent_queue->second.pop_front();
    } else if (!queue_.empty()) {
      response = std::move(queue_.front());
      queue_.pop_front();
    } else {
      throw BackendError(kModule, "scripted response queue exhausted (agent '" + tag.agent +
                                      "', " + tag.kind + ", round " + std::to_string(tag.round) +
                                      ")");
    }
  }
  std::lock_guard lock(mutex_);
  log_.push_back({tag, messages, response});
  return response;
}

std::vector<RecordedCall> ScriptedBackend::log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mutex_);
  return log_.size();
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_rules(const nlohmann::json& script) {
  if (!script.is_object() || !script.contains("rules") || !script["rules"].is_array()) {
    throw ConfigError(kModule, "script must be an object with a 'rules' array");
  }
  const std::uint64_t seed = script.value("seed", std::uint64_t{0});
  std::vector<Rule> rules;
  for (const auto& entry : script["rules"]) {
    if (!entry.is_object()) throw ConfigError(kModule, "each script rule must be an object");
    Rule rule;
    for (const auto& key : kMatchKeys) {
      if (entry.contains(key)) rule.match[key] = entry[key];
    }
    int modes = 0;
    for (const char* mode : {"response", "by_round", "random"}) {
      if (entry.contains(mode)) {
        rule.mode = mode;
        rule.respond = entry[mode];
        ++modes;
      }
    }
    if (modes != 1) {
      throw ConfigError(kModule, "rule needs exactly one of response, by_round, random: " +
                                     entry.dump());
    }
    if (rule.mode == "response" ? !rule.respond.is_string()
                                : !rule.respond.is_array() || rule.respond.empty()) {
      throw ConfigError(kModule, "malformed '" + rule.mode + "' in rule " + entry.dump());
    }
    rules.push_back(std::move(rule));
  }

  auto fn = [rules = std::move(rules), seed](const CallTag& tag,
                                             const std::vector<ChatMessage>&) -> std::string {
    for (const auto& rule : rules) {
      if (!rule_matches(rule, tag)) continue;
      if (rule.mode == "response") return expand(rule.respond.get<std::string>(), tag);
      const auto& options = rule.respond;
      std::size_t index = 0;
      if (rule.mode == "by_round") {
        index = std::min<std::size_t>(static_cast<std::size_t>(std::max(tag.round, 1) - 1),
                                      options.size() - 1);
      } else {
        const auto key = tag.debate_id + "|" + tag.agent + "|" + tag.kind + "|" +
                         std::to_string(tag.round) + "|" + std::to_string(tag.attempt);
        Rng rng(mix_seed(seed, key));
        index = static_cast<std::size_t>(rng.uniform_index(options.size()));
      }
      return expand(options[index].get<std::string>(), tag);
    }
    throw BackendError(kModule, "no script rule matches agent '" + tag.agent + "', kind '" +
                                    tag.kind + "', round " + std::to_string(tag.round));
  };
  return std::make_unique<ScriptedBackend>(ResponseFn(std::move(fn)));
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_rules_file(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  const auto json = nlohmann::json::parse(text, nullptr, false);
  if (json.is_discarded()) {
    throw ConfigError(kModule, "script file " + path.string() + " is not valid JSON");
  }
  return from_rules(json);
}

}  // namespace beliefsim
