#include "beliefsim/debate.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "beliefsim/error.hpp"
#include "beliefsim/prompts.hpp"

namespace beliefsim {

namespace {

constexpr const char* kModule = "debate";
namespace pk = prompts;

std::optional<Choice> parse_stance(std::string_view response, DatasetKind dataset) {
  const auto choice = pk::try_parse_choice(response);
  if (dataset == DatasetKind::aporia && choice && *choice != Choice::A && *choice != Choice::B) {
    return std::nullopt;
  }
  return choice;
}

std::string letter(std::optional<Choice> choice) {
  return choice ? std::string(1, to_char(*choice)) : std::string();
}

std::string strip_trailing_newline(std::string text) {
  while (!text.empty() && text.back() == '\n') text.pop_back();
  return text;
}

void validate_agents(const std::vector<Agent>& agents, const Sample& sample,
                     const DebateConfig& config) {
  if (config.rounds < 1) {
    throw DomainError(kModule, "rounds must be >= 1");
  }
  if (agents.size() < 2) {
    throw DomainError(kModule, "a debate needs at least two agents");
  }
  std::set<std::string> names;
  int targets = 0, persuaders = 0, peers = 0;
  for (const auto& agent : agents) {
    if (agent.name.empty() || !names.insert(agent.name).second) {
      throw DomainError(kModule, "agent names must be unique and non-empty ('" + agent.name + "')");
    }
    switch (agent.role) {
      case AgentRole::target: ++targets; break;
      case AgentRole::persuader: ++persuaders; break;
      case AgentRole::peer: ++peers; break;
    }
  }
  if (targets != 1) {
    throw DomainError(kModule, "a debate needs exactly one target agent");
  }
  if (persuaders > 0 && peers > 0) {
    throw DomainError(kModule, "persuaders and peers cannot share a debate");
  }
  if (persuaders > 0) {
    if (!std::holds_alternative<AporiaSample>(sample)) {
      throw DomainError(kModule, "persuasion debates run on Aporia samples");
    }
    for (const auto& agent : agents) {
      if (agent.role == AgentRole::persuader && !agent.advocated) {
        throw DomainError(kModule, "persuader '" + agent.name + "' has no belief to advocate");
      }
    }
  } else {
    for (const auto& agent : agents) {
      if (!agent.stance) {
        throw DomainError(kModule, "peer-pressure agent '" + agent.name + "' has no stance letter");
      }
    }
  }
}

class DebateRun {
 public:
  DebateRun(const std::vector<Agent>& agents, const Sample& sample, const DebateConfig& config,
            ChatBackend& backend, const DebateIdentity& identity)
      : sample_(sample), config_(config), backend_(backend), identity_(identity) {
    for (const auto& agent : agents) {
      if (agent.role != AgentRole::target) agents_.push_back(agent);
    }
    for (const auto& agent : agents) {
      if (agent.role == AgentRole::target) agents_.push_back(agent);
    }
    persuasion_ = std::any_of(agents_.begin(), agents_.end(),
                              [](const Agent& a) { return a.role == AgentRole::persuader; });
    group_size_ = static_cast<int>(agents_.size()) - 1;

    t_.debate_id = identity.debate_id;
    t_.sample_id = sample_id(sample);
    t_.dataset = kind_of(sample);
    t_.run = identity.run;
    t_.rounds = config.rounds;
    for (const auto& agent : agents_) {
      t_.agent_order.push_back(agent.name);
      t_.roles[agent.name] = agent.role;
      t_.initial_boxes[agent.name] = agent.box;
      t_.initial_stances[agent.name] = agent.stance;
      t_.imputations[agent.name] = 0;
    }
  }

  DebateTranscript run() {
    try {
      for (int round = 1; round <= config_.rounds; ++round) {
        round_start_ = history_.size();
        for (const auto& agent : agents_) speak(agent, round);
        if (config_.reassess_every_round) {
          for (auto& agent : agents_) reassess(agent, round);
        }
      }
    } catch (const BackendError& error) {
      t_.complete = false;
      t_.failure = error.what();
    }
    for (const auto& agent : agents_) {
      t_.final_boxes[agent.name] = agent.box;
    }
    if (!persuasion_ && t_.complete) {
      for (const auto& turn : t_.turns) {
        if (turn.kind == TurnKind::speak && turn.round == config_.rounds) {
          t_.final_verdicts[turn.speaker] = turn.parsed_choice;
        }
      }
    }
    return std::move(t_);
  }

 private:
  const Agent& target() const { return agents_.back(); }

  CallTag tag_for(const Agent& agent, const char* kind, int round) const {
    CallTag tag;
    tag.debate_id = identity_.debate_id;
    tag.agent = agent.name;
    tag.kind = kind;
    tag.round = round;
    tag.attributes = identity_.attributes;
    tag.attributes["protocol"] = persuasion_ ? "persuasion" : "peer_pressure";
    tag.attributes["role"] = to_string(agent.role);
    tag.attributes["rounds"] = std::to_string(config_.rounds);
    tag.attributes["final"] = round == config_.rounds ? "true" : "false";
    tag.attributes["group_size"] = std::to_string(group_size_);
    tag.attributes["sample_id"] = t_.sample_id;
    tag.attributes["dataset"] = to_string(t_.dataset);
    tag.attributes["run"] = std::to_string(identity_.run);
    if (agent.stance) {
      tag.attributes["held_letter"] = letter(agent.stance);
      const auto& other = agent.role == AgentRole::target ? agents_.front() : target();
      if (other.stance) tag.attributes["opposing_letter"] = letter(other.stance);
    }
    return tag;
  }

  pk::PromptPair speaking_prompt(const Agent& agent) const {
    const pk::Persona persona{agent.name, agent.box, agent.openness.level()};
    if (persuasion_) {
      const auto& aporia = std::get<AporiaSample>(sample_);
      if (agent.role == AgentRole::persuader) {
        return pk::render_persuasion(pk::PersuasionRole::persuader, aporia, persona, history_,
                                     &*agent.advocated, config_.persuasion_max_sentences);
      }
      return pk::render_persuasion(pk::PersuasionRole::target, aporia, persona, history_, nullptr,
                                   config_.persuasion_max_sentences);
    }
    return pk::render_peer_pressure(sample_, persona, history_, config_.peer_max_sentences);
  }

  void speak(const Agent& agent, int round) {
    const auto prompt = speaking_prompt(agent);
    const std::vector<ChatMessage> messages = {{Role::system, prompt.system},
                                               {Role::user, prompt.user}};
    auto tag = tag_for(agent, "speak", round);
    Turn turn;
    turn.round = round;
    turn.speaker = agent.name;
    turn.role = agent.role;
    turn.kind = TurnKind::speak;
    turn.prompt_system = prompt.system;
    turn.prompt_user = prompt.user;
    turn.response = backend_.complete(messages, tag);
    if (!persuasion_) {
      turn.parsed_choice = parse_stance(turn.response, t_.dataset);
      const bool verdict_turn = agent.role == AgentRole::target && round == config_.rounds;
      if (!turn.parsed_choice && verdict_turn) {
        auto retry = messages;
        retry.push_back({Role::assistant, turn.response});
        retry.push_back({Role::user, std::string(t_.dataset == DatasetKind::mmlu
                                                     ? pk::kChoiceClarification
                                                     : pk::kStanceClarification)});
        tag.attempt = 1;
        turn.clarification_response = backend_.complete(retry, tag);
        turn.parsed_choice = parse_stance(*turn.clarification_response, t_.dataset);
      }
    }
    history_.push_back({agent.name, turn.response});
    t_.turns.push_back(std::move(turn));
  }

  std::string statement() const {
    if (config_.statement_window == StatementWindow::last_round) {
      const pk::History window(history_.begin() + static_cast<std::ptrdiff_t>(round_start_),
                               history_.end());
      return strip_trailing_newline(pk::render_history(window));
    }
    return strip_trailing_newline(pk::render_history(history_));
  }

  void reassess(Agent& agent, int round) {
    const auto entries = agent.box.entries();
    for (const auto& entry : entries) {
      Turn turn;
      turn.round = round;
      turn.speaker = agent.name;
      turn.role = agent.role;
      turn.kind = TurnKind::reassess;
      turn.proposition_id = entry.proposition.id;
      turn.previous_strength = entry.strength.value();

      BeliefStrength next = entry.strength;
      if (config_.force) {
        const double force = config_.force(agent, entry.proposition, round, t_);
        next = revise_strength(entry.strength, force, agent.openness.coefficient());
      } else {
        const auto prompt = pk::render_reassessment(statement(), entry.strength);
        const std::vector<ChatMessage> messages = {{Role::system, prompt.system},
                                                   {Role::user, prompt.user}};
        auto tag = tag_for(agent, "reassess", round);
        tag.attributes["proposition_id"] = entry.proposition.id;
        tag.attributes["previous"] = std::to_string(entry.strength.value());
        turn.prompt_system = prompt.system;
        turn.prompt_user = prompt.user;
        turn.response = backend_.complete(messages, tag);
        auto parsed = pk::try_parse_likert(turn.response);
        if (!parsed) {
          auto retry = messages;
          retry.push_back({Role::assistant, turn.response});
          retry.push_back({Role::user, std::string(pk::kLikertClarification)});
          tag.attempt = 1;
          turn.clarification_response = backend_.complete(retry, tag);
          parsed = pk::try_parse_likert(*turn.clarification_response);
        }
        if (parsed) {
          next = BeliefStrength(*parsed);
        } else {
          turn.imputed = true;
          ++t_.imputations[agent.name];
        }
      }
      turn.reassessed_strength = next.value();
      const bool frozen = agent.role == AgentRole::persuader && config_.freeze_persuader_box;
      if (!frozen) {
        agent.box.set(entry.proposition, next);
      }
      t_.turns.push_back(std::move(turn));
    }
  }

  const Sample& sample_;
  const DebateConfig& config_;
  ChatBackend& backend_;
  const DebateIdentity& identity_;
  std::vector<Agent> agents_;
  bool persuasion_ = false;
  int group_size_ = 1;
  pk::History history_;
  std::size_t round_start_ = 0;
  DebateTranscript t_;
};

}  // namespace

std::string to_string(AgentRole role) {
  switch (role) {
    case AgentRole::target: return "target";
    case AgentRole::persuader: return "persuader";
    case AgentRole::peer: return "peer";
  }
  return "peer";
}

AgentRole agent_role_from_string(const std::string& text) {
  if (text == "target") return AgentRole::target;
  if (text == "persuader") return AgentRole::persuader;
  if (text == "peer") return AgentRole::peer;
  throw DataError(kModule, "unknown agent role '" + text + "'");
}

std::string to_string(StatementWindow window) {
  return window == StatementWindow::full_history ? "full_history" : "last_round";
}

StatementWindow statement_window_from_string(const std::string& text) {
  if (text == "full_history") return StatementWindow::full_history;
  if (text == "last_round") return StatementWindow::last_round;
  throw ConfigError(kModule, "unknown statement window '" + text +
                                 "' (expected full_history or last_round)");
}

std::string to_string(TurnKind kind) {
  return kind == TurnKind::speak ? "speak" : "reassess";
}

const std::string& DebateTranscript::target() const {
  for (const auto& [name, role] : roles) {
    if (role == AgentRole::target) return name;
  }
  throw DomainError(kModule, "transcript has no target agent");
}

std::size_t DebateTranscript::speaking_turns() const {
  return static_cast<std::size_t>(std::count_if(
      turns.begin(), turns.end(), [](const Turn& t) { return t.kind == TurnKind::speak; }));
}

std::size_t DebateTranscript::reassessments() const {
  return turns.size() - speaking_turns();
}

bool DebateTranscript::excluded() const {
  return std::any_of(imputations.begin(), imputations.end(),
                     [](const auto& entry) { return entry.second > 1; });
}

std::vector<nlohmann::json> DebateTranscript::to_jsonl_records() const {
  std::vector<nlohmann::json> records;
  records.reserve(turns.size());
  for (const auto& turn : turns) {
    nlohmann::json record = {
        {"debate_id", debate_id},
        {"sample_id", sample_id},
        {"run", run},
        {"round", turn.round},
        {"speaker", turn.speaker},
        {"role", to_string(turn.role)},
        {"kind", to_string(turn.kind)},
        {"prompt_system", turn.prompt_system},
        {"prompt_user", turn.prompt_user},
        {"response", turn.response},
    };
    if (turn.clarification_response) record["clarification_response"] = *turn.clarification_response;
    if (turn.parsed_choice) record["parsed_choice"] = letter(turn.parsed_choice);
    if (turn.kind == TurnKind::reassess) {
      record["proposition_id"] = *turn.proposition_id;
      record["previous_strength"] = *turn.previous_strength;
      record["reassessed_strength"] = *turn.reassessed_strength;
      record["imputed"] = turn.imputed;
    }
    records.push_back(std::move(record));
  }
  return records;
}

nlohmann::json DebateTranscript::summary_json() const {
  nlohmann::json boxes_in = nlohmann::json::object(), boxes_out = nlohmann::json::object();
  nlohmann::json stances = nlohmann::json::object(), verdicts = nlohmann::json::object();
  for (const auto& [name, box] : initial_boxes) boxes_in[name] = box.to_json();
  for (const auto& [name, box] : final_boxes) boxes_out[name] = box.to_json();
  for (const auto& [name, stance] : initial_stances) {
    stances[name] = stance ? nlohmann::json(letter(stance)) : nlohmann::json();
  }
  for (const auto& [name, verdict] : final_verdicts) {
    verdicts[name] = verdict ? nlohmann::json(letter(verdict)) : nlohmann::json();
  }
  return {{"debate_id", debate_id},       {"sample_id", sample_id},
          {"run", run},                   {"rounds", rounds},
          {"complete", complete},         {"failure", failure},
          {"excluded", excluded()},       {"initial_boxes", boxes_in},
          {"final_boxes", boxes_out},     {"initial_stances", stances},
          {"final_verdicts", verdicts},   {"imputations", imputations}};
}

DebateTranscript run_debate(const std::vector<Agent>& agents, const Sample& sample,
                            const DebateConfig& config, ChatBackend& backend,
                            const DebateIdentity& identity) {
  validate_agents(agents, sample, config);
  return DebateRun(agents, sample, config, backend, identity).run();
}

std::vector<int> trajectory(const DebateTranscript& transcript, const std::string& agent) {
  const auto box = transcript.initial_boxes.find(agent);
  if (box == transcript.initial_boxes.end()) {
    throw DomainError(kModule, "no agent '" + agent + "' in debate " + transcript.debate_id);
  }
  if (box->second.empty()) {
    throw DomainError(kModule, "agent '" + agent + "' started with an empty belief box");
  }
  const auto& held = box->second.entries().front();
  std::vector<int> values;
  int last = held.strength.value();
  for (int round = 1; round <= transcript.rounds; ++round) {
    for (const auto& turn : transcript.turns) {
      if (turn.kind == TurnKind::reassess && turn.round == round && turn.speaker == agent &&
          turn.proposition_id == held.proposition.id) {
        last = *turn.reassessed_strength;
      }
    }
    values.push_back(last);
  }
  return values;
}

std::vector<bool> trajectory_imputed(const DebateTranscript& transcript, const std::string& agent) {
  std::vector<bool> flags(static_cast<std::size_t>(transcript.rounds), false);
  const auto box = transcript.initial_boxes.find(agent);
  if (box == transcript.initial_boxes.end() || box->second.empty()) return flags;
  const auto& id = box->second.entries().front().proposition.id;
  for (const auto& turn : transcript.turns) {
    if (turn.kind == TurnKind::reassess && turn.speaker == agent && turn.proposition_id == id &&
        turn.imputed) {
      flags[static_cast<std::size_t>(turn.round - 1)] = true;
    }
  }
  return flags;
}

std::optional<bool> extract_change(const DebateTranscript& transcript, DatasetKind kind,
                                   const ChangeRule& rule) {
  if (!transcript.complete) {
    throw DomainError(kModule, "debate " + transcript.debate_id + " is incomplete");
  }
  const auto& target = transcript.target();
  const auto initial = transcript.initial_stances.at(target);
  const auto verdict = transcript.final_verdicts.find(target);
  if (!initial || verdict == transcript.final_verdicts.end() || !verdict->second) {
    return std::nullopt;
  }
  bool changed = *verdict->second != *initial;
  const auto strengths = trajectory(transcript, target);
  const int lowest = *std::min_element(strengths.begin(), strengths.end());
  if (kind == DatasetKind::aporia && lowest == 0) changed = true;
  if (rule.strength_threshold && lowest <= *rule.strength_threshold) changed = true;
  return changed;
}

std::vector<nlohmann::json> read_jsonl(const std::string& text) {
  std::vector<nlohmann::json> records;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw DataError(kModule, "JSONL line " + std::to_string(number) + " is not a JSON object");
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::string to_jsonl(const std::vector<nlohmann::json>& records) {
  std::string out;
  for (const auto& record : records) {
    out += record.dump();
    out += '\n';
  }
  return out;
}

}  // namespace beliefsim
