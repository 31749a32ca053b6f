#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "beliefsim/backend.hpp"
#include "beliefsim/core.hpp"
#include "beliefsim/dataset.hpp"

namespace beliefsim {

enum class AgentRole { target, persuader, peer };

std::string to_string(AgentRole role);
AgentRole agent_role_from_string(const std::string& text);

struct Agent {
  std::string name;
  BeliefBox box;
  OpenMindedness openness{5};
  AgentRole role = AgentRole::peer;
  // The belief the agent argues toward. Required for persuaders.
  std::optional<Proposition> advocated;
  // The answer letter the agent's stance corresponds to (MMLU letter, or
  // A = aligned / B = misaligned for Aporia). Peer-pressure debates need it.
  std::optional<Choice> stance;
};

enum class StatementWindow { full_history, last_round };

std::string to_string(StatementWindow window);
StatementWindow statement_window_from_string(const std::string& text);

class DebateTranscript;

// Analytic revision: returns the argumentative force on `proposition` for
// `agent` after `round`; the new strength is revise_strength(prev, force, lambda).
using ForceFn = std::function<double(const Agent& agent, const Proposition& proposition, int round,
                                     const DebateTranscript& so_far)>;

struct DebateConfig {
  int rounds = 4;
  int runs = 5;
  std::uint64_t seed = 0;
  bool reassess_every_round = true;
  int persuasion_max_sentences = 10;
  int peer_max_sentences = 5;
  // Persuaders' boxes are the independent variable: reassessed and recorded,
  // but never updated.
  bool freeze_persuader_box = true;
  StatementWindow statement_window = StatementWindow::full_history;
  ForceFn force;  // empty = prompt-based reassessment
};

struct DebateIdentity {
  std::string debate_id;
  int run = 0;
  std::map<std::string, std::string> attributes;  // copied into every CallTag
};

enum class TurnKind { speak, reassess };

std::string to_string(TurnKind kind);

struct Turn {
  int round = 0;
  std::string speaker;
  AgentRole role = AgentRole::peer;
  TurnKind kind = TurnKind::speak;
  std::string prompt_system;
  std::string prompt_user;
  std::string response;
  std::optional<std::string> clarification_response;
  std::optional<Choice> parsed_choice;
  std::optional<std::string> proposition_id;
  std::optional<int> previous_strength;
  std::optional<int> reassessed_strength;
  bool imputed = false;

  friend bool operator==(const Turn&, const Turn&) = default;
};

class DebateTranscript {
 public:
  std::string debate_id;
  std::string sample_id;
  DatasetKind dataset = DatasetKind::aporia;
  int run = 0;
  int rounds = 0;
  std::vector<std::string> agent_order;  // speaking order
  std::map<std::string, AgentRole> roles;
  std::map<std::string, BeliefBox> initial_boxes;
  std::map<std::string, BeliefBox> final_boxes;
  std::map<std::string, std::optional<Choice>> initial_stances;
  std::map<std::string, std::optional<Choice>> final_verdicts;
  std::map<std::string, int> imputations;
  std::vector<Turn> turns;
  bool complete = true;
  std::string failure;

  const std::string& target() const;
  std::size_t speaking_turns() const;
  std::size_t reassessments() const;
  // Debates with more than one imputed reassessment for any agent are
  // excluded from metrics.
  bool excluded() const;

  // One JSON object per turn.
  std::vector<nlohmann::json> to_jsonl_records() const;
  nlohmann::json summary_json() const;
};

// Runs one debate. Agents speak in the given order each round except that
// the target always speaks last.
DebateTranscript run_debate(const std::vector<Agent>& agents, const Sample& sample,
                            const DebateConfig& config, ChatBackend& backend,
                            const DebateIdentity& identity);

struct ChangeRule {
  // When set, a target whose held-belief strength falls to this value or
  // below also counts as changed.
  std::optional<int> strength_threshold;
};

// Whether the target changed its belief; nullopt when the final verdict is
// missing (data-quality exclusion). Throws DomainError on an incomplete transcript.
std::optional<bool> extract_change(const DebateTranscript& transcript, DatasetKind kind,
                                   const ChangeRule& rule = {});

// Per-round strengths of the agent's initially held proposition; 0 once the
// belief has left the box.
std::vector<int> trajectory(const DebateTranscript& transcript, const std::string& agent);
std::vector<bool> trajectory_imputed(const DebateTranscript& transcript, const std::string& agent);

// Reads transcript turn records back (as written by to_jsonl_records).
std::vector<nlohmann::json> read_jsonl(const std::string& text);
std::string to_jsonl(const std::vector<nlohmann::json>& records);

}  // namespace beliefsim
