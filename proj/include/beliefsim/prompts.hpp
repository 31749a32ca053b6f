#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "beliefsim/core.hpp"
#include "beliefsim/dataset.hpp"

namespace beliefsim::prompts {

// Template resources live under resources/templates/<version>/ and are
// compiled into the library.
inline constexpr std::string_view kTemplateVersion = "v1";

struct PromptPair {
  std::string system;
  std::string user;

  friend bool operator==(const PromptPair&, const PromptPair&) = default;
};

struct HistoryTurn {
  std::string speaker;
  std::string text;
};

using History = std::vector<HistoryTurn>;

enum class ScaleKind { open_mindedness, belief_strength };

struct ScaleText {
  ScaleKind kind;
  int level;
  std::string_view label;  // "Very Low" .. "Very High"
  std::string_view description;
};

const ScaleText& scale_text(ScaleKind kind, int level);

// Raw template body by name, e.g. "bfi2.system". Throws DomainError if unknown.
std::string_view template_text(std::string_view name);
std::vector<std::string> template_names();

// Single-pass {Placeholder} substitution. Substituted values are never
// rescanned, so braces inside values are emitted literally. Every placeholder
// in the template must be supplied.
std::string substitute(std::string_view templ, const std::map<std::string, std::string>& values);

// Building blocks shared by the templates.
std::string render_scale(ScaleKind kind);
std::string render_openness_level(int level);
std::string render_beliefs(const BeliefBox& box);
std::string render_history(const History& history);
std::string render_choices(const MMLUSample& sample);
std::string render_choices(const AporiaSample& sample);

// The persona an agent presents in debate prompts.
struct Persona {
  std::string name;
  BeliefBox box;
  int openness_level = 5;
};

PromptPair render_bfi2(std::string_view item_text, int level);

enum class ChangeDirection { misaligned_to_aligned, aligned_to_misaligned };

std::string to_string(ChangeDirection direction);

PromptPair render_belief_change(const AporiaSample& sample, int level, ChangeDirection direction);

enum class PersuasionRole { persuader, target };

// target_belief is required for the persuader and ignored for the target.
// History must alternate speakers.
PromptPair render_persuasion(PersuasionRole role, const AporiaSample& sample,
                             const Persona& persona, const History& history,
                             const Proposition* target_belief, int max_sentences = 10);

PromptPair render_peer_pressure(const Sample& question, const Persona& persona,
                                const History& history, int max_sentences = 5);

PromptPair render_reassessment(std::string_view statement, BeliefStrength previous);

// Inverse of the reassessment user template: recovers the statement and the
// previous strength from a rendered user prompt.
struct ReassessmentView {
  std::string statement;
  int previous = 0;
};
std::optional<ReassessmentView> parse_reassessment_prompt(std::string_view user_prompt);

// Appended as a follow-up user message when the first answer fails to parse.
inline constexpr std::string_view kLikertClarification =
    "Please answer with a single number from 1 to 5.";
inline constexpr std::string_view kYesNoClarification =
    "Please answer with 'Yes' or 'No' only.";
inline constexpr std::string_view kChoiceClarification =
    "Please answer with a single letter: A, B, C, or D.";
inline constexpr std::string_view kStanceClarification =
    "Please answer with a single letter: A or B.";

// Response parsers. The try_ forms return nullopt where the throwing forms
// raise ParseError.
std::optional<int> try_parse_likert(std::string_view text);
std::optional<bool> try_parse_yes_no(std::string_view text);
std::optional<Choice> try_parse_choice(std::string_view text);

int parse_likert(std::string_view text);
bool parse_yes_no(std::string_view text);
Choice parse_choice(std::string_view text);

}  // namespace beliefsim::prompts
