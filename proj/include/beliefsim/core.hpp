#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace beliefsim {

enum class Polarity { p, not_p };

Polarity opposite(Polarity polarity);
std::string to_string(Polarity polarity);

// A natural-language belief. Propositions sharing a pair_id are negations of
// each other and carry opposite polarity.
struct Proposition {
  std::string id;
  std::string statement;
  Polarity polarity = Polarity::p;
  std::string pair_id;

  Proposition() = default;
  Proposition(std::string id, std::string statement, Polarity polarity, std::string pair_id);

  friend bool operator==(const Proposition&, const Proposition&) = default;
};

// Likert belief strength. 0 means "not in the belief box".
class BeliefStrength {
 public:
  static constexpr int kMin = 0;
  static constexpr int kMax = 5;

  constexpr BeliefStrength() = default;
  explicit BeliefStrength(int value);

  constexpr int value() const noexcept { return value_; }
  constexpr bool absent() const noexcept { return value_ == 0; }

  friend constexpr auto operator<=>(BeliefStrength, BeliefStrength) = default;

 private:
  int value_ = 0;
};

// Open-mindedness persona level on the 1..5 prompt scale, with the revision
// coefficient lambda = (level - 1) / 4.
class OpenMindedness {
 public:
  explicit OpenMindedness(int level);

  int level() const noexcept { return level_; }
  double coefficient() const noexcept;

  friend bool operator==(OpenMindedness, OpenMindedness) = default;

 private:
  int level_;
};

double openness_coefficient(int level);

struct BeliefEntry {
  Proposition proposition;
  BeliefStrength strength;

  friend bool operator==(const BeliefEntry&, const BeliefEntry&) = default;
};

// An agent's held beliefs in insertion order. Entries never have strength 0,
// and the two members of a p / not-p pair are never held together.
class BeliefBox {
 public:
  BeliefBox() = default;

  // Inserts or updates. Strength 0 removes the entry; adopting a proposition
  // removes its paired opposite.
  void set(const Proposition& proposition, BeliefStrength strength);
  void erase(const std::string& proposition_id);

  BeliefStrength strength_of(const std::string& proposition_id) const;
  const BeliefEntry* find(const std::string& proposition_id) const;
  bool contains(const std::string& proposition_id) const { return find(proposition_id) != nullptr; }

  const std::vector<BeliefEntry>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }

  nlohmann::json to_json() const;
  static BeliefBox from_json(const nlohmann::json& json);

  friend bool operator==(const BeliefBox&, const BeliefBox&) = default;

 private:
  std::vector<BeliefEntry> entries_;
};

// Belief revision: round-half-up(prev + force * openness), clamped to [0, 5].
BeliefStrength revise_strength(BeliefStrength previous, double force, double openness);

// Fraction of true outcomes.
double belief_change_rate(const std::vector<bool>& outcomes);

// Mean over rounds within each trajectory, then unweighted mean across trajectories.
double mean_belief_score(std::span<const std::vector<int>> trajectories);

}  // namespace beliefsim
