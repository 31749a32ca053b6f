#include "beliefsim/core.hpp"

#include <algorithm>
#include <cmath>

#include "beliefsim/error.hpp"

namespace beliefsim {

namespace {
constexpr const char* kModule = "core";
}

Polarity opposite(Polarity polarity) {
  return polarity == Polarity::p ? Polarity::not_p : Polarity::p;
}

std::string to_string(Polarity polarity) {
  return polarity == Polarity::p ? "p" : "not-p";
}

Proposition::Proposition(std::string id_, std::string statement_, Polarity polarity_,
                         std::string pair_id_)
    : id(std::move(id_)),
      statement(std::move(statement_)),
      polarity(polarity_),
      pair_id(std::move(pair_id_)) {
  if (statement.empty()) {
    throw DomainError(kModule, "proposition '" + id + "' has an empty statement");
  }
}

BeliefStrength::BeliefStrength(int value) : value_(value) {
  if (value < kMin || value > kMax) {
    throw DomainError(kModule, "belief strength " + std::to_string(value) + " outside 0..5");
  }
}

OpenMindedness::OpenMindedness(int level) : level_(level) {
  if (level < 1 || level > 5) {
    throw DomainError(kModule, "open-mindedness level " + std::to_string(level) + " outside 1..5");
  }
}

double OpenMindedness::coefficient() const noexcept {
  return static_cast<double>(level_ - 1) / 4.0;
}

double openness_coefficient(int level) {
  return OpenMindedness(level).coefficient();
}

void BeliefBox::set(const Proposition& proposition, BeliefStrength strength) {
  if (proposition.statement.empty()) {
    throw DomainError(kModule, "proposition '" + proposition.id + "' has an empty statement");
  }
  if (strength.absent()) {
    erase(proposition.id);
    return;
  }
  const auto paired = [&](const BeliefEntry& entry) {
    return !proposition.pair_id.empty() && entry.proposition.id != proposition.id &&
           entry.proposition.pair_id == proposition.pair_id;
  };
  for (const auto& entry : entries_) {
    if (paired(entry) && entry.proposition.polarity == proposition.polarity) {
      throw DomainError(kModule, "pair '" + proposition.pair_id +
                                     "' already has a proposition with polarity " +
                                     to_string(proposition.polarity));
    }
  }
  std::erase_if(entries_, paired);
  for (auto& entry : entries_) {
    if (entry.proposition.id == proposition.id) {
      entry.proposition = proposition;
      entry.strength = strength;
      return;
    }
  }
  entries_.push_back({proposition, strength});
}

void BeliefBox::erase(const std::string& proposition_id) {
  std::erase_if(entries_,
                [&](const BeliefEntry& entry) { return entry.proposition.id == proposition_id; });
}

const BeliefEntry* BeliefBox::find(const std::string& proposition_id) const {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const BeliefEntry& entry) {
    return entry.proposition.id == proposition_id;
  });
  return it == entries_.end() ? nullptr : &*it;
}

BeliefStrength BeliefBox::strength_of(const std::string& proposition_id) const {
  const BeliefEntry* entry = find(proposition_id);
  return entry ? entry->strength : BeliefStrength{};
}

nlohmann::json BeliefBox::to_json() const {
  nlohmann::json beliefs = nlohmann::json::array();
  for (const auto& entry : entries_) {
    nlohmann::json belief;
    belief["id"] = entry.proposition.id;
    belief["statement"] = entry.proposition.statement;
    belief["strength"] = entry.strength.value();
    // Optional pairing metadata; readers that only know id/statement/strength ignore it.
    if (!entry.proposition.pair_id.empty()) {
      belief["pair_id"] = entry.proposition.pair_id;
      belief["polarity"] = to_string(entry.proposition.polarity);
    }
    beliefs.push_back(std::move(belief));
  }
  return nlohmann::json{{"beliefs", std::move(beliefs)}};
}

BeliefBox BeliefBox::from_json(const nlohmann::json& json) {
  if (!json.is_object() || !json.contains("beliefs") || !json["beliefs"].is_array()) {
    throw DataError(kModule, "belief box JSON must be an object with a 'beliefs' array");
  }
  BeliefBox box;
  for (const auto& belief : json["beliefs"]) {
    if (!belief.contains("id") || !belief.contains("statement") || !belief.contains("strength")) {
      throw DataError(kModule, "belief entry requires id, statement and strength");
    }
    const int strength = belief["strength"].get<int>();
    if (strength < 1 || strength > 5) {
      throw DataError(kModule, "serialized belief strength must be 1..5, got " +
                                   std::to_string(strength));
    }
    Polarity polarity = Polarity::p;
    if (belief.contains("polarity")) {
      const auto text = belief["polarity"].get<std::string>();
      if (text == "not-p") {
        polarity = Polarity::not_p;
      } else if (text != "p") {
        throw DataError(kModule, "unknown polarity '" + text + "'");
      }
    }
    box.set(Proposition(belief["id"].get<std::string>(), belief["statement"].get<std::string>(),
                        polarity, belief.value("pair_id", std::string{})),
            BeliefStrength(strength));
  }
  return box;
}

BeliefStrength revise_strength(BeliefStrength previous, double force, double openness) {
  if (!std::isfinite(force)) {
    throw DomainError(kModule, "argumentative force must be finite");
  }
  if (!(openness >= 0.0 && openness <= 1.0)) {
    throw DomainError(kModule, "openness coefficient must lie in [0, 1]");
  }
  const double revised = std::floor(previous.value() + force * openness + 0.5);
  return BeliefStrength(static_cast<int>(
      std::clamp(revised, double{BeliefStrength::kMin}, double{BeliefStrength::kMax})));
}

double belief_change_rate(const std::vector<bool>& outcomes) {
  if (outcomes.empty()) {
    throw DomainError(kModule, "belief change rate of an empty outcome list");
  }
  const auto changed = std::count(outcomes.begin(), outcomes.end(), true);
  return static_cast<double>(changed) / static_cast<double>(outcomes.size());
}

double mean_belief_score(std::span<const std::vector<int>> trajectories) {
  if (trajectories.empty()) {
    throw DomainError(kModule, "mean belief score of no trajectories");
  }
  double total = 0.0;
  for (const auto& trajectory : trajectories) {
    if (trajectory.empty()) {
      throw DomainError(kModule, "mean belief score of an empty trajectory");
    }
    double sum = 0.0;
    for (int strength : trajectory) {
      if (strength < BeliefStrength::kMin || strength > BeliefStrength::kMax) {
        throw DomainError(kModule, "trajectory strength " + std::to_string(strength) +
                                       " outside 0..5");
      }
      sum += strength;
    }
    total += sum / static_cast<double>(trajectory.size());
  }
  return total / static_cast<double>(trajectories.size());
}

}  // namespace beliefsim
