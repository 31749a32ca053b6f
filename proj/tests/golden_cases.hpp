#pragma once

// Canonical inputs for the prompt golden files; must match tests/golden/make_golden.py.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "beliefsim/dataset.hpp"
#include "beliefsim/prompts.hpp"

namespace golden {

namespace pk = beliefsim::prompts;

inline const std::vector<std::string> kTemplates = {
    "bfi2",          "belief_change",        "persuader",    "persuasion_target",
    "peer_pressure_mmlu", "peer_pressure_aporia", "reassessment",
};

// The five templates that have reference layouts.
inline const std::vector<std::string> kFigureTemplates = {
    "bfi2", "belief_change", "persuader", "peer_pressure_mmlu", "reassessment",
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

struct Fixtures {
  beliefsim::AporiaSample aporia;
  beliefsim::MMLUSample mmlu;
};

inline Fixtures load_fixtures(const std::filesystem::path& data_dir) {
  return {beliefsim::load_aporia(data_dir / "aporia_fixture.json").front(),
          beliefsim::load_mmlu(data_dir / "mmlu_fixture.csv").front()};
}

inline pk::Persona persona(const std::string& name, const beliefsim::Proposition& belief, int k) {
  pk::Persona p;
  p.name = name;
  p.openness_level = k;
  p.box.set(belief, beliefsim::BeliefStrength(k));
  return p;
}

inline pk::PromptPair render(const std::string& name, int k, const Fixtures& fx) {
  using namespace beliefsim;
  const Sample aporia = fx.aporia;
  const pk::History persuasion_history = {
      {"Persuading agent", "Selling a policy is simply part of the job."},
      {"Target agent", "I still think the sale hides something."},
  };
  if (name == "bfi2") {
    return pk::render_bfi2("I am someone who enjoys trying out unfamiliar ideas.", k);
  }
  if (name == "belief_change") {
    return pk::render_belief_change(fx.aporia, k, pk::ChangeDirection::misaligned_to_aligned);
  }
  if (name == "persuader") {
    const auto aligned = make_belief(aporia, Stance::aligned, BeliefStrength(k)).proposition;
    return pk::render_persuasion(pk::PersuasionRole::persuader, fx.aporia,
                                 persona("Persuading agent", aligned, k), persuasion_history,
                                 &aligned);
  }
  if (name == "persuasion_target") {
    const auto misaligned = make_belief(aporia, Stance::misaligned, BeliefStrength(k)).proposition;
    return pk::render_persuasion(pk::PersuasionRole::target, fx.aporia,
                                 persona("Target agent", misaligned, k), persuasion_history,
                                 nullptr);
  }
  if (name == "peer_pressure_mmlu") {
    const Sample mmlu = fx.mmlu;
    const auto correct = make_belief(mmlu, Stance::correct, BeliefStrength(k)).proposition;
    return pk::render_peer_pressure(mmlu, persona("Agent 3", correct, k),
                                    {{"Agent 1", "Sodium is written as S, so I pick (A)."},
                                     {"Agent 2", "I agree with Agent 1 and choose (A)."}});
  }
  if (name == "peer_pressure_aporia") {
    const auto aligned = make_belief(aporia, Stance::aligned, BeliefStrength(k)).proposition;
    return pk::render_peer_pressure(aporia, persona("Agent 3", aligned, k),
                                    {{"Agent 1", "The rule was broken, so B."},
                                     {"Agent 2", "I also endorse B."}});
  }
  return pk::render_reassessment("I fully concede.", BeliefStrength(k));
}

inline std::filesystem::path golden_path(const std::filesystem::path& dir, const std::string& name,
                                         int k, const char* part) {
  return dir / (name + "_L" + std::to_string(k) + "." + part + ".txt");
}

}  // namespace golden
