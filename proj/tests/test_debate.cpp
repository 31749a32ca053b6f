#include <doctest.h>

#include "beliefsim/debate.hpp"
#include "beliefsim/error.hpp"
#include "beliefsim/prompts.hpp"

using namespace beliefsim;

namespace {

const std::filesystem::path kData = BELIEFSIM_TEST_DATA;

Sample aporia_sample() { return load_aporia(kData / "aporia_fixture.json").front(); }
Sample mmlu_sample() { return load_mmlu(kData / "mmlu_fixture.csv").front(); }

std::vector<Agent> persuasion_agents(const Sample& sample) {
  const auto aligned = make_belief(sample, Stance::aligned, BeliefStrength(5));
  const auto misaligned = make_belief(sample, Stance::misaligned, BeliefStrength(5));
  Agent persuader;
  persuader.name = "Persuading agent";
  persuader.role = AgentRole::persuader;
  persuader.openness = OpenMindedness(1);
  persuader.box.set(aligned.proposition, aligned.strength);
  persuader.advocated = aligned.proposition;
  Agent target;
  target.name = "Target agent";
  target.role = AgentRole::target;
  target.openness = OpenMindedness(5);
  target.box.set(misaligned.proposition, misaligned.strength);
  return {persuader, target};
}

std::vector<Agent> peer_agents(const Sample& sample, int group_size, std::uint64_t seed = 3) {
  std::vector<Agent> agents;
  const bool mmlu = kind_of(sample) == DatasetKind::mmlu;
  for (int i = 1; i <= group_size; ++i) {
    const auto belief = make_belief(sample, mmlu ? Stance::incorrect : Stance::misaligned,
                                    BeliefStrength(5), seed);
    Agent peer;
    peer.name = "Agent " + std::to_string(i);
    peer.role = AgentRole::peer;
    peer.box.set(belief.proposition, belief.strength);
    peer.stance = mmlu ? belief.letter : Choice::B;
    agents.push_back(peer);
  }
  const auto belief = make_belief(sample, mmlu ? Stance::correct : Stance::aligned, BeliefStrength(5));
  Agent target;
  target.name = "Agent " + std::to_string(group_size + 1);
  target.role = AgentRole::target;
  target.box.set(belief.proposition, belief.strength);
  target.stance = mmlu ? belief.letter : Choice::A;
  agents.push_back(target);
  return agents;
}

ScriptedBackend::ResponseFn persuasion_script() {
  return [](const CallTag& tag, const std::vector<ChatMessage>&) -> std::string {
    if (tag.kind == "reassess") {
      if (tag.attributes.at("role") == "target") return std::to_string(6 - tag.round);
      return "5";
    }
    return tag.agent + " argues in round " + std::to_string(tag.round) + ".";
  };
}

DebateConfig small_config() {
  DebateConfig config;
  config.rounds = 4;
  return config;
}

}  // namespace

TEST_CASE("scripted two-agent persuasion debate") {
  const auto sample = aporia_sample();
  ScriptedBackend backend(persuasion_script());
  const auto transcript = run_debate(persuasion_agents(sample), sample, small_config(), backend,
                                     {"persuasion/p=5/aporia-1/run0", 0, {}});
  CHECK(transcript.complete);
  CHECK(transcript.speaking_turns() == 8);
  CHECK(transcript.reassessments() == 8);
  CHECK(trajectory(transcript, "Target agent") == std::vector<int>{5, 4, 3, 2});
  CHECK(trajectory(transcript, "Persuading agent") == std::vector<int>{5, 5, 5, 5});
  CHECK(mean_belief_score(std::vector<std::vector<int>>{trajectory(transcript, "Target agent")}) == 3.5);
  CHECK(backend.calls() == 16);
  // The target's box tracks its reassessments; the persuader's stays fixed.
  CHECK(transcript.final_boxes.at("Target agent").entries().front().strength.value() == 2);
  CHECK(transcript.final_boxes.at("Persuading agent") == transcript.initial_boxes.at("Persuading agent"));
  // Persuader speaks first in every round.
  CHECK(transcript.turns.front().speaker == "Persuading agent");
  CHECK(transcript.turns[1].speaker == "Target agent");
}

TEST_CASE("debates are reproducible byte for byte") {
  const auto sample = aporia_sample();
  const auto run_once = [&] {
    ScriptedBackend backend(persuasion_script());
    const auto t = run_debate(persuasion_agents(sample), sample, small_config(), backend, {"d", 0, {}});
    return to_jsonl(t.to_jsonl_records());
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("replaying recorded responses reproduces the transcript") {
  const auto sample = mmlu_sample();
  ScriptedBackend original([](const CallTag& tag, const std::vector<ChatMessage>&) -> std::string {
    if (tag.kind == "reassess") return std::to_string(1 + (tag.round + tag.agent.size()) % 5);
    return "I pick (" + tag.attributes.at("held_letter") + ") in round " + std::to_string(tag.round);
  });
  const auto agents = peer_agents(sample, 3);
  const auto first = run_debate(agents, sample, small_config(), original, {"d", 1, {}});

  ScriptedBackend replay;
  for (const auto& call : original.log()) replay.push(call.response);
  const auto second = run_debate(agents, sample, small_config(), replay, {"d", 1, {}});
  CHECK(first.turns == second.turns);
  CHECK(to_jsonl(first.to_jsonl_records()) == to_jsonl(second.to_jsonl_records()));
  const auto log = original.log();
  const auto replayed = replay.log();
  REQUIRE(log.size() == replayed.size());
  for (std::size_t i = 0; i < log.size(); ++i) CHECK(log[i].messages == replayed[i].messages);
}

TEST_CASE("peer group of four plus target") {
  const auto sample = aporia_sample();
  ScriptedBackend backend([](const CallTag& tag, const std::vector<ChatMessage>&) -> std::string {
    return tag.kind == "reassess" ? "5" : "I endorse (" + tag.attributes.at("held_letter") + ").";
  });
  const auto transcript = run_debate(peer_agents(sample, 4), sample, small_config(), backend, {"d", 0, {}});
  CHECK(transcript.speaking_turns() == 20);
  CHECK(transcript.reassessments() == 20);
  CHECK(transcript.target() == "Agent 5");
  CHECK(transcript.turns[4].speaker == "Agent 5");
  CHECK(transcript.final_verdicts.at("Agent 5") == Choice::A);
  CHECK(extract_change(transcript, DatasetKind::aporia) == false);
}

TEST_CASE("history grows monotonically across rounds") {
  const auto sample = aporia_sample();
  ScriptedBackend backend(persuasion_script());
  const auto transcript = run_debate(persuasion_agents(sample), sample, small_config(), backend, {"d", 0, {}});
  std::string seen;
  for (const auto& turn : transcript.turns) {
    if (turn.kind != TurnKind::speak) continue;
    CHECK(turn.prompt_user.starts_with(seen + "###"));
    seen += turn.speaker + ": " + turn.response + "\n";
  }
  // Reassessment statements carry the full history so far.
  const auto& last = transcript.turns.back();
  CHECK(last.kind == TurnKind::reassess);
  const auto view = prompts::parse_reassessment_prompt(last.prompt_user);
  REQUIRE(view.has_value());
  CHECK(view->statement + "\n" == seen);
}

TEST_CASE("last-round statement window") {
  const auto sample = aporia_sample();
  ScriptedBackend backend(persuasion_script());
  auto config = small_config();
  config.statement_window = StatementWindow::last_round;
  const auto transcript = run_debate(persuasion_agents(sample), sample, config, backend, {"d", 0, {}});
  const auto view = prompts::parse_reassessment_prompt(transcript.turns.back().prompt_user);
  REQUIRE(view.has_value());
  CHECK(view->statement ==
        "Persuading agent: Persuading agent argues in round 4.\nTarget agent: Target agent argues in round 4.");
}

TEST_CASE("extract_change on MMLU verdicts") {
  const auto sample = mmlu_sample();  // correct = B
  const auto run_with = [&](std::string final_answer) {
    ScriptedBackend backend([final_answer](const CallTag& tag, const std::vector<ChatMessage>&) -> std::string {
      if (tag.kind == "reassess") return "5";
      if (tag.attributes.at("role") == "target" && tag.round == 4) return final_answer;
      return "I stay with (" + tag.attributes.at("held_letter") + ").";
    });
    return run_debate(peer_agents(sample, 1), sample, small_config(), backend, {"d", 0, {}});
  };
  CHECK(extract_change(run_with("Conclusion: (C)."), DatasetKind::mmlu) == true);
  CHECK(extract_change(run_with("I keep B."), DatasetKind::mmlu) == false);
  CHECK(extract_change(run_with("no letter here"), DatasetKind::mmlu) == std::nullopt);
}

TEST_CASE("verdict clarification retry") {
  const auto sample = mmlu_sample();
  ScriptedBackend backend([](const CallTag& tag, const std::vector<ChatMessage>& messages) -> std::string {
    if (tag.kind == "reassess") return "5";
    if (tag.attempt == 1) {
      CHECK(messages.size() == 4);
      CHECK(messages[2].role == Role::assistant);
      CHECK(messages[3].content == prompts::kChoiceClarification);
      return "D";
    }
    return tag.attributes.at("role") == "target" && tag.round == 4 ? "hmm" : "(A)";
  });
  const auto transcript = run_debate(peer_agents(sample, 1), sample, small_config(), backend, {"d", 0, {}});
  CHECK(transcript.final_verdicts.at("Agent 2") == Choice::D);
  CHECK(transcript.turns[13].speaker == "Agent 2");
  CHECK(transcript.turns[13].clarification_response == "D");
  CHECK(extract_change(transcript, DatasetKind::mmlu) == true);
}

TEST_CASE("Aporia stance rule dominates a falling trajectory") {
  const auto sample = aporia_sample();
  ScriptedBackend backend([](const CallTag& tag, const std::vector<ChatMessage>&) -> std::string {
    if (tag.kind == "reassess") {
      if (tag.attributes.at("role") != "target") return "5";
      const int values[] = {5, 4, 2, 1};
      return std::to_string(values[tag.round - 1]);
    }
    return "(" + tag.attributes.at("held_letter") + ")";
  });
  const auto transcript = run_debate(peer_agents(sample, 2), sample, small_config(), backend, {"d", 0, {}});
  CHECK(trajectory(transcript, "Agent 3") == std::vector<int>{5, 4, 2, 1});
  CHECK(extract_change(transcript, DatasetKind::aporia) == false);
  CHECK(extract_change(transcript, DatasetKind::aporia, {2}) == true);
  CHECK(extract_change(transcript, DatasetKind::aporia, {0}) == false);
}

TEST_CASE("analytic revision can delete a belief") {
  const auto sample = aporia_sample();
  ScriptedBackend backend([](const CallTag& tag, const std::vector<ChatMessage>&) -> std::string {
    return "(" + tag.attributes.at("held_letter") + ")";
  });
  auto config = small_config();
  config.force = [](const Agent& agent, const Proposition&, int, const DebateTranscript&) {
    return agent.role == AgentRole::target ? -2.0 : 0.0;
  };
  const auto transcript = run_debate(peer_agents(sample, 1), sample, config, backend, {"d", 0, {}});
  // lambda = 1 at open-mindedness 5: 5 -> 3 -> 1 -> 0, then absent.
  CHECK(trajectory(transcript, "Agent 2") == std::vector<int>{3, 1, 0, 0});
  CHECK(transcript.final_boxes.at("Agent 2").empty());
  CHECK(extract_change(transcript, DatasetKind::aporia) == true);
  CHECK(backend.calls() == 8);
}

TEST_CASE("reassessment parse failures are imputed") {
  const auto sample = aporia_sample();
  const auto script = [](int failures) {
    return [failures](const CallTag& tag, const std::vector<ChatMessage>&) -> std::string {
      if (tag.kind == "speak") return "Argument.";
      if (tag.attributes.at("role") != "target") return "5";
      if (tag.round == 2 || (failures > 1 && tag.round == 3)) return "I cannot say.";
      return std::to_string(6 - tag.round);
    };
  };
  ScriptedBackend one(script(1));
  const auto once = run_debate(persuasion_agents(sample), sample, small_config(), one, {"d", 0, {}});
  CHECK(trajectory(once, "Target agent") == std::vector<int>{5, 5, 3, 2});
  CHECK(trajectory_imputed(once, "Target agent") == std::vector<bool>{false, true, false, false});
  CHECK(once.imputations.at("Target agent") == 1);
  CHECK_FALSE(once.excluded());
  CHECK(one.calls() == 17);  // one clarification retry

  ScriptedBackend two(script(2));
  const auto twice = run_debate(persuasion_agents(sample), sample, small_config(), two, {"d", 0, {}});
  CHECK(trajectory(twice, "Target agent") == std::vector<int>{5, 5, 5, 2});
  CHECK(twice.excluded());
}

TEST_CASE("backend failure marks the debate incomplete") {
  const auto sample = aporia_sample();
  ScriptedBackend backend(std::vector<std::string>{"a", "b", "5"});
  const auto transcript = run_debate(persuasion_agents(sample), sample, small_config(), backend, {"d", 0, {}});
  CHECK_FALSE(transcript.complete);
  CHECK(transcript.failure.find("exhausted") != std::string::npos);
  CHECK_THROWS_AS(extract_change(transcript, DatasetKind::aporia), DomainError);
}

TEST_CASE("debate preconditions") {
  const auto sample = aporia_sample();
  ScriptedBackend backend(persuasion_script());
  auto agents = persuasion_agents(sample);
  CHECK_THROWS_AS(run_debate({agents[1]}, sample, small_config(), backend, {"d", 0, {}}), DomainError);
  auto two_targets = agents;
  two_targets[0].role = AgentRole::target;
  CHECK_THROWS_AS(run_debate(two_targets, sample, small_config(), backend, {"d", 0, {}}), DomainError);
  auto same_name = agents;
  same_name[1].name = same_name[0].name;
  CHECK_THROWS_AS(run_debate(same_name, sample, small_config(), backend, {"d", 0, {}}), DomainError);
  auto zero_rounds = small_config();
  zero_rounds.rounds = 0;
  CHECK_THROWS_AS(run_debate(agents, sample, zero_rounds, backend, {"d", 0, {}}), DomainError);
  CHECK_THROWS_AS(run_debate(agents, mmlu_sample(), small_config(), backend, {"d", 0, {}}), DomainError);
  CHECK(backend.calls() == 0);
}

TEST_CASE("transcript JSONL records") {
  const auto sample = aporia_sample();
  ScriptedBackend backend(persuasion_script());
  const auto transcript = run_debate(persuasion_agents(sample), sample, small_config(), backend, {"dbg", 2, {}});
  const auto text = to_jsonl(transcript.to_jsonl_records());
  const auto records = read_jsonl(text);
  REQUIRE(records.size() == 16);
  CHECK(records[0]["debate_id"] == "dbg");
  CHECK(records[0]["run"] == 2);
  CHECK(records[0]["kind"] == "speak");
  CHECK_FALSE(records[0].contains("reassessed_strength"));
  CHECK(records[2]["kind"] == "reassess");
  CHECK(records[2].contains("imputed"));
  for (const auto& record : records) {
    if (record.contains("reassessed_strength")) {
      CHECK(record["reassessed_strength"].get<int>() >= 0);
      CHECK(record["reassessed_strength"].get<int>() <= 5);
    }
  }
  CHECK_THROWS_AS(read_jsonl("{}\nnot json\n"), DataError);
}
