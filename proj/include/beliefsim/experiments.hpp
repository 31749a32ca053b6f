#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "beliefsim/backend.hpp"
#include "beliefsim/debate.hpp"
#include "beliefsim/prompts.hpp"
#include "beliefsim/stats.hpp"

namespace beliefsim::experiments {

enum class ExperimentKind { bfi2, open_mindedness, persuasion, peer_pressure };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& text);

struct RunOptions {
  std::size_t concurrency = 4;
  std::function<void(const std::string&)> log;  // progress messages; may be empty
};

struct DataQuality {
  std::size_t observations = 0;      // trials attempted
  std::size_t retries = 0;           // clarification follow-ups sent
  std::size_t null_observations = 0; // unparseable after the retry
  std::size_t imputations = 0;       // carried-forward reassessments
  std::size_t backend_failures = 0;  // calls or debates lost to backend errors
  std::size_t excluded = 0;          // trials left out of the metrics

  nlohmann::json to_json() const;
};

struct Statistics {
  bool available = false;
  std::string reason;  // why the statistics are omitted
  stats::RegressionReport report;

  nlohmann::json to_json() const;
};

struct ResultRow {
  std::vector<std::string> condition;
  std::size_t n = 0;
  std::vector<std::optional<double>> metrics;
};

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::bfi2;
  std::string dataset;  // empty for bfi2
  std::vector<std::string> condition_columns;
  std::vector<std::string> metric_columns;
  std::vector<ResultRow> rows;
  std::optional<Statistics> statistics;
  DataQuality quality;
  std::vector<nlohmann::json> records;  // transcript lines, deterministic order

  std::string to_csv() const;
  nlohmann::json summary_json() const;
};

// Doubles in CSV/JSON text use the shortest representation that round-trips.
std::string format_double(double value);

// --- BFI-2 ----------------------------------------------------------------

struct Bfi2Item {
  std::string id;
  std::string trait;
  std::string text;
  bool reversed = false;
};

struct Bfi2Bank {
  std::vector<Bfi2Item> items;
  std::vector<std::string> declared_traits;  // optional "traits" list in the bank file

  // Declared traits, or traits in order of first appearance when none are declared.
  std::vector<std::string> traits() const;
};

Bfi2Bank parse_bfi2_bank(const std::string& json_text);
Bfi2Bank load_bfi2_bank(const std::filesystem::path& path);

// Maps a raw 1..5 response to its keyed value (6 - r for reverse-keyed items).
int keyed_response(int response, bool reversed);
// (mean keyed response - 1) / 4 * 100.
double trait_score(const std::vector<int>& keyed_responses);

ExperimentResult run_bfi2(const std::vector<int>& levels, const Bfi2Bank& bank, int runs,
                          ChatBackend& backend, const RunOptions& options = {});

// --- open-mindedness (counter-argument belief change) -----------------------

ExperimentResult run_openmindedness(const std::vector<AporiaSample>& samples,
                                    const std::vector<int>& levels,
                                    const std::vector<prompts::ChangeDirection>& directions,
                                    int runs, ChatBackend& backend, const RunOptions& options = {});

// --- persuasion ------------------------------------------------------------

// Persuader belief-box condition: which of p / not-p it holds, at what strength.
struct PersuasionCondition {
  std::optional<Stance> held;  // aligned (p) or misaligned (not-p); empty = neutral
  int strength = 0;

  std::string label() const;  // "p=5", "not_p=1", "neutral"
};

PersuasionCondition persuasion_condition_from_string(const std::string& text);
std::vector<PersuasionCondition> default_persuasion_conditions();

struct PersuasionSpec {
  int target_openness = 5;
  int persuader_openness = 1;
  int target_strength = 5;
};

ExperimentResult run_persuasion(const std::vector<AporiaSample>& samples,
                                const std::vector<PersuasionCondition>& conditions,
                                const DebateConfig& config, ChatBackend& backend,
                                const RunOptions& options = {}, const PersuasionSpec& spec = {});

// --- peer pressure ------------------------------------------------------------

struct PeerPressureSpec {
  int openness = 5;
  int initial_strength = 5;
  ChangeRule change_rule;
};

ExperimentResult run_peer_pressure(const std::vector<Sample>& samples,
                                   const std::vector<int>& group_sizes, const DebateConfig& config,
                                   ChatBackend& backend, const RunOptions& options = {},
                                   const PeerPressureSpec& spec = {});

// Builds the agents of one debate. Exposed for tests and the live smoke run.
std::vector<Agent> persuasion_agents(const AporiaSample& sample,
                                     const PersuasionCondition& condition,
                                     const PersuasionSpec& spec = {});
std::vector<Agent> peer_pressure_agents(const Sample& sample, int group_size, std::uint64_t seed,
                                        const PeerPressureSpec& spec = {});

// Runs jobs 0..count-1 on at most `concurrency` threads. The first exception
// thrown by a job is rethrown after all workers stop.
void parallel_for(std::size_t count, std::size_t concurrency,
                  const std::function<void(std::size_t)>& job);

}  // namespace beliefsim::experiments
