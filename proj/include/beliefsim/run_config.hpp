#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "beliefsim/backend.hpp"
#include "beliefsim/debate.hpp"
#include "beliefsim/experiments.hpp"
#include "beliefsim/toml.hpp"

namespace beliefsim {

inline constexpr const char* kApiKeyEnv = "BELIEFSIM_API_KEY";

struct RunConfig {
  experiments::ExperimentKind experiment = experiments::ExperimentKind::persuasion;
  std::uint64_t seed = 0;
  std::filesystem::path out = "runs/latest";
  std::size_t concurrency = 4;

  struct Dataset {
    std::optional<DatasetKind> kind;  // inferred from the file extension when unset
    std::filesystem::path path;
    std::size_t samples = 0;  // 0 = every item
  } dataset;

  struct Backend {
    std::string url;
    std::string model;
    double temperature = 0.7;
    int timeout_ms = 120000;
    int max_retries = 3;
    int initial_backoff_ms = 1000;
    std::optional<std::string> api_key;  // never echoed
    std::optional<std::filesystem::path> scripted;
  } backend;

  struct Debate {
    int rounds = 4;
    int runs = 5;
    bool reassess_every_round = true;
    StatementWindow statement_window = StatementWindow::full_history;
    int persuasion_max_sentences = 10;
    int peer_max_sentences = 5;
  } debate;

  struct Bfi2 {
    std::filesystem::path items;
    std::vector<int> levels = {1, 2, 3, 4, 5};
    int runs = 3;
  } bfi2;

  struct OpenMindedness {
    std::vector<int> levels = {1, 2, 3, 4, 5};
    std::vector<prompts::ChangeDirection> directions = {
        prompts::ChangeDirection::misaligned_to_aligned, prompts::ChangeDirection::aligned_to_misaligned};
    int runs = 3;
  } open_mindedness;

  struct Persuasion {
    std::vector<experiments::PersuasionCondition> conditions = experiments::default_persuasion_conditions();
    experiments::PersuasionSpec spec;
  } persuasion;

  struct PeerPressure {
    std::vector<int> group_sizes;  // empty = {1, 3} for MMLU, {1, 2, 3, 4} for Aporia
    experiments::PeerPressureSpec spec;
  } peer_pressure;

  DatasetKind dataset_kind() const;
  std::vector<int> peer_group_sizes() const;
  DebateConfig debate_config() const;
  // The API key comes from the config file, else from BELIEFSIM_API_KEY.
  BackendConfig backend_config(const toml::EnvLookup& env = toml::process_env()) const;
};

// Relative paths in the file are resolved against `base_dir`. Unknown keys
// are rejected so typos surface before any work starts.
RunConfig run_config_from_toml(const toml::Table& table, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path, const toml::EnvLookup& env = toml::process_env());

// Throws ConfigError for values outside their ranges or a missing backend.
void validate(const RunConfig& config);

// TOML text that loads back to the same configuration (minus the API key).
std::string to_toml(const RunConfig& config);

}  // namespace beliefsim
