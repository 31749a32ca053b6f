#include "beliefsim/experiments.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "beliefsim/error.hpp"

namespace beliefsim::experiments {

namespace {

constexpr const char* kModule = "experiments";
namespace pk = prompts;

void require_levels(const std::vector<int>& levels) {
  if (levels.empty()) throw ConfigError(kModule, "no open-mindedness levels given");
  for (int level : levels) {
    if (level < 1 || level > 5) {
      throw ConfigError(kModule, "open-mindedness level " + std::to_string(level) + " outside 1..5");
    }
  }
}

void require_runs(int runs) {
  if (runs < 1) throw ConfigError(kModule, "runs must be >= 1");
}

void note(const RunOptions& options, const std::string& message) {
  if (options.log) options.log(message);
}

double mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

// One prompt, one parse, at most one clarification retry.
struct SingleCall {
  std::string response;
  std::optional<std::string> clarification;
  bool backend_failed = false;
  std::string failure;
};

template <typename Parser>
SingleCall ask(ChatBackend& backend, const pk::PromptPair& prompt, CallTag tag,
               std::string_view clarification, Parser parse) {
  SingleCall call;
  const std::vector<ChatMessage> messages = {{Role::system, prompt.system},
                                             {Role::user, prompt.user}};
  try {
    call.response = backend.complete(messages, tag);
    if (!parse(call.response)) {
      auto retry = messages;
      retry.push_back({Role::assistant, call.response});
      retry.push_back({Role::user, std::string(clarification)});
      tag.attempt = 1;
      call.clarification = backend.complete(retry, tag);
    }
  } catch (const BackendError& error) {
    call.backend_failed = true;
    call.failure = error.what();
  }
  return call;
}

nlohmann::json call_record(const std::string& experiment, const std::string& call_id,
                           const pk::PromptPair& prompt, const SingleCall& call) {
  nlohmann::json record = {{"experiment", experiment},
                           {"call_id", call_id},
                           {"prompt_system", prompt.system},
                           {"prompt_user", prompt.user},
                           {"response", call.response}};
  if (call.clarification) record["clarification_response"] = *call.clarification;
  if (call.backend_failed) record["backend_error"] = call.failure;
  return record;
}

std::string direction_label(pk::ChangeDirection direction) {
  return pk::to_string(direction);
}

struct DebateJob {
  std::size_t condition = 0;
  std::size_t sample = 0;
  int run = 0;
};

void count_debate_quality(const DebateTranscript& transcript, DataQuality& quality) {
  ++quality.observations;
  for (const auto& turn : transcript.turns) {
    if (turn.clarification_response) ++quality.retries;
  }
  for (const auto& [name, count] : transcript.imputations) {
    quality.imputations += static_cast<std::size_t>(count);
  }
  if (!transcript.complete) ++quality.backend_failures;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::bfi2: return "bfi2";
    case ExperimentKind::open_mindedness: return "open_mindedness";
    case ExperimentKind::persuasion: return "persuasion";
    case ExperimentKind::peer_pressure: return "peer_pressure";
  }
  return "bfi2";
}

ExperimentKind experiment_kind_from_string(const std::string& text) {
  if (text == "bfi2") return ExperimentKind::bfi2;
  if (text == "open_mindedness" || text == "open-mindedness") return ExperimentKind::open_mindedness;
  if (text == "persuasion") return ExperimentKind::persuasion;
  if (text == "peer_pressure" || text == "peer-pressure") return ExperimentKind::peer_pressure;
  throw ConfigError(kModule, "unknown experiment '" + text +
                                 "' (expected bfi2, open_mindedness, persuasion, peer_pressure)");
}

std::string format_double(double value) {
  return fmt::format("{}", value);
}

nlohmann::json DataQuality::to_json() const {
  return {{"observations", observations},         {"retries", retries},
          {"null_observations", null_observations}, {"imputations", imputations},
          {"backend_failures", backend_failures},   {"excluded", excluded}};
}

nlohmann::json Statistics::to_json() const {
  if (!available) return {{"available", false}, {"reason", reason}};
  return {{"available", true},
          {"n", report.n},
          {"slope", report.slope},
          {"intercept", report.intercept},
          {"r", report.r},
          {"f", std::isinf(report.f) ? nlohmann::json() : nlohmann::json(report.f)},
          {"df_model", report.df_model},
          {"df_residual", report.df_residual},
          {"p", report.p},
          {"perfect_fit", report.perfect_fit}};
}

std::string ExperimentResult::to_csv() const {
  std::string out;
  for (const auto& column : condition_columns) out += csv_field(column) + ",";
  out += "n";
  for (const auto& column : metric_columns) out += "," + csv_field(column);
  out += "\n";
  for (const auto& row : rows) {
    for (const auto& value : row.condition) out += csv_field(value) + ",";
    out += std::to_string(row.n);
    for (const auto& metric : row.metrics) {
      out += ",";
      if (metric) out += format_double(*metric);
    }
    out += "\n";
  }
  return out;
}

nlohmann::json ExperimentResult::summary_json() const {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json entry = nlohmann::json::object();
    for (std::size_t i = 0; i < condition_columns.size(); ++i) {
      entry[condition_columns[i]] = row.condition[i];
    }
    entry["n"] = row.n;
    for (std::size_t i = 0; i < metric_columns.size(); ++i) {
      entry[metric_columns[i]] = row.metrics[i] ? nlohmann::json(*row.metrics[i]) : nlohmann::json();
    }
    table.push_back(std::move(entry));
  }
  nlohmann::json summary = {{"experiment", to_string(kind)},
                            {"rows", std::move(table)},
                            {"data_quality", quality.to_json()}};
  if (!dataset.empty()) summary["dataset"] = dataset;
  if (statistics) summary["statistics"] = statistics->to_json();
  return summary;
}

void parallel_for(std::size_t count, std::size_t concurrency,
                  const std::function<void(std::size_t)>& job) {
  if (concurrency == 0) throw ConfigError(kModule, "concurrency must be >= 1");
  const std::size_t workers = std::min(concurrency, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      while (!stop) {
        const std::size_t i = next++;
        if (i >= count) return;
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          stop = true;
        }
      }
    });
  }
  for (auto& thread : threads) thread.join();
  if (first_error) std::rethrow_exception(first_error);
}

// --- BFI-2 ----------------------------------------------------------------

std::vector<std::string> Bfi2Bank::traits() const {
  if (!declared_traits.empty()) return declared_traits;
  std::vector<std::string> order;
  for (const auto& item : items) {
    if (std::find(order.begin(), order.end(), item.trait) == order.end()) order.push_back(item.trait);
  }
  return order;
}

Bfi2Bank parse_bfi2_bank(const std::string& json_text) {
  const auto json = nlohmann::json::parse(json_text, nullptr, false);
  if (json.is_discarded()) throw DataError(kModule, "BFI-2 item bank is not valid JSON");
  const auto& list = json.is_object() && json.contains("items") ? json["items"] : json;
  if (!list.is_array()) throw DataError(kModule, "BFI-2 item bank must be an array of items");
  Bfi2Bank bank;
  if (json.is_object() && json.contains("traits")) {
    const auto& traits = json["traits"];
    if (!traits.is_array()) throw DataError(kModule, "'traits' must be an array of names");
    for (const auto& trait : traits) {
      if (!trait.is_string()) throw DataError(kModule, "'traits' must be an array of names");
      bank.declared_traits.push_back(trait.get<std::string>());
    }
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& entry = list[i];
    const std::string where = "item " + std::to_string(i + 1);
    for (const char* field : {"trait", "text"}) {
      if (!entry.contains(field) || !entry[field].is_string() || entry[field].get<std::string>().empty()) {
        throw DataError(kModule, where + ": field '" + field + "' missing or empty");
      }
    }
    Bfi2Item item;
    item.id = entry.value("id", "item-" + std::to_string(i + 1));
    item.trait = entry["trait"].get<std::string>();
    item.text = entry["text"].get<std::string>();
    if (entry.contains("reversed") && !entry["reversed"].is_boolean()) {
      throw DataError(kModule, where + ": field 'reversed' must be a boolean");
    }
    item.reversed = entry.value("reversed", false);
    if (!ids.insert(item.id).second) throw DataError(kModule, where + ": duplicate id " + item.id);
    bank.items.push_back(std::move(item));
  }
  return bank;
}

Bfi2Bank load_bfi2_bank(const std::filesystem::path& path) {
  return parse_bfi2_bank(read_text_file(path));
}

int keyed_response(int response, bool reversed) {
  if (response < 1 || response > 5) {
    throw DomainError(kModule, "Likert response " + std::to_string(response) + " outside 1..5");
  }
  return reversed ? 6 - response : response;
}

double trait_score(const std::vector<int>& keyed_responses) {
  if (keyed_responses.empty()) throw DomainError(kModule, "trait score of no responses");
  double sum = 0.0;
  for (int r : keyed_responses) sum += r;
  const double mean_response = sum / static_cast<double>(keyed_responses.size());
  return (mean_response - 1.0) / 4.0 * 100.0;
}

ExperimentResult run_bfi2(const std::vector<int>& levels, const Bfi2Bank& bank, int runs,
                          ChatBackend& backend, const RunOptions& options) {
  require_levels(levels);
  require_runs(runs);
  if (bank.items.empty()) throw ConfigError(kModule, "BFI-2 item bank is empty");
  const auto traits = bank.traits();
  for (const auto& trait : traits) {
    const bool has_item = std::any_of(bank.items.begin(), bank.items.end(),
                                      [&](const Bfi2Item& item) { return item.trait == trait; });
    if (!has_item) throw ConfigError(kModule, "trait '" + trait + "' has no items in the bank");
  }

  struct Outcome {
    std::optional<int> response;
    nlohmann::json record;
    bool retried = false;
    bool failed = false;
  };
  const std::size_t per_run = bank.items.size();
  const std::size_t per_level = per_run * static_cast<std::size_t>(runs);
  std::vector<Outcome> outcomes(levels.size() * per_level);

  parallel_for(outcomes.size(), options.concurrency, [&](std::size_t index) {
    const auto level = levels[index / per_level];
    const int run = static_cast<int>((index % per_level) / per_run);
    const auto& item = bank.items[index % per_run];
    const auto prompt = pk::render_bfi2(item.text, level);
    const std::string call_id =
        "bfi2/L" + std::to_string(level) + "/run" + std::to_string(run) + "/" + item.id;
    CallTag tag{call_id, "respondent", "bfi2", 0, 0,
                {{"level", std::to_string(level)},
                 {"run", std::to_string(run)},
                 {"item_id", item.id},
                 {"trait", item.trait},
                 {"reversed", item.reversed ? "true" : "false"}}};
    const auto call = ask(backend, prompt, tag, pk::kLikertClarification,
                          [](std::string_view text) { return pk::try_parse_likert(text).has_value(); });
    Outcome outcome;
    outcome.failed = call.backend_failed;
    outcome.retried = call.clarification.has_value();
    if (!call.backend_failed) {
      outcome.response = pk::try_parse_likert(call.clarification ? *call.clarification : call.response);
    }
    outcome.record = call_record("bfi2", call_id, prompt, call);
    outcome.record["level"] = level;
    outcome.record["run"] = run;
    outcome.record["item_id"] = item.id;
    outcome.record["trait"] = item.trait;
    outcome.record["reversed"] = item.reversed;
    outcome.record["parsed"] = outcome.response ? nlohmann::json(*outcome.response) : nlohmann::json();
    outcomes[index] = std::move(outcome);
  });

  ExperimentResult result;
  result.kind = ExperimentKind::bfi2;
  result.condition_columns = {"level", "trait"};
  result.metric_columns = {"score"};
  for (auto& outcome : outcomes) {
    ++result.quality.observations;
    if (outcome.retried) ++result.quality.retries;
    if (outcome.failed) ++result.quality.backend_failures;
    else if (!outcome.response) ++result.quality.null_observations;
    if (!outcome.response) ++result.quality.excluded;
    result.records.push_back(std::move(outcome.record));
  }

  for (std::size_t l = 0; l < levels.size(); ++l) {
    for (const auto& trait : traits) {
      std::vector<double> run_scores;
      for (int run = 0; run < runs; ++run) {
        std::vector<int> keyed;
        for (std::size_t i = 0; i < per_run; ++i) {
          const auto& item = bank.items[i];
          if (item.trait != trait) continue;
          const auto& outcome = outcomes[l * per_level + static_cast<std::size_t>(run) * per_run + i];
          if (outcome.response) keyed.push_back(keyed_response(*outcome.response, item.reversed));
        }
        if (!keyed.empty()) run_scores.push_back(trait_score(keyed));
      }
      ResultRow row;
      row.condition = {std::to_string(levels[l]), trait};
      row.n = run_scores.size();
      row.metrics = {run_scores.empty() ? std::nullopt : std::optional<double>(mean(run_scores))};
      result.rows.push_back(std::move(row));
    }
  }
  note(options, "bfi2: " + std::to_string(outcomes.size()) + " item responses collected");
  return result;
}

// --- open-mindedness --------------------------------------------------------

ExperimentResult run_openmindedness(const std::vector<AporiaSample>& samples,
                                    const std::vector<int>& levels,
                                    const std::vector<pk::ChangeDirection>& directions, int runs,
                                    ChatBackend& backend, const RunOptions& options) {
  if (samples.empty()) throw ConfigError(kModule, "open-mindedness experiment needs samples");
  if (directions.empty()) throw ConfigError(kModule, "no change directions given");
  require_levels(levels);
  require_runs(runs);

  struct Outcome {
    std::optional<bool> changed;
    nlohmann::json record;
    bool retried = false;
    bool failed = false;
  };
  const std::size_t per_cell = samples.size() * static_cast<std::size_t>(runs);
  const std::size_t cells = levels.size() * directions.size();
  std::vector<Outcome> outcomes(cells * per_cell);

  parallel_for(outcomes.size(), options.concurrency, [&](std::size_t index) {
    const std::size_t cell = index / per_cell;
    const int level = levels[cell / directions.size()];
    const auto direction = directions[cell % directions.size()];
    const int run = static_cast<int>((index % per_cell) / samples.size());
    const auto& sample = samples[index % samples.size()];
    const auto prompt = pk::render_belief_change(sample, level, direction);
    const std::string call_id = "open_mindedness/L" + std::to_string(level) + "/" +
                                direction_label(direction) + "/" + sample.id + "/run" +
                                std::to_string(run);
    CallTag tag{call_id, "respondent", "belief_change", 0, 0,
                {{"level", std::to_string(level)},
                 {"direction", direction_label(direction)},
                 {"sample_id", sample.id},
                 {"run", std::to_string(run)}}};
    const auto call = ask(backend, prompt, tag, pk::kYesNoClarification,
                          [](std::string_view text) { return pk::try_parse_yes_no(text).has_value(); });
    Outcome outcome;
    outcome.failed = call.backend_failed;
    outcome.retried = call.clarification.has_value();
    if (!call.backend_failed) {
      outcome.changed = pk::try_parse_yes_no(call.clarification ? *call.clarification : call.response);
    }
    outcome.record = call_record("open_mindedness", call_id, prompt, call);
    outcome.record["level"] = level;
    outcome.record["direction"] = direction_label(direction);
    outcome.record["sample_id"] = sample.id;
    outcome.record["run"] = run;
    outcome.record["parsed"] = outcome.changed ? nlohmann::json(*outcome.changed) : nlohmann::json();
    outcomes[index] = std::move(outcome);
  });

  ExperimentResult result;
  result.kind = ExperimentKind::open_mindedness;
  result.dataset = "aporia";
  result.condition_columns = {"level", "direction"};
  result.metric_columns = {"changed", "change_rate"};
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::vector<bool> included;
    for (std::size_t k = 0; k < per_cell; ++k) {
      auto& outcome = outcomes[cell * per_cell + k];
      ++result.quality.observations;
      if (outcome.retried) ++result.quality.retries;
      if (outcome.failed) ++result.quality.backend_failures;
      else if (!outcome.changed) ++result.quality.null_observations;
      if (outcome.changed) included.push_back(*outcome.changed);
      else ++result.quality.excluded;
      result.records.push_back(std::move(outcome.record));
    }
    ResultRow row;
    row.condition = {std::to_string(levels[cell / directions.size()]),
                     direction_label(directions[cell % directions.size()])};
    row.n = included.size();
    if (included.empty()) {
      row.metrics = {0.0, std::nullopt};
    } else {
      const auto changed = std::count(included.begin(), included.end(), true);
      row.metrics = {static_cast<double>(changed), belief_change_rate(included)};
    }
    result.rows.push_back(std::move(row));
  }
  note(options, "open_mindedness: " + std::to_string(outcomes.size()) + " trials collected");
  return result;
}

// --- persuasion ------------------------------------------------------------

std::string PersuasionCondition::label() const {
  if (!held) return "neutral";
  return std::string(*held == Stance::aligned ? "p=" : "not_p=") + std::to_string(strength);
}

PersuasionCondition persuasion_condition_from_string(const std::string& text) {
  if (text == "neutral") return {};
  const auto eq = text.find('=');
  if (eq != std::string::npos) {
    const auto head = text.substr(0, eq);
    const auto tail = text.substr(eq + 1);
    std::optional<Stance> held;
    if (head == "p") held = Stance::aligned;
    else if (head == "not_p" || head == "not-p" || head == "\xC2\xACp") held = Stance::misaligned;
    if (held && tail.size() == 1 && tail[0] >= '1' && tail[0] <= '5') {
      return {held, tail[0] - '0'};
    }
  }
  throw ConfigError(kModule, "unknown persuasion condition '" + text +
                                 "' (expected p=<1-5>, not_p=<1-5> or neutral)");
}

std::vector<PersuasionCondition> default_persuasion_conditions() {
  return {{Stance::aligned, 1}, {Stance::aligned, 5}, {Stance::misaligned, 1},
          {Stance::misaligned, 5}, {}};
}

std::vector<Agent> persuasion_agents(const AporiaSample& sample, const PersuasionCondition& condition,
                                     const PersuasionSpec& spec) {
  const Sample s = sample;
  Agent persuader;
  persuader.name = "Persuading agent";
  persuader.role = AgentRole::persuader;
  persuader.openness = OpenMindedness(spec.persuader_openness);
  persuader.advocated = make_belief(s, Stance::aligned, BeliefStrength(1)).proposition;
  if (condition.held) {
    const auto belief = make_belief(s, *condition.held, BeliefStrength(condition.strength));
    persuader.box.set(belief.proposition, belief.strength);
  }
  Agent target;
  target.name = "Target agent";
  target.role = AgentRole::target;
  target.openness = OpenMindedness(spec.target_openness);
  const auto held = make_belief(s, Stance::misaligned, BeliefStrength(spec.target_strength));
  target.box.set(held.proposition, held.strength);
  return {persuader, target};
}

ExperimentResult run_persuasion(const std::vector<AporiaSample>& samples,
                                const std::vector<PersuasionCondition>& conditions,
                                const DebateConfig& config, ChatBackend& backend,
                                const RunOptions& options, const PersuasionSpec& spec) {
  if (samples.empty()) throw ConfigError(kModule, "persuasion experiment needs samples");
  if (conditions.empty()) throw ConfigError(kModule, "no persuasion conditions given");
  require_runs(config.runs);
  if (config.rounds < 1) throw ConfigError(kModule, "rounds must be >= 1");

  std::vector<DebateJob> jobs;
  for (std::size_t c = 0; c < conditions.size(); ++c) {
    for (int run = 0; run < config.runs; ++run) {
      for (std::size_t s = 0; s < samples.size(); ++s) jobs.push_back({c, s, run});
    }
  }
  std::vector<DebateTranscript> transcripts(jobs.size());
  parallel_for(jobs.size(), options.concurrency, [&](std::size_t index) {
    const auto& job = jobs[index];
    const auto& condition = conditions[job.condition];
    const auto& sample = samples[job.sample];
    DebateIdentity identity{"persuasion/" + condition.label() + "/" + sample.id + "/run" +
                                std::to_string(job.run),
                            job.run,
                            {{"condition", condition.label()}}};
    transcripts[index] = run_debate(persuasion_agents(sample, condition, spec), Sample{sample},
                                    config, backend, identity);
    note(options, identity.debate_id + (transcripts[index].complete ? " done" : " FAILED: " +
                                                                          transcripts[index].failure));
  });

  ExperimentResult result;
  result.kind = ExperimentKind::persuasion;
  result.dataset = "aporia";
  result.condition_columns = {"condition"};
  result.metric_columns = {"mean_belief_score"};
  std::vector<ResultRow> rows(conditions.size());
  std::vector<std::vector<std::vector<std::vector<int>>>> per_run(
      conditions.size(), std::vector<std::vector<std::vector<int>>>(static_cast<std::size_t>(config.runs)));
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& t = transcripts[i];
    count_debate_quality(t, result.quality);
    if (!t.complete || t.excluded()) {
      ++result.quality.excluded;
    } else {
      per_run[jobs[i].condition][static_cast<std::size_t>(jobs[i].run)].push_back(
          trajectory(t, t.target()));
      ++rows[jobs[i].condition].n;
    }
    for (auto& record : t.to_jsonl_records()) {
      record["condition"] = conditions[jobs[i].condition].label();
      result.records.push_back(std::move(record));
    }
  }
  for (std::size_t c = 0; c < conditions.size(); ++c) {
    std::vector<double> run_means;
    for (const auto& trajectories : per_run[c]) {
      if (!trajectories.empty()) run_means.push_back(mean_belief_score(trajectories));
    }
    rows[c].condition = {conditions[c].label()};
    rows[c].metrics = {run_means.empty() ? std::nullopt : std::optional<double>(mean(run_means))};
    result.rows.push_back(std::move(rows[c]));
  }
  return result;
}

// --- peer pressure ------------------------------------------------------------

std::vector<Agent> peer_pressure_agents(const Sample& sample, int group_size, std::uint64_t seed,
                                        const PeerPressureSpec& spec) {
  if (group_size < 1) throw ConfigError(kModule, "peer group size must be >= 1");
  const bool mmlu = kind_of(sample) == DatasetKind::mmlu;
  const BeliefStrength strength(spec.initial_strength);
  std::vector<Agent> agents;
  const auto opposing = make_belief(sample, mmlu ? Stance::incorrect : Stance::misaligned, strength, seed);
  for (int i = 1; i <= group_size; ++i) {
    Agent peer;
    peer.name = "Agent " + std::to_string(i);
    peer.role = AgentRole::peer;
    peer.openness = OpenMindedness(spec.openness);
    peer.box.set(opposing.proposition, opposing.strength);
    peer.stance = mmlu ? opposing.letter : std::optional<Choice>(Choice::B);
    agents.push_back(std::move(peer));
  }
  const auto held = make_belief(sample, mmlu ? Stance::correct : Stance::aligned, strength, seed);
  Agent target;
  target.name = "Agent " + std::to_string(group_size + 1);
  target.role = AgentRole::target;
  target.openness = OpenMindedness(spec.openness);
  target.box.set(held.proposition, held.strength);
  target.stance = mmlu ? held.letter : std::optional<Choice>(Choice::A);
  agents.push_back(std::move(target));
  return agents;
}

ExperimentResult run_peer_pressure(const std::vector<Sample>& samples,
                                   const std::vector<int>& group_sizes, const DebateConfig& config,
                                   ChatBackend& backend, const RunOptions& options,
                                   const PeerPressureSpec& spec) {
  if (samples.empty()) throw ConfigError(kModule, "peer-pressure experiment needs samples");
  if (group_sizes.empty()) throw ConfigError(kModule, "no peer group sizes given");
  for (int size : group_sizes) {
    if (size < 1) throw ConfigError(kModule, "peer group size must be >= 1, got " + std::to_string(size));
  }
  require_runs(config.runs);
  if (config.rounds < 1) throw ConfigError(kModule, "rounds must be >= 1");
  const auto dataset = kind_of(samples.front());
  for (const auto& sample : samples) {
    if (kind_of(sample) != dataset) throw ConfigError(kModule, "samples mix MMLU and Aporia");
  }

  std::vector<DebateJob> jobs;
  for (std::size_t g = 0; g < group_sizes.size(); ++g) {
    for (int run = 0; run < config.runs; ++run) {
      for (std::size_t s = 0; s < samples.size(); ++s) jobs.push_back({g, s, run});
    }
  }
  std::vector<DebateTranscript> transcripts(jobs.size());
  parallel_for(jobs.size(), options.concurrency, [&](std::size_t index) {
    const auto& job = jobs[index];
    const int size = group_sizes[job.condition];
    const auto& sample = samples[job.sample];
    DebateIdentity identity{"peer_pressure/" + std::to_string(size) + "/" + sample_id(sample) +
                                "/run" + std::to_string(job.run),
                            job.run,
                            {}};
    transcripts[index] = run_debate(peer_pressure_agents(sample, size, config.seed, spec), sample,
                                    config, backend, identity);
    note(options, identity.debate_id + (transcripts[index].complete ? " done" : " FAILED: " +
                                                                          transcripts[index].failure));
  });

  ExperimentResult result;
  result.kind = ExperimentKind::peer_pressure;
  result.dataset = to_string(dataset);
  result.condition_columns = {"group_size"};
  result.metric_columns = {"changed", "change_rate"};
  std::vector<std::vector<bool>> outcomes(group_sizes.size());
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& t = transcripts[i];
    count_debate_quality(t, result.quality);
    std::optional<bool> changed;
    if (t.complete && !t.excluded()) {
      changed = extract_change(t, dataset, spec.change_rule);
      if (!changed) ++result.quality.null_observations;
    }
    if (changed) {
      outcomes[jobs[i].condition].push_back(*changed);
      xs.push_back(group_sizes[jobs[i].condition]);
      ys.push_back(*changed ? 1.0 : 0.0);
    } else {
      ++result.quality.excluded;
    }
    for (auto& record : t.to_jsonl_records()) {
      record["group_size"] = group_sizes[jobs[i].condition];
      result.records.push_back(std::move(record));
    }
  }
  for (std::size_t g = 0; g < group_sizes.size(); ++g) {
    ResultRow row;
    row.condition = {std::to_string(group_sizes[g])};
    row.n = outcomes[g].size();
    if (outcomes[g].empty()) {
      row.metrics = {0.0, std::nullopt};
    } else {
      const auto changed = std::count(outcomes[g].begin(), outcomes[g].end(), true);
      row.metrics = {static_cast<double>(changed), belief_change_rate(outcomes[g])};
    }
    result.rows.push_back(std::move(row));
  }

  Statistics statistics;
  try {
    statistics.report = stats::f_test_univariate(xs, ys);
    statistics.available = true;
  } catch (const UndefinedStatistic& error) {
    statistics.reason = error.what();
  } catch (const DomainError& error) {
    statistics.reason = error.what();
  }
  result.statistics = statistics;
  return result;
}

}  // namespace beliefsim::experiments
