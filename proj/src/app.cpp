#include "beliefsim/app.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "beliefsim/backend.hpp"
#include "beliefsim/dataset.hpp"
#include "beliefsim/debate.hpp"
#include "beliefsim/error.hpp"
#include "beliefsim/predictor.hpp"
#include "beliefsim/random.hpp"
#include "beliefsim/run_config.hpp"

namespace beliefsim::app {

namespace {

namespace fs = std::filesystem;
namespace ex = experiments;
namespace pr = predictor;

constexpr const char* kModule = "cli";

// Values given on the command line; each is applied only when its flag was present.
struct CommonFlags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string backend_url;
  std::string model;
  double temperature = 0.0;
  std::size_t concurrency = 0;
  std::string dataset;
  std::string scripted;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* url_opt = nullptr;
  CLI::Option* model_opt = nullptr;
  CLI::Option* temperature_opt = nullptr;
  CLI::Option* concurrency_opt = nullptr;
  CLI::Option* dataset_opt = nullptr;
  CLI::Option* scripted_opt = nullptr;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config, "TOML run configuration");
    seed_opt = cmd.add_option("--seed", seed, "Master seed");
    out_opt = cmd.add_option("--out", out, "Output directory");
    url_opt = cmd.add_option("--backend-url", backend_url, "Chat-completions base URL");
    model_opt = cmd.add_option("--model", model, "Model name sent to the backend");
    temperature_opt = cmd.add_option("--temperature", temperature, "Sampling temperature");
    concurrency_opt = cmd.add_option("--concurrency", concurrency, "Concurrent debates")->check(CLI::PositiveNumber);
    dataset_opt = cmd.add_option("--dataset", dataset, "Dataset file (.csv MMLU, .json Aporia)");
    scripted_opt = cmd.add_option("--scripted", scripted, "Rule script replacing the HTTP backend");
  }

  RunConfig load() const {
    RunConfig config = this->config.empty() ? RunConfig{} : load_run_config(this->config);
    if (seed_opt->count()) config.seed = seed;
    if (out_opt->count()) config.out = out;
    if (url_opt->count()) config.backend.url = backend_url;
    if (model_opt->count()) config.backend.model = model;
    if (temperature_opt->count()) config.backend.temperature = temperature;
    if (concurrency_opt->count()) config.concurrency = concurrency;
    if (dataset_opt->count()) config.dataset.path = fs::absolute(dataset);
    if (scripted_opt->count()) config.backend.scripted = fs::absolute(scripted);
    return config;
  }
};

struct RunFlags {
  CommonFlags common;
  std::string experiment;
  CLI::Option* experiment_opt = nullptr;
};

struct Bfi2Flags {
  CommonFlags common;
  std::string items;
  std::vector<int> levels;
  int runs = 0;
  CLI::Option* items_opt = nullptr;
  CLI::Option* levels_opt = nullptr;
  CLI::Option* runs_opt = nullptr;
};

struct ExampleInputs {
  std::vector<std::string> transcripts;
  std::vector<std::string> examples;
  std::size_t synthetic = 0;
  std::uint64_t synthetic_seed = 0;
  std::string statement_source = "prompt";
  CLI::Option* synthetic_seed_opt = nullptr;

  void attach(CLI::App& cmd) {
    cmd.add_option("--transcripts", transcripts, "transcripts.jsonl files or run directories");
    cmd.add_option("--examples", examples, "JSONL files of {statement, prev, next}");
    cmd.add_option("--synthetic", synthetic, "Add N rule-generated examples");
    synthetic_seed_opt = cmd.add_option("--synthetic-seed", synthetic_seed, "Seed of the synthetic corpus");
    cmd.add_option("--statement-source", statement_source, "prompt or last_line")
        ->check(CLI::IsMember({"prompt", "last_line"}));
  }
};

struct TrainFlags {
  ExampleInputs inputs;
  std::string kind = "ridge";
  std::uint64_t seed = 0;
  int trees = 100;
  std::vector<double> penalties;
  std::string model_out;
  std::string out;
};

struct EvalFlags {
  ExampleInputs inputs;
  std::string model;
};

struct ReportFlags {
  std::vector<std::string> results;
  std::string out = "report";
};

using Logger = std::shared_ptr<spdlog::logger>;

Logger make_logger(std::ostream& log_buffer, std::ostream& err) {
  auto file_sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(log_buffer);
  auto err_sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  auto logger = std::make_shared<spdlog::logger>("beliefsim", spdlog::sinks_init_list{file_sink, err_sink});
  logger->set_pattern("[%l] %v");
  logger->set_level(spdlog::level::info);
  return logger;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError(kModule, "cannot write " + path.string());
  file << text;
  if (!file.flush()) throw DataError(kModule, "cannot write " + path.string());
}

std::unique_ptr<ChatBackend> make_backend(const RunConfig& config) {
  if (config.backend.scripted) return ScriptedBackend::from_rules_file(*config.backend.scripted);
  return std::make_unique<HttpChatBackend>(config.backend_config());
}

template <typename T>
std::vector<T> pick_samples(const std::vector<T>& items, const RunConfig& config) {
  if (items.empty()) throw DataError(kModule, "dataset " + config.dataset.path.string() + " has no samples");
  if (config.dataset.samples == 0) return items;
  return sample_items(items, config.dataset.samples, mix_seed(config.seed, std::string_view("dataset")));
}

ex::ExperimentResult execute(const RunConfig& config, ChatBackend& backend, const Logger& log) {
  ex::RunOptions options;
  options.concurrency = config.concurrency;
  options.log = [log](const std::string& message) { log->info(message); };

  if (config.experiment == ex::ExperimentKind::bfi2) {
    const auto bank = ex::load_bfi2_bank(config.bfi2.items);
    log->info(fmt::format("bfi2: {} items, levels {}, {} runs", bank.items.size(),
                          fmt::join(config.bfi2.levels, " "), config.bfi2.runs));
    return ex::run_bfi2(config.bfi2.levels, bank, config.bfi2.runs, backend, options);
  }

  const auto kind = config.dataset_kind();
  if (kind == DatasetKind::aporia) {
    const auto samples = pick_samples(load_aporia(config.dataset.path), config);
    log->info(fmt::format("{}: {} Aporia samples", ex::to_string(config.experiment), samples.size()));
    switch (config.experiment) {
      case ex::ExperimentKind::open_mindedness:
        return ex::run_openmindedness(samples, config.open_mindedness.levels, config.open_mindedness.directions,
                                      config.open_mindedness.runs, backend, options);
      case ex::ExperimentKind::persuasion:
        return ex::run_persuasion(samples, config.persuasion.conditions, config.debate_config(), backend,
                                  options, config.persuasion.spec);
      default: {
        const std::vector<Sample> pooled(samples.begin(), samples.end());
        return ex::run_peer_pressure(pooled, config.peer_group_sizes(), config.debate_config(), backend,
                                     options, config.peer_pressure.spec);
      }
    }
  }
  const auto samples = pick_samples(load_mmlu(config.dataset.path), config);
  log->info(fmt::format("{}: {} MMLU samples", ex::to_string(config.experiment), samples.size()));
  const std::vector<Sample> pooled(samples.begin(), samples.end());
  return ex::run_peer_pressure(pooled, config.peer_group_sizes(), config.debate_config(), backend, options,
                               config.peer_pressure.spec);
}

void print_statistics(const ex::ExperimentResult& result, std::ostream& out) {
  if (!result.statistics) return;
  const auto& s = *result.statistics;
  if (!s.available) {
    out << "statistics omitted: " << s.reason << "\n";
    return;
  }
  const std::string f = std::isinf(s.report.f) ? "inf" : fmt::format("{:.4f}", s.report.f);
  out << fmt::format("r = {:.4f}, F({}, {}) = {}, p = {:.4g}\n", s.report.r, s.report.df_model,
                     s.report.df_residual, f, s.report.p);
}

int run_experiment(RunConfig config, std::ostream& out, std::ostream& err) {
  validate(config);
  std::ostringstream log_buffer;
  const auto log = make_logger(log_buffer, err);
  auto backend = make_backend(config);
  log->info(fmt::format("experiment {} seed {} backend {}", ex::to_string(config.experiment), config.seed,
                        backend->describe()));

  const auto result = execute(config, *backend, log);

  auto summary = result.summary_json();
  summary["seed"] = config.seed;
  summary["backend"] = backend->describe();
  const auto& q = result.quality;
  log->info(fmt::format("observations {} retries {} null {} imputed {} backend failures {} excluded {}",
                        q.observations, q.retries, q.null_observations, q.imputations, q.backend_failures,
                        q.excluded));

  const std::vector<std::pair<std::string, std::string>> files = {
      {"transcripts.jsonl", to_jsonl(result.records)},
      {"results.csv", result.to_csv()},
      {"summary.json", summary.dump(2) + "\n"},
      {"config.toml", to_toml(config)},
  };
  fs::create_directories(config.out);
  for (const auto& [name, text] : files) write_file(config.out / name, text);
  log->info(fmt::format("wrote {}", config.out.string()));
  write_file(config.out / "run.log", log_buffer.str());

  out << format_table(result);
  print_statistics(result, out);
  return 0;
}

std::vector<pr::BeliefUpdateExample> gather_examples(const ExampleInputs& inputs, std::uint64_t default_seed,
                                                     std::ostream& out) {
  std::vector<pr::BeliefUpdateExample> examples;
  const auto source = pr::statement_source_from_string(inputs.statement_source);
  for (const auto& item : inputs.transcripts) {
    fs::path path = item;
    if (fs::is_directory(path)) path /= "transcripts.jsonl";
    const auto mined = pr::mine_examples(read_jsonl(read_text_file(path)), source);
    out << fmt::format("{}: {} reassessments, {} examples (skipped {} imputed, {} deleted, {} malformed)\n",
                       path.string(), mined.reassessments, mined.examples.size(), mined.skipped_imputed,
                       mined.skipped_deleted, mined.skipped_malformed);
    examples.insert(examples.end(), mined.examples.begin(), mined.examples.end());
  }
  for (const auto& item : inputs.examples) {
    const auto loaded = pr::read_examples_jsonl(read_text_file(item));
    examples.insert(examples.end(), loaded.begin(), loaded.end());
  }
  if (inputs.synthetic > 0) {
    const auto seed = inputs.synthetic_seed_opt->count() ? inputs.synthetic_seed : default_seed;
    const auto generated = pr::synthetic_corpus(inputs.synthetic, seed);
    examples.insert(examples.end(), generated.begin(), generated.end());
  }
  if (examples.empty()) {
    throw DataError(kModule, "no examples: give --transcripts, --examples or --synthetic");
  }
  return examples;
}

int train(const TrainFlags& flags, std::ostream& out) {
  pr::PredictorConfig config;
  config.kind = pr::regressor_kind_from_string(flags.kind);
  config.seed = flags.seed;
  config.forest.trees = flags.trees;
  config.forest.seed = flags.seed;
  if (!flags.penalties.empty()) config.penalties = flags.penalties;
  if (flags.trees < 1) throw ConfigError(kModule, "--trees must be >= 1");

  const auto examples = gather_examples(flags.inputs, flags.seed, out);
  const auto result = pr::train_predictor(examples, config);

  if (!flags.out.empty()) {
    fs::create_directories(flags.out);
    write_file(fs::path(flags.out) / "training_report.json", result.to_json().dump(2) + "\n");
  }
  const fs::path model_path = flags.model_out;
  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  result.predictor.save(model_path);

  out << fmt::format("{} on {} examples (train {}, validation {}, test {})\n", pr::to_string(config.kind),
                     examples.size(), result.train_size, result.validation_size, result.test_size);
  if (result.test.n > 0) {
    out << fmt::format("test MAE {:.3f}, baseline MAE {:.3f} (constant {})\n", result.test.mae,
                       result.test.baseline_mae, ex::format_double(result.test.baseline_value));
  } else {
    out << "test split is empty; no evaluation\n";
  }
  out << "model written to " << model_path.string() << "\n";
  return 0;
}

int evaluate(const EvalFlags& flags, std::ostream& out) {
  const auto model = pr::BeliefPredictor::load(flags.model);
  const auto examples = gather_examples(flags.inputs, model.config().seed, out);
  const double baseline = model.baseline_value().value_or(pr::median_next(examples));
  const auto report = pr::evaluate(model, examples, baseline);
  out << fmt::format("examples {}\n", report.n);
  out << fmt::format("MAE {:.3f}\n", report.mae);
  out << fmt::format("baseline MAE {:.3f} (constant {})\n", report.baseline_mae,
                     ex::format_double(report.baseline_value));
  return 0;
}

int report(const ReportFlags& flags, std::ostream& out) {
  std::vector<fs::path> inputs(flags.results.begin(), flags.results.end());
  const auto files = build_report(inputs);
  fs::create_directories(flags.out);
  for (const auto& [name, text] : files) {
    write_file(fs::path(flags.out) / name, text);
    out << (fs::path(flags.out) / name).string() << "\n";
  }
  return 0;
}

}  // namespace

std::string format_table(const ex::ExperimentResult& result) {
  std::vector<std::string> header = result.condition_columns;
  header.push_back("n");
  header.insert(header.end(), result.metric_columns.begin(), result.metric_columns.end());

  std::vector<std::vector<std::string>> cells;
  for (const auto& row : result.rows) {
    std::vector<std::string> line = row.condition;
    line.push_back(std::to_string(row.n));
    for (std::size_t m = 0; m < row.metrics.size(); ++m) {
      const auto& metric = row.metrics[m];
      if (!metric) {
        line.push_back("-");
      } else if (result.metric_columns[m] == "changed") {
        line.push_back(fmt::format("{:.0f}", *metric));
      } else {
        line.push_back(fmt::format("{:.3f}", *metric));
      }
    }
    cells.push_back(std::move(line));
  }

  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& line : cells) width[c] = std::max(width[c], line[c].size());
  }
  const std::size_t conditions = result.condition_columns.size();
  auto render = [&](const std::vector<std::string>& line) {
    std::string text;
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c > 0) text += "  ";
      text += c < conditions ? fmt::format("{:<{}}", line[c], width[c]) : fmt::format("{:>{}}", line[c], width[c]);
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    return text + "\n";
  };

  std::string text = render(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  text += std::string(total + 2 * (width.size() - 1), '-') + "\n";
  for (const auto& line : cells) text += render(line);
  return text;
}

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Belief dynamics experiments with LLM agents"};
  app.name("beliefsim");
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment and write its output directory");
  run_flags.common.attach(*run_cmd);
  run_flags.experiment_opt = run_cmd->add_option("--experiment", run_flags.experiment,
                                                 "bfi2, open_mindedness, persuasion or peer_pressure");

  Bfi2Flags bfi2_flags;
  auto* bfi2_cmd = app.add_subcommand("bfi2", "Score the BFI-2 inventory per open-mindedness level");
  bfi2_flags.common.attach(*bfi2_cmd);
  bfi2_flags.items_opt = bfi2_cmd->add_option("--items", bfi2_flags.items, "Item bank JSON");
  bfi2_flags.levels_opt = bfi2_cmd->add_option("--levels", bfi2_flags.levels, "Levels, e.g. 1,3,5")->delimiter(',');
  bfi2_flags.runs_opt = bfi2_cmd->add_option("--runs", bfi2_flags.runs, "Repetitions per level");

  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train-predictor", "Fit the belief-update predictor");
  train_flags.inputs.attach(*train_cmd);
  train_cmd->add_option("--kind", train_flags.kind, "ridge or forest")
      ->check(CLI::IsMember({"ridge", "forest", "random_forest"}));
  train_cmd->add_option("--seed", train_flags.seed, "Split and forest seed");
  train_cmd->add_option("--trees", train_flags.trees, "Forest size");
  train_cmd->add_option("--penalties", train_flags.penalties, "Ridge penalties tried on validation")
      ->delimiter(',');
  train_cmd->add_option("--model-out", train_flags.model_out, "Model file to write")->required();
  train_cmd->add_option("--out", train_flags.out, "Directory for training_report.json");

  EvalFlags eval_flags;
  auto* eval_cmd = app.add_subcommand("eval-predictor", "Evaluate a saved predictor");
  eval_flags.inputs.attach(*eval_cmd);
  eval_cmd->add_option("--model", eval_flags.model, "Model file")->required();

  ReportFlags report_flags;
  auto* report_cmd = app.add_subcommand("report", "Merge results.csv files into plot-ready tables");
  report_cmd->add_option("--results", report_flags.results, "Run directories or results.csv files")->required();
  report_cmd->add_option("--out", report_flags.out, "Directory for the merged tables");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (run_cmd->parsed()) {
      auto config = run_flags.common.load();
      if (run_flags.experiment_opt->count()) {
        config.experiment = ex::experiment_kind_from_string(run_flags.experiment);
      }
      return run_experiment(std::move(config), out, err);
    }
    if (bfi2_cmd->parsed()) {
      auto config = bfi2_flags.common.load();
      config.experiment = ex::ExperimentKind::bfi2;
      if (bfi2_flags.items_opt->count()) config.bfi2.items = fs::absolute(bfi2_flags.items);
      if (bfi2_flags.levels_opt->count()) config.bfi2.levels = bfi2_flags.levels;
      if (bfi2_flags.runs_opt->count()) config.bfi2.runs = bfi2_flags.runs;
      return run_experiment(std::move(config), out, err);
    }
    if (train_cmd->parsed()) return train(train_flags, out);
    if (eval_cmd->parsed()) return evaluate(eval_flags, out);
    return report(report_flags, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << kModule << ": malformed JSON: " << e.what() << "\n";
  } catch (const fs::filesystem_error& e) {
    err << "error: " << kModule << ": " << e.what() << "\n";
  }
  return 1;
}

}  // namespace beliefsim::app
