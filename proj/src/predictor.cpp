#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "beliefsim/dataset.hpp"
#include "beliefsim/error.hpp"
#include "beliefsim/predictor.hpp"
#include "beliefsim/prompts.hpp"
#include "beliefsim/random.hpp"
#include "beliefsim/stats.hpp"

namespace beliefsim::predictor {

namespace {

constexpr const char* kModule = "predictor";

std::vector<std::string> statements(const std::vector<BeliefUpdateExample>& examples) {
  std::vector<std::string> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.statement);
  return out;
}

std::vector<double> updates(const std::vector<BeliefUpdateExample>& examples) {
  std::vector<double> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(static_cast<double>(e.update()));
  return out;
}

nlohmann::json forest_config_json(const ForestConfig& c) {
  return {{"trees", c.trees},
          {"features_per_split", c.features_per_split},
          {"min_split", c.min_split},
          {"bootstrap", c.bootstrap},
          {"seed", c.seed}};
}

ForestConfig forest_config_from_json(const nlohmann::json& j) {
  ForestConfig c;
  c.trees = j.at("trees").get<int>();
  c.features_per_split = j.at("features_per_split").get<int>();
  c.min_split = j.at("min_split").get<int>();
  c.bootstrap = j.at("bootstrap").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

nlohmann::json report_json_value(double value, std::size_t n) {
  return n == 0 ? nlohmann::json() : nlohmann::json(value);
}

}  // namespace

void validate(const BeliefUpdateExample& example) {
  for (int value : {example.prev, example.next}) {
    if (value < 1 || value > 5) {
      throw DomainError(kModule, "belief strength " + std::to_string(value) + " outside 1..5");
    }
  }
}

Split split_dataset(const std::vector<BeliefUpdateExample>& examples, std::uint64_t seed) {
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t n = examples.size();
  const std::size_t train = n * 7 / 10;
  const std::size_t validation = n / 10;
  Split split;
  for (std::size_t k = 0; k < n; ++k) {
    auto& part = k < train ? split.train : k < train + validation ? split.validation : split.test;
    part.push_back(examples[order[k]]);
  }
  return split;
}

std::string to_string(RegressorKind kind) {
  return kind == RegressorKind::ridge ? "ridge" : "forest";
}

RegressorKind regressor_kind_from_string(const std::string& text) {
  if (text == "ridge") return RegressorKind::ridge;
  if (text == "forest" || text == "random_forest") return RegressorKind::forest;
  throw ConfigError(kModule, "unknown regressor '" + text + "' (expected ridge or forest)");
}

nlohmann::json PredictorConfig::to_json() const {
  return {{"kind", predictor::to_string(kind)},
          {"seed", seed},
          {"penalties", penalties},
          {"min_token_len", tfidf.min_token_len},
          {"forest", forest_config_json(forest)}};
}

PredictorConfig PredictorConfig::from_json(const nlohmann::json& json) {
  PredictorConfig config;
  config.kind = regressor_kind_from_string(json.at("kind").get<std::string>());
  config.seed = json.at("seed").get<std::uint64_t>();
  config.penalties = json.at("penalties").get<std::vector<double>>();
  config.tfidf.min_token_len = json.at("min_token_len").get<std::size_t>();
  config.forest = forest_config_from_json(json.at("forest"));
  return config;
}

int new_strength(int prev, double delta) {
  if (prev < 1 || prev > 5) {
    throw DomainError(kModule, "previous strength " + std::to_string(prev) + " outside 1..5");
  }
  if (!std::isfinite(delta)) throw DomainError(kModule, "predicted update is not finite");
  const double rounded = std::floor(static_cast<double>(prev) + delta + 0.5);
  return static_cast<int>(std::clamp(rounded, 0.0, 5.0));
}

BeliefPredictor::BeliefPredictor(TfidfModel tfidf, std::variant<RidgeModel, ForestModel> regressor,
                                 PredictorConfig config)
    : tfidf_(std::move(tfidf)), regressor_(std::move(regressor)), config_(std::move(config)) {
  config_.kind = std::holds_alternative<RidgeModel>(regressor_) ? RegressorKind::ridge : RegressorKind::forest;
}

RegressorKind BeliefPredictor::kind() const { return config_.kind; }

double BeliefPredictor::predict_update(std::string_view statement) const {
  const auto x = tfidf_.transform(statement);
  return std::visit([&](const auto& model) { return model.predict(x); }, regressor_);
}

int BeliefPredictor::predict_new_strength(std::string_view statement, int prev) const {
  if (prev < 1 || prev > 5) {
    throw DomainError(kModule, "previous strength " + std::to_string(prev) + " outside 1..5");
  }
  return new_strength(prev, predict_update(statement));
}

nlohmann::json BeliefPredictor::to_json() const {
  nlohmann::json json = {{"format_version", kModelFormatVersion},
                         {"tfidf", tfidf_.to_json()},
                         {"kind", predictor::to_string(kind())},
                         {"config", config_.to_json()}};
  if (baseline_value_) json["baseline_value"] = *baseline_value_;
  if (const auto* ridge = std::get_if<RidgeModel>(&regressor_)) {
    json["params"] = {{"weights", std::vector<double>(ridge->weights.data(),
                                                      ridge->weights.data() + ridge->weights.size())},
                      {"intercept", ridge->intercept},
                      {"penalty", ridge->penalty}};
  } else {
    const auto& forest = std::get<ForestModel>(regressor_);
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : forest.trees) {
      nlohmann::json nodes = nlohmann::json::array();
      for (const auto& node : tree.nodes) {
        nodes.push_back({node.feature, node.threshold, node.left, node.right, node.value});
      }
      trees.push_back({{"seed", tree.seed}, {"nodes", std::move(nodes)}});
    }
    json["forest"] = forest_config_json(forest.config);
    json["trees"] = std::move(trees);
  }
  return json;
}

BeliefPredictor BeliefPredictor::from_json(const nlohmann::json& json) {
  try {
    const int version = json.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw DataError(kModule, "unsupported model format_version " + std::to_string(version));
    }
    auto tfidf = TfidfModel::from_json(json.at("tfidf"));
    auto config = PredictorConfig::from_json(json.at("config"));
    const auto kind = regressor_kind_from_string(json.at("kind").get<std::string>());
    if (kind == RegressorKind::ridge) {
      const auto& params = json.at("params");
      const auto weights = params.at("weights").get<std::vector<double>>();
      if (weights.size() != tfidf.dimension()) throw DataError(kModule, "ridge weights do not match the vocabulary");
      RidgeModel ridge;
      ridge.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
      ridge.intercept = params.at("intercept").get<double>();
      ridge.penalty = params.at("penalty").get<double>();
      BeliefPredictor predictor(std::move(tfidf), ridge, config);
      if (json.contains("baseline_value")) predictor.set_baseline_value(json["baseline_value"].get<double>());
      return predictor;
    }
    ForestModel forest;
    forest.config = forest_config_from_json(json.at("forest"));
    for (const auto& tree_json : json.at("trees")) {
      RegressionTree tree;
      tree.seed = tree_json.at("seed").get<std::uint64_t>();
      for (const auto& node_json : tree_json.at("nodes")) {
        TreeNode node{node_json.at(0).get<int>(), node_json.at(1).get<double>(), node_json.at(2).get<int>(),
                      node_json.at(3).get<int>(), node_json.at(4).get<double>()};
        tree.nodes.push_back(node);
      }
      const auto size = static_cast<int>(tree.nodes.size());
      for (const auto& node : tree.nodes) {
        if (node.feature >= 0 && (node.left <= 0 || node.left >= size || node.right <= 0 || node.right >= size)) {
          throw DataError(kModule, "tree node points outside its tree");
        }
      }
      if (tree.nodes.empty()) throw DataError(kModule, "empty tree in model file");
      forest.trees.push_back(std::move(tree));
    }
    if (forest.trees.empty()) throw DataError(kModule, "forest model has no trees");
    BeliefPredictor predictor(std::move(tfidf), std::move(forest), config);
    if (json.contains("baseline_value")) predictor.set_baseline_value(json["baseline_value"].get<double>());
    return predictor;
  } catch (const nlohmann::json::exception& error) {
    throw DataError(kModule, std::string("malformed model file: ") + error.what());
  }
}

void BeliefPredictor::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(kModule, "cannot write model file " + path.string());
  out << to_json().dump() << "\n";
  if (!out) throw DataError(kModule, "failed writing model file " + path.string());
}

BeliefPredictor BeliefPredictor::load(const std::filesystem::path& path) {
  const auto json = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (json.is_discarded()) throw DataError(kModule, path.string() + " is not valid JSON");
  return from_json(json);
}

nlohmann::json EvaluationReport::to_json() const {
  return {{"n", n},
          {"mae", report_json_value(mae, n)},
          {"baseline_value", baseline_value},
          {"baseline_mae", report_json_value(baseline_mae, n)}};
}

EvaluationReport evaluate(const StrengthFn& predict, const std::vector<BeliefUpdateExample>& test,
                          double baseline_value) {
  if (test.empty()) throw DomainError(kModule, "cannot evaluate on an empty test set");
  std::vector<double> predicted, truth, baseline;
  for (const auto& example : test) {
    predicted.push_back(predict(example));
    truth.push_back(example.next);
    baseline.push_back(baseline_value);
  }
  EvaluationReport report;
  report.n = test.size();
  report.mae = stats::mae(predicted, truth);
  report.baseline_value = baseline_value;
  report.baseline_mae = stats::mae(baseline, truth);
  return report;
}

EvaluationReport evaluate(const BeliefPredictor& predictor, const std::vector<BeliefUpdateExample>& test,
                          double baseline_value) {
  return evaluate([&](const BeliefUpdateExample& e) { return predictor.predict_new_strength(e.statement, e.prev); },
                  test, baseline_value);
}

double median_next(const std::vector<BeliefUpdateExample>& examples) {
  if (examples.empty()) throw DomainError(kModule, "median of no examples");
  std::vector<int> values;
  for (const auto& e : examples) values.push_back(e.next);
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return (values[mid - 1] + values[mid]) / 2.0;
}

nlohmann::json TrainingResult::to_json() const {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [penalty, mae] : validation_mae) curve.push_back({{"penalty", penalty}, {"mae", mae}});
  nlohmann::json json = {{"kind", predictor::to_string(predictor.kind())},
                         {"train_size", train_size},
                         {"validation_size", validation_size},
                         {"test_size", test_size},
                         {"validation", validation.to_json()},
                         {"test", test.to_json()}};
  if (const auto* ridge = std::get_if<RidgeModel>(&predictor.regressor())) {
    json["penalty"] = ridge->penalty;
    json["validation_curve"] = std::move(curve);
  }
  return json;
}

TrainingResult train_predictor(const std::vector<BeliefUpdateExample>& examples, const PredictorConfig& config) {
  for (const auto& example : examples) validate(example);
  const auto split = split_dataset(examples, config.seed);
  if (split.train.empty()) throw DomainError(kModule, "too few examples to train (need at least 2)");
  if (split.test.empty()) throw DomainError(kModule, "too few examples to leave a test split");

  const auto tfidf = TfidfModel::fit(statements(split.train), config.tfidf);
  const auto x_train = tfidf.transform_all(statements(split.train));
  const auto y_train = updates(split.train);
  const double baseline = median_next(split.train);

  std::vector<std::pair<double, double>> curve;
  std::optional<BeliefPredictor> chosen;
  if (config.kind == RegressorKind::ridge) {
    if (config.penalties.empty()) throw ConfigError(kModule, "no ridge penalties to choose from");
    double best_mae = 0.0;
    for (double penalty : config.penalties) {
      BeliefPredictor candidate(tfidf, fit_ridge(x_train, y_train, penalty), config);
      if (split.validation.empty()) {
        chosen = std::move(candidate);
        break;
      }
      const double mae = evaluate(candidate, split.validation, baseline).mae;
      curve.emplace_back(penalty, mae);
      if (!chosen || mae < best_mae) {
        best_mae = mae;
        chosen = std::move(candidate);
      }
    }
  } else {
    ForestConfig forest = config.forest;
    forest.seed = config.seed;
    chosen.emplace(tfidf, fit_forest(x_train, y_train, forest), config);
  }

  chosen->set_baseline_value(baseline);
  TrainingResult result{*chosen, split.train.size(), split.validation.size(), split.test.size(),
                        std::move(curve), {}, {}};
  if (!split.validation.empty()) result.validation = evaluate(*chosen, split.validation, baseline);
  result.validation.baseline_value = baseline;
  result.test = evaluate(*chosen, split.test, baseline);
  return result;
}

std::string to_string(StatementSource source) {
  return source == StatementSource::prompt ? "prompt" : "last_line";
}

StatementSource statement_source_from_string(const std::string& text) {
  if (text == "prompt") return StatementSource::prompt;
  if (text == "last_line") return StatementSource::last_line;
  throw ConfigError(kModule, "unknown statement source '" + text + "' (expected prompt or last_line)");
}

MiningReport mine_examples(const std::vector<nlohmann::json>& records, StatementSource source) {
  MiningReport report;
  for (const auto& record : records) {
    if (!record.is_object() || record.value("kind", "") != "reassess") continue;
    ++report.reassessments;
    if (record.value("imputed", false)) {
      ++report.skipped_imputed;
      continue;
    }
    const auto prev = record.value("previous_strength", nlohmann::json());
    const auto next = record.value("reassessed_strength", nlohmann::json());
    const auto view = prompts::parse_reassessment_prompt(record.value("prompt_user", ""));
    if (!prev.is_number_integer() || !next.is_number_integer() || !view || view->previous != prev.get<int>()) {
      ++report.skipped_malformed;
      continue;
    }
    if (next.get<int>() == 0) {
      ++report.skipped_deleted;
      continue;
    }
    BeliefUpdateExample example{view->statement, prev.get<int>(), next.get<int>()};
    if (source == StatementSource::last_line) {
      std::istringstream lines(view->statement);
      std::string line, last;
      while (std::getline(lines, line)) {
        if (!line.empty()) last = line;
      }
      example.statement = last;
    }
    if (example.prev < 1 || example.prev > 5 || example.next > 5) {
      ++report.skipped_malformed;
      continue;
    }
    report.examples.push_back(std::move(example));
  }
  return report;
}

std::vector<BeliefUpdateExample> synthetic_corpus(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> filler = {
      "policy",  "market",   "customer", "premium", "contract", "report",  "budget",  "meeting",
      "review",  "schedule", "account",  "client",  "service",  "product", "quality", "deadline",
      "office",  "manager",  "team",     "project", "proposal", "record",  "update",  "invoice",
      "request", "process",  "summary",  "details", "question", "answer",  "context", "evidence",
      "point",   "issue",    "reason",   "example", "detail",   "figure",  "number",  "outline"};
  constexpr std::size_t kFillerWords = 10;
  Rng rng(seed);
  std::vector<BeliefUpdateExample> corpus;
  corpus.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int next = 1 + static_cast<int>(rng.uniform_index(5));
    std::vector<int> feasible = {0};
    if (next >= 2) feasible.push_back(1);
    if (next <= 3) feasible.push_back(-2);
    const int update = feasible[rng.uniform_index(feasible.size())];
    std::vector<std::string> words;
    for (std::size_t w = 0; w < kFillerWords; ++w) words.push_back(filler[rng.uniform_index(filler.size())]);
    if (update != 0) {
      const auto at = static_cast<std::ptrdiff_t>(rng.uniform_index(words.size() + 1));
      words.insert(words.begin() + at, update > 0 ? "agree" : "concede");
    }
    std::string text;
    for (const auto& word : words) text += (text.empty() ? "" : " ") + word;
    corpus.push_back({text + ".", next - update, next});
  }
  return corpus;
}

std::vector<BeliefUpdateExample> read_examples_jsonl(const std::string& text) {
  std::vector<BeliefUpdateExample> examples;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto json = nlohmann::json::parse(line, nullptr, false);
    const std::string where = "examples line " + std::to_string(number);
    if (json.is_discarded() || !json.is_object()) throw DataError(kModule, where + ": not a JSON object");
    if (!json.contains("statement") || !json["statement"].is_string() || !json.contains("prev") ||
        !json["prev"].is_number_integer() || !json.contains("next") || !json["next"].is_number_integer()) {
      throw DataError(kModule, where + ": needs string 'statement' and integer 'prev' and 'next'");
    }
    BeliefUpdateExample example{json["statement"].get<std::string>(), json["prev"].get<int>(),
                                json["next"].get<int>()};
    try {
      validate(example);
    } catch (const DomainError& error) {
      throw DataError(kModule, where + ": " + error.what());
    }
    examples.push_back(std::move(example));
  }
  return examples;
}

std::string to_examples_jsonl(const std::vector<BeliefUpdateExample>& examples) {
  std::string out;
  for (const auto& e : examples) {
    out += nlohmann::json{{"statement", e.statement}, {"prev", e.prev}, {"next", e.next}}.dump() + "\n";
  }
  return out;
}

}  // namespace beliefsim::predictor
