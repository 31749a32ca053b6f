#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace beliefsim::predictor {

struct BeliefUpdateExample {
  std::string statement;
  int prev = 1;
  int next = 1;

  int update() const { return next - prev; }
  friend bool operator==(const BeliefUpdateExample&, const BeliefUpdateExample&) = default;
};

// Throws DomainError unless prev and next are in 1..5.
void validate(const BeliefUpdateExample& example);

struct Split {
  std::vector<BeliefUpdateExample> train;
  std::vector<BeliefUpdateExample> validation;
  std::vector<BeliefUpdateExample> test;
};

// Shuffled 70/10/20 partition: floor(0.7n), floor(0.1n), remainder.
Split split_dataset(const std::vector<BeliefUpdateExample>& examples, std::uint64_t seed);

// --- features ------------------------------------------------------------------

// Sorted by index, no explicit zeros.
struct SparseVector {
  std::vector<std::pair<std::size_t, double>> entries;

  double at(std::size_t index) const;
  double norm() const;
  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

struct FeatureMatrix {
  std::vector<SparseVector> rows;
  std::size_t cols = 0;

  static FeatureMatrix from_dense(const std::vector<std::vector<double>>& rows);
  Eigen::MatrixXd dense() const;
};

struct TfidfConfig {
  std::size_t min_token_len = 2;
};

// Lowercased runs of ASCII letters and digits, at least min_token_len long.
std::vector<std::string> tokenize(std::string_view text, std::size_t min_token_len = 2);

class TfidfModel {
 public:
  static TfidfModel fit(const std::vector<std::string>& corpus, const TfidfConfig& config = {});

  // tf * idf, L2-normalized; tokens outside the vocabulary are ignored.
  SparseVector transform(std::string_view text) const;
  FeatureMatrix transform_all(const std::vector<std::string>& texts) const;

  std::size_t dimension() const { return vocabulary_.size(); }
  const std::map<std::string, std::size_t>& vocabulary() const { return vocabulary_; }
  const std::vector<double>& idf() const { return idf_; }
  const TfidfConfig& config() const { return config_; }

  nlohmann::json to_json() const;
  static TfidfModel from_json(const nlohmann::json& json);

 private:
  std::map<std::string, std::size_t> vocabulary_;
  std::vector<double> idf_;
  TfidfConfig config_;
};

// --- regressors -------------------------------------------------------------

struct RidgeModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  double penalty = 1.0;

  double predict(const SparseVector& x) const;
};

// Minimizes ||y - Xw - b||^2 + penalty * ||w||^2 with b unpenalized. Throws
// NumericError when penalty is 0 and the centered system is singular.
RidgeModel fit_ridge(const FeatureMatrix& x, std::span<const double> y, double penalty = 1.0);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // mean target of the node's samples
};

struct RegressionTree {
  std::uint64_t seed = 0;
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const SparseVector& x) const;
};

struct ForestConfig {
  int trees = 100;
  int features_per_split = 0;  // 0 = max(1, floor(p / 3))
  int min_split = 2;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  ForestConfig config;

  double predict(const SparseVector& x) const;
};

ForestModel fit_forest(const FeatureMatrix& x, std::span<const double> y, const ForestConfig& config = {});

// --- belief-update predictor -------------------------------------------------

enum class RegressorKind { ridge, forest };

std::string to_string(RegressorKind kind);
RegressorKind regressor_kind_from_string(const std::string& text);

struct PredictorConfig {
  RegressorKind kind = RegressorKind::ridge;
  std::uint64_t seed = 0;
  std::vector<double> penalties = {0.1, 1.0, 10.0};
  TfidfConfig tfidf;
  ForestConfig forest;

  nlohmann::json to_json() const;
  static PredictorConfig from_json(const nlohmann::json& json);
};

class BeliefPredictor {
 public:
  BeliefPredictor(TfidfModel tfidf, std::variant<RidgeModel, ForestModel> regressor,
                  PredictorConfig config);

  double predict_update(std::string_view statement) const;
  int predict_new_strength(std::string_view statement, int prev) const;

  const TfidfModel& tfidf() const { return tfidf_; }
  const std::variant<RidgeModel, ForestModel>& regressor() const { return regressor_; }
  const PredictorConfig& config() const { return config_; }
  RegressorKind kind() const;

  // Constant-median baseline recorded at training time.
  std::optional<double> baseline_value() const { return baseline_value_; }
  void set_baseline_value(double value) { baseline_value_ = value; }

  nlohmann::json to_json() const;
  static BeliefPredictor from_json(const nlohmann::json& json);
  void save(const std::filesystem::path& path) const;
  static BeliefPredictor load(const std::filesystem::path& path);

 private:
  TfidfModel tfidf_;
  std::variant<RidgeModel, ForestModel> regressor_;
  PredictorConfig config_;
  std::optional<double> baseline_value_;
};

inline constexpr int kModelFormatVersion = 1;

// clamp(round-half-up(prev + delta), 0, 5); prev must be in 1..5.
int new_strength(int prev, double delta);

struct EvaluationReport {
  std::size_t n = 0;
  double mae = 0.0;
  double baseline_value = 0.0;
  double baseline_mae = 0.0;

  nlohmann::json to_json() const;
};

using StrengthFn = std::function<int(const BeliefUpdateExample&)>;

EvaluationReport evaluate(const StrengthFn& predict, const std::vector<BeliefUpdateExample>& test,
                          double baseline_value);
EvaluationReport evaluate(const BeliefPredictor& predictor,
                          const std::vector<BeliefUpdateExample>& test, double baseline_value);

// Median of the next strengths (mean of the middle pair for even counts).
double median_next(const std::vector<BeliefUpdateExample>& examples);

struct TrainingResult {
  BeliefPredictor predictor;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::size_t test_size = 0;
  std::vector<std::pair<double, double>> validation_mae;  // (penalty, MAE); ridge only
  EvaluationReport validation;
  EvaluationReport test;

  nlohmann::json to_json() const;
};

// Splits, fits TF-IDF on the training part, fits the regressor (ridge picks
// its penalty on the validation part) and evaluates on the test part.
TrainingResult train_predictor(const std::vector<BeliefUpdateExample>& examples,
                               const PredictorConfig& config);

// --- training data --------------------------------------------------------------

enum class StatementSource { prompt, last_line };

std::string to_string(StatementSource source);
StatementSource statement_source_from_string(const std::string& text);

struct MiningReport {
  std::vector<BeliefUpdateExample> examples;
  std::size_t reassessments = 0;
  std::size_t skipped_imputed = 0;
  std::size_t skipped_deleted = 0;    // belief removed (new strength 0)
  std::size_t skipped_malformed = 0;  // prompt or strengths not recoverable
};

// Turns transcript reassessment records into training examples.
MiningReport mine_examples(const std::vector<nlohmann::json>& records,
                           StatementSource source = StatementSource::prompt);

// Rule-generated corpus: next uniform on 1..5; update +1 with the token
// "agree", -2 with "concede", else 0; the rest of the text is filler.
std::vector<BeliefUpdateExample> synthetic_corpus(std::size_t n, std::uint64_t seed);

std::vector<BeliefUpdateExample> read_examples_jsonl(const std::string& text);
std::string to_examples_jsonl(const std::vector<BeliefUpdateExample>& examples);

}  // namespace beliefsim::predictor
