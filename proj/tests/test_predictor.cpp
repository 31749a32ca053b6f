#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "beliefsim/debate.hpp"
#include "beliefsim/error.hpp"
#include "beliefsim/predictor.hpp"
#include "beliefsim/random.hpp"
#include "oracles.hpp"

using namespace beliefsim;
using namespace beliefsim::predictor;

namespace {

std::vector<BeliefUpdateExample> numbered(std::size_t n) {
  std::vector<BeliefUpdateExample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({"example " + std::to_string(i), 3, 3});
  return out;
}

std::multiset<std::string> statements_of(const Split& split) {
  std::multiset<std::string> out;
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    for (const auto& e : *part) out.insert(e.statement);
  }
  return out;
}

FeatureMatrix random_matrix(Rng& rng, std::size_t n, std::size_t p, double density) {
  std::vector<std::vector<double>> rows(n, std::vector<double>(p, 0.0));
  for (auto& row : rows) {
    for (auto& v : row) {
      if (rng.uniform_real() < density) v = rng.uniform_real() * 2.0 - 1.0;
    }
  }
  return FeatureMatrix::from_dense(rows);
}

// Ridge optimality: Xc'(yc - Xc w) = penalty * w, checked with plain loops.
double ridge_kkt_residual(const FeatureMatrix& x, const std::vector<double>& y, const RidgeModel& m) {
  const auto dense = x.dense();
  const auto n = static_cast<std::size_t>(dense.rows());
  const auto p = static_cast<std::size_t>(dense.cols());
  std::vector<double> mean(p, 0.0);
  double y_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y_mean += y[i] / static_cast<double>(n);
    for (std::size_t j = 0; j < p; ++j) mean[j] += dense(static_cast<long>(i), static_cast<long>(j)) / static_cast<double>(n);
  }
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) {
    double fitted = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      fitted += (dense(static_cast<long>(i), static_cast<long>(j)) - mean[j]) * m.weights[static_cast<long>(j)];
    }
    residual[i] = (y[i] - y_mean) - fitted;
  }
  double worst = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    double g = 0.0;
    for (std::size_t i = 0; i < n; ++i) g += (dense(static_cast<long>(i), static_cast<long>(j)) - mean[j]) * residual[i];
    worst = std::max(worst, std::fabs(g - m.penalty * m.weights[static_cast<long>(j)]));
  }
  return worst;
}

}  // namespace

TEST_CASE("split sizes and determinism") {
  const auto big = split_dataset(numbered(2000), 1);
  CHECK(big.train.size() == 1400);
  CHECK(big.validation.size() == 200);
  CHECK(big.test.size() == 400);
  const auto small = split_dataset(numbered(10), 1);
  CHECK(small.train.size() == 7);
  CHECK(small.validation.size() == 1);
  CHECK(small.test.size() == 2);
  const auto odd = split_dataset(numbered(13), 1);
  CHECK(odd.train.size() == 9);
  CHECK(odd.validation.size() == 1);
  CHECK(odd.test.size() == 3);

  const auto a = split_dataset(numbered(50), 7);
  const auto b = split_dataset(numbered(50), 7);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(statements_of(a) == statements_of(split_dataset(numbered(50), 8)));
  CHECK(a.train != split_dataset(numbered(50), 8).train);
}

TEST_CASE("tokenizer") {
  CHECK(tokenize("Hello, World! a1 x b--CC") == std::vector<std::string>{"hello", "world", "a1", "cc"});
  CHECK(tokenize("a bb", 1) == std::vector<std::string>{"a", "bb"});
  CHECK(tokenize("caf\xC3\xA9 ok") == std::vector<std::string>{"caf", "ok"});
  CHECK(tokenize("").empty());
}

TEST_CASE("TF-IDF on a hand-computed corpus") {
  const auto model = TfidfModel::fit({"a bb bb", "bb cc"});
  REQUIRE(model.dimension() == 2);
  CHECK(model.vocabulary().at("bb") == 0);
  CHECK(model.vocabulary().at("cc") == 1);
  // df(bb) = 2, df(cc) = 1, N = 2.
  CHECK(model.idf()[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(model.idf()[1] == doctest::Approx(std::log(3.0 / 2.0) + 1.0).epsilon(1e-15));

  const auto v = model.transform("bb cc");
  const double cc = std::log(1.5) + 1.0;
  const double norm = std::sqrt(1.0 + cc * cc);
  CHECK(v.at(0) == doctest::Approx(1.0 / norm));
  CHECK(v.at(1) == doctest::Approx(cc / norm));

  CHECK(model.transform("a bb bb unseen").entries == std::vector<std::pair<std::size_t, double>>{{0, 1.0}});
  CHECK(model.transform("nothing known here").entries.empty());
  CHECK(model.transform("bb cc") == model.transform("bb cc"));

  const auto single = TfidfModel::fit({"one two two three"});
  for (double idf : single.idf()) CHECK(idf == 1.0);
  CHECK_THROWS_AS(TfidfModel::fit({}), DomainError);
}

TEST_CASE("TF-IDF vectors have unit norm") {
  const auto corpus = synthetic_corpus(300, 4);
  std::vector<std::string> texts;
  for (const auto& e : corpus) texts.push_back(e.statement);
  const auto model = TfidfModel::fit(texts);
  for (const auto& text : texts) {
    const auto v = model.transform(text);
    REQUIRE_FALSE(v.entries.empty());
    CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(TfidfModel::from_json(model.to_json()).transform(texts[0]) == model.transform(texts[0]));
}

TEST_CASE("ridge: constant target, OLS limit and strong penalty") {
  const auto x = FeatureMatrix::from_dense({{0.0}, {1.0}, {2.0}, {3.0}, {4.0}});
  const std::vector<double> constant(5, 2.5);
  const auto flat = fit_ridge(x, constant, 1.0);
  CHECK(std::fabs(flat.weights[0]) < 1e-12);
  CHECK(flat.intercept == doctest::Approx(2.5));

  const std::vector<double> xs = {0, 1, 2, 3, 4};
  const std::vector<double> ys = {1.0, 3.9, 7.1, 10.0, 13.0};
  const auto line = oracle::ols(xs, ys);
  const auto nearly_ols = fit_ridge(x, ys, 1e-9);
  CHECK(nearly_ols.weights[0] == doctest::Approx(line.slope).epsilon(1e-8));
  CHECK(nearly_ols.intercept == doctest::Approx(line.intercept).epsilon(1e-8));
  const auto exact = fit_ridge(x, ys, 0.0);
  CHECK(exact.weights[0] == doctest::Approx(line.slope).epsilon(1e-12));

  const auto heavy = fit_ridge(x, ys, 1e9);
  CHECK(std::fabs(heavy.weights[0]) < 1e-3);
  CHECK(heavy.intercept == doctest::Approx(7.0).epsilon(1e-3));
}

TEST_CASE("ridge: singular system at penalty 0") {
  const auto twin = FeatureMatrix::from_dense({{1, 1}, {2, 2}, {3, 3}, {5, 5}});
  const std::vector<double> y = {1, 2, 3, 4};
  CHECK_THROWS_AS(fit_ridge(twin, y, 0.0), NumericError);
  CHECK_NOTHROW(fit_ridge(twin, y, 0.1));
  CHECK_THROWS_AS(fit_ridge(twin, std::vector<double>{1, 2}, 1.0), DomainError);
  CHECK_THROWS_AS(fit_ridge(FeatureMatrix{}, std::vector<double>{}, 1.0), DomainError);
}

TEST_CASE("ridge solution satisfies the optimality condition in both forms") {
  Rng rng(12);
  for (const auto& [n, p] : std::vector<std::pair<std::size_t, std::size_t>>{{30, 5}, {8, 25}, {12, 12}}) {
    const auto x = random_matrix(rng, n, p, 0.5);
    std::vector<double> y(n);
    for (auto& v : y) v = rng.uniform_real() * 4.0 - 2.0;
    for (double penalty : {0.1, 1.0, 10.0}) {
      const auto model = fit_ridge(x, y, penalty);
      CHECK(ridge_kkt_residual(x, y, model) < 1e-9);
    }
  }
}

TEST_CASE("forest: constant target and a hand-built single tree") {
  const auto x = FeatureMatrix::from_dense({{0.0}, {1.0}, {2.0}, {3.0}});
  const std::vector<double> flat(4, 3.0);
  const auto constant = fit_forest(x, flat, {.trees = 10, .seed = 1});
  for (double probe : {-5.0, 0.5, 2.5, 9.0}) {
    CHECK(constant.predict(FeatureMatrix::from_dense({{probe}}).rows[0]) == 3.0);
  }

  const std::vector<double> y = {1.0, 1.0, 5.0, 5.0};
  ForestConfig one;
  one.trees = 1;
  one.bootstrap = false;
  const auto forest = fit_forest(x, y, one);
  const auto& nodes = forest.trees[0].nodes;
  REQUIRE(nodes.size() == 3);
  CHECK(nodes[0].feature == 0);
  CHECK(nodes[0].threshold == 1.5);
  CHECK(nodes[0].value == 3.0);
  CHECK(nodes[1].value == 1.0);
  CHECK(nodes[2].value == 5.0);
  CHECK(forest.predict(x.rows[1]) == 1.0);
  CHECK(forest.predict(x.rows[2]) == 5.0);
}

TEST_CASE("forest: two-way split on unequal leaves") {
  // y = {1, 2, 6, 7}: best first split is between x=1 and x=2 (SSE 0.5 + 0.5).
  const auto x = FeatureMatrix::from_dense({{0.0}, {1.0}, {2.0}, {3.0}});
  ForestConfig one;
  one.trees = 1;
  one.bootstrap = false;
  const auto forest = fit_forest(x, std::vector<double>{1, 2, 6, 7}, one);
  CHECK(forest.trees[0].nodes[0].threshold == 1.5);
  for (std::size_t i = 0; i < 4; ++i) CHECK(forest.predict(x.rows[i]) == std::vector<double>{1, 2, 6, 7}[i]);
}

TEST_CASE("forest: deterministic, bounded by the training targets") {
  Rng rng(3);
  const auto x = random_matrix(rng, 60, 9, 0.4);
  std::vector<double> y(60);
  for (auto& v : y) v = std::floor(rng.uniform_real() * 9.0) - 4.0;
  ForestConfig config;
  config.trees = 25;
  config.seed = 99;
  const auto a = fit_forest(x, y, config);
  const auto b = fit_forest(x, y, config);
  REQUIRE(a.trees.size() == 25);
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    CHECK(a.trees[t].seed == b.trees[t].seed);
    REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
    for (std::size_t k = 0; k < a.trees[t].nodes.size(); ++k) {
      CHECK(a.trees[t].nodes[k].threshold == b.trees[t].nodes[k].threshold);
      CHECK(a.trees[t].nodes[k].value == b.trees[t].nodes[k].value);
    }
  }
  config.seed = 100;
  const auto c = fit_forest(x, y, config);
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  bool any_difference = false;
  const auto probes = random_matrix(rng, 200, 9, 0.5);
  for (const auto& row : probes.rows) {
    const double prediction = a.predict(row);
    CHECK(prediction >= *lo);
    CHECK(prediction <= *hi);
    any_difference = any_difference || prediction != c.predict(row);
  }
  CHECK(any_difference);
  CHECK_THROWS_AS(fit_forest(FeatureMatrix{}, std::vector<double>{}, config), DomainError);
}

TEST_CASE("new strength rounding and clamping") {
  CHECK(new_strength(3, 0.0) == 3);
  CHECK(new_strength(5, 2.0) == 5);
  CHECK(new_strength(1, -3.0) == 0);
  CHECK(new_strength(2, 0.5) == 3);
  CHECK(new_strength(2, -0.5) == 2);
  CHECK(new_strength(4, -0.49) == 4);
  CHECK_THROWS_AS(new_strength(0, 1.0), DomainError);
  CHECK_THROWS_AS(new_strength(6, 0.0), DomainError);
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const int prev = 1 + static_cast<int>(rng.uniform_index(5));
    const int out = new_strength(prev, rng.uniform_real() * 20.0 - 10.0);
    CHECK((out >= 0 && out <= 5));
  }
}

TEST_CASE("evaluation and the constant baseline") {
  std::vector<BeliefUpdateExample> uniform;
  for (int next = 1; next <= 5; ++next) uniform.push_back({"x", 3, next});
  const auto perfect = evaluate([](const BeliefUpdateExample& e) { return e.next; }, uniform, 3.0);
  CHECK(perfect.mae == 0.0);
  // Enumeration: |1-3| + |2-3| + 0 + |4-3| + |5-3| = 6 over 5 targets.
  CHECK(perfect.baseline_mae == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(oracle::constant_predictor_mae(3.0) == doctest::Approx(1.2));
  const auto constant = evaluate([](const BeliefUpdateExample&) { return 3; }, uniform, 3.0);
  CHECK(constant.mae == doctest::Approx(1.2));
  CHECK(median_next(uniform) == 3.0);
  CHECK(median_next({{"a", 1, 1}, {"b", 1, 2}}) == 1.5);
  CHECK_THROWS_AS(evaluate([](const BeliefUpdateExample&) { return 3; }, {}, 3.0), DomainError);
}

TEST_CASE("synthetic corpus follows its rule") {
  const auto corpus = synthetic_corpus(2000, 21);
  REQUIRE(corpus.size() == 2000);
  std::array<int, 6> next_counts{};
  for (const auto& e : corpus) {
    CHECK_NOTHROW(validate(e));
    const auto tokens = tokenize(e.statement);
    const bool agree = std::find(tokens.begin(), tokens.end(), "agree") != tokens.end();
    const bool concede = std::find(tokens.begin(), tokens.end(), "concede") != tokens.end();
    CHECK(e.update() == (agree ? 1 : concede ? -2 : 0));
    ++next_counts[static_cast<std::size_t>(e.next)];
  }
  for (int k = 1; k <= 5; ++k) CHECK(std::abs(next_counts[static_cast<std::size_t>(k)] - 400) < 80);
  CHECK(synthetic_corpus(50, 21) == std::vector<BeliefUpdateExample>(corpus.begin(), corpus.begin() + 50));
}

TEST_CASE("trained predictors learn the concede rule") {
  const auto corpus = synthetic_corpus(2000, 8);
  for (auto kind : {RegressorKind::ridge, RegressorKind::forest}) {
    CAPTURE(to_string(kind));
    PredictorConfig config;
    config.kind = kind;
    config.seed = 8;
    const auto result = train_predictor(corpus, config);
    CHECK(result.train_size == 1400);
    CHECK(result.test_size == 400);
    CHECK(result.test.mae <= 0.1);
    CHECK(result.test.mae < result.test.baseline_mae);
    CHECK(result.test.baseline_mae == doctest::Approx(1.2).epsilon(0.15));
    // Held-out examples drawn from the same generator with another seed.
    int checked = 0;
    for (const auto& e : synthetic_corpus(300, 77)) {
      if (e.prev == 4 && e.update() == -2) {
        CHECK(result.predictor.predict_new_strength(e.statement, 4) == 2);
        ++checked;
      }
    }
    CHECK(checked > 5);
    CHECK_THROWS_AS(result.predictor.predict_new_strength("anything", 0), DomainError);
    if (kind == RegressorKind::ridge) CHECK(result.validation_mae.size() == 3);
  }
}

TEST_CASE("model files round-trip bit for bit") {
  const auto corpus = synthetic_corpus(200, 2);
  const auto dir = std::filesystem::temp_directory_path() / "beliefsim_predictor_test";
  std::filesystem::create_directories(dir);
  for (auto kind : {RegressorKind::ridge, RegressorKind::forest}) {
    PredictorConfig config;
    config.kind = kind;
    config.forest.trees = 20;
    const auto trained = train_predictor(corpus, config);
    const auto again = train_predictor(corpus, config);
    CHECK(trained.predictor.to_json().dump() == again.predictor.to_json().dump());
    const auto path = dir / (to_string(kind) + ".json");
    trained.predictor.save(path);
    const auto loaded = BeliefPredictor::load(path);
    CHECK(loaded.to_json().dump() == trained.predictor.to_json().dump());
    for (const auto& e : corpus) {
      CHECK(loaded.predict_update(e.statement) == trained.predictor.predict_update(e.statement));
    }
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(BeliefPredictor::from_json(nlohmann::json{{"format_version", 99}}), DataError);
  CHECK_THROWS_AS(BeliefPredictor::from_json(nlohmann::json::object()), DataError);
}

TEST_CASE("training examples are mined from transcript reassessments") {
  auto sample = load_aporia(std::filesystem::path(BELIEFSIM_TEST_DATA) / "aporia_fixture.json").front();
  const auto aligned = make_belief(sample, Stance::aligned, BeliefStrength(5));
  const auto misaligned = make_belief(sample, Stance::misaligned, BeliefStrength(5));
  Agent persuader{"Persuading agent", {}, OpenMindedness(1), AgentRole::persuader, aligned.proposition, {}};
  persuader.box.set(aligned.proposition, aligned.strength);
  Agent target{"Target agent", {}, OpenMindedness(5), AgentRole::target, {}, {}};
  target.box.set(misaligned.proposition, misaligned.strength);
  ScriptedBackend backend([](const CallTag& tag, const std::vector<ChatMessage>&) -> std::string {
    if (tag.kind != "reassess") return tag.agent + " line " + std::to_string(tag.round);
    if (tag.attributes.at("role") == "persuader") return "5";
    if (tag.round == 3) return "unclear";
    return std::to_string(std::max(1, 5 - 2 * (tag.round - 1)));
  });
  DebateConfig config;
  config.rounds = 4;
  const auto transcript = run_debate({persuader, target}, sample, config, backend, {"d", 0, {}});
  auto records = read_jsonl(to_jsonl(transcript.to_jsonl_records()));
  const auto mined = mine_examples(records);
  // Target: round 1 (5->5), round 2 (5->3), round 3 imputed, round 4 (3->1).
  CHECK(mined.reassessments == 8);
  CHECK(mined.skipped_imputed == 1);
  CHECK(mined.skipped_deleted == 0);
  CHECK(mined.skipped_malformed == 0);
  REQUIRE(mined.examples.size() == 7);
  const auto& second = *std::find_if(mined.examples.begin(), mined.examples.end(),
                                     [](const auto& e) { return e.next == 3; });
  CHECK(second.prev == 5);
  CHECK(second.statement.starts_with("Persuading agent: Persuading agent line 1\n"));
  CHECK(second.statement.ends_with("Target agent: Target agent line 2"));

  const auto last = mine_examples(records, StatementSource::last_line);
  CHECK(last.examples[0].statement == "Target agent: Target agent line 1");

  auto deleted = records.back();
  deleted["reassessed_strength"] = 0;
  auto blank = records.back();
  blank["prompt_user"] = "";
  const auto edge = mine_examples({deleted, blank});
  CHECK(edge.skipped_deleted == 1);
  CHECK(edge.skipped_malformed == 1);
  CHECK(edge.examples.empty());
}

TEST_CASE("example JSONL round trip") {
  const auto corpus = synthetic_corpus(20, 1);
  CHECK(read_examples_jsonl(to_examples_jsonl(corpus)) == corpus);
  CHECK_THROWS_AS(read_examples_jsonl("{\"statement\": \"x\", \"prev\": 0, \"next\": 2}\n"), DataError);
  CHECK_THROWS_AS(read_examples_jsonl("not json\n"), DataError);
}
