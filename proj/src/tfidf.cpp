#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "beliefsim/error.hpp"
#include "beliefsim/predictor.hpp"

namespace beliefsim::predictor {

namespace {
constexpr const char* kModule = "predictor";
}

double SparseVector::at(std::size_t index) const {
  const auto it = std::lower_bound(entries.begin(), entries.end(), index,
                                   [](const auto& entry, std::size_t i) { return entry.first < i; });
  return it != entries.end() && it->first == index ? it->second : 0.0;
}

double SparseVector::norm() const {
  double sum = 0.0;
  for (const auto& [index, value] : entries) sum += value * value;
  return std::sqrt(sum);
}

FeatureMatrix FeatureMatrix::from_dense(const std::vector<std::vector<double>>& rows) {
  FeatureMatrix matrix;
  matrix.cols = rows.empty() ? 0 : rows.front().size();
  for (const auto& row : rows) {
    if (row.size() != matrix.cols) throw DomainError(kModule, "ragged feature rows");
    SparseVector v;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] != 0.0) v.entries.emplace_back(j, row[j]);
    }
    matrix.rows.push_back(std::move(v));
  }
  return matrix;
}

Eigen::MatrixXd FeatureMatrix::dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                              static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& [j, value] : rows[i].entries) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
    }
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text, std::size_t min_token_len) {
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    if (current.size() >= min_token_len && !current.empty()) tokens.push_back(current);
    current.clear();
  };
  for (char c : text) {
    const auto byte = static_cast<unsigned char>(c);
    if (byte < 0x80 && std::isalnum(byte)) {
      current.push_back(static_cast<char>(std::tolower(byte)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

TfidfModel TfidfModel::fit(const std::vector<std::string>& corpus, const TfidfConfig& config) {
  if (corpus.empty()) throw DomainError(kModule, "cannot fit TF-IDF on an empty corpus");
  if (config.min_token_len == 0) throw DomainError(kModule, "min_token_len must be >= 1");
  std::map<std::string, std::size_t> df;
  for (const auto& document : corpus) {
    const auto tokens = tokenize(document, config.min_token_len);
    for (const auto& token : std::set<std::string>(tokens.begin(), tokens.end())) ++df[token];
  }
  TfidfModel model;
  model.config_ = config;
  const double n = static_cast<double>(corpus.size());
  for (const auto& [token, count] : df) {
    model.vocabulary_.emplace(token, model.idf_.size());
    model.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return model;
}

SparseVector TfidfModel::transform(std::string_view text) const {
  std::map<std::size_t, double> counts;
  for (const auto& token : tokenize(text, config_.min_token_len)) {
    const auto it = vocabulary_.find(token);
    if (it != vocabulary_.end()) counts[it->second] += 1.0;
  }
  SparseVector v;
  double sum = 0.0;
  for (const auto& [index, tf] : counts) {
    const double weight = tf * idf_[index];
    v.entries.emplace_back(index, weight);
    sum += weight * weight;
  }
  if (sum > 0.0) {
    const double norm = std::sqrt(sum);
    for (auto& entry : v.entries) entry.second /= norm;
  }
  return v;
}

FeatureMatrix TfidfModel::transform_all(const std::vector<std::string>& texts) const {
  FeatureMatrix matrix;
  matrix.cols = dimension();
  matrix.rows.reserve(texts.size());
  for (const auto& text : texts) matrix.rows.push_back(transform(text));
  return matrix;
}

nlohmann::json TfidfModel::to_json() const {
  std::vector<std::string> tokens(vocabulary_.size());
  for (const auto& [token, index] : vocabulary_) tokens[index] = token;
  return {{"vocabulary", tokens}, {"idf", idf_}, {"min_token_len", config_.min_token_len}};
}

TfidfModel TfidfModel::from_json(const nlohmann::json& json) {
  TfidfModel model;
  try {
    const auto tokens = json.at("vocabulary").get<std::vector<std::string>>();
    model.idf_ = json.at("idf").get<std::vector<double>>();
    model.config_.min_token_len = json.at("min_token_len").get<std::size_t>();
    if (tokens.size() != model.idf_.size()) {
      throw DataError(kModule, "vocabulary and idf lengths differ");
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (!model.vocabulary_.emplace(tokens[i], i).second) {
        throw DataError(kModule, "duplicate vocabulary token '" + tokens[i] + "'");
      }
    }
  } catch (const nlohmann::json::exception& error) {
    throw DataError(kModule, std::string("malformed TF-IDF model: ") + error.what());
  }
  return model;
}

}  // namespace beliefsim::predictor
