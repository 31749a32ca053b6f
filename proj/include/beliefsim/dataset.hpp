#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "beliefsim/core.hpp"
#include "beliefsim/error.hpp"
#include "beliefsim/random.hpp"

namespace beliefsim {

enum class Choice { A = 0, B = 1, C = 2, D = 3 };

char to_char(Choice choice);
std::optional<Choice> choice_from_char(char letter);

struct MMLUSample {
  std::string id;
  std::string subject;
  std::string question;
  std::array<std::string, 4> choices;
  Choice correct = Choice::A;

  friend bool operator==(const MMLUSample&, const MMLUSample&) = default;
};

// One extracted Aporia case. The aligned belief follows the human-judged
// winner argument, the misaligned belief the loser argument.
struct AporiaSample {
  std::string id;
  std::string scenario;
  std::string profession_description;
  std::string rule;
  std::string aligned_belief;
  std::string misaligned_belief;
  std::string winner_argument;
  std::string loser_argument;

  friend bool operator==(const AporiaSample&, const AporiaSample&) = default;
};

using Sample = std::variant<MMLUSample, AporiaSample>;

enum class DatasetKind { mmlu, aporia };

std::string to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(const std::string& text);
DatasetKind kind_of(const Sample& sample);
const std::string& sample_id(const Sample& sample);

// Throws DataError naming the offending field.
void validate(const MMLUSample& sample);
void validate(const AporiaSample& sample);

// CSV (RFC 4180) with header subject,question,choice_a,choice_b,choice_c,choice_d,answer.
// Sample ids are "mmlu-<row>" with 1-based data rows.
std::vector<MMLUSample> load_mmlu(const std::filesystem::path& path);
std::vector<MMLUSample> parse_mmlu_csv(const std::string& text);
std::string to_mmlu_csv(const std::vector<MMLUSample>& samples);

// JSON array of objects with the seven snake_case Aporia fields. Ids are "aporia-<index>".
std::vector<AporiaSample> load_aporia(const std::filesystem::path& path);
std::vector<AporiaSample> parse_aporia_json(const std::string& text);
std::string to_aporia_json(const std::vector<AporiaSample>& samples);

// Uniform sample without replacement, in draw order; deterministic given seed.
template <typename T>
std::vector<T> sample_items(const std::vector<T>& items, std::size_t n, std::uint64_t seed) {
  if (n > items.size()) {
    throw DomainError("dataset", "cannot sample " + std::to_string(n) + " of " +
                                     std::to_string(items.size()) + " items");
  }
  // Partial Fisher-Yates over indices.
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  std::vector<T> picked;
  picked.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(order.size() - i));
    std::swap(order[i], order[j]);
    picked.push_back(items[order[i]]);
  }
  return picked;
}

enum class Stance { correct, incorrect, aligned, misaligned };

std::string to_string(Stance stance);

struct MadeBelief {
  Proposition proposition;
  BeliefStrength strength;
  std::optional<Choice> letter;  // MMLU only
};

// Builds the belief held by an agent. For MMLU-incorrect the wrong letter is a
// pure function of (sample id, seed), so peers built with one seed agree.
MadeBelief make_belief(const Sample& sample, Stance stance, BeliefStrength strength,
                       std::uint64_t seed = 0);

// RFC 4180 reader. Accepts LF or CRLF record terminators.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);
// Quotes a field when it holds a comma, quote, line break, or edge spaces.
std::string csv_field(const std::string& value);

// Reads a whole file; throws DataError when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace beliefsim
