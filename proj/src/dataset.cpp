#include "beliefsim/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace beliefsim {

namespace {

constexpr const char* kModule = "dataset";

const std::array<std::string, 7> kMmluHeader = {"subject",  "question", "choice_a", "choice_b",
                                                "choice_c", "choice_d", "answer"};

const std::array<const char*, 7> kAporiaFields = {
    "scenario",          "profession_description", "rule",          "aligned_belief",
    "misaligned_belief", "winner_argument",        "loser_argument"};


}  // namespace

// RFC 4180 reader. Accepts LF or CRLF record terminators.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  const auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  const auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };
  while (i < text.size()) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          i += 2;
          continue;
        }
        quoted = false;
        ++i;
        continue;
      }
      field.push_back(c);
      ++i;
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
      ++i;
    } else if (c == ',') {
      end_field();
      ++i;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      end_record();
      i += 2;
    } else if (c == '\n') {
      end_record();
      ++i;
    } else {
      field.push_back(c);
      field_started = true;
      ++i;
    }
  }
  if (quoted) {
    throw DataError(kModule, "unterminated quoted CSV field");
  }
  if (field_started || !record.empty()) {
    end_record();
  }
  return records;
}

std::string csv_field(const std::string& value) {
  const bool needs_quotes = value.find_first_of(",\"\r\n") != std::string::npos ||
                            (!value.empty() && (value.front() == ' ' || value.back() == ' '));
  if (!needs_quotes) {
    return value;
  }
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

char to_char(Choice choice) {
  return static_cast<char>('A' + static_cast<int>(choice));
}

std::optional<Choice> choice_from_char(char letter) {
  if (letter >= 'A' && letter <= 'D') {
    return static_cast<Choice>(letter - 'A');
  }
  return std::nullopt;
}

std::string to_string(DatasetKind kind) {
  return kind == DatasetKind::mmlu ? "mmlu" : "aporia";
}

DatasetKind dataset_kind_from_string(const std::string& text) {
  if (text == "mmlu") return DatasetKind::mmlu;
  if (text == "aporia") return DatasetKind::aporia;
  throw ConfigError(kModule, "unknown dataset kind '" + text + "'");
}

DatasetKind kind_of(const Sample& sample) {
  return std::holds_alternative<MMLUSample>(sample) ? DatasetKind::mmlu : DatasetKind::aporia;
}

const std::string& sample_id(const Sample& sample) {
  return std::visit([](const auto& s) -> const std::string& { return s.id; }, sample);
}

std::string to_string(Stance stance) {
  switch (stance) {
    case Stance::correct: return "correct";
    case Stance::incorrect: return "incorrect";
    case Stance::aligned: return "aligned";
    case Stance::misaligned: return "misaligned";
  }
  return "unknown";
}

void validate(const MMLUSample& sample) {
  const auto require = [&](const std::string& value, const char* field) {
    if (value.empty()) {
      throw DataError(kModule, "sample " + sample.id + ": field '" + field + "' is empty");
    }
  };
  require(sample.subject, "subject");
  require(sample.question, "question");
  const char* names[] = {"choice_a", "choice_b", "choice_c", "choice_d"};
  for (std::size_t i = 0; i < sample.choices.size(); ++i) {
    require(sample.choices[i], names[i]);
  }
}

void validate(const AporiaSample& sample) {
  const std::array<const std::string*, 7> values = {
      &sample.scenario,          &sample.profession_description, &sample.rule,
      &sample.aligned_belief,    &sample.misaligned_belief,      &sample.winner_argument,
      &sample.loser_argument};
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i]->empty()) {
      throw DataError(kModule, "sample " + sample.id + ": field '" + kAporiaFields[i] +
                                   "' is missing or empty");
    }
  }
  if (sample.aligned_belief == sample.misaligned_belief) {
    throw DataError(kModule, "sample " + sample.id +
                                 ": aligned and misaligned beliefs must differ");
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError(kModule, "cannot open '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<MMLUSample> parse_mmlu_csv(const std::string& text) {
  auto records = parse_csv(text);
  std::vector<MMLUSample> samples;
  if (records.empty()) {
    return samples;
  }
  const auto& header = records.front();
  if (header.size() != kMmluHeader.size() ||
      !std::equal(header.begin(), header.end(), kMmluHeader.begin())) {
    throw DataError(kModule, "MMLU header must be subject,question,choice_a,choice_b,"
                             "choice_c,choice_d,answer");
  }
  for (std::size_t row = 1; row < records.size(); ++row) {
    const auto& record = records[row];
    const std::string where = "row " + std::to_string(row);
    if (record.size() != kMmluHeader.size()) {
      throw DataError(kModule, where + ": expected 7 fields (4 choices), found " +
                                   std::to_string(record.size()));
    }
    MMLUSample sample;
    sample.id = "mmlu-" + std::to_string(row);
    sample.subject = record[0];
    sample.question = record[1];
    for (std::size_t c = 0; c < 4; ++c) {
      sample.choices[c] = record[2 + c];
    }
    const auto& answer = record[6];
    const auto letter = answer.size() == 1 ? choice_from_char(answer[0]) : std::nullopt;
    if (!letter) {
      throw DataError(kModule, where + ": field 'answer' must be one of A, B, C, D");
    }
    sample.correct = *letter;
    validate(sample);
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::vector<MMLUSample> load_mmlu(const std::filesystem::path& path) {
  return parse_mmlu_csv(read_text_file(path));
}

std::string to_mmlu_csv(const std::vector<MMLUSample>& samples) {
  std::string out;
  for (std::size_t i = 0; i < kMmluHeader.size(); ++i) {
    out += (i ? "," : "") + kMmluHeader[i];
  }
  out += "\r\n";
  for (const auto& sample : samples) {
    out += csv_field(sample.subject) + "," + csv_field(sample.question);
    for (const auto& choice : sample.choices) {
      out += "," + csv_field(choice);
    }
    out += ",";
    out.push_back(to_char(sample.correct));
    out += "\r\n";
  }
  return out;
}

std::vector<AporiaSample> parse_aporia_json(const std::string& text) {
  nlohmann::json json;
  try {
    json = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(kModule, std::string("invalid Aporia JSON: ") + e.what());
  }
  if (!json.is_array()) {
    throw DataError(kModule, "Aporia file must hold a JSON array");
  }
  std::vector<AporiaSample> samples;
  for (std::size_t index = 0; index < json.size(); ++index) {
    const auto& record = json[index];
    const std::string where = "record " + std::to_string(index + 1);
    if (!record.is_object()) {
      throw DataError(kModule, where + ": expected an object");
    }
    const auto field = [&](const char* name) {
      if (!record.contains(name) || !record[name].is_string()) {
        throw DataError(kModule, where + ": field '" + name + "' is missing or not a string");
      }
      return record[name].get<std::string>();
    };
    AporiaSample sample;
    sample.id = record.contains("id") && record["id"].is_string()
                    ? record["id"].get<std::string>()
                    : "aporia-" + std::to_string(index + 1);
    sample.scenario = field("scenario");
    sample.profession_description = field("profession_description");
    sample.rule = field("rule");
    sample.aligned_belief = field("aligned_belief");
    sample.misaligned_belief = field("misaligned_belief");
    sample.winner_argument = field("winner_argument");
    sample.loser_argument = field("loser_argument");
    validate(sample);
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::vector<AporiaSample> load_aporia(const std::filesystem::path& path) {
  return parse_aporia_json(read_text_file(path));
}

std::string to_aporia_json(const std::vector<AporiaSample>& samples) {
  nlohmann::ordered_json array = nlohmann::ordered_json::array();
  for (const auto& sample : samples) {
    nlohmann::ordered_json record;
    record["id"] = sample.id;
    record["scenario"] = sample.scenario;
    record["profession_description"] = sample.profession_description;
    record["rule"] = sample.rule;
    record["aligned_belief"] = sample.aligned_belief;
    record["misaligned_belief"] = sample.misaligned_belief;
    record["winner_argument"] = sample.winner_argument;
    record["loser_argument"] = sample.loser_argument;
    array.push_back(std::move(record));
  }
  return array.dump(2) + "\n";
}

MadeBelief make_belief(const Sample& sample, Stance stance, BeliefStrength strength,
                       std::uint64_t seed) {
  if (const auto* mmlu = std::get_if<MMLUSample>(&sample)) {
    if (stance != Stance::correct && stance != Stance::incorrect) {
      throw DomainError(kModule, "stance '" + to_string(stance) + "' is not valid for MMLU");
    }
    Choice letter = mmlu->correct;
    if (stance == Stance::incorrect) {
      std::vector<Choice> wrong;
      for (int c = 0; c < 4; ++c) {
        if (static_cast<Choice>(c) != mmlu->correct) wrong.push_back(static_cast<Choice>(c));
      }
      Rng rng(mix_seed(seed, mmlu->id));
      letter = wrong[rng.uniform_index(wrong.size())];
    }
    const char ch = to_char(letter);
    Proposition proposition(
        mmlu->id + ":" + ch,
        std::string("The answer is ") + ch + ": " + mmlu->choices[static_cast<int>(letter)],
        stance == Stance::correct ? Polarity::p : Polarity::not_p, mmlu->id);
    return {std::move(proposition), strength, letter};
  }
  const auto& aporia = std::get<AporiaSample>(sample);
  if (stance != Stance::aligned && stance != Stance::misaligned) {
    throw DomainError(kModule, "stance '" + to_string(stance) + "' is not valid for Aporia");
  }
  const bool aligned = stance == Stance::aligned;
  Proposition proposition(aporia.id + (aligned ? ":aligned" : ":misaligned"),
                          aligned ? aporia.aligned_belief : aporia.misaligned_belief,
                          aligned ? Polarity::p : Polarity::not_p, aporia.id);
  return {std::move(proposition), strength, std::nullopt};
}

}  // namespace beliefsim
