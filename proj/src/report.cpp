#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "beliefsim/app.hpp"
#include "beliefsim/dataset.hpp"
#include "beliefsim/error.hpp"
#include "beliefsim/experiments.hpp"
#include "beliefsim/stats.hpp"

namespace beliefsim::app {

namespace {

namespace fs = std::filesystem;
using experiments::format_double;

constexpr const char* kModule = "report";

struct Figure {
  const char* file;
  std::vector<std::string> header;  // results.csv header this figure consumes
};

const std::map<std::string, Figure>& figures() {
  static const std::map<std::string, Figure> table = {
      {"bfi2", {"trait-score-by-level.csv", {"level", "trait", "n", "score"}}},
      {"open_mindedness", {"change-rate-by-level.csv", {"level", "direction", "n", "changed", "change_rate"}}},
      {"persuasion", {"mean-score-by-condition.csv", {"condition", "n", "mean_belief_score"}}},
      {"peer_pressure", {"rate-by-group-size.csv", {"group_size", "n", "changed", "change_rate"}}},
  };
  return table;
}

struct Input {
  std::string source;
  std::string dataset;
  std::string kind;
  std::vector<std::vector<std::string>> rows;  // data rows only
};

std::string kind_from_header(const std::vector<std::string>& header, const fs::path& file) {
  for (const auto& [kind, figure] : figures()) {
    if (figure.header == header) return kind;
  }
  throw DataError(kModule, file.string() + ": unrecognized results header");
}

Input read_input(const fs::path& path) {
  fs::path csv = path;
  fs::path run_dir;
  if (fs::is_directory(path)) {
    run_dir = path;
    csv = path / "results.csv";
  } else if (path.filename() == "results.csv") {
    run_dir = path.parent_path();
  }
  if (!fs::exists(csv)) throw DataError(kModule, "no results.csv at " + path.string());

  Input input;
  const auto normal = fs::absolute(path).lexically_normal();
  if (!run_dir.empty()) {
    input.source = fs::absolute(run_dir).lexically_normal().filename().string();
  } else {
    input.source = normal.stem().string();
  }
  if (input.source.empty()) input.source = normal.string();

  auto table = parse_csv(read_text_file(csv));
  if (table.empty()) throw DataError(kModule, csv.string() + " is empty");
  input.kind = kind_from_header(table.front(), csv);
  input.rows.assign(table.begin() + 1, table.end());
  for (const auto& row : input.rows) {
    if (row.size() != table.front().size()) {
      throw DataError(kModule, csv.string() + ": row width does not match the header");
    }
  }

  if (!run_dir.empty() && fs::exists(run_dir / "summary.json")) {
    const auto summary = nlohmann::json::parse(read_text_file(run_dir / "summary.json"), nullptr, false);
    if (summary.is_discarded() || !summary.is_object()) {
      throw DataError(kModule, (run_dir / "summary.json").string() + " is not a JSON object");
    }
    if (summary.contains("experiment") && summary["experiment"].get<std::string>() != input.kind) {
      throw DataError(kModule, csv.string() + " does not match the experiment in summary.json");
    }
    input.dataset = summary.value("dataset", std::string());
  }
  return input;
}

double number(const std::string& text, const std::string& source) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used == text.size()) return value;
  } catch (const std::exception&) {
  }
  throw DataError(kModule, source + ": expected a number, got '" + text + "'");
}

// Pooled (group size, changed) pairs rebuilt from the per-size counts.
std::string peer_statistics_row(const Input& input) {
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& row : input.rows) {
    const double size = number(row[0], input.source);
    const double n = number(row[1], input.source);
    const double changed = number(row[2], input.source);
    if (n < 0 || changed < 0 || changed > n || n != std::floor(n) || changed != std::floor(changed)) {
      throw DataError(kModule, input.source + ": inconsistent counts for group size " + row[0]);
    }
    for (int i = 0; i < static_cast<int>(n); ++i) {
      x.push_back(size);
      y.push_back(i < static_cast<int>(changed) ? 1.0 : 0.0);
    }
  }
  std::string line = csv_field(input.source) + "," + csv_field(input.dataset) + "," + std::to_string(x.size()) + ",";
  try {
    const auto report = stats::f_test_univariate(x, y);
    line += format_double(report.r) + "," + (std::isinf(report.f) ? "inf" : format_double(report.f)) + "," +
            std::to_string(report.df_model) + "," + std::to_string(report.df_residual) + "," +
            format_double(report.p) + ",";
  } catch (const UndefinedStatistic& error) {
    line += ",,,,," + csv_field(error.what());
  } catch (const DomainError& error) {
    line += ",,,,," + csv_field(error.what());
  }
  return line + "\n";
}

}  // namespace

std::map<std::string, std::string> build_report(const std::vector<fs::path>& inputs) {
  if (inputs.empty()) throw DataError(kModule, "no results given");
  std::vector<Input> loaded;
  for (const auto& path : inputs) loaded.push_back(read_input(path));

  std::map<std::string, std::string> files;
  for (const auto& [kind, figure] : figures()) {
    std::string body;
    for (const auto& input : loaded) {
      if (input.kind != kind) continue;
      for (const auto& row : input.rows) {
        body += csv_field(input.source) + "," + csv_field(input.dataset);
        for (const auto& field : row) body += "," + csv_field(field);
        body += "\n";
      }
    }
    if (body.empty()) continue;
    std::string header = "source,dataset";
    for (const auto& column : figure.header) header += "," + column;
    files[figure.file] = header + "\n" + body;
  }
  if (files.empty()) throw DataError(kModule, "the given results hold no data rows");

  std::string stats_body;
  for (const auto& input : loaded) {
    if (input.kind == "peer_pressure" && !input.rows.empty()) stats_body += peer_statistics_row(input);
  }
  if (!stats_body.empty()) {
    files["rate-by-group-size-stats.csv"] =
        "source,dataset,n,r,f,df_model,df_residual,p,note\n" + stats_body;
  }
  return files;
}

}  // namespace beliefsim::app
