#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "beliefsim/experiments.hpp"

namespace beliefsim::app {

// Entry point shared by the executable and the tests. `args` excludes the
// program name. Returns the process exit status.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Fixed-width text rendering of a result table.
std::string format_table(const experiments::ExperimentResult& result);

// Per-figure data files merged from results.csv inputs (run directories or
// the CSV files themselves): file name -> CSV text. Throws DataError when no
// input holds a data row.
std::map<std::string, std::string> build_report(const std::vector<std::filesystem::path>& inputs);

}  // namespace beliefsim::app
