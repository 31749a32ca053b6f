#pragma once

#include <stdexcept>
#include <string>

namespace beliefsim {

// Every error carries the module that raised it; what() reads "module: message".
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

// Input outside an operation's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A model response that could not be parsed into the expected value.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Malformed dataset, transcript, or item-bank content.
class DataError : public Error {
 public:
  using Error::Error;
};

// Transport or endpoint failure, or an exhausted scripted backend.
class BackendError : public Error {
 public:
  using Error::Error;
};

// Invalid experiment or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A statistic that is undefined for the given input (e.g. zero variance).
class UndefinedStatistic : public Error {
 public:
  using Error::Error;
};

// Linear system that cannot be solved.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace beliefsim
