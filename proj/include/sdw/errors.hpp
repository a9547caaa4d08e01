#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>

namespace sdw {

/// Bad experiment or task configuration (invalid grid size, unknown strategy, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API misuse: dimension mismatches, stepping a finished episode, empty inputs.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// NaN/inf or a zero probability where a ratio is required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric whose formula has no terms for the given matrix (e.g. forgetting with one segment).
class UndefinedMetricError : public UsageError {
 public:
  using UsageError::UsageError;
};

using WarningSink = std::function<void(const std::string&)>;

inline WarningSink& warning_sink() {
  static WarningSink sink = [](const std::string& msg) { std::cerr << "[sdw] warning: " << msg << '\n'; };
  return sink;
}

inline void warn(const std::string& msg) {
  if (warning_sink()) warning_sink()(msg);
}

}  // namespace sdw
