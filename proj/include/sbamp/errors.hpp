#pragma once

// Error taxonomy for the library. Callers that treat a failure as a normal
// outcome (the experiment loop treating a planner timeout as "keep the last
// path") catch the specific type.

#include <stdexcept>
#include <string>

namespace sbamp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutOfBoundsError : public Error {
 public:
  using Error::Error;
};

class EmptyFreeSpaceError : public Error {
 public:
  using Error::Error;
};

class InvalidEndpointError : public Error {
 public:
  using Error::Error;
};

class PlanTimeoutError : public Error {
 public:
  PlanTimeoutError(const std::string& msg, int iterations_used)
      : Error(msg), iterations_used(iterations_used) {}
  int iterations_used = 0;
};

class EmptyTreeError : public Error {
 public:
  using Error::Error;
};

class InvalidDataError : public Error {
 public:
  using Error::Error;
};

class DegeneratePathError : public Error {
 public:
  using Error::Error;
};

class PerturbationIntoObstacleError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line = -1, const std::string& key = "")
      : Error(format(msg, line, key)), line(line), key(key) {}
  int line = -1;
  std::string key;

 private:
  static std::string format(const std::string& msg, int line, const std::string& key) {
    std::string out = msg;
    if (line >= 0) out += " (line " + std::to_string(line) + ")";
    if (!key.empty()) out += " [key: " + key + "]";
    return out;
  }
};

}  // namespace sbamp
