#pragma once

#include <stdexcept>
#include <string>

namespace doors {

// CLI exit codes: schema 2, training/runtime 3, io 4.
struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& m) : std::runtime_error(m) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

struct TrainError : std::runtime_error {
  explicit TrainError(const std::string& m) : std::runtime_error(m) {}
};

struct UnsupportedOperation : std::runtime_error {
  explicit UnsupportedOperation(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace doors
