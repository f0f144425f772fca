#pragma once

#include <stdexcept>
#include <string>

namespace fabtip {

// Error categories map onto the CLI exit-code contract:
// validation/config/protocol -> 2, I/O -> 3, analysis -> 4.

/// A value outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed configuration (bad tables, degenerate geometry, bad alpha).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input that fails a schema or payload contract.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An analysis that cannot produce a result from the given data.
class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConflictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exit status for an error escaping a CLI command; 1 for anything unexpected.
inline int exit_code(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return 3;
  if (dynamic_cast<const AnalysisError*>(&e)) return 4;
  if (dynamic_cast<const std::invalid_argument*>(&e) || dynamic_cast<const std::domain_error*>(&e) ||
      dynamic_cast<const ProtocolError*>(&e) || dynamic_cast<const ConflictError*>(&e) ||
      dynamic_cast<const NotFoundError*>(&e))
    return 2;
  return 1;
}

}  // namespace fabtip
