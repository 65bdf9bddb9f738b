#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace commdecode {

/// Invalid input values (out-of-range coordinates, bad temperatures, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Contract misuse (stepping a terminated state, mismatched domains, ...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A non-finite value appeared in a numeric computation.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string op, const std::string& what)
      : std::runtime_error("numeric failure in op '" + op + "': " + what),
        op_(std::move(op)) {}
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

/// A training run failed to meet its convergence contract.
class TrainingFailure : public std::runtime_error {
 public:
  TrainingFailure(const std::string& what, std::vector<std::string> offenders)
      : std::runtime_error(what), offenders_(std::move(offenders)) {}
  const std::vector<std::string>& offenders() const { return offenders_; }

 private:
  std::vector<std::string> offenders_;
};

/// A configuration value failed validation; carries the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what),
        key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// A required upstream artifact is absent.
class MissingArtifact : public std::runtime_error {
 public:
  explicit MissingArtifact(std::string path)
      : std::runtime_error("missing artifact: " + path), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Exhaustive enumeration refused because the space is too large.
class EnumerationCapExceeded : public std::runtime_error {
 public:
  EnumerationCapExceeded(unsigned long long cardinality, unsigned long long cap)
      : std::runtime_error("policy space of size " + std::to_string(cardinality) +
                           " exceeds enumeration cap " + std::to_string(cap)),
        cardinality_(cardinality) {}
  unsigned long long cardinality() const { return cardinality_; }

 private:
  unsigned long long cardinality_;
};

/// Malformed input file; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace commdecode
