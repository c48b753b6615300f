#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace recontact {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A record violates a domain rule (e.g. an impossible group classification).
class InvalidRecord : public Error {
 public:
  InvalidRecord(std::int64_t id, const std::string& what)
      : Error("invalid record id=" + std::to_string(id) + ": " + what), id_(id) {}
  std::int64_t id() const { return id_; }

 private:
  std::int64_t id_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Raised by the CSV loader and the cohort validator. `line` is 1-based and
/// counts the header, so the first data row is line 2.
class LoadError : public Error {
 public:
  LoadError(std::size_t line, std::string column, const std::string& what)
      : Error("line " + std::to_string(line) + (column.empty() ? "" : ", column '" + column + "'") +
              ": " + what),
        line_(line),
        column_(std::move(column)) {}
  std::size_t line() const { return line_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t line_;
  std::string column_;
};

class DesignError : public Error {
 public:
  using Error::Error;
};

/// Model-fitting failures. `column` names the offending design column when known.
class FitError : public Error {
 public:
  FitError(const std::string& what, std::string column = {})
      : Error(what), column_(std::move(column)) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

class SeparationError : public FitError {
 public:
  explicit SeparationError(const std::string& column)
      : FitError("perfect separation detected at column '" + column + "'", column) {}
};

class CollinearityError : public FitError {
 public:
  explicit CollinearityError(const std::string& column)
      : FitError("design matrix is rank deficient at column '" + column + "'", column) {}
};

class DegenerateDataError : public FitError {
 public:
  using FitError::FitError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("config field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class UnavailableTruth : public Error {
 public:
  using Error::Error;
};

class InsufficientImputations : public Error {
 public:
  using Error::Error;
};

/// Imputation failures carry the variable and the fitting group; `cycle` is
/// -1 when the failure happened before the first sweep.
class ImputationError : public Error {
 public:
  ImputationError(std::string variable, std::string group, int cycle, const std::string& what)
      : Error("imputation of '" + variable + "' (group " + group + ", cycle " +
              std::to_string(cycle) + "): " + what),
        variable_(std::move(variable)),
        group_(std::move(group)),
        cycle_(cycle) {}
  const std::string& variable() const { return variable_; }
  const std::string& group() const { return group_; }
  int cycle() const { return cycle_; }

 private:
  std::string variable_;
  std::string group_;
  int cycle_;
};

class SmallStratumError : public ImputationError {
 public:
  SmallStratumError(std::string variable, std::string group, std::size_t n_rows, std::size_t needed)
      : ImputationError(std::move(variable), std::move(group), -1,
                        "fitting subsample has " + std::to_string(n_rows) + " rows, needs " +
                            std::to_string(needed) + "; consider enabling the ridge option") {}
};

}  // namespace recontact
