#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace parkedchain {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument outside the domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed external input. row() is 1-based; 0 when the error is not tied to a row.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row = 0)
      : Error(row ? what + " (row " + std::to_string(row) + ")" : what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

/// A solver could not produce a feasible result.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Rejected ledger operation. The ledger state is unchanged when this is thrown.
class LedgerError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration; carries every violation found.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics)
      : Error(join(diagnostics)), diagnostics_(std::move(diagnostics)) {}
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  static std::string join(const std::vector<std::string>& d) {
    std::string out = "invalid configuration:";
    for (const auto& s : d) out += "\n  " + s;
    return out;
  }
  std::vector<std::string> diagnostics_;
};

}  // namespace parkedchain
