#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace intraday {

// Coarse grouping used by the CLI to pick an exit code.
enum class ErrorCategory { config, data, fit, runtime };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error(ErrorCategory::data, "line " + std::to_string(line) + ": " + reason),
        line_(line),
        reason_(reason) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

class SchemaVersionMismatch : public Error {
 public:
  explicit SchemaVersionMismatch(int found)
      : Error(ErrorCategory::data, "unsupported schema_version " + std::to_string(found)) {}
};

class EmptyBook : public Error {
 public:
  EmptyBook() : Error(ErrorCategory::data, "empty order book") {}
};

class MissingSide : public Error {
 public:
  MissingSide() : Error(ErrorCategory::data, "one side of the book has no orders in the cell") {}
};

class ArrivalAfterCutoff : public Error {
 public:
  ArrivalAfterCutoff() : Error(ErrorCategory::data, "arrival is within the 30-minute trading cutoff") {}
};

class AllZeroVolume : public Error {
 public:
  AllZeroVolume() : Error(ErrorCategory::data, "training grid has no traded volume") {}
};

class MissingCell : public Error {
 public:
  MissingCell(int k, std::size_t r)
      : Error(ErrorCategory::data,
              "missing grid cell k=" + std::to_string(k) + " r=" + std::to_string(r)),
        k_(k),
        r_(r) {}

  int k() const noexcept { return k_; }
  std::size_t r() const noexcept { return r_; }

 private:
  int k_;
  std::size_t r_;
};

class DegenerateInput : public Error {
 public:
  explicit DegenerateInput(const std::string& what) : Error(ErrorCategory::fit, what) {}
};

class InsufficientData : public Error {
 public:
  explicit InsufficientData(const std::string& stratum)
      : Error(ErrorCategory::fit, "insufficient data in stratum " + stratum), stratum_(stratum) {}

  const std::string& stratum() const noexcept { return stratum_; }

 private:
  std::string stratum_;
};

class NotFitted : public Error {
 public:
  NotFitted() : Error(ErrorCategory::fit, "impact model is not fitted") {}
};

class OutOfRange : public Error {
 public:
  explicit OutOfRange(const std::string& what) : Error(ErrorCategory::runtime, what) {}
};

class LengthMismatch : public Error {
 public:
  LengthMismatch(std::size_t expected, std::size_t found)
      : Error(ErrorCategory::runtime, "length mismatch: expected " + std::to_string(expected) +
                                           ", found " + std::to_string(found)) {}
};

class InfeasibleTick : public Error {
 public:
  explicit InfeasibleTick(double volume)
      : Error(ErrorCategory::runtime,
              "volume " + std::to_string(volume) + " is not a multiple of the 0.1 MWh tick") {}
};

class DegenerateSample : public Error {
 public:
  explicit DegenerateSample(const std::string& what) : Error(ErrorCategory::runtime, what) {}
};

class EmptySample : public Error {
 public:
  EmptySample() : Error(ErrorCategory::runtime, "subsample retains no days") {}
};

}  // namespace intraday
