#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spdclab {

// Base of every error raised by a computation. The CLI maps these to exit
// code 1; ConfigError and ParseError map to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input outside a model's validity window.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Root bracketing failed over the scanned interval.
class NoPhaseMatchError : public Error {
 public:
  NoPhaseMatchError(const std::string& what, double lo, double hi)
      : Error(what), lo_(lo), hi_(hi) {}
  double scanned_lo() const noexcept { return lo_; }
  double scanned_hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

// Sampling grid does not contain the feature being computed.
class CoverageError : public Error {
 public:
  CoverageError(const std::string& what, double truncated_fraction)
      : Error(what), fraction_(truncated_fraction) {}
  double truncated_fraction() const noexcept { return fraction_; }

 private:
  double fraction_;
};

// Simulation resource guard.
class GuardError : public Error {
 public:
  using Error::Error;
};

class UnsortedStreamError : public Error {
 public:
  using Error::Error;
};

// An estimator whose denominator vanished. Carries the raw counts so the
// caller can still report them.
class UndefinedEstimateError : public Error {
 public:
  UndefinedEstimateError(const std::string& what, std::vector<std::uint64_t> raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::vector<std::uint64_t>& raw_counts() const noexcept { return raw_; }

 private:
  std::vector<std::uint64_t> raw_;
};

class AlignmentError : public Error {
 public:
  AlignmentError(const std::string& what, std::vector<std::string> unmatched)
      : Error(what), unmatched_(std::move(unmatched)) {}
  const std::vector<std::string>& unmatched() const noexcept { return unmatched_; }

 private:
  std::vector<std::string> unmatched_;
};

class RankDeficientError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `line` is 1-based, 0 when not line oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Bad or missing configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace spdclab
