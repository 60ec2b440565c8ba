#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tofrgbd {

// Root of every error thrown by the library. The CLI maps any of these to a
// nonzero exit code with what() on stderr.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Spatial sizes or channel counts of two operands disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition (even kernel size, wrong
// channel count, unaligned sample passed to augmentation, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// A value lies outside the operation's mathematical domain
// (non-positive depth where depth is divided by, negative noise scale, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Input carries too little information: empty mask, too few pixels,
// rank-deficient least-squares system.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<double> trace)
      : Error(what), trace_(std::move(trace)) {}

  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ManifestError : public Error {
 public:
  ManifestError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace tofrgbd
