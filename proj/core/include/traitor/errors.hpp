#pragma once

#include <stdexcept>
#include <string>

namespace traitor {

// Invalid arguments are reported with std::invalid_argument. The types below
// cover the remaining failure classes surfaced by the CLI exit codes.

/// An operation was called before a required resource (checkpoint) was loaded.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// An enumeration exceeded its configured state budget.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input; carries the 1-based line number of the offending line.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace traitor
