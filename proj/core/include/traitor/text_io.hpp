#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "traitor/errors.hpp"

namespace traitor {

/// Line-oriented reader that remembers the current line number for error reporting.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  /// Reads the next line; false at end of input.
  bool next(std::string& line);
  /// Reads the next line or throws ParseError mentioning `what`.
  std::string expect(std::string_view what);

  int line() const { return line_; }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, what); }

 private:
  std::istream& in_;
  int line_ = 0;
};

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

/// Shortest text that round-trips; always 17 significant digits.
std::string format_double(double value);

double parse_double(std::string_view token, int line);
long long parse_int(std::string_view token, int line);
std::uint64_t parse_u64(std::string_view token, int line);
std::vector<double> parse_doubles(std::string_view text, int line);

/// `key = value` lines with `#` comments. Keys keep their first-seen line number.
struct KeyValueEntry {
  std::string value;
  int line = 0;
};
using KeyValueMap = std::map<std::string, KeyValueEntry>;

KeyValueMap parse_key_values(std::istream& in);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace traitor
