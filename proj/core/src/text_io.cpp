#include "traitor/text_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace traitor {

bool LineReader::next(std::string& line) {
  if (!std::getline(in_, line)) return false;
  ++line_;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::string LineReader::expect(std::string_view what) {
  std::string line;
  if (!next(line)) throw ParseError(line_ + 1, "unexpected end of input, expected " + std::string(what));
  return line;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

double parse_double(std::string_view token, int line) {
  const std::string text(trim(token));
  if (text.empty()) throw ParseError(line, "expected a number");
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || errno == ERANGE) {
    throw ParseError(line, "invalid number '" + text + "'");
  }
  return value;
}

long long parse_int(std::string_view token, int line) {
  const std::string text(trim(token));
  char* end = nullptr;
  errno = 0;
  const long long value = std::strtoll(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
    throw ParseError(line, "invalid integer '" + text + "'");
  }
  return value;
}

std::uint64_t parse_u64(std::string_view token, int line) {
  const std::string text(trim(token));
  char* end = nullptr;
  errno = 0;
  const unsigned long long value = std::strtoull(text.c_str(), &end, 10);
  if (text.empty() || text.front() == '-' || end != text.c_str() + text.size() || errno == ERANGE) {
    throw ParseError(line, "invalid unsigned integer '" + text + "'");
  }
  return value;
}

std::vector<double> parse_doubles(std::string_view text, int line) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    if (pos >= text.size()) break;
    std::size_t end = pos;
    while (end < text.size() && text[end] != ' ' && text[end] != '\t') ++end;
    values.push_back(parse_double(text.substr(pos, end - pos), line));
    pos = end;
  }
  return values;
}

KeyValueMap parse_key_values(std::istream& in) {
  KeyValueMap map;
  LineReader reader(in);
  std::string raw;
  while (reader.next(raw)) {
    std::string_view line(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) reader.fail("expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) reader.fail("empty key");
    if (map.contains(key)) reader.fail("duplicate key '" + key + "'");
    map[key] = KeyValueEntry{std::string(trim(line.substr(eq + 1))), reader.line()};
  }
  return map;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace traitor
