// Line-oriented `key = value` scanner shared by the chain-description,
// disturbance-profile, and experiment-config formats.
//
// Grammar per line:  blank | '# comment' | '[section]' | 'key = value'
// Values are free text up to end of line; vector values use commas.
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "armstab/core.hpp"

namespace armstab {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ":" + std::to_string(column) +
                           ": " + what),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

struct KvEntry {
  int line = 0;
  bool is_section = false;
  std::string section;  // set on section lines
  std::string key;
  std::string value;
};

namespace detail {
inline std::string_view trim(std::string_view s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}
}  // namespace detail

inline std::vector<KvEntry> scan_keyval(std::string_view text) {
  std::vector<KvEntry> entries;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    std::string_view raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos
                                                                          : eol - pos);
    ++line_no;
    std::string_view line = detail::trim(raw);
    if (!line.empty() && line[0] != '#') {
      KvEntry e;
      e.line = line_no;
      if (line.front() == '[') {
        if (line.back() != ']' || line.size() < 3)
          throw ParseError(line_no, 1, "malformed section header");
        e.is_section = true;
        e.section = std::string(detail::trim(line.substr(1, line.size() - 2)));
        if (e.section.empty()) throw ParseError(line_no, 2, "empty section name");
      } else {
        size_t eq = line.find('=');
        if (eq == std::string_view::npos)
          throw ParseError(line_no, 1, "expected 'key = value' or '[section]'");
        std::string_view key = detail::trim(line.substr(0, eq));
        if (key.empty()) throw ParseError(line_no, 1, "missing key before '='");
        e.key = std::string(key);
        e.value = std::string(detail::trim(line.substr(eq + 1)));
        if (e.value.empty())
          throw ParseError(line_no, static_cast<int>(eq) + 2, "missing value for key '" + e.key + "'");
      }
      entries.push_back(std::move(e));
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  return entries;
}

// Comma-separated list of doubles; throws with the line context on failure.
inline std::vector<double> parse_number_list(const std::string& value, int line) {
  std::vector<double> out;
  size_t pos = 0;
  int column = 1;
  while (true) {
    size_t comma = value.find(',', pos);
    std::string_view tok(value.data() + pos,
                         (comma == std::string::npos ? value.size() : comma) - pos);
    double x = 0.0;
    if (!parse_double(tok, x))
      throw ParseError(line, column, "expected a number, got '" + std::string(detail::trim(tok)) + "'");
    out.push_back(x);
    if (comma == std::string::npos) break;
    column = static_cast<int>(comma) + 2;
    pos = comma + 1;
  }
  return out;
}

inline double parse_scalar(const std::string& value, int line) {
  double x = 0.0;
  if (!parse_double(value, x)) throw ParseError(line, 1, "expected a number, got '" + value + "'");
  return x;
}

}  // namespace armstab
