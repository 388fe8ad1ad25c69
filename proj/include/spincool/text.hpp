#pragma once

// Shared text utilities: shortest round-trip double formatting (locale-free)
// and position-carrying parse errors for the line-oriented file formats.

#include <stdexcept>
#include <string>

namespace spincool::text {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line, int col)
      : std::runtime_error(message + " at line " + std::to_string(line) + ", column " +
                           std::to_string(col)),
        line_(line),
        col_(col) {}

  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_;
  int col_;
};

// Shortest representation that parses back to the identical bits.
std::string format_double(double value);

// Strict full-token parse; returns false on trailing garbage or empty input.
bool parse_double(const std::string& token, double& out);
bool parse_int(const std::string& token, long& out);

}  // namespace spincool::text
