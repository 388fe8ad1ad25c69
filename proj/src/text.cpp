#include "spincool/text.hpp"

#include <charconv>
#include <system_error>

namespace spincool::text {

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;  // 64 bytes always suffice for a double
  return std::string(buf, ptr);
}

bool parse_double(const std::string& token, double& out) {
  if (token.empty()) return false;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_int(const std::string& token, long& out) {
  if (token.empty()) return false;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace spincool::text
