#include "modfront/core.hpp"

#include <cstdio>

#include "modfront/errors.hpp"

namespace modfront {

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

std::uint64_t from_hex(const std::string& s) {
  if (s.empty() || s.size() > 16) throw ConfigError("not a 64-bit hex value: '" + s + "'");
  std::uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') v |= static_cast<std::uint64_t>(c - 'A' + 10);
    else throw ConfigError("not a 64-bit hex value: '" + s + "'");
  }
  return v;
}

}  // namespace modfront
