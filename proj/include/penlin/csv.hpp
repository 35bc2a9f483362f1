#pragma once

#include <cmath>
#include <cstdio>
#include <initializer_list>
#include <string>
#include <string_view>

namespace penlin::csv {

/// Round-trippable representation; NaN becomes an empty field.
inline std::string number(double v) {
  if (std::isnan(v)) return {};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string integer(long long v) { return std::to_string(v); }

inline std::string boolean(bool v) { return v ? "true" : "false"; }

inline std::string join(std::initializer_list<std::string_view> fields) {
  std::string out;
  bool first = true;
  for (auto f : fields) {
    if (!first) out += ',';
    out += f;
    first = false;
  }
  return out;
}

}  // namespace penlin::csv
