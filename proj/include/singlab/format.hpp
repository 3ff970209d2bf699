#pragma once

#include <cstdio>
#include <string>

namespace singlab {

// 17 significant digits, lowercase scientific; round-trips a double.
inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

}  // namespace singlab
