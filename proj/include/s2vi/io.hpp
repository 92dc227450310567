#pragma once

#include <charconv>
#include <cstddef>
#include <ostream>
#include <string>
#include <system_error>

#include "s2vi/diagnostics.hpp"
#include "s2vi/model.hpp"

namespace s2vi {

/// Scientific notation with 17 significant digits.
inline void append_number(std::string& out, double x) {
  char buf[40];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::scientific, 16);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  out.append(buf, end);
}

inline std::string format_number(double x) {
  std::string s;
  append_number(s, x);
  return s;
}

inline std::string trajectory_header(std::size_t n) {
  std::string h = "t";
  for (std::size_t i = 1; i <= n; ++i) {
    const std::string k = std::to_string(i);
    for (const char* v : {"q", "w"})
      for (const char* c : {"x", "y", "z"}) h += "," + std::string(v) + k + c;
  }
  h += '\n';
  return h;
}

inline std::string diagnostics_header() { return "t,total_energy,unit_error,tangency_error,momentum_e3\n"; }

inline void append_trajectory_row(std::string& out, const SystemState& s) {
  append_number(out, s.t);
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      out += ',';
      append_number(out, s.q[i][c]);
    }
    for (int c = 0; c < 3; ++c) {
      out += ',';
      append_number(out, s.w[i][c]);
    }
  }
  out += '\n';
}

inline void append_diagnostics_row(std::string& out, const DiagnosticSample& d) {
  append_number(out, d.t);
  out += ',';
  append_number(out, d.total_energy);
  out += ',';
  append_number(out, d.unit_error);
  out += ',';
  append_number(out, d.tangency_error);
  out += ',';
  if (d.momentum_e3) append_number(out, *d.momentum_e3);
  out += '\n';
}

}  // namespace s2vi
