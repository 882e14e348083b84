// Minimal RFC-4180-compatible CSV helpers used by every artifact.
#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace dfnid {

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

// Shortest representation that round-trips a double.
inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back;
  std::sscanf(buf, "%lg", &back);
  for (int prec = 10; prec <= 16; ++prec) {
    char trial[40];
    std::snprintf(trial, sizeof(trial), "%.*g", prec, v);
    std::sscanf(trial, "%lg", &back);
    if (back == v) return trial;
  }
  return buf;
}

}  // namespace dfnid
