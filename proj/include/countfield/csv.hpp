#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace countfield::csv {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

/// Splits one line on commas. No quoting rules; fields here never contain
/// commas. Trailing empty fields are preserved.
inline std::vector<std::string> split(std::string_view line, char sep = ',') {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return fields;
}

}  // namespace countfield::csv
