#pragma once

#include <map>
#include <string>
#include <vector>

namespace coorddelay {

// Non-fatal problems collected while a stage runs. Counters are keyed by a
// short reason tag so that reports stay stable across runs.
struct Diagnostics {
  std::vector<std::string> warnings;
  std::map<std::string, std::size_t> counters;

  void warn(std::string message) { warnings.push_back(std::move(message)); }
  void count(const std::string& tag, std::size_t n = 1) { counters[tag] += n; }
  std::size_t get(const std::string& tag) const {
    auto it = counters.find(tag);
    return it == counters.end() ? 0 : it->second;
  }
  void merge(const Diagnostics& other) {
    warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
    for (const auto& [k, v] : other.counters) counters[k] += v;
  }
};

}  // namespace coorddelay
