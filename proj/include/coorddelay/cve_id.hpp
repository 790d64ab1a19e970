#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace coorddelay {

// True for "CVE-YYYY-NNNN..." (four-digit year, at least four digits in the
// sequence part, upper-case prefix).
bool is_canonical_cve_id(std::string_view id);

// Accepts CVE- or CAN- prefixes in any case and returns the canonical
// "CVE-..." form, or nullopt if the grammar does not match.
std::optional<std::string> canonical_cve_id(std::string_view id);

/// Orders identifiers by (year, sequence number) numerically, falling back to
/// plain string order for anything that is not an identifier.
struct CveIdLess {
  using is_transparent = void;
  bool operator()(std::string_view a, std::string_view b) const;
};

}  // namespace coorddelay
