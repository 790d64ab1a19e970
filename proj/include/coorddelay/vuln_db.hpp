#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "coorddelay/cve_id.hpp"
#include "coorddelay/util/dates.hpp"
#include "coorddelay/util/diagnostics.hpp"

namespace coorddelay {

enum class AccessVector { Local, Adjacent, Network };
enum class AccessComplexity { Low, Medium, High };
enum class Authentication { None, Single, Multiple };
enum class Impact { None, Partial, Complete };

/// Categorical CVSS version 2 base vector.
struct CvssV2 {
  AccessVector access_vector = AccessVector::Network;
  AccessComplexity access_complexity = AccessComplexity::Low;
  Authentication authentication = Authentication::None;
  Impact conf_impact = Impact::None;
  Impact integ_impact = Impact::None;
  Impact avail_impact = Impact::None;

  bool operator==(const CvssV2&) const = default;
};

struct CveRecord {
  std::string cve_id;
  Date published_at;
  std::string summary;
  std::optional<CvssV2> cvss;
  std::vector<std::string> cwes;
  std::vector<std::string> reference_urls;
  bool rejected = false;
};

using RecordMap = std::map<std::string, CveRecord, CveIdLess>;

// Both the long NVD spellings ("NETWORK", "ADJACENT_NETWORK", "PARTIAL", ...)
// and the vector-string letters ("N", "A", "P", ...) are accepted. Unknown
// levels throw std::invalid_argument.
AccessVector parse_access_vector(std::string_view s);
AccessComplexity parse_access_complexity(std::string_view s);
Authentication parse_authentication(std::string_view s);
Impact parse_impact(std::string_view s);

// "AV:N/AC:L/Au:N/C:P/I:P/A:P", optionally wrapped in parentheses or carrying
// a "CVSS2#" prefix. Throws std::invalid_argument when malformed.
CvssV2 parse_cvss_vector(std::string_view vector);

std::string_view to_string(AccessVector v);
std::string_view to_string(AccessComplexity v);
std::string_view to_string(Authentication v);
std::string_view to_string(Impact v);

/// True iff the summary contains the literal token "REJECT".
bool is_rejected(const CveRecord& record);

/// NONE -> 0; PARTIAL, COMPLETE -> 1.
int recode_impact(Impact level);

struct ImpactFlags {
  int confidentiality = 0;
  int integrity = 0;
  int availability = 0;
};
ImpactFlags impact_flags(const CvssV2& cvss);

struct ExploitFlags {
  int network = 0;         // access vector is NETWORK
  int complexity = 0;      // access complexity MEDIUM or HIGH
  int authentication = 0;  // SINGLE or MULTIPLE authentication
};
ExploitFlags exploit_flags(const CvssV2& cvss);

/// Number of reference URLs as listed (duplicates counted).
std::size_t reference_count(const CveRecord& record);

// Loaders add to `records`, keeping the first record for a duplicate id.
// Records missing an id or publication date are skipped. Counter tags:
// "loaded", "duplicate", "missing_fields", "no_cvss", "rejected".
void load_json_feed(const nlohmann::json& feed, RecordMap& records, Diagnostics& diag);
void load_csv_feed(std::istream& in, RecordMap& records, Diagnostics& diag);

// Dispatches on content: JSON (legacy "CVE_Items" or "vulnerabilities"
// schema) or the fixture CSV schema. Unreadable or unparseable files throw
// std::runtime_error.
RecordMap load_records(const std::vector<std::filesystem::path>& feeds, Diagnostics& diag);

// Columns: cve_id, published_at, refs, av, ac, au, c, i, a, cwes, rejected.
void write_records_csv(std::ostream& out, const RecordMap& records);

}  // namespace coorddelay
