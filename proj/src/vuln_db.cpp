#include "coorddelay/vuln_db.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>

#include "coorddelay/util/csv.hpp"

namespace coorddelay {
namespace {

using nlohmann::json;

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_level(std::string_view what, std::string_view s) {
  throw std::invalid_argument("unknown CVSS v2 " + std::string(what) + " level '" + std::string(s) + "'");
}

bool parse_cve_number(std::string_view digits, unsigned long long& out) {
  if (digits.empty()) return false;
  auto res = std::from_chars(digits.data(), digits.data() + digits.size(), out);
  return res.ec == std::errc{} && res.ptr == digits.data() + digits.size();
}

// Keeps valid "CWE-<n>" entries, first occurrence order, no repeats.
void add_cwe(std::vector<std::string>& cwes, std::string_view value) {
  static const std::regex grammar("CWE-[0-9]+");
  std::string v(trim(value));
  if (!std::regex_match(v, grammar)) return;
  if (std::find(cwes.begin(), cwes.end(), v) == cwes.end()) cwes.push_back(v);
}

const json* path(const json& j, std::initializer_list<const char*> keys) {
  const json* cur = &j;
  for (const char* k : keys) {
    if (!cur->is_object()) return nullptr;
    auto it = cur->find(k);
    if (it == cur->end()) return nullptr;
    cur = &*it;
  }
  return cur;
}

std::string string_at(const json& j, std::initializer_list<const char*> keys) {
  const json* v = path(j, keys);
  return v && v->is_string() ? v->get<std::string>() : std::string{};
}

std::optional<CvssV2> cvss_from_json(const json& node) {
  if (!node.is_object()) return std::nullopt;
  if (node.contains("accessVector")) {
    CvssV2 c;
    c.access_vector = parse_access_vector(node.at("accessVector").get<std::string>());
    c.access_complexity = parse_access_complexity(node.at("accessComplexity").get<std::string>());
    c.authentication = parse_authentication(node.at("authentication").get<std::string>());
    c.conf_impact = parse_impact(node.at("confidentialityImpact").get<std::string>());
    c.integ_impact = parse_impact(node.at("integrityImpact").get<std::string>());
    c.avail_impact = parse_impact(node.at("availabilityImpact").get<std::string>());
    return c;
  }
  if (node.contains("vectorString")) return parse_cvss_vector(node.at("vectorString").get<std::string>());
  return std::nullopt;
}

void insert_record(CveRecord rec, RecordMap& records, Diagnostics& diag) {
  rec.rejected = is_rejected(rec);
  if (rec.rejected) diag.count("rejected");
  if (!rec.cvss) diag.count("no_cvss");
  auto id = rec.cve_id;
  auto [it, inserted] = records.emplace(id, std::move(rec));
  if (!inserted) {
    diag.count("duplicate");
    diag.warn("duplicate record " + id + ", keeping the first");
    return;
  }
  diag.count("loaded");
}

void load_legacy_item(const json& item, RecordMap& records, Diagnostics& diag) {
  CveRecord rec;
  auto raw_id = string_at(item, {"cve", "CVE_data_meta", "ID"});
  auto published = string_at(item, {"publishedDate"});
  auto id = canonical_cve_id(raw_id);
  auto when = parse_iso_datetime(published);
  if (!id || !when) {
    diag.count("missing_fields");
    diag.warn("feed item without a valid id/publishedDate skipped" + (raw_id.empty() ? std::string{} : " (" + raw_id + ")"));
    return;
  }
  rec.cve_id = *id;
  rec.published_at = to_date(*when);
  if (const json* desc = path(item, {"cve", "description", "description_data"}); desc && desc->is_array()) {
    for (const auto& d : *desc) {
      if (!rec.summary.empty()) rec.summary += "\n";
      rec.summary += d.value("value", "");
    }
  }
  if (const json* v2 = path(item, {"impact", "baseMetricV2", "cvssV2"})) rec.cvss = cvss_from_json(*v2);
  if (const json* pt = path(item, {"cve", "problemtype", "problemtype_data"}); pt && pt->is_array()) {
    for (const auto& entry : *pt) {
      if (!entry.contains("description")) continue;
      for (const auto& d : entry.at("description")) add_cwe(rec.cwes, d.value("value", ""));
    }
  }
  if (const json* refs = path(item, {"cve", "references", "reference_data"}); refs && refs->is_array()) {
    for (const auto& r : *refs) rec.reference_urls.push_back(r.value("url", ""));
  }
  insert_record(std::move(rec), records, diag);
}

void load_api_item(const json& wrapper, RecordMap& records, Diagnostics& diag) {
  const json& cve = wrapper.contains("cve") ? wrapper.at("cve") : wrapper;
  CveRecord rec;
  auto raw_id = string_at(cve, {"id"});
  auto published = string_at(cve, {"published"});
  auto id = canonical_cve_id(raw_id);
  auto when = parse_iso_datetime(published);
  if (!id || !when) {
    diag.count("missing_fields");
    diag.warn("feed item without a valid id/published date skipped" + (raw_id.empty() ? std::string{} : " (" + raw_id + ")"));
    return;
  }
  rec.cve_id = *id;
  rec.published_at = to_date(*when);
  if (const json* desc = path(cve, {"descriptions"}); desc && desc->is_array()) {
    for (const auto& d : *desc) {
      if (d.value("lang", "en") != "en") continue;
      if (!rec.summary.empty()) rec.summary += "\n";
      rec.summary += d.value("value", "");
    }
  }
  if (const json* v2 = path(cve, {"metrics", "cvssMetricV2"}); v2 && v2->is_array() && !v2->empty()) {
    // Prefer the NVD primary assessment when several sources scored it.
    const json* chosen = &v2->front();
    for (const auto& m : *v2) {
      if (m.value("type", "") == "Primary") { chosen = &m; break; }
    }
    if (chosen->contains("cvssData")) rec.cvss = cvss_from_json(chosen->at("cvssData"));
  }
  if (const json* ws = path(cve, {"weaknesses"}); ws && ws->is_array()) {
    for (const auto& w : *ws) {
      if (!w.contains("description")) continue;
      for (const auto& d : w.at("description")) add_cwe(rec.cwes, d.value("value", ""));
    }
  }
  if (const json* refs = path(cve, {"references"}); refs && refs->is_array()) {
    for (const auto& r : *refs) rec.reference_urls.push_back(r.value("url", ""));
  }
  insert_record(std::move(rec), records, diag);
}

std::vector<std::string> split_semicolons(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto next = s.find(';', pos);
    auto piece = trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (!piece.empty()) out.emplace_back(piece);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

}  // namespace

bool is_canonical_cve_id(std::string_view id) {
  if (id.size() < 13 || id.substr(0, 4) != "CVE-" || id[8] != '-') return false;
  auto digits = [](std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  return digits(id.substr(4, 4)) && digits(id.substr(9)) && id.size() - 9 >= 4;
}

std::optional<std::string> canonical_cve_id(std::string_view id) {
  id = trim(id);
  if (id.size() < 13) return std::nullopt;
  auto prefix = upper(id.substr(0, 4));
  if (prefix != "CVE-" && prefix != "CAN-") return std::nullopt;
  std::string candidate = "CVE-" + std::string(id.substr(4));
  if (!is_canonical_cve_id(candidate)) return std::nullopt;
  return candidate;
}

bool CveIdLess::operator()(std::string_view a, std::string_view b) const {
  bool ca = is_canonical_cve_id(a);
  bool cb = is_canonical_cve_id(b);
  if (ca && cb) {
    if (a.substr(4, 4) != b.substr(4, 4)) return a.substr(4, 4) < b.substr(4, 4);
    unsigned long long na = 0, nb = 0;
    bool pa = parse_cve_number(a.substr(9), na);
    bool pb = parse_cve_number(b.substr(9), nb);
    if (pa && pb && na != nb) return na < nb;
    return a < b;
  }
  if (ca != cb) return ca;  // identifiers sort before anything else
  return a < b;
}

AccessVector parse_access_vector(std::string_view s) {
  auto u = upper(trim(s));
  if (u == "LOCAL" || u == "L") return AccessVector::Local;
  if (u == "ADJACENT_NETWORK" || u == "ADJACENT" || u == "A") return AccessVector::Adjacent;
  if (u == "NETWORK" || u == "N") return AccessVector::Network;
  bad_level("access vector", s);
}

AccessComplexity parse_access_complexity(std::string_view s) {
  auto u = upper(trim(s));
  if (u == "LOW" || u == "L") return AccessComplexity::Low;
  if (u == "MEDIUM" || u == "M") return AccessComplexity::Medium;
  if (u == "HIGH" || u == "H") return AccessComplexity::High;
  bad_level("access complexity", s);
}

Authentication parse_authentication(std::string_view s) {
  auto u = upper(trim(s));
  if (u == "NONE" || u == "N") return Authentication::None;
  if (u == "SINGLE" || u == "SINGLE_INSTANCE" || u == "S") return Authentication::Single;
  if (u == "MULTIPLE" || u == "MULTIPLE_INSTANCES" || u == "M") return Authentication::Multiple;
  bad_level("authentication", s);
}

Impact parse_impact(std::string_view s) {
  auto u = upper(trim(s));
  if (u == "NONE" || u == "N") return Impact::None;
  if (u == "PARTIAL" || u == "P") return Impact::Partial;
  if (u == "COMPLETE" || u == "C") return Impact::Complete;
  bad_level("impact", s);
}

CvssV2 parse_cvss_vector(std::string_view vector) {
  std::string v(trim(vector));
  if (v.rfind("CVSS2#", 0) == 0) v.erase(0, 6);
  if (!v.empty() && v.front() == '(' && v.back() == ')') v = v.substr(1, v.size() - 2);

  std::map<std::string, std::string> parts;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, '/')) {
    auto colon = item.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("malformed CVSS v2 vector '" + v + "'");
    parts[item.substr(0, colon)] = item.substr(colon + 1);
  }
  for (const char* key : {"AV", "AC", "Au", "C", "I", "A"}) {
    if (!parts.count(key)) throw std::invalid_argument("CVSS v2 vector '" + v + "' lacks " + key);
  }
  CvssV2 c;
  c.access_vector = parse_access_vector(parts["AV"]);
  c.access_complexity = parse_access_complexity(parts["AC"]);
  c.authentication = parse_authentication(parts["Au"]);
  c.conf_impact = parse_impact(parts["C"]);
  c.integ_impact = parse_impact(parts["I"]);
  c.avail_impact = parse_impact(parts["A"]);
  return c;
}

std::string_view to_string(AccessVector v) {
  switch (v) {
    case AccessVector::Local: return "LOCAL";
    case AccessVector::Adjacent: return "ADJACENT_NETWORK";
    case AccessVector::Network: return "NETWORK";
  }
  return "";
}

std::string_view to_string(AccessComplexity v) {
  switch (v) {
    case AccessComplexity::Low: return "LOW";
    case AccessComplexity::Medium: return "MEDIUM";
    case AccessComplexity::High: return "HIGH";
  }
  return "";
}

std::string_view to_string(Authentication v) {
  switch (v) {
    case Authentication::None: return "NONE";
    case Authentication::Single: return "SINGLE";
    case Authentication::Multiple: return "MULTIPLE";
  }
  return "";
}

std::string_view to_string(Impact v) {
  switch (v) {
    case Impact::None: return "NONE";
    case Impact::Partial: return "PARTIAL";
    case Impact::Complete: return "COMPLETE";
  }
  return "";
}

bool is_rejected(const CveRecord& record) { return record.summary.find("REJECT") != std::string::npos; }

int recode_impact(Impact level) {
  switch (level) {
    case Impact::None: return 0;
    case Impact::Partial:
    case Impact::Complete: return 1;
  }
  throw std::invalid_argument("unknown impact level");
}

ImpactFlags impact_flags(const CvssV2& cvss) {
  return {recode_impact(cvss.conf_impact), recode_impact(cvss.integ_impact), recode_impact(cvss.avail_impact)};
}

ExploitFlags exploit_flags(const CvssV2& cvss) {
  ExploitFlags f;
  f.network = cvss.access_vector == AccessVector::Network ? 1 : 0;
  f.complexity = cvss.access_complexity != AccessComplexity::Low ? 1 : 0;
  f.authentication = cvss.authentication != Authentication::None ? 1 : 0;
  return f;
}

std::size_t reference_count(const CveRecord& record) { return record.reference_urls.size(); }

void load_json_feed(const json& feed, RecordMap& records, Diagnostics& diag) {
  if (feed.is_object() && feed.contains("CVE_Items")) {
    for (const auto& item : feed.at("CVE_Items")) {
      try {
        load_legacy_item(item, records, diag);
      } catch (const std::exception& e) {
        diag.count("missing_fields");
        diag.warn(std::string("feed item skipped: ") + e.what());
      }
    }
    return;
  }
  const json* items = nullptr;
  if (feed.is_object() && feed.contains("vulnerabilities")) items = &feed.at("vulnerabilities");
  else if (feed.is_array()) items = &feed;
  if (!items) throw std::runtime_error("unrecognised JSON feed schema");
  for (const auto& item : *items) {
    try {
      load_api_item(item, records, diag);
    } catch (const std::exception& e) {
      diag.count("missing_fields");
      diag.warn(std::string("feed item skipped: ") + e.what());
    }
  }
}

void load_csv_feed(std::istream& in, RecordMap& records, Diagnostics& diag) {
  auto table = csv::read_table(in);
  int c_id = table.column("cve_id");
  int c_pub = table.column("published_at");
  int c_sum = table.column("summary");
  int c_cvss = table.column("cvss");
  int c_cwes = table.column("cwes");
  int c_refs = table.column("references");
  if (c_id < 0 || c_pub < 0) throw std::runtime_error("CSV feed lacks cve_id/published_at columns");

  auto cell = [](const csv::Row& row, int col) -> std::string {
    return col >= 0 && static_cast<std::size_t>(col) < row.size() ? row[static_cast<std::size_t>(col)] : std::string{};
  };
  for (const auto& row : table.rows) {
    auto id = canonical_cve_id(cell(row, c_id));
    auto when = parse_iso_datetime(cell(row, c_pub));
    if (!id || !when) {
      diag.count("missing_fields");
      diag.warn("CSV feed row without a valid id/published_at skipped");
      continue;
    }
    CveRecord rec;
    rec.cve_id = *id;
    rec.published_at = to_date(*when);
    rec.summary = cell(row, c_sum);
    auto vec = cell(row, c_cvss);
    if (!trim(vec).empty()) {
      try {
        rec.cvss = parse_cvss_vector(vec);
      } catch (const std::exception& e) {
        diag.warn(rec.cve_id + ": " + e.what() + "; CVSS treated as missing");
      }
    }
    for (const auto& cwe : split_semicolons(cell(row, c_cwes))) add_cwe(rec.cwes, cwe);
    rec.reference_urls = split_semicolons(cell(row, c_refs));
    insert_record(std::move(rec), records, diag);
  }
}

RecordMap load_records(const std::vector<std::filesystem::path>& feeds, Diagnostics& diag) {
  RecordMap records;
  for (const auto& feed : feeds) {
    std::ifstream in(feed, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read feed " + feed.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string content = ss.str();
    auto first = content.find_first_not_of(" \t\r\n\xEF\xBB\xBF");
    if (first != std::string::npos && (content[first] == '{' || content[first] == '[')) {
      json parsed;
      try {
        parsed = json::parse(content);
      } catch (const json::exception& e) {
        throw std::runtime_error("feed " + feed.string() + " is not valid JSON: " + e.what());
      }
      load_json_feed(parsed, records, diag);
    } else {
      std::istringstream csv_in(content);
      load_csv_feed(csv_in, records, diag);
    }
  }
  return records;
}

void write_records_csv(std::ostream& out, const RecordMap& records) {
  csv::write_row(out, {"cve_id", "published_at", "refs", "av", "ac", "au", "c", "i", "a", "cwes", "rejected"});
  for (const auto& [id, rec] : records) {
    std::string cwes;
    for (const auto& c : rec.cwes) {
      if (!cwes.empty()) cwes.push_back(';');
      cwes += c;
    }
    csv::Row row{id, format_date(rec.published_at), std::to_string(reference_count(rec))};
    if (rec.cvss) {
      const auto& c = *rec.cvss;
      row.insert(row.end(), {std::string(to_string(c.access_vector)), std::string(to_string(c.access_complexity)),
                             std::string(to_string(c.authentication)), std::string(to_string(c.conf_impact)),
                             std::string(to_string(c.integ_impact)), std::string(to_string(c.avail_impact))});
    } else {
      row.insert(row.end(), 6, std::string{});
    }
    row.push_back(cwes);
    row.push_back(rec.rejected ? "1" : "0");
    csv::write_row(out, row);
  }
}

}  // namespace coorddelay
