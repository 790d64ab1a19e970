#pragma once

#include <set>
#include <string>
#include <string_view>

#include "coorddelay/archive.hpp"
#include "coorddelay/cve_id.hpp"

namespace coorddelay {

using CveSet = std::set<std::string, CveIdLess>;

/// Per-message extraction output.
struct MessageFacts {
  std::string message_key;
  CveSet cve_ids;
  std::set<std::string> domains;
  std::size_t body_length_chars = 0;
};

// (CVE|CAN)-YYYY-NNNN+ in any case, not preceded by a letter or digit; CAN
// ids are rewritten to CVE form.
CveSet extract_cves(std::string_view text);

// Dotted quad with every octet in 0..255 (one to three digits each).
bool is_ipv4_address(std::string_view s);

// At least three characters, contains '.', and is not a valid IPv4 address.
bool validate_domain(std::string_view d);

// Hosts of http/https/ftp URLs and of bare "www." hosts, lower-cased, with
// userinfo, port and trailing dots removed; only validated hosts are kept.
std::set<std::string> extract_domains(std::string_view text);

// Number of Unicode code points in UTF-8 text.
std::size_t count_chars(std::string_view text);

MessageFacts extract_facts(const RawEmail& email);

}  // namespace coorddelay
