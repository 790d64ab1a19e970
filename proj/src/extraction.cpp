#include "coorddelay/extraction.hpp"

#include <array>
#include <cctype>

namespace coorddelay {
namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool iequals_at(std::string_view text, std::size_t pos, std::string_view word) {
  if (pos + word.size() > text.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[pos + i])) != word[i]) return false;
  }
  return true;
}

bool is_host_char(char c) { return is_alnum(c) || c == '-' || c == '.' || c == '_'; }

// Parses the authority starting at `pos` and returns the normalised host.
std::string host_at(std::string_view text, std::size_t pos) {
  std::size_t end = pos;
  while (end < text.size()) {
    char c = text[end];
    if (std::isspace(static_cast<unsigned char>(c)) || c == '/' || c == '?' || c == '#' || c == '<' ||
        c == '>' || c == '"' || c == '\'' || c == ')' || c == ']' || c == '(' || c == '[' || c == ',') {
      break;
    }
    ++end;
  }
  std::string_view authority = text.substr(pos, end - pos);
  if (auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);
  std::size_t host_end = 0;
  while (host_end < authority.size() && is_host_char(authority[host_end])) ++host_end;
  std::string host(authority.substr(0, host_end));
  while (!host.empty() && (host.back() == '.' || host.back() == '-' || host.back() == '_')) host.pop_back();
  for (auto& c : host) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return host;
}

}  // namespace

CveSet extract_cves(std::string_view text) {
  CveSet out;
  for (std::size_t i = 0; i + 13 <= text.size(); ++i) {
    if (!(iequals_at(text, i, "cve-") || iequals_at(text, i, "can-"))) continue;
    if (i > 0 && is_alnum(text[i - 1])) continue;
    std::size_t p = i + 4;
    std::size_t year_digits = 0;
    while (p < text.size() && is_digit(text[p]) && year_digits < 5) {
      ++p;
      ++year_digits;
    }
    if (year_digits != 4 || p >= text.size() || text[p] != '-') continue;
    std::size_t seq_start = ++p;
    while (p < text.size() && is_digit(text[p])) ++p;
    if (p - seq_start < 4) continue;
    out.insert("CVE-" + std::string(text.substr(i + 4, 4)) + "-" + std::string(text.substr(seq_start, p - seq_start)));
    i = p - 1;
  }
  return out;
}

bool is_ipv4_address(std::string_view s) {
  int parts = 0;
  std::size_t pos = 0;
  while (true) {
    std::size_t start = pos;
    int value = 0;
    while (pos < s.size() && is_digit(s[pos]) && pos - start < 3) {
      value = value * 10 + (s[pos] - '0');
      ++pos;
    }
    std::size_t len = pos - start;
    if (len == 0 || value > 255) return false;
    ++parts;
    if (pos == s.size()) break;
    if (s[pos] != '.' || parts == 4) return false;
    ++pos;
  }
  return parts == 4;
}

bool validate_domain(std::string_view d) {
  return d.size() >= 3 && d.find('.') != std::string_view::npos && !is_ipv4_address(d);
}

std::set<std::string> extract_domains(std::string_view text) {
  static constexpr std::array<std::string_view, 3> schemes = {"http://", "https://", "ftp://"};
  std::set<std::string> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    std::size_t authority = std::string_view::npos;
    for (auto scheme : schemes) {
      if (iequals_at(text, i, scheme) && (i == 0 || !is_alnum(text[i - 1]))) {
        authority = i + scheme.size();
        break;
      }
    }
    if (authority == std::string_view::npos && iequals_at(text, i, "www.") &&
        (i == 0 || !(is_host_char(text[i - 1]) || text[i - 1] == '/' || text[i - 1] == '@'))) {
      authority = i;
    }
    if (authority == std::string_view::npos) continue;
    auto host = host_at(text, authority);
    if (validate_domain(host)) out.insert(host);
    i = authority;
  }
  return out;
}

std::size_t count_chars(std::string_view text) {
  std::size_t n = 0;
  for (char c : text) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

MessageFacts extract_facts(const RawEmail& email) {
  MessageFacts facts;
  facts.message_key = email.message_key;
  facts.cve_ids = extract_cves(email.body);
  facts.domains = extract_domains(email.body);
  facts.body_length_chars = count_chars(email.body);
  return facts;
}

}  // namespace coorddelay
