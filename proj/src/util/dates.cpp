#include "coorddelay/util/dates.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace coorddelay {
namespace {

using namespace std::chrono;

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

std::optional<Date> make_date(int y, int m, int d) {
  year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd};
}

std::optional<Date> parse_date_prefix(std::string_view text) {
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y, m, d;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) ||
      !parse_int(text.substr(8, 2), d)) {
    return std::nullopt;
  }
  return make_date(y, m, d);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

int month_from_name(std::string_view name) {
  static constexpr std::array<std::string_view, 12> names = {
      "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"};
  if (name.size() < 3) return 0;
  std::string lower;
  for (char c : name.substr(0, 3)) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == lower) return static_cast<int>(i) + 1;
  }
  return 0;
}

// Offset in minutes east of UTC.
std::optional<int> zone_offset(std::string_view zone) {
  if (zone.size() == 5 && (zone[0] == '+' || zone[0] == '-')) {
    int hh, mm;
    if (!parse_int(zone.substr(1, 2), hh) || !parse_int(zone.substr(3, 2), mm)) return std::nullopt;
    int minutes = hh * 60 + mm;
    return zone[0] == '-' ? -minutes : minutes;
  }
  std::string upper;
  for (char c : zone) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (upper == "UT" || upper == "GMT" || upper == "UTC" || upper == "Z") return 0;
  if (upper == "EST") return -5 * 60;
  if (upper == "EDT") return -4 * 60;
  if (upper == "CST") return -6 * 60;
  if (upper == "CDT") return -5 * 60;
  if (upper == "MST") return -7 * 60;
  if (upper == "MDT") return -6 * 60;
  if (upper == "PST") return -8 * 60;
  if (upper == "PDT") return -7 * 60;
  return std::nullopt;
}

}  // namespace

Date parse_iso_date(std::string_view text) {
  text = trim(text);
  auto d = parse_date_prefix(text);
  if (!d || (text.size() > 10 && text[10] != 'T' && text[10] != ' ')) {
    throw std::invalid_argument("malformed date: '" + std::string(text) + "'");
  }
  return *d;
}

std::optional<DateTime> parse_iso_datetime(std::string_view text) {
  text = trim(text);
  auto d = parse_date_prefix(text);
  if (!d) return std::nullopt;
  DateTime t{*d};
  if (text.size() == 10) return t;
  if (text[10] != 'T' && text[10] != ' ') return std::nullopt;
  std::string_view rest = text.substr(11);
  int hh = 0, mm = 0, ss = 0;
  if (rest.size() < 5 || rest[2] != ':' || !parse_int(rest.substr(0, 2), hh) ||
      !parse_int(rest.substr(3, 2), mm)) {
    return std::nullopt;
  }
  rest.remove_prefix(5);
  if (rest.size() >= 3 && rest[0] == ':') {
    if (!parse_int(rest.substr(1, 2), ss)) return std::nullopt;
    rest.remove_prefix(3);
  }
  if (!rest.empty() && rest[0] == '.') {
    rest.remove_prefix(1);
    while (!rest.empty() && std::isdigit(static_cast<unsigned char>(rest[0]))) rest.remove_prefix(1);
  }
  int offset = 0;
  if (!rest.empty()) {
    if (rest == "Z") {
      offset = 0;
    } else if ((rest[0] == '+' || rest[0] == '-') && rest.size() == 6 && rest[3] == ':') {
      int oh, om;
      if (!parse_int(rest.substr(1, 2), oh) || !parse_int(rest.substr(4, 2), om)) return std::nullopt;
      offset = (rest[0] == '-' ? -1 : 1) * (oh * 60 + om);
    } else {
      return std::nullopt;
    }
  }
  if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  return t + hours{hh} + minutes{mm} + seconds{ss} - minutes{offset};
}

std::optional<DateTime> parse_rfc2822(std::string_view text) {
  // Drop trailing comments such as "(PST)".
  std::string cleaned;
  int depth = 0;
  for (char c : text) {
    if (c == '(') ++depth;
    else if (c == ')' && depth > 0) --depth;
    else if (depth == 0) cleaned.push_back(c == ',' ? ' ' : c);
  }
  auto tokens = split_ws(cleaned);
  if (!tokens.empty() && month_from_name(tokens[0]) == 0 && !std::isdigit(static_cast<unsigned char>(tokens[0][0]))) {
    tokens.erase(tokens.begin());  // day-of-week
  }
  if (tokens.size() < 4) return std::nullopt;

  int day_num, year_num;
  int month_num = month_from_name(tokens[1]);
  if (!parse_int(tokens[0], day_num) || month_num == 0 || !parse_int(tokens[2], year_num)) {
    return std::nullopt;
  }
  if (tokens[2].size() == 2) year_num += year_num < 50 ? 2000 : 1900;

  int hh = 0, mm = 0, ss = 0;
  std::string_view clock = tokens[3];
  if (clock.size() < 5 || clock[2] != ':' || !parse_int(clock.substr(0, 2), hh) ||
      !parse_int(clock.substr(3, 2), mm)) {
    return std::nullopt;
  }
  if (clock.size() >= 8 && clock[5] == ':' && !parse_int(clock.substr(6, 2), ss)) return std::nullopt;

  int offset = 0;
  if (tokens.size() >= 5) {
    auto z = zone_offset(tokens[4]);
    if (!z) return std::nullopt;
    offset = *z;
  }
  auto d = make_date(year_num, month_num, day_num);
  if (!d || hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  return DateTime{*d} + hours{hh} + minutes{mm} + seconds{ss} - minutes{offset};
}

std::string format_date(Date d) {
  year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_datetime(DateTime t) {
  Date d = to_date(t);
  hh_mm_ss hms{t - DateTime{d}};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%sT%02d:%02d:%02dZ", format_date(d).c_str(),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

int year_of(Date d) { return static_cast<int>(year_month_day{d}.year()); }
unsigned month_of(Date d) { return static_cast<unsigned>(year_month_day{d}.month()); }
unsigned weekday_of(Date d) { return weekday{d}.c_encoding(); }

}  // namespace coorddelay
