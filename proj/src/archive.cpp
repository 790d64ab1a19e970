#include "coorddelay/archive.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace coorddelay {
namespace {

namespace fs = std::filesystem;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void append_utf8(std::string& out, unsigned long cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x110000) {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string decode_entities(std::string_view s) {
  static const std::map<std::string, std::string, std::less<>> named = {
      {"lt", "<"}, {"gt", ">"}, {"amp", "&"}, {"quot", "\""}, {"apos", "'"}, {"nbsp", " "}};
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    auto semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back('&');
      continue;
    }
    std::string_view name = s.substr(i + 1, semi - i - 1);
    if (!name.empty() && name[0] == '#') {
      unsigned long cp = 0;
      bool ok = name.size() > 1;
      if (ok && (name[1] == 'x' || name[1] == 'X')) {
        ok = name.size() > 2;
        for (char c : name.substr(2)) {
          if (!std::isxdigit(static_cast<unsigned char>(c))) { ok = false; break; }
          cp = cp * 16 + static_cast<unsigned long>(std::isdigit(static_cast<unsigned char>(c)) ? c - '0' : (std::tolower(c) - 'a' + 10));
        }
      } else if (ok) {
        for (char c : name.substr(1)) {
          if (!std::isdigit(static_cast<unsigned char>(c))) { ok = false; break; }
          cp = cp * 10 + static_cast<unsigned long>(c - '0');
        }
      }
      if (ok) {
        append_utf8(out, cp);
        i = semi;
        continue;
      }
    } else if (auto it = named.find(name); it != named.end()) {
      out += it->second;
      i = semi;
      continue;
    }
    out.push_back('&');
  }
  return out;
}

int base64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

// RFC 2047 encoded words ("=?charset?Q?...?=" / "=?charset?B?...?="). The
// decoded bytes are passed through unchanged.
std::string decode_encoded_words(std::string_view s) {
  std::string out;
  std::size_t i = 0;
  bool last_was_word = false;
  while (i < s.size()) {
    auto start = s.find("=?", i);
    if (start == std::string_view::npos) {
      out.append(s.substr(i));
      break;
    }
    auto q1 = s.find('?', start + 2);
    auto q2 = q1 == std::string_view::npos ? q1 : s.find('?', q1 + 1);
    auto end = q2 == std::string_view::npos ? q2 : s.find("?=", q2 + 1);
    if (end == std::string_view::npos || q2 != q1 + 2) {
      out.append(s.substr(i));
      break;
    }
    std::string_view gap = s.substr(i, start - i);
    // Whitespace between adjacent encoded words is dropped.
    if (!(last_was_word && trim(gap).empty())) out.append(gap);
    char enc = static_cast<char>(std::toupper(static_cast<unsigned char>(s[q1 + 1])));
    std::string_view payload = s.substr(q2 + 1, end - q2 - 1);
    if (enc == 'Q') {
      for (std::size_t k = 0; k < payload.size(); ++k) {
        char c = payload[k];
        if (c == '_') {
          out.push_back(' ');
        } else if (c == '=' && k + 2 < payload.size() && std::isxdigit(static_cast<unsigned char>(payload[k + 1])) &&
                   std::isxdigit(static_cast<unsigned char>(payload[k + 2]))) {
          out.push_back(static_cast<char>(std::stoi(std::string(payload.substr(k + 1, 2)), nullptr, 16)));
          k += 2;
        } else {
          out.push_back(c);
        }
      }
    } else if (enc == 'B') {
      unsigned buffer = 0;
      int bits = 0;
      for (char c : payload) {
        int v = base64_value(c);
        if (v < 0) continue;
        buffer = (buffer << 6) | static_cast<unsigned>(v);
        bits += 6;
        if (bits >= 8) {
          bits -= 8;
          out.push_back(static_cast<char>((buffer >> bits) & 0xFF));
        }
      }
    } else {
      out.append(s.substr(start, end + 2 - start));
    }
    i = end + 2;
    last_was_word = true;
  }
  return out;
}

struct ParsedMessage {
  std::map<std::string, std::string> headers;  // lower-cased names, first occurrence wins
  std::string body;
};

ParsedMessage split_headers(std::string_view text) {
  ParsedMessage msg;
  std::size_t pos = 0;
  std::string current_name;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    if (trim(line).empty()) {
      if (msg.headers.empty()) continue;  // leading blank lines
      break;
    }
    if (line[0] == ' ' || line[0] == '\t') {
      if (!current_name.empty()) msg.headers[current_name] += " " + std::string(trim(line));
      continue;
    }
    auto colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0 || line.substr(0, colon).find(' ') != std::string_view::npos) {
      // Not a header line: the header block is over and this is body text.
      pos -= (eol == std::string_view::npos ? line.size() : line.size() + 1);
      break;
    }
    std::string name = lower(line.substr(0, colon));
    if (msg.headers.count(name)) {
      current_name.clear();  // repeated header: first occurrence wins
    } else {
      current_name = name;
      msg.headers[name] = std::string(trim(line.substr(colon + 1)));
    }
  }
  msg.body = std::string(text.substr(std::min(pos, text.size())));
  return msg;
}

void build_email(const ParsedMessage& msg, const DateWindow& window, std::string key, ArchiveParseResult& out) {
  auto from = msg.headers.find("from");
  if (from == msg.headers.end()) {
    out.diagnostics.count("malformed");
    out.diagnostics.warn(key + ": no From header, skipped");
    return;
  }
  auto date = msg.headers.find("date");
  std::optional<DateTime> sent;
  if (date != msg.headers.end()) {
    sent = parse_rfc2822(date->second);
    if (!sent) sent = parse_iso_datetime(date->second);
  }
  if (!sent) {
    out.diagnostics.count("undated");
    out.diagnostics.warn(key + ": missing or unparseable Date header, skipped");
    return;
  }
  if (!window.contains(*sent)) {
    out.diagnostics.count("outside_window");
    return;
  }
  RawEmail email;
  email.message_key = std::move(key);
  email.sent_at = *sent;
  email.sender_raw = extract_sender(decode_encoded_words(from->second));
  if (email.sender_raw == kUnknownSender) out.diagnostics.count("unknown_sender");
  if (auto subj = msg.headers.find("subject"); subj != msg.headers.end()) {
    email.subject = decode_encoded_words(subj->second);
  }
  email.body = strip_message(msg.body);
  out.diagnostics.count("parsed");
  out.messages.push_back(std::move(email));
}

bool is_forward_delimiter(std::string_view line) {
  std::string l = lower(trim(line));
  if (l.rfind("begin forwarded message", 0) == 0) return true;
  if (l.empty() || (l[0] != '-' && l[0] != '_')) return false;
  return l.find("forwarded message") != std::string::npos || l.find("original message") != std::string::npos;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_html_path(const fs::path& p) {
  auto ext = lower(p.extension().string());
  return ext == ".html" || ext == ".htm";
}

void parse_file(const fs::path& path, const fs::path& root, const DateWindow& window, ArchiveParseResult& out) {
  std::string key = path == root ? path.filename().generic_string() : fs::relative(path, root).generic_string();
  std::string content;
  try {
    content = read_file(path);
  } catch (const std::exception& e) {
    out.diagnostics.count("malformed");
    out.diagnostics.warn(e.what());
    return;
  }
  if (is_html_path(path)) {
    auto ext = path.extension().string();
    if (key.size() > ext.size()) key.erase(key.size() - ext.size());
    auto part = parse_message_text(html_to_text(content), window, key);
    out.messages.insert(out.messages.end(), part.messages.begin(), part.messages.end());
    out.diagnostics.merge(part.diagnostics);
    return;
  }
  std::istringstream in(content);
  auto part = parse_mbox(in, window, key);
  out.messages.insert(out.messages.end(), part.messages.begin(), part.messages.end());
  out.diagnostics.merge(part.diagnostics);
}

}  // namespace

std::string strip_message(std::string_view raw_body) {
  std::string out;
  out.reserve(raw_body.size());
  std::size_t pos = 0;
  while (pos < raw_body.size()) {
    auto eol = raw_body.find('\n', pos);
    std::size_t next = eol == std::string_view::npos ? raw_body.size() : eol + 1;
    std::string_view line = raw_body.substr(pos, next - pos);
    pos = next;

    std::string_view content = line;
    if (!content.empty() && content.back() == '\n') content.remove_suffix(1);
    bool had_cr = !content.empty() && content.back() == '\r';
    if (had_cr) content.remove_suffix(1);

    if (is_forward_delimiter(content)) break;
    auto first = content.find_first_not_of(" \t");
    if (first != std::string_view::npos && content[first] == '>') continue;

    out.append(content);
    if (line.back() == '\n') out.push_back('\n');
  }
  return out;
}

std::string extract_sender(std::string_view from_header) {
  std::string_view h = trim(from_header);
  std::string name;
  auto lt = h.find('<');
  if (lt != std::string_view::npos) {
    name = std::string(trim(h.substr(0, lt)));
  } else if (auto open = h.find('('); open != std::string_view::npos) {
    auto close = h.find(')', open);
    name = std::string(trim(h.substr(open + 1, close == std::string_view::npos ? std::string_view::npos : close - open - 1)));
  } else if (h.find('@') != std::string_view::npos && h.find(' ') == std::string_view::npos) {
    name.clear();  // bare address
  } else {
    name = std::string(h);
  }
  if (name.size() >= 2 && name.front() == '"' && name.back() == '"') {
    name = name.substr(1, name.size() - 2);
  }
  // Collapse internal whitespace runs.
  std::string collapsed;
  bool space = false;
  for (char c : name) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
    } else {
      if (space && !collapsed.empty()) collapsed.push_back(' ');
      collapsed.push_back(c);
      space = false;
    }
  }
  if (collapsed.empty() || collapsed.find_first_not_of("\"'") == std::string::npos) {
    return std::string(kUnknownSender);
  }
  return collapsed;
}

std::string html_to_text(std::string_view html) {
  std::string lowered = lower(html);
  std::string_view region = html;
  auto pre = lowered.find("<pre");
  if (pre != std::string::npos) {
    auto open_end = lowered.find('>', pre);
    auto close = lowered.find("</pre>", open_end == std::string::npos ? pre : open_end);
    if (open_end != std::string::npos) {
      region = html.substr(open_end + 1, close == std::string::npos ? std::string_view::npos : close - open_end - 1);
    }
  }
  std::string text;
  text.reserve(region.size());
  bool in_tag = false;
  for (char c : region) {
    if (in_tag) {
      if (c == '>') in_tag = false;
    } else if (c == '<') {
      in_tag = true;
    } else {
      text.push_back(c);
    }
  }
  return decode_entities(text);
}

ArchiveParseResult parse_message_text(std::string_view text, const DateWindow& window, std::string message_key) {
  ArchiveParseResult out;
  build_email(split_headers(text), window, std::move(message_key), out);
  return out;
}

ArchiveParseResult parse_mbox(std::istream& in, const DateWindow& window, std::string_view key_prefix) {
  ArchiveParseResult out;
  std::string line;
  std::string current;
  bool have_message = false;
  bool previous_blank = true;
  std::size_t index = 0;

  auto flush = [&] {
    if (!have_message) return;
    ++index;
    build_email(split_headers(current), window, std::string(key_prefix) + "#" + std::to_string(index), out);
    current.clear();
  };

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (previous_blank && line.rfind("From ", 0) == 0) {
      flush();
      have_message = true;
      previous_blank = false;
      continue;
    }
    previous_blank = line.empty();
    if (!have_message) continue;  // preamble before the first separator
    // mboxrd escaping: ">From " at line start encodes "From ".
    if (line.rfind(">From ", 0) == 0) line.erase(0, 1);
    current += line;
    current.push_back('\n');
  }
  flush();
  return out;
}

ArchiveParseResult parse_archive(const std::filesystem::path& source, const DateWindow& window) {
  std::error_code ec;
  if (!fs::exists(source, ec)) throw std::runtime_error("archive source does not exist: " + source.string());

  ArchiveParseResult out;
  if (fs::is_regular_file(source)) {
    std::ifstream probe(source);
    if (!probe) throw std::runtime_error("archive source is not readable: " + source.string());
    parse_file(source, source, window, out);
    return out;
  }

  std::vector<fs::path> files;
  fs::recursive_directory_iterator it(source, ec);
  if (ec) throw std::runtime_error("archive directory is not readable: " + source.string());
  for (const auto& entry : it) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto name = f.filename().string();
    if (!name.empty() && name[0] == '.') continue;
    parse_file(f, source, window, out);
  }
  return out;
}

}  // namespace coorddelay
