#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "coorddelay/util/dates.hpp"
#include "coorddelay/util/diagnostics.hpp"

namespace coorddelay {

/// One archived mailing-list message after cleaning.
struct RawEmail {
  std::string message_key;
  DateTime sent_at;
  std::string sender_raw;  // display name, or kUnknownSender
  std::string subject;
  std::string body;        // quotation and forwarded text removed
};

inline constexpr std::string_view kUnknownSender = "unknown";

struct ArchiveParseResult {
  std::vector<RawEmail> messages;
  // Counter tags: "parsed", "outside_window", "undated", "malformed",
  // "unknown_sender".
  Diagnostics diagnostics;
};

// Reads a directory of per-message HTML pages and/or mbox files, or a single
// mbox/HTML file. Files are visited in sorted path order. An unreadable
// source throws std::runtime_error; a single bad message is skipped and
// counted.
ArchiveParseResult parse_archive(const std::filesystem::path& source, const DateWindow& window);

// Messages of one mbox stream. Keys are "<key_prefix>#<1-based index>".
ArchiveParseResult parse_mbox(std::istream& in, const DateWindow& window, std::string_view key_prefix);

// One message given as header block + blank line + body (the text shape of an
// archive HTML page once markup is removed).
ArchiveParseResult parse_message_text(std::string_view text, const DateWindow& window,
                                      std::string message_key);

// Removes quotation lines (first non-blank character '>') and truncates at the
// first forwarded/original-message delimiter line. Idempotent.
std::string strip_message(std::string_view raw_body);

// Display name of a From header. "John Doe <jd@...>" -> "John Doe";
// "jd@x (John Doe)" -> "John Doe"; address-only headers give kUnknownSender.
std::string extract_sender(std::string_view from_header);

// Text content of an HTML page: the first <pre> block when present, tags
// removed, character entities decoded.
std::string html_to_text(std::string_view html);

}  // namespace coorddelay
