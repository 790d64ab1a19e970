#include <sstream>

#include <gtest/gtest.h>

#include "coorddelay/archive.hpp"
#include "test_support.hpp"

using namespace coorddelay;

namespace {

struct StripCase {
  std::string raw;
  std::string expected;
};

std::vector<StripCase> load_strip_corpus() {
  std::istringstream in(testsupport::slurp(testsupport::fixture_dir() / "strip_corpus.txt"));
  std::vector<StripCase> cases;
  std::string line;
  std::string* target = nullptr;
  while (std::getline(in, line)) {
    if (line.rfind("###", 0) == 0) continue;
    if (line == "@@ raw") {
      cases.emplace_back();
      target = &cases.back().raw;
    } else if (line == "@@ expected") {
      target = &cases.back().expected;
    } else if (target) {
      *target += line + "\n";
    }
  }
  return cases;
}

DateWindow window(const char* first, const char* last) { return {parse_iso_date(first), parse_iso_date(last)}; }

}  // namespace

TEST(StripMessage, RemovesQuotedLines) { EXPECT_EQ(strip_message("fix is out\n> old text\n"), "fix is out\n"); }

TEST(StripMessage, EmptyInput) { EXPECT_EQ(strip_message(""), ""); }

TEST(StripMessage, DropsEverythingAfterForwardMarker) {
  EXPECT_EQ(strip_message("keep\n---------- Forwarded message ----------\nlose\n"), "keep\n");
}

TEST(StripMessage, HandStrippedCorpus) {
  auto cases = load_strip_corpus();
  ASSERT_EQ(cases.size(), 10u);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    EXPECT_EQ(strip_message(cases[i].raw), cases[i].expected) << "case " << i;
  }
}

TEST(StripMessage, Idempotent) {
  for (const auto& c : load_strip_corpus()) {
    std::string once = strip_message(c.raw);
    EXPECT_EQ(strip_message(once), once);
  }
  std::string crlf = "a\r\n> b\r\nc\r\n";
  EXPECT_EQ(strip_message(crlf), "a\nc\n");
  EXPECT_EQ(strip_message(strip_message(crlf)), strip_message(crlf));
}

TEST(ExtractSender, DisplayNameBeforeAddress) { EXPECT_EQ(extract_sender("John Doe <jd@...>"), "John Doe"); }

TEST(ExtractSender, CommaNameKeptVerbatim) {
  EXPECT_EQ(extract_sender("Christey, Steven M."), "Christey, Steven M.");
  EXPECT_EQ(extract_sender("\"Christey, Steven M.\" <coley@...>"), "Christey, Steven M.");
}

TEST(ExtractSender, AddressOnlyIsUnknown) {
  EXPECT_EQ(extract_sender("<only@addr>"), kUnknownSender);
  EXPECT_EQ(extract_sender("only@addr"), kUnknownSender);
  EXPECT_EQ(extract_sender(""), kUnknownSender);
}

TEST(ExtractSender, CommentStyleName) { EXPECT_EQ(extract_sender("jd@example.org (John  Doe)"), "John Doe"); }

TEST(ParseArchive, FixtureWindowCovered) {
  auto r = parse_archive(testsupport::fixture_dir() / "archive", window("2008-02-01", "2016-12-31"));
  EXPECT_EQ(r.messages.size(), 20u);
  EXPECT_EQ(r.diagnostics.get("parsed"), 20u);
  EXPECT_EQ(r.diagnostics.get("unknown_sender"), 1u);
  for (const auto& m : r.messages) {
    EXPECT_FALSE(m.sender_raw.empty());
    EXPECT_EQ(strip_message(m.body), m.body);
  }
}

TEST(ParseArchive, WindowDropsLaterMessages) {
  auto r = parse_archive(testsupport::fixture_dir() / "archive", window("2008-02-01", "2008-12-31"));
  EXPECT_EQ(r.messages.size(), 17u);
  EXPECT_EQ(r.diagnostics.get("outside_window"), 3u);
}

TEST(ParseArchive, HtmlMessage) {
  auto r = parse_archive(testsupport::fixture_dir() / "archive" / "html" / "2008-10-21.html",
                         window("2008-01-01", "2008-12-31"));
  ASSERT_EQ(r.messages.size(), 1u);
  EXPECT_EQ(r.messages[0].sender_raw, "Marcus Meissner");
  EXPECT_EQ(format_datetime(r.messages[0].sent_at), "2008-10-21T15:40:00Z");
  EXPECT_NE(r.messages[0].body.find("CVE-2008-4688"), std::string::npos);
}

TEST(ParseMbox, MalformedMessageSkipped) {
  std::istringstream in(
      "From x Mon Jan 1 00:00:00 2010\nSubject: no sender\nDate: Mon, 4 Jan 2010 00:00:00 +0000\n\nbody\n\n"
      "From x Mon Jan 1 00:00:00 2010\nFrom: A B <a@b>\nSubject: undated\n\nbody\n\n"
      "From x Mon Jan 1 00:00:00 2010\nFrom: A B <a@b>\nDate: Tue, 5 Jan 2010 10:00:00 +0200\n\n"
      ">From the archive\nbody\n");
  auto r = parse_mbox(in, window("2010-01-01", "2010-12-31"), "m");
  ASSERT_EQ(r.messages.size(), 1u);
  EXPECT_EQ(r.diagnostics.get("malformed"), 1u);
  EXPECT_EQ(r.diagnostics.get("undated"), 1u);
  EXPECT_EQ(r.messages[0].message_key, "m#3");
  EXPECT_EQ(format_datetime(r.messages[0].sent_at), "2010-01-05T08:00:00Z");
  EXPECT_EQ(r.messages[0].body, "From the archive\nbody\n");
}

TEST(ParseArchive, MissingSourceIsFatal) {
  EXPECT_THROW(parse_archive("/nonexistent/archive", window("2008-01-01", "2008-12-31")), std::runtime_error);
}
