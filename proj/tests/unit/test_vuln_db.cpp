#include <sstream>

#include <gtest/gtest.h>

#include "coorddelay/vuln_db.hpp"
#include "test_support.hpp"

using namespace coorddelay;

namespace {

RecordMap fixture_records(Diagnostics& diag) {
  auto dir = testsupport::fixture_dir() / "feeds";
  return load_records({dir / "nvdcve-2008.json", dir / "nvdcve-2009.json"}, diag);
}

}  // namespace

TEST(LoadRecords, FixtureFeeds) {
  Diagnostics diag;
  auto records = fixture_records(diag);
  EXPECT_EQ(records.size(), 12u);
  EXPECT_EQ(diag.get("loaded"), 12u);
  EXPECT_EQ(diag.get("rejected"), 1u);
  EXPECT_EQ(diag.get("no_cvss"), 2u);
  const auto& r = records.at("CVE-2008-4688");
  EXPECT_EQ(format_date(r.published_at), "2008-10-22");
  EXPECT_EQ(reference_count(r), 6u);
  EXPECT_EQ(r.cwes, std::vector<std::string>{"CWE-399"});
  EXPECT_TRUE(records.at("CVE-2008-1008").rejected);
  EXPECT_FALSE(records.at("CVE-2009-0101").cvss.has_value());
  // Non-numeric placeholders are not CWE identifiers.
  EXPECT_TRUE(records.at("CVE-2008-1009").cwes.empty());
}

TEST(LoadRecords, DuplicateKeepsFirst) {
  std::istringstream in(
      "cve_id,published_at,summary,cvss,cwes,references\n"
      "CVE-2010-0001,2010-01-02,first,AV:N/AC:L/Au:N/C:P/I:N/A:N,CWE-79,http://a;http://a\n"
      "CVE-2010-0001,2011-01-02,second,,,\n"
      ",2010-01-01,no id,,,\n");
  RecordMap records;
  Diagnostics diag;
  load_csv_feed(in, records, diag);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records.begin()->second.summary, "first");
  EXPECT_EQ(diag.get("duplicate"), 1u);
  EXPECT_EQ(diag.get("missing_fields"), 1u);
  EXPECT_EQ(diag.warnings.size(), 2u);
  // Identical references are counted as listed.
  EXPECT_EQ(reference_count(records.begin()->second), 2u);
}

TEST(LoadRecords, ApiSchema) {
  auto feed = nlohmann::json::parse(R"({"vulnerabilities":[{"cve":{
    "id":"CVE-2015-1234","published":"2015-03-04T10:00:00.000",
    "descriptions":[{"lang":"es","value":"x"},{"lang":"en","value":"Buffer overflow"}],
    "metrics":{"cvssMetricV2":[{"type":"Secondary","cvssData":{"vectorString":"AV:L/AC:H/Au:S/C:N/I:N/A:N"}},
                               {"type":"Primary","cvssData":{"vectorString":"AV:N/AC:M/Au:N/C:C/I:N/A:N"}}]},
    "weaknesses":[{"description":[{"lang":"en","value":"CWE-119"}]}],
    "references":[{"url":"http://x"}]}}]})");
  RecordMap records;
  Diagnostics diag;
  load_json_feed(feed, records, diag);
  const auto& r = records.at("CVE-2015-1234");
  EXPECT_EQ(r.summary, "Buffer overflow");
  ASSERT_TRUE(r.cvss);
  EXPECT_EQ(r.cvss->access_vector, AccessVector::Network);
  EXPECT_EQ(r.cvss->conf_impact, Impact::Complete);
  EXPECT_EQ(r.cwes, std::vector<std::string>{"CWE-119"});
}

TEST(LoadRecords, UnparseableFeedThrows) {
  auto dir = testsupport::scratch_dir("bad_feed");
  std::ofstream(dir / "bad.json") << "{ not json";
  Diagnostics diag;
  EXPECT_THROW(load_records({dir / "bad.json"}, diag), std::runtime_error);
}

TEST(IsRejected, Examples) {
  CveRecord r;
  r.summary = "** REJECT ** duplicate of CVE-2008-0001";
  EXPECT_TRUE(is_rejected(r));
  r.summary = "Buffer overflow in foo";
  EXPECT_FALSE(is_rejected(r));
  r.summary = "";
  EXPECT_FALSE(is_rejected(r));
  r.summary = "** reject **";
  EXPECT_FALSE(is_rejected(r));
}

TEST(RecodeImpact, Examples) {
  EXPECT_EQ(recode_impact(Impact::None), 0);
  EXPECT_EQ(recode_impact(Impact::Partial), 1);
  EXPECT_EQ(recode_impact(Impact::Complete), 1);
  auto flags = impact_flags(parse_cvss_vector("AV:L/AC:L/Au:N/C:C/I:N/A:N"));
  EXPECT_EQ(flags.confidentiality, 1);
  EXPECT_EQ(flags.integrity, 0);
  EXPECT_EQ(flags.availability, 0);
  EXPECT_THROW(parse_impact("SEVERE"), std::invalid_argument);
}

// Every (C, I, A) impact combination with the expected recoded triple.
TEST(RecodeImpact, TwentySevenCaseGrid) {
  struct Case {
    const char* c;
    const char* i;
    const char* a;
    int impc, impi, impa;
  };
  const Case grid[] = {
      {"N", "N", "N", 0, 0, 0}, {"N", "N", "P", 0, 0, 1}, {"N", "N", "C", 0, 0, 1}, {"N", "P", "N", 0, 1, 0},
      {"N", "P", "P", 0, 1, 1}, {"N", "P", "C", 0, 1, 1}, {"N", "C", "N", 0, 1, 0}, {"N", "C", "P", 0, 1, 1},
      {"N", "C", "C", 0, 1, 1}, {"P", "N", "N", 1, 0, 0}, {"P", "N", "P", 1, 0, 1}, {"P", "N", "C", 1, 0, 1},
      {"P", "P", "N", 1, 1, 0}, {"P", "P", "P", 1, 1, 1}, {"P", "P", "C", 1, 1, 1}, {"P", "C", "N", 1, 1, 0},
      {"P", "C", "P", 1, 1, 1}, {"P", "C", "C", 1, 1, 1}, {"C", "N", "N", 1, 0, 0}, {"C", "N", "P", 1, 0, 1},
      {"C", "N", "C", 1, 0, 1}, {"C", "P", "N", 1, 1, 0}, {"C", "P", "P", 1, 1, 1}, {"C", "P", "C", 1, 1, 1},
      {"C", "C", "N", 1, 1, 0}, {"C", "C", "P", 1, 1, 1}, {"C", "C", "C", 1, 1, 1},
  };
  for (const auto& g : grid) {
    auto v = parse_cvss_vector(std::string("AV:N/AC:L/Au:N/C:") + g.c + "/I:" + g.i + "/A:" + g.a);
    auto f = impact_flags(v);
    EXPECT_EQ(f.confidentiality, g.impc) << g.c << g.i << g.a;
    EXPECT_EQ(f.integrity, g.impi) << g.c << g.i << g.a;
    EXPECT_EQ(f.availability, g.impa) << g.c << g.i << g.a;
    EXPECT_EQ(recode_impact(v.conf_impact), g.impc);
  }
}

// Every (AV, AC, Au) combination with the expected exploitability triple.
TEST(ExploitFlags, TwentySevenCaseGrid) {
  struct Case {
    const char* av;
    const char* ac;
    const char* au;
    int net, cplx, auth;
  };
  const Case grid[] = {
      {"L", "L", "N", 0, 0, 0}, {"L", "L", "S", 0, 0, 1}, {"L", "L", "M", 0, 0, 1}, {"L", "M", "N", 0, 1, 0},
      {"L", "M", "S", 0, 1, 1}, {"L", "M", "M", 0, 1, 1}, {"L", "H", "N", 0, 1, 0}, {"L", "H", "S", 0, 1, 1},
      {"L", "H", "M", 0, 1, 1}, {"A", "L", "N", 0, 0, 0}, {"A", "L", "S", 0, 0, 1}, {"A", "L", "M", 0, 0, 1},
      {"A", "M", "N", 0, 1, 0}, {"A", "M", "S", 0, 1, 1}, {"A", "M", "M", 0, 1, 1}, {"A", "H", "N", 0, 1, 0},
      {"A", "H", "S", 0, 1, 1}, {"A", "H", "M", 0, 1, 1}, {"N", "L", "N", 1, 0, 0}, {"N", "L", "S", 1, 0, 1},
      {"N", "L", "M", 1, 0, 1}, {"N", "M", "N", 1, 1, 0}, {"N", "M", "S", 1, 1, 1}, {"N", "M", "M", 1, 1, 1},
      {"N", "H", "N", 1, 1, 0}, {"N", "H", "S", 1, 1, 1}, {"N", "H", "M", 1, 1, 1},
  };
  for (const auto& g : grid) {
    auto v = parse_cvss_vector(std::string("AV:") + g.av + "/AC:" + g.ac + "/Au:" + g.au + "/C:N/I:N/A:N");
    auto f = exploit_flags(v);
    EXPECT_EQ(f.network, g.net) << g.av << g.ac << g.au;
    EXPECT_EQ(f.complexity, g.cplx) << g.av << g.ac << g.au;
    EXPECT_EQ(f.authentication, g.auth) << g.av << g.ac << g.au;
  }
}

TEST(ParseCvssVector, Variants) {
  auto a = parse_cvss_vector("AV:N/AC:L/Au:N/C:P/I:P/A:P");
  EXPECT_EQ(parse_cvss_vector("(AV:N/AC:L/Au:N/C:P/I:P/A:P)"), a);
  EXPECT_EQ(parse_cvss_vector("CVSS2#AV:N/AC:L/Au:N/C:P/I:P/A:P"), a);
  EXPECT_THROW(parse_cvss_vector("AV:N/AC:L"), std::invalid_argument);
  EXPECT_THROW(parse_cvss_vector("AV:X/AC:L/Au:N/C:P/I:P/A:P"), std::invalid_argument);
}

TEST(WriteRecordsCsv, Columns) {
  Diagnostics diag;
  auto records = fixture_records(diag);
  std::ostringstream out;
  write_records_csv(out, records);
  std::string s = out.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "cve_id,published_at,refs,av,ac,au,c,i,a,cwes,rejected");
  EXPECT_NE(s.find("CVE-2009-0101,2009-04-01,3,,,,,,,CWE-352;CWE-189,0"), std::string::npos);
}
