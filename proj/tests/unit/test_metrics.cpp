#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "coorddelay/metrics.hpp"

using namespace coorddelay;
using namespace std::chrono;

namespace {

// Sakamoto's day-of-week formula, 0 = Sunday.
int sakamoto(int y, int m, int d) {
  static const int t[] = {0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4};
  if (m < 3) y -= 1;
  return (y + y / 4 - y / 100 + y / 400 + t[m - 1] + d) % 7;
}

CveRecord record(const std::string& id, const char* published, std::vector<std::string> cwes = {},
                 bool rejected = false) {
  CveRecord r;
  r.cve_id = id;
  r.published_at = parse_iso_date(published);
  r.cwes = std::move(cwes);
  r.rejected = rejected;
  return r;
}

CveFeatures feature(const std::string& id, const char* t_oss) {
  CveFeatures f;
  f.cve_id = id;
  f.t_oss = parse_iso_date(t_oss);
  f.temporal = temporal_dummies(f.t_oss);
  return f;
}

}  // namespace

TEST(Entropy, Examples) {
  EXPECT_EQ(shannon_entropy_bits("abcd"), 2.0);
  EXPECT_EQ(shannon_entropy_bits("aaaa"), 0.0);
  EXPECT_FALSE(std::signbit(shannon_entropy_bits("aaaa")));
  EXPECT_EQ(shannon_entropy_bits(""), 0.0);
  // Code points, not bytes.
  EXPECT_EQ(shannon_entropy_bits("\xC3\xA9\xC3\xA9"), 0.0);
}

TEST(Entropy, MatchesDirectFormula) {
  std::string s = "the quick brown fox jumps over the lazy dog";
  std::map<char, int> counts;
  for (char c : s) ++counts[c];
  double h = 0;
  for (const auto& [c, n] : counts) {
    double p = double(n) / s.size();
    h -= p * std::log2(p);
  }
  EXPECT_NEAR(shannon_entropy_bits(s), h, 1e-12);
}

TEST(MessageStats, Examples) {
  std::vector<std::string> one{"aaaa"};
  auto a = message_stats(one);
  EXPECT_DOUBLE_EQ(a.msgslen, 0.04);
  EXPECT_EQ(a.msgsent, 0.0);
  std::vector<std::string> two{"ab", "ab"};
  auto b = message_stats(two);
  EXPECT_DOUBLE_EQ(b.msgslen, 0.04);
  EXPECT_DOUBLE_EQ(b.msgsent, 1.0);
  std::vector<std::string> none;
  auto c = message_stats(none);
  EXPECT_EQ(c.msgslen, 0.0);
  EXPECT_EQ(c.msgsent, 0.0);
}

TEST(TemporalDummies, Examples) {
  auto a = temporal_dummies(parse_iso_date("2008-03-05"));
  for (int v : a.years) EXPECT_EQ(v, 0);
  EXPECT_EQ(a.months[0], 0);
  EXPECT_EQ(a.months[1], 1);  // March
  EXPECT_EQ(a.weekend, 0);

  auto b = temporal_dummies(parse_iso_date("2011-01-09"));
  EXPECT_EQ(b.years[2], 1);  // 2011
  for (int v : b.months) EXPECT_EQ(v, 0);
  EXPECT_EQ(b.weekend, 1);

  auto c = temporal_dummies(parse_iso_date("2016-12-31"));
  EXPECT_EQ(c.years[7], 1);
  EXPECT_EQ(c.months[10], 1);
  EXPECT_EQ(c.weekend, 1);
}

TEST(TemporalDummies, WeekendAgreesWithIndependentOracle) {
  std::mt19937_64 rng(2017);
  std::uniform_int_distribution<int> year(2008, 2016), month(1, 12), day(1, 31);
  int checked = 0;
  while (checked < 1000) {
    int y = year(rng), m = month(rng), d = day(rng);
    year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)}, std::chrono::day{unsigned(d)}};
    if (!ymd.ok()) continue;
    ++checked;
    Date date{ymd};
    int wd = sakamoto(y, m, d);
    EXPECT_EQ(weekday_of(date), unsigned(wd));
    auto t = temporal_dummies(date);
    EXPECT_EQ(t.weekend, (wd == 0 || wd == 6) ? 1 : 0);
    int year_flags = 0, month_flags = 0;
    for (int v : t.years) year_flags += v;
    for (int v : t.months) month_flags += v;
    EXPECT_EQ(year_flags, y == 2008 ? 0 : 1);
    EXPECT_EQ(month_flags, m == 1 ? 0 : 1);
    if (y > 2008) {
      EXPECT_EQ(t.years[y - 2009], 1);
    }
    if (m > 1) {
      EXPECT_EQ(t.months[m - 2], 1);
    }
  }
}

TEST(ComputeDelays, FilterAndDiagnostics) {
  MentionDates mentions{{"CVE-2008-0001", parse_iso_date("2008-05-01")},
                        {"CVE-2008-0002", parse_iso_date("2008-05-01")},
                        {"CVE-2008-0003", parse_iso_date("2008-05-01")},
                        {"CVE-2008-0004", parse_iso_date("2008-05-01")},
                        {"CVE-2008-0005", parse_iso_date("2008-05-01")}};
  RecordMap records{{"CVE-2008-0001", record("CVE-2008-0001", "2008-05-01")},
                    {"CVE-2008-0002", record("CVE-2008-0002", "2008-05-16")},
                    {"CVE-2008-0003", record("CVE-2008-0003", "2008-04-30")},
                    {"CVE-2008-0004", record("CVE-2008-0004", "2008-06-01", {}, true)}};
  auto r = compute_delays(mentions, records);
  ASSERT_EQ(r.samples.size(), 2u);
  EXPECT_EQ(r.samples[0].y, 0);
  EXPECT_EQ(r.samples[1].y, 15);
  EXPECT_EQ(r.diagnostics.get("negative_delay"), 1u);
  EXPECT_EQ(r.diagnostics.get("rejected"), 1u);
  EXPECT_EQ(r.diagnostics.get("missing_record"), 1u);
  EXPECT_EQ(r.samples.size() + r.diagnostics.get("negative_delay") + r.diagnostics.get("rejected") +
                r.diagnostics.get("missing_record"),
            mentions.size());
}

TEST(TopCwes, RankingTiesAndClamp) {
  RecordMap records{{"CVE-2008-0001", record("CVE-2008-0001", "2008-01-01", {"CWE-79", "CWE-20"})},
                    {"CVE-2008-0002", record("CVE-2008-0002", "2008-01-01", {"CWE-79"})},
                    {"CVE-2008-0003", record("CVE-2008-0003", "2008-01-01", {"CWE-119"})},
                    {"CVE-2008-0004", record("CVE-2008-0004", "2008-01-01", {})},
                    {"CVE-2008-0005", record("CVE-2008-0005", "2008-01-01", {"CWE-1"})}};
  std::vector<std::string> sample{"CVE-2008-0001", "CVE-2008-0002", "CVE-2008-0003", "CVE-2008-0004"};
  EXPECT_EQ(top_cwes(records, sample, 2), (std::vector<std::string>{"CWE-79", "CWE-20"}));
  EXPECT_EQ(top_cwes(records, sample, 10), (std::vector<std::string>{"CWE-79", "CWE-20", "CWE-119"}));
  EXPECT_THROW(top_cwes(records, sample, 0), std::invalid_argument);
}

TEST(Assemble, ColumnCountsAndNesting) {
  AssembleOptions opts{true, {"CWE-264", "CWE-119", "CWE-79", "CWE-20", "CWE-200", "CWE-399", "CWE-189", "CWE-352",
                              "CWE-89", "CWE-310"}};
  const int expected[] = {21, 25, 31, 34, 37, 47};
  std::vector<std::string> previous;
  for (int level = 1; level <= 6; ++level) {
    auto cols = model_columns(level, opts);
    EXPECT_EQ(int(cols.size()), expected[level - 1]);
    EXPECT_EQ(cols.front(), "(Intercept)");
    ASSERT_GE(cols.size(), previous.size());
    EXPECT_TRUE(std::equal(previous.begin(), previous.end(), cols.begin())) << "level " << level;
    previous = cols;
  }
  AssembleOptions annual{false, opts.cwe_columns};
  const int annual_k[] = {13, 17, 23, 26, 29, 39};
  for (int level = 1; level <= 6; ++level) EXPECT_EQ(int(model_columns(level, annual).size()), annual_k[level - 1]);
  EXPECT_THROW(model_columns(7, opts), std::invalid_argument);
}

TEST(Assemble, TransformsAndDummies) {
  std::vector<CveFeatures> fs{feature("CVE-2008-4688", "2008-10-21"), feature("CVE-2011-0001", "2011-01-09")};
  fs[0].socdeg = 2;
  fs[0].infdeg = 6;
  fs[0].nvdrefs = 6;
  fs[0].msgslen = 1.5;
  fs[0].msgsent = 4.25;
  fs[0].infra = {1, 1, 1, 0};
  fs[1].cwes = {"CWE-79"};
  AssembleOptions opts{true, {"CWE-20", "CWE-79"}};
  auto m = assemble(6, fs, opts);
  auto col = [&](const std::string& name) {
    auto it = std::find(m.column_names.begin(), m.column_names.end(), name);
    return static_cast<Eigen::Index>(it - m.column_names.begin());
  };
  EXPECT_EQ(m.k(), 39);
  EXPECT_DOUBLE_EQ(m.rows(0, col("INFDEG")), std::log(7.0));
  EXPECT_DOUBLE_EQ(m.rows(0, col("SOCDEG")), std::log1p(2.0));
  EXPECT_DOUBLE_EQ(m.rows(0, col("MSGSENT")), std::log1p(4.25));
  EXPECT_EQ(m.rows(0, col("VULNINF")), 1);
  EXPECT_EQ(m.rows(0, col("SUPPORT")), 0);
  EXPECT_EQ(m.rows(0, col("Oct")), 1);
  EXPECT_EQ(m.rows(1, col("2011")), 1);
  EXPECT_EQ(m.rows(1, col("WEEKEND")), 1);
  EXPECT_EQ(m.rows(1, col("CWE-79")), 1);
  EXPECT_EQ(m.rows(1, col("CWE-20")), 0);
  EXPECT_EQ(m.transform_log, (std::set<std::string>{"SOCDEG", "MSGSLEN", "MSGSENT", "INFDEG", "NVDREFS"}));
  for (const auto& c : m.transform_log) {
    for (Eigen::Index i = 0; i < m.n(); ++i) EXPECT_GE(m.rows(i, col(c)), 0.0);
  }
  auto m3 = assemble(3, fs, opts);
  EXPECT_EQ(m3.k(), 31);
  EXPECT_DOUBLE_EQ(m3.rows(0, 25), std::log(7.0));  // INFDEG follows the level-2 block
}

TEST(Assemble, WriteModelMatrix) {
  std::vector<CveFeatures> fs{feature("CVE-2008-0001", "2008-01-05")};
  auto m = assemble(1, fs, {});
  std::ostringstream out;
  write_model_matrix(out, m);
  EXPECT_EQ(out.str(),
            "cve_id,(Intercept),2009,2010,2011,2012,2013,2014,2015,2016,Feb,Mar,Apr,May,Jun,Jul,Aug,Sep,Oct,Nov,"
            "Dec,WEEKEND\nCVE-2008-0001,1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,1\n");
}

TEST(BuildFeatures, InconsistentIndexIsFatal) {
  std::vector<CoordinationSample> samples{{"CVE-2008-0001", parse_iso_date("2008-01-01"),
                                           parse_iso_date("2008-01-02"), 1}};
  BipartiteGraph social, domains;
  std::map<std::string, int, CveIdLess> core;
  std::map<std::string, MessageStats, CveIdLess> stats;
  RecordMap records;
  FeatureInputs in{samples, &social, &domains, &core, &stats, &records};
  EXPECT_THROW(build_features(in), std::runtime_error);
}
