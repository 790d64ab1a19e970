#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "coorddelay/identity.hpp"

using namespace coorddelay;

namespace {

// Textbook dynamic-programming edit distance over bytes (ASCII inputs only).
std::size_t dp_levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
    }
  }
  return d[a.size()][b.size()];
}

std::string random_word(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(0, 8), ch(0, 3);
  std::string s;
  for (int i = len(rng); i > 0; --i) s.push_back(static_cast<char>('a' + ch(rng)));
  return s;
}

std::vector<std::set<std::string>> partition(const std::vector<Participant>& ps) {
  std::vector<std::set<std::string>> out;
  for (const auto& p : ps) out.push_back(p.aliases);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(Similarity, Identity) { EXPECT_DOUBLE_EQ(similarity("John Doe", "John Doe"), 1.0); }

TEST(Similarity, CommaVariant) {
  EXPECT_EQ(dp_levenshtein("john doe", "john, doe"), 1u);
  EXPECT_DOUBLE_EQ(similarity("John Doe", "John, Doe"), 1.0 - 1.0 / 9.0);
}

TEST(Similarity, Disjoint) { EXPECT_DOUBLE_EQ(similarity("Alice", "Bob"), 0.0); }

TEST(Similarity, BothEmptyThrows) { EXPECT_THROW(similarity("  ", ""), std::invalid_argument); }

TEST(Similarity, NormalizesCaseAndWhitespace) { EXPECT_DOUBLE_EQ(similarity(" JOHN   doe ", "john doe"), 1.0); }

TEST(Levenshtein, MatchesDynamicProgrammingOracle) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 2000; ++t) {
    std::string a = random_word(rng), b = random_word(rng);
    ASSERT_EQ(levenshtein(a, b), dp_levenshtein(a, b)) << a << " / " << b;
  }
}

TEST(Levenshtein, CountsCodePoints) { EXPECT_EQ(levenshtein("J\xC3\xBCrgen", "Jurgen"), 1u); }

TEST(Levenshtein, MetricProperties) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 1000; ++t) {
    std::string a = random_word(rng), b = random_word(rng), c = random_word(rng);
    EXPECT_EQ(levenshtein(a, b), levenshtein(b, a));
    EXPECT_LE(levenshtein(a, c), levenshtein(a, b) + levenshtein(b, c));
    if (!a.empty() || !b.empty()) {
      double s = similarity(a.empty() ? b : a, b.empty() ? a : b);
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
  }
}

TEST(ResolveIdentities, CommaVariantMerges) {
  std::vector<std::string> names{"John Doe", "John, Doe", "Bob"};
  auto ps = resolve_identities(names, 0.8);
  ASSERT_EQ(ps.size(), 2u);
  EXPECT_EQ(ps[0].canonical_name, "Bob");
  EXPECT_EQ(ps[1].aliases, (std::set<std::string>{"John Doe", "John, Doe"}));
}

TEST(ResolveIdentities, ManualMerge) {
  std::vector<std::string> names{"Christey, Steven M.", "Steven M. Christey"};
  EXPECT_EQ(resolve_identities(names, 0.8).size(), 2u);
  std::vector<NamePair> merges{{"Christey, Steven M.", "Steven M. Christey"}};
  auto ps = resolve_identities(names, 0.8, merges);
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_EQ(ps[0].aliases.size(), 2u);
}

TEST(ResolveIdentities, CanonicalIsMostFrequentAlias) {
  std::vector<std::string> names{"John, Doe", "John Doe", "John Doe"};
  auto ps = resolve_identities(names, 0.8);
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_EQ(ps[0].canonical_name, "John Doe");
  std::vector<std::string> tie{"John, Doe", "John Doe"};
  EXPECT_EQ(resolve_identities(tie, 0.8)[0].canonical_name, "John Doe");
}

TEST(ResolveIdentities, TransitiveClosure) {
  // a~b and b~c at 0.8 while a and c differ by two edits.
  std::vector<std::string> names{"abcdefghij", "abcdefghiX", "abcdefghYX"};
  EXPECT_LT(similarity(names[0], names[2]), 0.9);
  auto ps = resolve_identities(names, 0.9);
  EXPECT_EQ(ps.size(), 1u);
}

TEST(ResolveIdentities, PartitionAndOrderIndependence) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::string> names;
    for (int i = 0; i < 25; ++i) {
      std::string w = random_word(rng);
      names.push_back(w.empty() ? "x" : w);
    }
    auto base = resolve_identities(names, 0.7);
    std::set<std::string> seen;
    for (const auto& p : base) {
      for (const auto& a : p.aliases) EXPECT_TRUE(seen.insert(a).second) << "alias in two participants";
    }
    EXPECT_EQ(seen, std::set<std::string>(names.begin(), names.end()));
    auto shuffled = names;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto other = resolve_identities(shuffled, 0.7);
    EXPECT_EQ(partition(base), partition(other));
    for (std::size_t i = 0; i < base.size(); ++i) EXPECT_EQ(base[i].canonical_name, other[i].canonical_name);
  }
}

TEST(ParticipantIndex, ExactAndNormalizedLookup) {
  std::vector<std::string> names{"John Doe", "John, Doe", "Bob"};
  auto ps = resolve_identities(names, 0.8);
  ParticipantIndex idx(ps);
  EXPECT_EQ(idx.find("John, Doe"), 1);
  EXPECT_EQ(idx.find("john doe"), -1);
  EXPECT_EQ(idx.find_normalized("  JOHN DOE"), 1);
  EXPECT_EQ(idx.find("Nobody"), -1);
}
