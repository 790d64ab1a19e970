#include "coorddelay/identity.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "coorddelay/util/csv.hpp"

namespace coorddelay {
namespace {

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    char32_t cp;
    std::size_t len;
    if (c < 0x80) { cp = c; len = 1; }
    else if ((c >> 5) == 0x6) { cp = c & 0x1F; len = 2; }
    else if ((c >> 4) == 0xE) { cp = c & 0x0F; len = 3; }
    else if ((c >> 3) == 0x1E) { cp = c & 0x07; len = 4; }
    else { out.push_back(c); ++i; continue; }  // stray byte kept as-is
    if (i + len > s.size()) { out.push_back(c); ++i; continue; }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) { ok = false; break; }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) { out.push_back(c); ++i; continue; }
    out.push_back(cp);
    i += len;
  }
  return out;
}

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller index becomes the root; keeps the structure independent of
    // the order unions are applied in.
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
};

}  // namespace

std::string normalize_name(std::string_view name) {
  std::string out;
  bool pending_space = false;
  for (char c : name) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  auto s = decode_utf8(a);
  auto t = decode_utf8(b);
  if (s.size() < t.size()) std::swap(s, t);
  std::vector<std::size_t> row(t.size() + 1);
  std::iota(row.begin(), row.end(), 0);
  for (std::size_t i = 1; i <= s.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= t.size(); ++j) {
      std::size_t up = row[j];
      std::size_t cost = s[i - 1] == t[j - 1] ? 0 : 1;
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + cost});
      diag = up;
    }
  }
  return row[t.size()];
}

double similarity(std::string_view s1, std::string_view s2) {
  auto a = normalize_name(s1);
  auto b = normalize_name(s2);
  auto la = decode_utf8(a).size();
  auto lb = decode_utf8(b).size();
  auto longest = std::max(la, lb);
  if (longest == 0) throw std::invalid_argument("similarity of two empty names is undefined");
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

std::vector<Participant> resolve_identities(std::span<const std::string> names, double threshold,
                                            std::span<const NamePair> manual_merges) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("similarity threshold must lie in (0, 1]");
  }

  std::map<std::string, std::size_t> frequency;
  for (const auto& n : names) ++frequency[n];

  std::vector<std::string> distinct;
  distinct.reserve(frequency.size());
  for (const auto& [n, _] : frequency) distinct.push_back(n);  // sorted

  std::vector<std::string> normalized;
  normalized.reserve(distinct.size());
  for (const auto& n : distinct) normalized.push_back(normalize_name(n));

  DisjointSets sets(distinct.size());
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    for (std::size_t j = i + 1; j < distinct.size(); ++j) {
      if (normalized[i].empty() && normalized[j].empty()) {
        sets.unite(i, j);
        continue;
      }
      if (similarity(normalized[i], normalized[j]) >= threshold) sets.unite(i, j);
    }
  }

  auto position = [&](const std::string& n) -> std::ptrdiff_t {
    auto it = std::lower_bound(distinct.begin(), distinct.end(), n);
    return it != distinct.end() && *it == n ? it - distinct.begin() : -1;
  };
  for (const auto& [a, b] : manual_merges) {
    auto ia = position(a);
    auto ib = position(b);
    if (ia >= 0 && ib >= 0) sets.unite(static_cast<std::size_t>(ia), static_cast<std::size_t>(ib));
  }

  std::map<std::size_t, Participant> groups;
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    groups[sets.find(i)].aliases.insert(distinct[i]);
  }

  std::vector<Participant> out;
  out.reserve(groups.size());
  for (auto& [_, p] : groups) {
    const std::string* best = nullptr;
    for (const auto& alias : p.aliases) {
      // aliases iterate in lexicographic order, so '>' keeps the first on ties
      if (!best || frequency[alias] > frequency[*best]) best = &alias;
    }
    p.canonical_name = *best;
    out.push_back(std::move(p));
  }
  std::sort(out.begin(), out.end(),
            [](const Participant& a, const Participant& b) { return a.canonical_name < b.canonical_name; });
  return out;
}

std::vector<NamePair> load_manual_merges(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read manual merges file " + path);
  std::vector<NamePair> pairs;
  csv::Row row;
  bool first = true;
  while (csv::read_row(in, row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    if (!row.empty() && !row[0].empty() && row[0][0] == '#') continue;
    if (first && row.size() == 2 && row[0] == "name_a" && row[1] == "name_b") {
      first = false;
      continue;
    }
    first = false;
    if (row.size() != 2) throw std::runtime_error("manual merges file " + path + ": expected two columns per row");
    pairs.emplace_back(row[0], row[1]);
  }
  return pairs;
}

ParticipantIndex::ParticipantIndex(const std::vector<Participant>& participants) {
  for (std::size_t i = 0; i < participants.size(); ++i) {
    for (const auto& alias : participants[i].aliases) {
      by_alias_.emplace(alias, static_cast<int>(i));
      by_normalized_.emplace(normalize_name(alias), static_cast<int>(i));
    }
  }
}

int ParticipantIndex::find(std::string_view alias) const {
  auto it = by_alias_.find(alias);
  return it == by_alias_.end() ? -1 : it->second;
}

int ParticipantIndex::find_normalized(std::string_view name) const {
  if (int exact = find(name); exact >= 0) return exact;
  auto it = by_normalized_.find(normalize_name(name));
  return it == by_normalized_.end() ? -1 : it->second;
}

}  // namespace coorddelay
