#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace coorddelay {

/// A resolved mailing-list participant.
struct Participant {
  std::string canonical_name;
  std::set<std::string> aliases;
  std::set<std::string> message_keys;
};

using NamePair = std::pair<std::string, std::string>;

// Case-folds (ASCII) and trims, collapsing internal whitespace runs.
std::string normalize_name(std::string_view name);

// Levenshtein distance over Unicode code points of UTF-8 input.
std::size_t levenshtein(std::string_view a, std::string_view b);

// delta = 1 - L(s1, s2) / max(l1, l2) on normalised names. Throws
// std::invalid_argument when both names normalise to the empty string.
double similarity(std::string_view s1, std::string_view s2);

/// Groups raw sender names into participants.
///
/// Distinct names are linked when their similarity reaches `threshold` or a
/// manual merge names them both; groups are the transitive closure of those
/// links. The canonical name of a group is its most frequent alias in `names`
/// (ties: lexicographically smallest). Output is sorted by canonical name and
/// does not depend on the order of `names`. Manual merges that mention a name
/// absent from `names` are ignored.
std::vector<Participant> resolve_identities(std::span<const std::string> names, double threshold,
                                            std::span<const NamePair> manual_merges = {});

// Reads manual merges: one CSV row per pair, two columns, optional header
// "name_a,name_b". Throws std::runtime_error if the file cannot be read.
std::vector<NamePair> load_manual_merges(const std::string& path);

/// Alias lookup built from resolved participants.
class ParticipantIndex {
 public:
  explicit ParticipantIndex(const std::vector<Participant>& participants);

  // Participant position for an exact alias, or -1.
  int find(std::string_view alias) const;
  // Lookup by normalised name when no exact alias matches, or -1.
  int find_normalized(std::string_view name) const;

 private:
  std::map<std::string, int, std::less<>> by_alias_;
  std::map<std::string, int, std::less<>> by_normalized_;
};

}  // namespace coorddelay
