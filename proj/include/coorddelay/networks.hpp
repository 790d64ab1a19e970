#pragma once

#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coorddelay/extraction.hpp"
#include "coorddelay/util/diagnostics.hpp"

namespace coorddelay {

/// Undirected, unweighted two-mode graph. Vertex names are unique across
/// both sides; parallel edges collapse.
class BipartiteGraph {
 public:
  using Adjacency = std::map<std::string, std::set<std::string, CveIdLess>, CveIdLess>;

  void add_left(const std::string& v);
  void add_right(const std::string& v);
  // Adds both endpoints as needed. Throws std::logic_error if an endpoint
  // already exists on the opposite side.
  void add_edge(const std::string& left, const std::string& right);

  bool has_left(std::string_view v) const { return left_.find(v) != left_.end(); }
  bool has_right(std::string_view v) const { return right_.find(v) != right_.end(); }

  std::size_t left_count() const { return left_.size(); }
  std::size_t right_count() const { return right_.size(); }
  std::size_t edge_count() const { return edges_; }

  // Throws std::out_of_range for a vertex on neither side.
  std::size_t degree(std::string_view v) const;
  const std::set<std::string, CveIdLess>& neighbors(std::string_view v) const;

  const Adjacency& left() const { return left_; }
  const Adjacency& right() const { return right_; }

  // Degree sums on both sides equal the edge count and every edge is stored
  // symmetrically; throws std::logic_error otherwise.
  void check_invariants() const;

  // Rows "vertex_type,left,right", one per edge, in vertex order.
  void write_edge_list(std::ostream& out, std::string_view vertex_type) const;

 private:
  Adjacency left_;
  Adjacency right_;
  std::size_t edges_ = 0;
};

struct SenderMentions {
  std::string participant;
  CveSet cves;
};

struct CveDomainMentions {
  CveSet cves;
  std::set<std::string> domains;
};

// Participants on the left, CVE identifiers on the right.
BipartiteGraph build_social_network(std::span<const SenderMentions> messages);

// Domain names on the left, CVE identifiers on the right; an edge links every
// CVE and domain that co-occur in one message.
BipartiteGraph build_domain_network(std::span<const CveDomainMentions> messages);

struct InfraFlags {
  int vulninf = 0;
  int bugs = 0;
  int repos = 0;
  int support = 0;

  bool operator==(const InfraFlags&) const = default;
};

/// Host-name patterns per infrastructure class. Patterns ending in '.' match
/// a host prefix; others match the whole host or a dot-separated suffix.
struct InfraPatterns {
  std::vector<std::string> vulninf;
  std::vector<std::string> bugs;
  std::vector<std::string> repos;
  std::vector<std::string> support;

  static const InfraPatterns& defaults();
};

bool host_matches(std::string_view host, std::string_view pattern);

InfraFlags classify_infrastructure(const std::set<std::string>& domains,
                                   const InfraPatterns& patterns = InfraPatterns::defaults());

// 1 for every CVE adjacent to at least one of `core_names` in the social
// network, 0 for the remaining right-side vertices. Core names absent from
// the graph are reported through `diag`.
std::map<std::string, int, CveIdLess> core_membership(const BipartiteGraph& social,
                                                      std::span<const std::string> core_names,
                                                      Diagnostics* diag = nullptr);

}  // namespace coorddelay
