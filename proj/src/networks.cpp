#include "coorddelay/networks.hpp"

#include <stdexcept>

#include "coorddelay/util/csv.hpp"

namespace coorddelay {

void BipartiteGraph::add_left(const std::string& v) {
  if (has_right(v)) throw std::logic_error("vertex '" + v + "' already on the right side");
  left_.try_emplace(v);
}

void BipartiteGraph::add_right(const std::string& v) {
  if (has_left(v)) throw std::logic_error("vertex '" + v + "' already on the left side");
  right_.try_emplace(v);
}

void BipartiteGraph::add_edge(const std::string& left, const std::string& right) {
  add_left(left);
  add_right(right);
  if (left_[left].insert(right).second) {
    right_[right].insert(left);
    ++edges_;
  }
}

const std::set<std::string, CveIdLess>& BipartiteGraph::neighbors(std::string_view v) const {
  if (auto it = left_.find(v); it != left_.end()) return it->second;
  if (auto it = right_.find(v); it != right_.end()) return it->second;
  throw std::out_of_range("unknown vertex '" + std::string(v) + "'");
}

std::size_t BipartiteGraph::degree(std::string_view v) const { return neighbors(v).size(); }

void BipartiteGraph::check_invariants() const {
  std::size_t left_sum = 0;
  std::size_t right_sum = 0;
  for (const auto& [v, adj] : left_) {
    left_sum += adj.size();
    for (const auto& u : adj) {
      auto it = right_.find(u);
      if (it == right_.end() || !it->second.count(v)) throw std::logic_error("asymmetric edge " + v + " - " + u);
    }
  }
  for (const auto& [v, adj] : right_) {
    right_sum += adj.size();
    if (left_.count(v)) throw std::logic_error("vertex '" + v + "' on both sides");
  }
  if (left_sum != edges_ || right_sum != edges_) throw std::logic_error("degree sums disagree with edge count");
}

void BipartiteGraph::write_edge_list(std::ostream& out, std::string_view vertex_type) const {
  csv::write_row(out, {"vertex_type", "left", "right"});
  for (const auto& [v, adj] : left_) {
    for (const auto& u : adj) csv::write_row(out, {std::string(vertex_type), v, u});
  }
}

BipartiteGraph build_social_network(std::span<const SenderMentions> messages) {
  BipartiteGraph g;
  for (const auto& m : messages) {
    for (const auto& cve : m.cves) g.add_edge(m.participant, cve);
  }
  g.check_invariants();
  return g;
}

BipartiteGraph build_domain_network(std::span<const CveDomainMentions> messages) {
  BipartiteGraph g;
  for (const auto& m : messages) {
    for (const auto& d : m.domains) {
      for (const auto& cve : m.cves) g.add_edge(d, cve);
    }
  }
  g.check_invariants();
  return g;
}

const InfraPatterns& InfraPatterns::defaults() {
  static const InfraPatterns p{
      {"cert.", "exploit-db.com", "first.org", "mitre.org", "nist.gov", "osvdb.org"},
      {"bugs.", "bugzilla.", "gnats.", "issues.", "jira.", "redmine.", "trac.", "tracker."},
      {"code.", "cvs.", "cvsweb.", "download.", "downloads.", "ftp.", "git.", "gitweb.", "hg.", "packages.",
       "svn.", "webcvs.", "websvn."},
      {"blog.", "blogs.", "dev.", "doc.", "docs.", "forum.", "forums.", "help.", "info.", "lists.", "support.",
       "wiki."},
  };
  return p;
}

bool host_matches(std::string_view host, std::string_view pattern) {
  if (pattern.empty()) return false;
  if (pattern.back() == '.') return host.substr(0, pattern.size()) == pattern;
  if (host == pattern) return true;
  return host.size() > pattern.size() && host.substr(host.size() - pattern.size()) == pattern &&
         host[host.size() - pattern.size() - 1] == '.';
}

InfraFlags classify_infrastructure(const std::set<std::string>& domains, const InfraPatterns& patterns) {
  auto any = [&](const std::vector<std::string>& row) {
    for (const auto& d : domains) {
      for (const auto& p : row) {
        if (host_matches(d, p)) return 1;
      }
    }
    return 0;
  };
  return {any(patterns.vulninf), any(patterns.bugs), any(patterns.repos), any(patterns.support)};
}

std::map<std::string, int, CveIdLess> core_membership(const BipartiteGraph& social,
                                                      std::span<const std::string> core_names,
                                                      Diagnostics* diag) {
  std::map<std::string, int, CveIdLess> out;
  for (const auto& [cve, _] : social.right()) out[cve] = 0;
  for (const auto& name : core_names) {
    auto it = social.left().find(name);
    if (it == social.left().end()) {
      if (diag) {
        diag->count("core_name_missing");
        diag->warn("core participant '" + name + "' not present in the social network");
      }
      continue;
    }
    for (const auto& cve : it->second) out[cve] = 1;
  }
  return out;
}

}  // namespace coorddelay
