#pragma once

#include <array>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "coorddelay/networks.hpp"
#include "coorddelay/util/dates.hpp"
#include "coorddelay/util/diagnostics.hpp"
#include "coorddelay/vuln_db.hpp"

namespace coorddelay {

/// One CVE's delay between its first list mention and its NVD publication.
struct CoordinationSample {
  std::string cve_id;
  Date t_oss;
  Date t_nvd;
  int y = 0;  // whole UTC days, >= 0
};

using MentionDates = std::map<std::string, Date, CveIdLess>;

struct DelayResult {
  std::vector<CoordinationSample> samples;  // sorted by CVE id
  // Counter tags: "negative_delay", "missing_record", "rejected".
  Diagnostics diagnostics;
};

// Keeps CVEs with a non-rejected record and t_nvd >= t_oss.
DelayResult compute_delays(const MentionDates& earliest_mention, const RecordMap& records);

inline constexpr int kReferenceYear = 2008;
inline constexpr int kLastYear = 2016;

struct TemporalDummies {
  std::array<int, 8> years{};    // 2009..2016
  std::array<int, 11> months{};  // February..December
  int weekend = 0;               // Saturday or Sunday (UTC)
};

TemporalDummies temporal_dummies(Date t_oss);

struct MessageStats {
  double msgslen = 0.0;  // total characters / 100
  double msgsent = 0.0;  // Shannon entropy in bits of the character distribution
};

double shannon_entropy_bits(std::string_view text);
MessageStats message_stats(std::span<const std::string> bodies);

// Numeric part of "CWE-<n>", or -1.
long cwe_number(std::string_view cwe);

// The k most frequent CWEs among `sample` (frequency = number of sample CVEs
// listing the CWE), ties by ascending CWE number. Returns fewer when fewer
// distinct CWEs exist.
std::vector<std::string> top_cwes(const RecordMap& records, std::span<const std::string> sample, std::size_t k);

/// Raw (untransformed) explanatory metrics of one sampled CVE.
struct CveFeatures {
  std::string cve_id;
  Date t_oss;
  int y = 0;
  TemporalDummies temporal;
  double socdeg = 0;
  int mitredev = 0;
  double msgslen = 0;
  double msgsent = 0;
  double infdeg = 0;
  double nvdrefs = 0;
  InfraFlags infra;
  ImpactFlags impact;
  ExploitFlags exploit;
  bool cvss_missing = false;
  bool cwe_missing = false;
  std::vector<std::string> cwes;
};

struct FeatureInputs {
  std::span<const CoordinationSample> samples;
  const BipartiteGraph* social = nullptr;
  const BipartiteGraph* domains = nullptr;
  const std::map<std::string, int, CveIdLess>* core = nullptr;
  const std::map<std::string, MessageStats, CveIdLess>* message_stats = nullptr;
  const RecordMap* records = nullptr;
};

// Joins all per-CVE inputs on the sample's CVE index. A sampled CVE missing
// from the records or the message statistics is a fatal inconsistency
// (std::runtime_error).
std::vector<CveFeatures> build_features(const FeatureInputs& in);

struct ModelMatrix {
  int model_level = 0;
  std::vector<std::string> column_names;  // "(Intercept)" first
  std::vector<std::string> row_ids;       // CVE ids
  Eigen::MatrixXd rows;
  std::set<std::string> transform_log;    // columns holding log(x + 1)

  Eigen::Index k() const { return rows.cols(); }
  Eigen::Index n() const { return rows.rows(); }
};

struct AssembleOptions {
  bool year_dummies = true;
  std::vector<std::string> cwe_columns;  // level 6 dummies, in order
};

// Columns of model levels 1..6 in table order; continuous metrics enter as
// log(x + 1).
std::vector<std::string> model_columns(int level, const AssembleOptions& options);

// Throws std::invalid_argument for a level outside 1..6.
ModelMatrix assemble(int level, std::span<const CveFeatures> features, const AssembleOptions& options);

// Header row "cve_id,<columns>", one row per CVE, shortest round-trip numbers.
void write_model_matrix(std::ostream& out, const ModelMatrix& m);
void write_delays(std::ostream& out, std::span<const CoordinationSample> samples);

}  // namespace coorddelay
