#include "coorddelay/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "coorddelay/extraction.hpp"
#include "coorddelay/util/csv.hpp"

namespace coorddelay {
namespace {

constexpr std::array<const char*, 11> kMonthNames = {"Feb", "Mar", "Apr", "May", "Jun", "Jul",
                                                     "Aug", "Sep", "Oct", "Nov", "Dec"};

const std::set<std::string> kContinuous = {"SOCDEG", "MSGSLEN", "MSGSENT", "INFDEG", "NVDREFS"};

std::u32string code_points(std::string_view s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    if (i + len > s.size()) len = 1;
    char32_t cp = len == 1 ? c : c & (0xFF >> (len + 1));
    for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    out.push_back(cp);
    i += len;
  }
  return out;
}

}  // namespace

DelayResult compute_delays(const MentionDates& earliest_mention, const RecordMap& records) {
  DelayResult out;
  for (const auto& [cve, t_oss] : earliest_mention) {
    auto it = records.find(cve);
    if (it == records.end()) {
      out.diagnostics.count("missing_record");
      out.diagnostics.warn(cve + ": mentioned but absent from the vulnerability database");
      continue;
    }
    if (it->second.rejected) {
      out.diagnostics.count("rejected");
      continue;
    }
    auto delay = (it->second.published_at - t_oss).count();
    if (delay < 0) {
      out.diagnostics.count("negative_delay");
      continue;
    }
    out.samples.push_back({cve, t_oss, it->second.published_at, static_cast<int>(delay)});
  }
  return out;
}

TemporalDummies temporal_dummies(Date t_oss) {
  TemporalDummies d;
  int y = year_of(t_oss);
  if (y > kReferenceYear && y <= kLastYear) d.years[static_cast<std::size_t>(y - kReferenceYear - 1)] = 1;
  unsigned m = month_of(t_oss);
  if (m >= 2) d.months[m - 2] = 1;
  unsigned wd = weekday_of(t_oss);
  d.weekend = (wd == 0 || wd == 6) ? 1 : 0;
  return d;
}

double shannon_entropy_bits(std::string_view text) {
  auto cps = code_points(text);
  if (cps.empty()) return 0.0;
  std::unordered_map<char32_t, std::size_t> freq;
  for (auto c : cps) ++freq[c];
  // Sum in a fixed order so the result does not depend on hash iteration.
  std::vector<std::size_t> counts;
  counts.reserve(freq.size());
  for (const auto& [_, n] : freq) counts.push_back(n);
  std::sort(counts.begin(), counts.end());
  double total = static_cast<double>(cps.size());
  double h = 0.0;
  for (auto n : counts) {
    double p = static_cast<double>(n) / total;
    h -= p * std::log2(p);
  }
  return h == 0.0 ? 0.0 : h;
}

MessageStats message_stats(std::span<const std::string> bodies) {
  std::string all;
  for (const auto& b : bodies) all += b;
  if (all.empty()) return {};
  return {static_cast<double>(count_chars(all)) / 100.0, shannon_entropy_bits(all)};
}

long cwe_number(std::string_view cwe) {
  if (cwe.substr(0, 4) != "CWE-" || cwe.size() == 4) return -1;
  long n = 0;
  for (char c : cwe.substr(4)) {
    if (c < '0' || c > '9') return -1;
    n = n * 10 + (c - '0');
  }
  return n;
}

std::vector<std::string> top_cwes(const RecordMap& records, std::span<const std::string> sample, std::size_t k) {
  if (k == 0) throw std::invalid_argument("top_cwes needs k >= 1");
  std::map<std::string, std::size_t> freq;
  for (const auto& id : sample) {
    auto it = records.find(id);
    if (it == records.end()) continue;
    std::set<std::string> unique(it->second.cwes.begin(), it->second.cwes.end());
    for (const auto& c : unique) {
      if (cwe_number(c) >= 0) ++freq[c];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return cwe_number(a.first) < cwe_number(b.first);
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.push_back(ranked[i].first);
  return out;
}

std::vector<CveFeatures> build_features(const FeatureInputs& in) {
  if (!in.social || !in.domains || !in.core || !in.message_stats || !in.records) {
    throw std::invalid_argument("build_features: missing input");
  }
  std::vector<CveFeatures> out;
  out.reserve(in.samples.size());
  for (const auto& s : in.samples) {
    auto rec = in.records->find(s.cve_id);
    auto stats = in.message_stats->find(s.cve_id);
    if (rec == in.records->end() || stats == in.message_stats->end()) {
      throw std::runtime_error("metric inputs disagree on the CVE index at " + s.cve_id);
    }
    CveFeatures f;
    f.cve_id = s.cve_id;
    f.t_oss = s.t_oss;
    f.y = s.y;
    f.temporal = temporal_dummies(s.t_oss);
    f.socdeg = in.social->has_right(s.cve_id) ? static_cast<double>(in.social->degree(s.cve_id)) : 0.0;
    auto core = in.core->find(s.cve_id);
    f.mitredev = core == in.core->end() ? 0 : core->second;
    f.msgslen = stats->second.msgslen;
    f.msgsent = stats->second.msgsent;
    if (in.domains->has_right(s.cve_id)) {
      const auto& nb = in.domains->neighbors(s.cve_id);
      f.infdeg = static_cast<double>(nb.size());
      f.infra = classify_infrastructure(std::set<std::string>(nb.begin(), nb.end()));
    }
    f.nvdrefs = static_cast<double>(reference_count(rec->second));
    if (rec->second.cvss) {
      f.impact = impact_flags(*rec->second.cvss);
      f.exploit = exploit_flags(*rec->second.cvss);
    } else {
      f.cvss_missing = true;
    }
    f.cwes = rec->second.cwes;
    f.cwe_missing = f.cwes.empty();
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<std::string> model_columns(int level, const AssembleOptions& options) {
  if (level < 1 || level > 6) throw std::invalid_argument("model level must be 1..6");
  std::vector<std::string> cols{"(Intercept)"};
  if (options.year_dummies) {
    for (int y = kReferenceYear + 1; y <= kLastYear; ++y) cols.push_back(std::to_string(y));
  }
  for (auto m : kMonthNames) cols.emplace_back(m);
  cols.emplace_back("WEEKEND");
  if (level >= 2) cols.insert(cols.end(), {"SOCDEG", "MITREDEV", "MSGSLEN", "MSGSENT"});
  if (level >= 3) cols.insert(cols.end(), {"INFDEG", "NVDREFS", "VULNINF", "BUGS", "REPOS", "SUPPORT"});
  if (level >= 4) cols.insert(cols.end(), {"IMPC", "IMPI", "IMPA"});
  if (level >= 5) cols.insert(cols.end(), {"EXPNET", "EXPCPLX", "EXPAUTH"});
  if (level >= 6) cols.insert(cols.end(), options.cwe_columns.begin(), options.cwe_columns.end());
  return cols;
}

ModelMatrix assemble(int level, std::span<const CveFeatures> features, const AssembleOptions& options) {
  ModelMatrix m;
  m.model_level = level;
  m.column_names = model_columns(level, options);
  const auto n = static_cast<Eigen::Index>(features.size());
  const auto k = static_cast<Eigen::Index>(m.column_names.size());
  m.rows = Eigen::MatrixXd::Zero(n, k);
  for (const auto& c : m.column_names) {
    if (kContinuous.count(c)) m.transform_log.insert(c);
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& f = features[static_cast<std::size_t>(i)];
    m.row_ids.push_back(f.cve_id);
    std::vector<double> v{1.0};
    if (options.year_dummies) v.insert(v.end(), f.temporal.years.begin(), f.temporal.years.end());
    v.insert(v.end(), f.temporal.months.begin(), f.temporal.months.end());
    v.push_back(f.temporal.weekend);
    if (level >= 2) v.insert(v.end(), {std::log1p(f.socdeg), double(f.mitredev), std::log1p(f.msgslen), std::log1p(f.msgsent)});
    if (level >= 3) {
      v.insert(v.end(), {std::log1p(f.infdeg), std::log1p(f.nvdrefs), double(f.infra.vulninf), double(f.infra.bugs),
                         double(f.infra.repos), double(f.infra.support)});
    }
    if (level >= 4) v.insert(v.end(), {double(f.impact.confidentiality), double(f.impact.integrity), double(f.impact.availability)});
    if (level >= 5) v.insert(v.end(), {double(f.exploit.network), double(f.exploit.complexity), double(f.exploit.authentication)});
    if (level >= 6) {
      for (const auto& cwe : options.cwe_columns) {
        bool has = std::find(f.cwes.begin(), f.cwes.end(), cwe) != f.cwes.end();
        v.push_back(has ? 1.0 : 0.0);
      }
    }
    for (Eigen::Index j = 0; j < k; ++j) m.rows(i, j) = v[static_cast<std::size_t>(j)];
  }
  return m;
}

void write_model_matrix(std::ostream& out, const ModelMatrix& m) {
  csv::Row header{"cve_id"};
  header.insert(header.end(), m.column_names.begin(), m.column_names.end());
  csv::write_row(out, header);
  for (Eigen::Index i = 0; i < m.n(); ++i) {
    csv::Row row{m.row_ids[static_cast<std::size_t>(i)]};
    for (Eigen::Index j = 0; j < m.k(); ++j) row.push_back(csv::format_double(m.rows(i, j)));
    csv::write_row(out, row);
  }
}

void write_delays(std::ostream& out, std::span<const CoordinationSample> samples) {
  csv::write_row(out, {"cve_id", "t_oss", "t_nvd", "y"});
  for (const auto& s : samples) {
    csv::write_row(out, {s.cve_id, format_date(s.t_oss), format_date(s.t_nvd), std::to_string(s.y)});
  }
}

}  // namespace coorddelay
