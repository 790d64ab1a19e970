#include "coorddelay/report.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "coorddelay/util/csv.hpp"

namespace coorddelay {
namespace {

std::string join(const std::set<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out.push_back(';');
    out += s;
  }
  return out;
}

const std::string& field(const csv::Table& t, const csv::Row& row, std::string_view name) {
  int c = t.column(name);
  if (c < 0) throw std::runtime_error("missing column: " + std::string(name));
  if (static_cast<std::size_t>(c) >= row.size()) throw std::runtime_error("short row in column " + std::string(name));
  return row[static_cast<std::size_t>(c)];
}

}  // namespace

void write_messages_csv(std::ostream& out, const MessageTable& table, std::span<const Participant> participants) {
  std::map<std::string, std::size_t> ids;
  for (std::size_t i = 0; i < participants.size(); ++i) ids[participants[i].canonical_name] = i + 1;
  csv::write_row(out, {"message_key", "sent_at", "participant_id", "participant", "subject", "body"});
  for (std::size_t i = 0; i < table.messages.size(); ++i) {
    const auto& m = table.messages[i];
    const auto& p = table.participant[i];
    auto it = ids.find(p);
    csv::write_row(out, {m.message_key, format_datetime(m.sent_at), it == ids.end() ? "" : std::to_string(it->second),
                         p, m.subject, m.body});
  }
}

MessageTable read_messages_csv(std::istream& in) {
  csv::Table t = csv::read_table(in);
  MessageTable table;
  for (const auto& row : t.rows) {
    RawEmail m;
    m.message_key = field(t, row, "message_key");
    auto when = parse_iso_datetime(field(t, row, "sent_at"));
    if (!when) throw std::runtime_error("bad sent_at in messages table for " + m.message_key);
    m.sent_at = *when;
    m.subject = field(t, row, "subject");
    m.body = field(t, row, "body");
    std::string p = field(t, row, "participant");
    m.sender_raw = p.empty() ? std::string(kUnknownSender) : p;
    table.messages.push_back(std::move(m));
    table.participant.push_back(std::move(p));
  }
  return table;
}

void write_participants_csv(std::ostream& out, std::span<const Participant> participants) {
  csv::write_row(out, {"participant_id", "canonical_name", "aliases", "message_count"});
  for (std::size_t i = 0; i < participants.size(); ++i) {
    const auto& p = participants[i];
    csv::write_row(out, {std::to_string(i + 1), p.canonical_name, join(p.aliases), std::to_string(p.message_keys.size())});
  }
}

void write_facts_csv(std::ostream& out, std::span<const MessageFacts> facts) {
  csv::write_row(out, {"message_key", "cve_id", "domain"});
  for (const auto& f : facts) {
    for (const auto& c : f.cve_ids) csv::write_row(out, {f.message_key, c, ""});
    for (const auto& d : f.domains) csv::write_row(out, {f.message_key, "", d});
  }
}

std::vector<MessageFacts> read_facts_csv(std::istream& in) {
  csv::Table t = csv::read_table(in);
  std::vector<MessageFacts> out;
  std::map<std::string, std::size_t> index;
  for (const auto& row : t.rows) {
    const auto& key = field(t, row, "message_key");
    auto [it, inserted] = index.try_emplace(key, out.size());
    if (inserted) out.push_back(MessageFacts{key, {}, {}, 0});
    auto& f = out[it->second];
    const auto& cve = field(t, row, "cve_id");
    const auto& dom = field(t, row, "domain");
    if (!cve.empty()) f.cve_ids.insert(cve);
    if (!dom.empty()) f.domains.insert(dom);
  }
  return out;
}

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  double h = (static_cast<double>(values.size()) - 1.0) * p;
  auto lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

double median_of(const std::vector<double>& v) { return quantile_type7(v, 0.5); }

}  // namespace

DelaySummary summarize_delays(std::span<const CoordinationSample> samples, std::span<const double> probabilities) {
  if (samples.empty()) throw std::invalid_argument("summarize_delays needs at least one sample");
  std::vector<double> y;
  std::map<int, std::vector<double>> by_year;
  std::size_t zeros = 0;
  for (const auto& s : samples) {
    y.push_back(s.y);
    by_year[year_of(s.t_oss)].push_back(s.y);
    zeros += s.y == 0;
  }
  DelaySummary out;
  out.n = y.size();
  double nd = static_cast<double>(out.n);
  out.mean = std::accumulate(y.begin(), y.end(), 0.0) / nd;
  out.median = median_of(y);
  if (out.n > 1) {
    double ss = 0;
    for (double v : y) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / (nd - 1.0));
  }
  for (double p : probabilities) out.quantiles.emplace_back(p, quantile_type7(y, p));
  out.zero_share = static_cast<double>(zeros) / nd;
  for (const auto& [year, v] : by_year) {
    out.annual.push_back({year, v.size(), std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()),
                          median_of(v)});
  }
  return out;
}

void write_delay_summary(std::ostream& out, const DelaySummary& s) {
  csv::write_row(out, {"statistic", "value"});
  csv::write_row(out, {"n", std::to_string(s.n)});
  csv::write_row(out, {"mean", csv::format_double(s.mean)});
  csv::write_row(out, {"median", csv::format_double(s.median)});
  csv::write_row(out, {"sd", csv::format_double(s.sd)});
  for (const auto& [p, q] : s.quantiles) csv::write_row(out, {"q" + csv::format_double(p), csv::format_double(q)});
  csv::write_row(out, {"zero_share", csv::format_double(s.zero_share)});
}

void write_delay_annual(std::ostream& out, const DelaySummary& s) {
  csv::write_row(out, {"year", "n", "mean", "median"});
  for (const auto& a : s.annual) {
    csv::write_row(out, {std::to_string(a.year), std::to_string(a.n), csv::format_double(a.mean),
                         csv::format_double(a.median)});
  }
}

}  // namespace coorddelay
