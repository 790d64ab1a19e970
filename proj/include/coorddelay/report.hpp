#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "coorddelay/archive.hpp"
#include "coorddelay/extraction.hpp"
#include "coorddelay/identity.hpp"
#include "coorddelay/metrics.hpp"

namespace coorddelay {

/// Cleaned messages with the participant each one resolves to.
struct MessageTable {
  std::vector<RawEmail> messages;
  std::vector<std::string> participant;  // canonical name, "" for unknown senders
};

// message_key, sent_at, participant_id, participant, subject, body.
// participant_id is the 1-based row of the participants table, empty for
// unknown senders.
void write_messages_csv(std::ostream& out, const MessageTable& table, std::span<const Participant> participants);
MessageTable read_messages_csv(std::istream& in);

// participant_id, canonical_name, aliases (';'-joined), message_count.
void write_participants_csv(std::ostream& out, std::span<const Participant> participants);

// Long format: one (message_key, cve_id, "") row per CVE and one
// (message_key, "", domain) row per domain, messages in input order.
void write_facts_csv(std::ostream& out, std::span<const MessageFacts> facts);
std::vector<MessageFacts> read_facts_csv(std::istream& in);

struct DelaySummary {
  std::size_t n = 0;
  double mean = 0;
  double median = 0;
  double sd = 0;  // n - 1 denominator; 0 for a single sample
  std::vector<std::pair<double, double>> quantiles;  // (probability, type-7 quantile)
  double zero_share = 0;

  struct Year {
    int year = 0;
    std::size_t n = 0;
    double mean = 0;
    double median = 0;
  };
  std::vector<Year> annual;
};

// Throws std::invalid_argument for an empty sample.
DelaySummary summarize_delays(std::span<const CoordinationSample> samples, std::span<const double> probabilities);

// Sample quantile, R type 7 (linear interpolation of order statistics).
double quantile_type7(std::vector<double> values, double p);

void write_delay_summary(std::ostream& out, const DelaySummary& s);
void write_delay_annual(std::ostream& out, const DelaySummary& s);

}  // namespace coorddelay
