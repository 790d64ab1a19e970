#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "coorddelay/classify.hpp"
#include "coorddelay/identity.hpp"
#include "coorddelay/metrics.hpp"
#include "coorddelay/networks.hpp"
#include "coorddelay/regress/ols.hpp"
#include "coorddelay/report.hpp"
#include "coorddelay/util/dates.hpp"
#include "coorddelay/vuln_db.hpp"

namespace coorddelay {

inline constexpr std::string_view kVersion = "0.1.0";

enum class Stage { Ingest, Nvd, Extract, Networks, Metrics, Regress, Classify };
inline constexpr std::array<Stage, 7> kAllStages = {Stage::Ingest,  Stage::Nvd,     Stage::Extract, Stage::Networks,
                                                    Stage::Metrics, Stage::Regress, Stage::Classify};
std::string_view to_string(Stage s);

/// Invalid or missing configuration; `field()` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what) : std::runtime_error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Throws ConfigError for an unknown stage name.
Stage parse_stage(std::string_view name);
// Comma-separated stage list.
std::set<Stage> parse_stage_list(std::string_view list);

std::vector<std::string> default_core_names();
std::vector<double> default_lambdas();      // 1, 2, ..., 100
std::vector<int> default_cwe_sweep();       // 5, 10, ..., 55

struct PipelineConfig {
  std::filesystem::path archive;
  std::vector<std::filesystem::path> feeds;
  DateWindow window{parse_iso_date("2008-02-01"), parse_iso_date("2016-12-31")};
  double delta = 0.8;
  std::optional<std::filesystem::path> merges;
  std::vector<std::string> core_names = default_core_names();
  std::vector<double> taus{0.25, 0.50, 0.75, 0.90};
  std::vector<double> lambdas = default_lambdas();
  int bootstrap_reps = 200;
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";
  HcVariant hc = HcVariant::HC3;
  int top_cwes = 10;
  std::vector<int> cwe_sweep = default_cwe_sweep();
  bool lasso_standardize = false;
  ForestOptions forest;
  int folds = 10;
  double test_fraction = 0.1;
  bool stratified_split = true;
  std::set<Stage> stages{kAllStages.begin(), kAllStages.end()};
};

// Checks the fields the selected stages depend on. Throws ConfigError naming
// the first missing or invalid field.
void validate_config(const PipelineConfig& config);

/// Stage results kept in memory between stages.
struct IngestOutput {
  MessageTable table;
  std::vector<Participant> participants;
  Diagnostics diagnostics;
};

IngestOutput run_ingest(const std::filesystem::path& archive, const DateWindow& window, double delta,
                        std::span<const NamePair> merges);

std::vector<MessageFacts> run_extract(const MessageTable& table);

struct NetworkOutput {
  BipartiteGraph social;   // participants x CVEs; unknown senders excluded
  BipartiteGraph domains;  // domains x CVEs co-occurring in one message
};

NetworkOutput run_networks(const MessageTable& table, std::span<const MessageFacts> facts);

struct MetricsOutput {
  DelayResult delays;
  std::vector<CveFeatures> features;
  std::vector<std::string> top_cwes;
  std::vector<ModelMatrix> models;  // M1..M6
  Diagnostics diagnostics;
};

// Core names are matched to canonical participants through their aliases.
MetricsOutput run_metrics(const IngestOutput& ingest, std::span<const MessageFacts> facts,
                          const NetworkOutput& networks, const RecordMap& records,
                          std::span<const std::string> core_names, int top_cwes);

struct RunSummary {
  int exit_code = 0;  // 0 ok, 1 fatal data error, 2 configuration error
  std::string status;
  std::string failed_stage;
  std::string message;
};

// Runs the selected stages (computing their prerequisites in memory) and
// writes their artifacts plus run.json under config.out.
RunSummary run_pipeline(const PipelineConfig& config);

}  // namespace coorddelay
