#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coorddelay/pipeline.hpp"

namespace fs = std::filesystem;
using namespace coorddelay;

namespace {

constexpr int kOk = 0;
constexpr int kDataError = 1;
constexpr int kConfigError = 2;

// Applies "key = value" items from the config file to options that were not
// given on the command line. Returns the names of the options it set.
std::set<std::string> apply_config(CLI::App& app, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read config file " + path.string());
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::ParseError& e) {
    throw ConfigError("config", std::string("malformed config file: ") + e.what());
  }
  std::set<std::string> applied;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    CLI::Option* opt = app.get_option_no_throw("--" + item.name);
    if (!opt || item.name == "config") throw ConfigError(item.name, "unknown config key '" + item.fullname() + "'");
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    try {
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw ConfigError(item.name, "invalid value for '" + item.name + "': " + e.what());
    }
    applied.insert(opt->get_lnames().front());
  }
  return applied;
}

fs::path rebase(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

DateWindow parse_window(const std::string& from, const std::string& to) {
  DateWindow w;
  try {
    w.first = parse_iso_date(from);
  } catch (const std::exception&) {
    throw ConfigError("from", "invalid date for 'from': " + from);
  }
  try {
    w.last = parse_iso_date(to);
  } catch (const std::exception&) {
    throw ConfigError("to", "invalid date for 'to': " + to);
  }
  if (w.last < w.first) throw ConfigError("to", "window end precedes window start");
  return w;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

void report(const Diagnostics& d) {
  for (const auto& [tag, n] : d.counters) std::cerr << tag << ": " << n << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coordination-delay analysis of vulnerability disclosure mailing lists"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse the archive and resolve participant identities");
  std::string in_archive, in_from = "2008-02-01", in_to = "2016-12-31", in_merges, in_out = ".";
  double in_delta = 0.8;
  ingest->add_option("--archive", in_archive, "Archive directory or mbox file")->required();
  ingest->add_option("--from", in_from, "First day of the window (inclusive)");
  ingest->add_option("--to", in_to, "Last day of the window (inclusive)");
  ingest->add_option("--delta", in_delta, "Name similarity threshold");
  ingest->add_option("--merges", in_merges, "Manual merges CSV");
  ingest->add_option("--out,--out-dir", in_out, "Directory for messages.csv and participants.csv");

  // nvd
  auto* nvd = app.add_subcommand("nvd", "Load NVD feeds into a record table");
  std::vector<std::string> nvd_feeds;
  std::string nvd_out = "records.csv";
  nvd->add_option("--feed,--feeds", nvd_feeds, "NVD JSON or records CSV files")->required();
  nvd->add_option("--out", nvd_out, "Output CSV");

  // extract
  auto* extract = app.add_subcommand("extract", "Extract CVE identifiers and domains from messages");
  std::string ex_messages, ex_out = "facts.csv";
  extract->add_option("--messages", ex_messages, "messages.csv from ingest")->required();
  extract->add_option("--out", ex_out, "Output CSV");

  // networks
  auto* networks = app.add_subcommand("networks", "Build the participant and domain networks");
  std::string nw_facts, nw_messages, nw_out = "graphs";
  networks->add_option("--facts", nw_facts, "facts.csv from extract")->required();
  networks->add_option("--messages", nw_messages, "messages.csv; needed for the participant network");
  networks->add_option("--out-dir", nw_out, "Output directory");

  // run
  auto* run = app.add_subcommand("run", "Run the pipeline from a config file");
  std::string config_file;
  run->add_option("--config", config_file, "Config file (key = value)")->required();
  PipelineConfig cfg;
  std::string archive, from = "2008-02-01", to = "2016-12-31", merges, out = "out", hc = "HC3", stages;
  std::vector<std::string> feeds;
  std::uint64_t seed = cfg.seed;
  run->add_option("--archive", archive);
  run->add_option("--feeds,--feed", feeds);
  run->add_option("--from", from);
  run->add_option("--to", to);
  run->add_option("--delta", cfg.delta);
  run->add_option("--merges", merges);
  run->add_option("--core_names,--core-names", cfg.core_names);
  run->add_option("--taus", cfg.taus)->delimiter(',');
  run->add_option("--lambdas", cfg.lambdas)->delimiter(',');
  run->add_option("--bootstrap_reps,--bootstrap-reps", cfg.bootstrap_reps);
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--out", out, "Output directory");
  run->add_option("--hc", hc, "HC0, HC1, HC2 or HC3");
  run->add_option("--top_cwes,--top-cwes", cfg.top_cwes);
  run->add_option("--cwe_sweep,--cwe-sweep", cfg.cwe_sweep)->delimiter(',');
  run->add_option("--lasso_standardize,--lasso-standardize", cfg.lasso_standardize);
  run->add_option("--trees", cfg.forest.trees);
  run->add_option("--mtry", cfg.forest.mtry);
  run->add_option("--folds", cfg.folds);
  run->add_option("--test_fraction,--test-fraction", cfg.test_fraction);
  run->add_option("--stratified_split,--stratified-split", cfg.stratified_split);
  run->add_option("--stages", stages, "Comma-separated subset of ingest,nvd,extract,networks,metrics,regress,classify");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*ingest) {
      DateWindow w = parse_window(in_from, in_to);
      std::vector<NamePair> m;
      if (!in_merges.empty()) m = load_manual_merges(in_merges);
      IngestOutput r = run_ingest(in_archive, w, in_delta, m);
      auto mo = open_output(fs::path(in_out) / "messages.csv");
      write_messages_csv(mo, r.table, r.participants);
      auto po = open_output(fs::path(in_out) / "participants.csv");
      write_participants_csv(po, r.participants);
      report(r.diagnostics);
      return kOk;
    }
    if (*nvd) {
      std::vector<fs::path> paths(nvd_feeds.begin(), nvd_feeds.end());
      for (const auto& p : paths) {
        if (!fs::exists(p)) throw ConfigError("feed", "feed path does not exist: " + p.string());
      }
      Diagnostics d;
      RecordMap records = load_records(paths, d);
      auto o = open_output(nvd_out);
      write_records_csv(o, records);
      report(d);
      return kOk;
    }
    if (*extract) {
      auto in = open_input(ex_messages);
      MessageTable table = read_messages_csv(in);
      auto facts = run_extract(table);
      auto o = open_output(ex_out);
      write_facts_csv(o, facts);
      return kOk;
    }
    if (*networks) {
      auto fin = open_input(nw_facts);
      auto facts = read_facts_csv(fin);
      MessageTable table;
      if (!nw_messages.empty()) {
        auto min = open_input(nw_messages);
        table = read_messages_csv(min);
      }
      NetworkOutput g = run_networks(table, facts);
      auto so = open_output(fs::path(nw_out) / "social.csv");
      g.social.write_edge_list(so, "participant");
      auto dout = open_output(fs::path(nw_out) / "domains.csv");
      g.domains.write_edge_list(dout, "domain");
      return kOk;
    }

    // run
    fs::path config_path = config_file;
    std::set<std::string> from_config = apply_config(*run, config_path);
    fs::path base = config_path.has_parent_path() ? config_path.parent_path() : fs::path(".");
    auto resolve = [&](const std::string& value, const std::string& key) -> fs::path {
      if (value.empty()) return {};
      return from_config.count(key) ? rebase(value, base) : fs::path(value);
    };
    cfg.archive = resolve(archive, "archive");
    for (const auto& f : feeds) cfg.feeds.push_back(resolve(f, "feeds"));
    if (!merges.empty()) cfg.merges = resolve(merges, "merges");
    cfg.out = resolve(out, "out");
    cfg.window = parse_window(from, to);
    cfg.seed = seed;
    try {
      cfg.hc = parse_hc_variant(hc);
    } catch (const std::exception&) {
      throw ConfigError("hc", "unknown covariance variant '" + hc + "'");
    }
    if (!stages.empty()) cfg.stages = parse_stage_list(stages);

    RunSummary s = run_pipeline(cfg);
    if (s.exit_code != 0) {
      std::cerr << "coorddelay: " << (s.failed_stage.empty() ? "" : "stage '" + s.failed_stage + "' failed: ")
                << s.message << '\n';
    }
    return s.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "coorddelay: config error in '" << e.field() << "': " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "coorddelay: " << e.what() << '\n';
    return kDataError;
  }
}
