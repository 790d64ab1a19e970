#include "coorddelay/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/version.hpp>
#include <json.hpp>

#include "coorddelay/regress/inference.hpp"
#include "coorddelay/regress/quantreg.hpp"
#include "coorddelay/util/csv.hpp"
#include "coorddelay/util/parallel.hpp"

namespace coorddelay {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Nvd: return "nvd";
    case Stage::Extract: return "extract";
    case Stage::Networks: return "networks";
    case Stage::Metrics: return "metrics";
    case Stage::Regress: return "regress";
    case Stage::Classify: return "classify";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : kAllStages) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("stages", "unknown stage '" + std::string(name) + "'");
}

std::set<Stage> parse_stage_list(std::string_view list) {
  std::set<Stage> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    std::size_t comma = list.find(',', start);
    std::string_view item = list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) out.insert(parse_stage(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("stages", "no stage selected");
  return out;
}

std::vector<std::string> default_core_names() { return {"Steven M. Christey", "Kurt Seifried", "cve-assign"}; }

std::vector<double> default_lambdas() {
  std::vector<double> out;
  for (int l = 1; l <= 100; ++l) out.push_back(l);
  return out;
}

std::vector<int> default_cwe_sweep() {
  std::vector<int> out;
  for (int c = 5; c <= 55; c += 5) out.push_back(c);
  return out;
}

namespace {

bool needs(const std::set<Stage>& stages, std::initializer_list<Stage> any) {
  for (Stage s : any) {
    if (stages.count(s)) return true;
  }
  return false;
}

bool needs_archive(const std::set<Stage>& s) {
  return needs(s, {Stage::Ingest, Stage::Extract, Stage::Networks, Stage::Metrics, Stage::Regress, Stage::Classify});
}
bool needs_feeds(const std::set<Stage>& s) {
  return needs(s, {Stage::Nvd, Stage::Metrics, Stage::Regress, Stage::Classify});
}

}  // namespace

void validate_config(const PipelineConfig& c) {
  if (c.stages.empty()) throw ConfigError("stages", "no stage selected");
  if (needs_archive(c.stages)) {
    if (c.archive.empty()) throw ConfigError("archive", "no archive path given");
    if (!fs::exists(c.archive)) throw ConfigError("archive", "archive path does not exist: " + c.archive.string());
  }
  if (needs_feeds(c.stages)) {
    if (c.feeds.empty()) throw ConfigError("feeds", "no feed path given");
    for (const auto& f : c.feeds) {
      if (!fs::exists(f)) throw ConfigError("feeds", "feed path does not exist: " + f.string());
    }
  }
  if (c.merges && !fs::exists(*c.merges)) {
    throw ConfigError("merges", "merges file does not exist: " + c.merges->string());
  }
  if (c.window.last < c.window.first) throw ConfigError("window", "window end precedes window start");
  if (!(c.delta > 0.0 && c.delta <= 1.0)) throw ConfigError("delta", "delta must lie in (0, 1]");
  if (c.taus.empty()) throw ConfigError("taus", "quantile grid is empty");
  for (std::size_t i = 0; i < c.taus.size(); ++i) {
    if (!(c.taus[i] > 0.0 && c.taus[i] < 1.0)) throw ConfigError("taus", "quantiles must lie in (0, 1)");
    if (i > 0 && !(c.taus[i] > c.taus[i - 1])) throw ConfigError("taus", "quantiles must be strictly increasing");
  }
  for (double l : c.lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("lambdas", "penalties must be finite and >= 0");
  }
  if (c.bootstrap_reps < 50) throw ConfigError("bootstrap_reps", "bootstrap_reps must be >= 50");
  if (c.top_cwes < 1) throw ConfigError("top_cwes", "top_cwes must be >= 1");
  for (int s : c.cwe_sweep) {
    if (s < 1) throw ConfigError("cwe_sweep", "CWE counts must be >= 1");
  }
  if (c.forest.trees < 1) throw ConfigError("trees", "trees must be >= 1");
  if (c.forest.min_leaf < 1) throw ConfigError("min_leaf", "min_leaf must be >= 1");
  if (c.folds < 2) throw ConfigError("folds", "folds must be >= 2");
  if (!(c.test_fraction > 0.0 && c.test_fraction < 0.5)) {
    throw ConfigError("test_fraction", "test_fraction must lie in (0, 0.5)");
  }
  if (c.out.empty()) throw ConfigError("out", "output directory is missing");
}

IngestOutput run_ingest(const fs::path& archive, const DateWindow& window, double delta,
                        std::span<const NamePair> merges) {
  ArchiveParseResult parsed = parse_archive(archive, window);
  IngestOutput out;
  out.diagnostics = std::move(parsed.diagnostics);
  std::vector<std::string> names;
  for (const auto& m : parsed.messages) {
    if (m.sender_raw != kUnknownSender) names.push_back(m.sender_raw);
  }
  out.participants = resolve_identities(names, delta, merges);
  ParticipantIndex index(out.participants);
  for (auto& m : parsed.messages) {
    int p = m.sender_raw == kUnknownSender ? -1 : index.find(m.sender_raw);
    if (p >= 0) {
      auto& part = out.participants[static_cast<std::size_t>(p)];
      part.message_keys.insert(m.message_key);
      out.table.participant.push_back(part.canonical_name);
    } else {
      out.table.participant.emplace_back();
    }
    out.table.messages.push_back(std::move(m));
  }
  return out;
}

std::vector<MessageFacts> run_extract(const MessageTable& table) {
  std::vector<MessageFacts> out;
  out.reserve(table.messages.size());
  for (const auto& m : table.messages) out.push_back(extract_facts(m));
  return out;
}

namespace {

std::map<std::string, const MessageFacts*> facts_by_key(std::span<const MessageFacts> facts) {
  std::map<std::string, const MessageFacts*> out;
  for (const auto& f : facts) out[f.message_key] = &f;
  return out;
}

}  // namespace

NetworkOutput run_networks(const MessageTable& table, std::span<const MessageFacts> facts) {
  auto lookup = facts_by_key(facts);
  std::vector<SenderMentions> senders;
  std::vector<CveDomainMentions> domains;
  for (std::size_t i = 0; i < table.messages.size(); ++i) {
    auto it = lookup.find(table.messages[i].message_key);
    if (it == lookup.end()) continue;
    const auto& f = *it->second;
    if (!table.participant[i].empty() && !f.cve_ids.empty()) senders.push_back({table.participant[i], f.cve_ids});
    if (!f.cve_ids.empty() && !f.domains.empty()) domains.push_back({f.cve_ids, f.domains});
  }
  // Messages present only in the facts table (no sender information).
  if (table.messages.empty()) {
    for (const auto& f : facts) {
      if (!f.cve_ids.empty() && !f.domains.empty()) domains.push_back({f.cve_ids, f.domains});
    }
  }
  return {build_social_network(senders), build_domain_network(domains)};
}

MetricsOutput run_metrics(const IngestOutput& ingest, std::span<const MessageFacts> facts,
                          const NetworkOutput& networks, const RecordMap& records,
                          std::span<const std::string> core_names, int top_k) {
  MetricsOutput out;
  auto lookup = facts_by_key(facts);
  MentionDates earliest;
  std::map<std::string, std::vector<std::string>, CveIdLess> bodies;
  for (const auto& m : ingest.table.messages) {
    auto it = lookup.find(m.message_key);
    if (it == lookup.end()) continue;
    for (const auto& cve : it->second->cve_ids) {
      Date d = to_date(m.sent_at);
      auto [pos, inserted] = earliest.try_emplace(cve, d);
      if (!inserted && d < pos->second) pos->second = d;
      bodies[cve].push_back(m.body);
    }
  }
  out.delays = compute_delays(earliest, records);
  out.diagnostics.merge(out.delays.diagnostics);

  std::map<std::string, MessageStats, CveIdLess> stats;
  for (const auto& s : out.delays.samples) stats[s.cve_id] = message_stats(bodies[s.cve_id]);

  ParticipantIndex index(ingest.participants);
  std::vector<std::string> resolved;
  for (const auto& name : core_names) {
    int p = index.find(name);
    if (p < 0) p = index.find_normalized(name);
    resolved.push_back(p >= 0 ? ingest.participants[static_cast<std::size_t>(p)].canonical_name : name);
  }
  auto core = core_membership(networks.social, resolved, &out.diagnostics);

  FeatureInputs in;
  in.samples = out.delays.samples;
  in.social = &networks.social;
  in.domains = &networks.domains;
  in.core = &core;
  in.message_stats = &stats;
  in.records = &records;
  out.features = build_features(in);

  std::vector<std::string> ids;
  for (const auto& s : out.delays.samples) ids.push_back(s.cve_id);
  out.top_cwes = top_cwes(records, ids, static_cast<std::size_t>(top_k));
  for (int level = 1; level <= 6; ++level) {
    out.models.push_back(assemble(level, out.features, {true, out.top_cwes}));
  }
  return out;
}

namespace {

// Writes CSV artifacts under the output root and records their data-row counts.
class Artifacts {
 public:
  explicit Artifacts(fs::path root) : root_(std::move(root)) {}

  void write(const std::string& rel, const std::function<void(std::ostream&)>& fn) {
    fs::path path = root_ / rel;
    fs::create_directories(path.parent_path());
    {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + path.string());
      fn(out);
      if (!out) throw std::runtime_error("write failed for " + path.string());
    }
    written_.push_back(rel);
    std::ifstream in(path, std::ios::binary);
    rows_[rel] = csv::read_table(in).rows.size();
  }

  const std::vector<std::string>& written() const { return written_; }
  json rows() const {
    json j = json::object();
    for (const auto& rel : written_) j[rel] = rows_.at(rel);
    return j;
  }

 private:
  fs::path root_;
  std::vector<std::string> written_;
  std::map<std::string, std::size_t> rows_;
};

std::string num(double v) { return csv::format_double(v); }
std::string num_opt(const std::optional<double>& v) { return v ? num(*v) : "NA"; }

std::string tau_label(double tau) { return csv::format_double(tau); }

struct Failure {
  std::string what;
  std::string reason;
};

struct ModelFits {
  std::optional<FitResult> ols;
  std::optional<MatrixXd> ols_replicates;
  std::vector<std::optional<FitResult>> qr;
  std::vector<std::optional<MatrixXd>> qr_replicates;
};

std::uint64_t bootstrap_seed(std::uint64_t master, std::size_t model, std::size_t tau_index) {
  return stream_seed(master, 100 + 10 * model + tau_index);
}

void write_coefficients(std::ostream& out, const std::vector<ModelFits>& fits, std::span<const double> taus) {
  csv::write_row(out, {"model", "method", "tau", "name", "estimate", "se", "p_value"});
  auto emit = [&](std::size_t model, const FitResult& f, const std::string& tau) {
    VectorXd p = coefficient_p_values(f);
    for (Index j = 0; j < f.k; ++j) {
      double var = f.covariance.size() ? f.covariance(j, j) : 0.0;
      bool have_se = f.covariance.size() && (f.method == Method::OLS || var > 0.0);
      csv::write_row(out, {"M" + std::to_string(model + 1), std::string(to_string(f.method)), tau,
                           f.column_names[static_cast<std::size_t>(j)], num(f.coefficients(j)),
                           have_se ? num(std::sqrt(std::max(0.0, var))) : "NA", num(p(j))});
    }
  };
  for (std::size_t m = 0; m < fits.size(); ++m) {
    if (fits[m].ols) emit(m, *fits[m].ols, "NA");
    for (std::size_t t = 0; t < taus.size(); ++t) {
      if (fits[m].qr[t]) emit(m, *fits[m].qr[t], tau_label(taus[t]));
    }
  }
}

void write_performance(std::ostream& out, const std::vector<ModelFits>& fits, const std::vector<ModelMatrix>& models,
                       std::span<const double> taus) {
  csv::Row header{"model", "n", "k", "ols_adj_r2", "ols_aic", "ols_delta_aic"};
  for (double t : taus) {
    header.push_back("qr_aic_" + tau_label(t));
    header.push_back("qr_delta_aic_" + tau_label(t));
  }
  csv::write_row(out, header);
  auto aic_of = [](const std::optional<FitResult>& f) -> std::optional<double> {
    if (!f || !std::isfinite(f->aic)) return std::nullopt;
    return f->aic;
  };
  for (std::size_t m = 0; m < fits.size(); ++m) {
    csv::Row row{"M" + std::to_string(m + 1), std::to_string(models[m].n()), std::to_string(models[m].k())};
    row.push_back(fits[m].ols ? num_opt(fits[m].ols->adj_r2) : "NA");
    auto cur = aic_of(fits[m].ols);
    row.push_back(num_opt(cur));
    auto prev = m > 0 ? aic_of(fits[m - 1].ols) : std::nullopt;
    row.push_back(cur && prev ? num(*cur - *prev) : "NA");
    for (std::size_t t = 0; t < taus.size(); ++t) {
      auto c = aic_of(fits[m].qr[t]);
      auto p = m > 0 ? aic_of(fits[m - 1].qr[t]) : std::nullopt;
      row.push_back(num_opt(c));
      row.push_back(c && p ? num(*c - *p) : "NA");
    }
    csv::write_row(out, row);
  }
}

struct RegressContext {
  const PipelineConfig& config;
  const MetricsOutput& metrics;
  const RecordMap& records;
  Artifacts& artifacts;
  std::vector<Failure>& failures;
  json& counts;
};

void run_regress(RegressContext& ctx) {
  const auto& cfg = ctx.config;
  const auto& models = ctx.metrics.models;
  const auto& samples = ctx.metrics.delays.samples;
  const auto n = static_cast<Index>(samples.size());
  const std::span<const double> taus = cfg.taus;
  VectorXd y(n), ylog(n);
  for (Index i = 0; i < n; ++i) {
    y(i) = samples[static_cast<std::size_t>(i)].y;
    ylog(i) = std::log1p(y(i));
  }
  auto fail = [&](std::string what, const std::exception& e) { ctx.failures.push_back({std::move(what), e.what()}); };

  std::vector<ModelFits> fits(models.size());
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto& X = models[m].rows;
    const auto& names = models[m].column_names;
    const std::string label = "M" + std::to_string(m + 1);
    auto& mf = fits[m];
    try {
      mf.ols = ols_fit(X, ylog, names, cfg.hc);
      if (m > 0) {
        mf.ols_replicates = bootstrap_coefficients(X, ylog, ols_fitter(), cfg.bootstrap_reps,
                                                   bootstrap_seed(cfg.seed, m, taus.size()));
      }
    } catch (const std::exception& e) {
      fail(label + " OLS", e);
    }
    mf.qr.resize(taus.size());
    mf.qr_replicates.resize(taus.size());
    for (std::size_t t = 0; t < taus.size(); ++t) {
      const std::string what = label + " QR tau=" + tau_label(taus[t]);
      try {
        mf.qr[t] = qr_fit(X, y, taus[t], names);
      } catch (const std::exception& e) {
        fail(what, e);
        continue;
      }
      try {
        MatrixXd reps = bootstrap_coefficients(X, y, qr_fitter(taus[t]), cfg.bootstrap_reps,
                                               bootstrap_seed(cfg.seed, m, t));
        mf.qr[t]->covariance = replicate_covariance(reps);
        mf.qr_replicates[t] = std::move(reps);
      } catch (const std::exception& e) {
        fail(what + " bootstrap", e);
      }
    }
  }

  ctx.artifacts.write("coefficients.csv", [&](std::ostream& o) { write_coefficients(o, fits, taus); });
  ctx.artifacts.write("performance.csv", [&](std::ostream& o) { write_performance(o, fits, models, taus); });

  // Consecutive nested tests M(j-1) vs M(j).
  ctx.artifacts.write("nested_tests.csv", [&](std::ostream& o) {
    csv::write_row(o, {"method", "tau", "restricted", "unrestricted", "statistic", "df1", "df2", "bootstrap_reps",
                       "p_value", "status"});
    auto row = [&](const std::string& method, const std::string& tau, std::size_t m,
                   const std::optional<FitResult>& small, const std::optional<FitResult>& large,
                   const std::optional<MatrixXd>& reps) {
      csv::Row r{method, tau, "M" + std::to_string(m), "M" + std::to_string(m + 1)};
      if (!small || !large || !reps) {
        r.insert(r.end(), {"NA", "NA", "NA", "NA", "NA", "fit unavailable"});
      } else {
        try {
          TestResult t = nested_wald_from_replicates(*small, *large, *reps);
          r.insert(r.end(), {num(t.statistic), num(t.df1), num(t.df2), std::to_string(t.bootstrap_reps),
                             num(t.p_value), "ok"});
        } catch (const std::exception& e) {
          r.insert(r.end(), {"NA", "NA", "NA", "NA", "NA", e.what()});
        }
      }
      csv::write_row(o, r);
    };
    for (std::size_t m = 1; m < fits.size(); ++m) {
      row("OLS", "NA", m, fits[m - 1].ols, fits[m].ols, fits[m].ols_replicates);
    }
    for (std::size_t t = 0; t < taus.size(); ++t) {
      for (std::size_t m = 1; m < fits.size(); ++m) {
        row("QR", tau_label(taus[t]), m, fits[m - 1].qr[t], fits[m].qr[t], fits[m].qr_replicates[t]);
      }
    }
  });

  // Between-quantile tests on the full model over the nested sets S1, S2, ...
  const std::size_t full = models.size() - 1;
  const auto& Xf = models[full].rows;
  ctx.artifacts.write("between_quantile.csv", [&](std::ostream& o) {
    csv::write_row(o, {"model", "coefficient", "set", "taus", "statistic", "df", "p_value", "status"});
    std::vector<std::optional<double>> sparsity(taus.size());
    std::string sparsity_error;
    for (std::size_t t = 0; t < taus.size(); ++t) {
      if (!fits[full].qr[t]) continue;
      try {
        sparsity[t] = sparsity_difference_quotient(Xf, y, taus[t]);
      } catch (const std::exception& e) {
        sparsity_error = e.what();
        fail("M" + std::to_string(full + 1) + " sparsity tau=" + tau_label(taus[t]), e);
      }
    }
    auto icpt = intercept_columns(Xf);
    for (std::size_t set = 1; set < taus.size(); ++set) {
      std::string tau_list;
      std::vector<FitResult> set_fits;
      std::vector<double> set_sparsity;
      bool complete = true;
      for (std::size_t t = 0; t <= set; ++t) {
        tau_list += (t ? ";" : "") + tau_label(taus[t]);
        if (!fits[full].qr[t] || !sparsity[t]) {
          complete = false;
          continue;
        }
        set_fits.push_back(*fits[full].qr[t]);
        set_sparsity.push_back(*sparsity[t]);
      }
      for (Index j = 0; j < Xf.cols(); ++j) {
        if (icpt[static_cast<std::size_t>(j)]) continue;
        csv::Row r{"M" + std::to_string(full + 1), models[full].column_names[static_cast<std::size_t>(j)],
                   "S" + std::to_string(set), tau_list};
        if (!complete) {
          r.insert(r.end(), {"NA", "NA", "NA", sparsity_error.empty() ? "fit unavailable" : sparsity_error});
        } else {
          try {
            TestResult t = between_quantile_wald(Xf, set_fits, j, set_sparsity);
            r.insert(r.end(), {num(t.statistic), num(t.df1), num(t.p_value), "ok"});
          } catch (const std::exception& e) {
            r.insert(r.end(), {"NA", "NA", "NA", e.what()});
          }
        }
        csv::write_row(o, r);
      }
    }
  });

  // LASSO path on the full model.
  {
    struct Cell {
      std::optional<FitResult> fit;
      std::string error;
    };
    const std::size_t nl = cfg.lambdas.size();
    std::vector<Cell> cells(taus.size() * nl);
    LassoOptions lo;
    lo.standardize = cfg.lasso_standardize;
    parallel_for(cells.size(), [&](std::size_t c) {
      try {
        cells[c].fit = qr_lasso_fit(Xf, y, taus[c / nl], cfg.lambdas[c % nl], models[full].column_names, lo);
      } catch (const std::exception& e) {
        cells[c].error = e.what();
      }
    });
    std::size_t failed = 0;
    ctx.artifacts.write("lasso_path.csv", [&](std::ostream& o) {
      csv::write_row(o, {"tau", "lambda", "coefficient", "value", "objective"});
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (!cells[c].fit) {
          ++failed;
          continue;
        }
        const auto& f = *cells[c].fit;
        for (Index j = 0; j < f.k; ++j) {
          csv::write_row(o, {tau_label(taus[c / nl]), num(cfg.lambdas[c % nl]),
                             f.column_names[static_cast<std::size_t>(j)], num(f.coefficients(j)), num(f.objective)});
        }
      }
    });
    if (failed) {
      ctx.failures.push_back({"QR-LASSO path", std::to_string(failed) + " of " + std::to_string(cells.size()) +
                                                   " fits failed; first: " +
                                                   std::find_if(cells.begin(), cells.end(), [](const Cell& c) {
                                                     return !c.fit;
                                                   })->error});
    }
  }

  // CWE-count sweep on top of the M5 specification.
  std::vector<std::string> ids;
  for (const auto& s : samples) ids.push_back(s.cve_id);
  ctx.artifacts.write("cwe_sweep.csv", [&](std::ostream& o) {
    csv::write_row(o, {"cwe_count", "cwe_available", "k", "ols_adj_r2", "ols_aic", "ols_delta_aic", "qr_aic_0.5",
                       "qr_delta_aic_0.5", "status"});
    std::optional<double> prev_ols, prev_qr;
    for (int count : cfg.cwe_sweep) {
      auto cwes = top_cwes(ctx.records, ids, static_cast<std::size_t>(count));
      ModelMatrix mm = assemble(6, ctx.metrics.features, {true, cwes});
      std::optional<double> ols_aic, qr_aic_v;
      std::optional<double> adj;
      std::string status;
      try {
        FitResult f = ols_fit(mm.rows, ylog, mm.column_names, cfg.hc);
        adj = f.adj_r2;
        if (std::isfinite(f.aic)) ols_aic = f.aic;
      } catch (const std::exception& e) {
        status = std::string("OLS: ") + e.what();
      }
      try {
        FitResult f = qr_fit(mm.rows, y, 0.5, mm.column_names);
        if (std::isfinite(f.aic)) qr_aic_v = f.aic;
      } catch (const std::exception& e) {
        status += (status.empty() ? "" : "; ") + std::string("QR: ") + e.what();
      }
      csv::write_row(o, {std::to_string(count), std::to_string(cwes.size()), std::to_string(mm.k()), num_opt(adj),
                         num_opt(ols_aic), ols_aic && prev_ols ? num(*ols_aic - *prev_ols) : "NA", num_opt(qr_aic_v),
                         qr_aic_v && prev_qr ? num(*qr_aic_v - *prev_qr) : "NA", status.empty() ? "ok" : status});
      prev_ols = ols_aic;
      prev_qr = qr_aic_v;
    }
  });

  // Per-year subsets without year dummies.
  std::map<int, std::vector<std::size_t>> by_year;
  for (std::size_t i = 0; i < ctx.metrics.features.size(); ++i) {
    by_year[year_of(ctx.metrics.features[i].t_oss)].push_back(i);
  }
  struct YearData {
    std::vector<CveFeatures> features;
    VectorXd y, ylog;
  };
  std::map<int, YearData> years;
  for (const auto& [year, rows] : by_year) {
    YearData d;
    d.y.resize(static_cast<Index>(rows.size()));
    d.ylog.resize(d.y.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      d.features.push_back(ctx.metrics.features[rows[r]]);
      d.y(static_cast<Index>(r)) = y(static_cast<Index>(rows[r]));
      d.ylog(static_cast<Index>(r)) = ylog(static_cast<Index>(rows[r]));
    }
    years.emplace(year, std::move(d));
  }
  const AssembleOptions no_years{false, ctx.metrics.top_cwes};
  ctx.artifacts.write("annual_subsets.csv", [&](std::ostream& o) {
    csv::write_row(o, {"year", "model", "n", "k", "adj_r2", "aic", "status"});
    for (const auto& [year, d] : years) {
      for (int level = 1; level <= 6; ++level) {
        ModelMatrix mm = assemble(level, d.features, no_years);
        csv::Row r{std::to_string(year), "M" + std::to_string(level), std::to_string(mm.n()), std::to_string(mm.k())};
        try {
          FitResult f = ols_fit(mm.rows, d.ylog, mm.column_names, cfg.hc);
          r.insert(r.end(), {num_opt(f.adj_r2), num(f.aic), "ok"});
        } catch (const std::exception& e) {
          r.insert(r.end(), {"NA", "NA", e.what()});
        }
        csv::write_row(o, r);
      }
    }
  });
  ctx.artifacts.write("annual_qr_effects.csv", [&](std::ostream& o) {
    csv::write_row(o, {"year", "coefficient", "estimate", "status"});
    for (const auto& [year, d] : years) {
      ModelMatrix mm = assemble(6, d.features, no_years);
      try {
        FitResult f = qr_fit(mm.rows, d.y, 0.5, mm.column_names);
        for (Index j = 0; j < f.k; ++j) {
          csv::write_row(o, {std::to_string(year), f.column_names[static_cast<std::size_t>(j)],
                             num(f.coefficients(j)), "ok"});
        }
      } catch (const std::exception& e) {
        csv::write_row(o, {std::to_string(year), "NA", "NA", e.what()});
      }
    }
  });
}

struct ClassifyOutcome {
  std::optional<SplitLabels> split;
  std::size_t train = 0;
  std::size_t test = 0;
};

ClassifyOutcome run_classify(const PipelineConfig& cfg, const MetricsOutput& metrics, std::uint64_t seed,
                             Artifacts& artifacts, std::vector<Failure>& failures, Diagnostics& diag) {
  ClassifyOutcome outcome;
  std::vector<double> y;
  for (const auto& s : metrics.delays.samples) y.push_back(s.y);
  std::vector<std::optional<ClassificationResult>> results(metrics.models.size());
  try {
    outcome.split = median_split(y);
    TestSplit split = make_test_split(outcome.split->labels, cfg.test_fraction, seed, cfg.stratified_split);
    outcome.train = split.train.size();
    outcome.test = split.test.size();
    ClassifyOptions co;
    co.folds = cfg.folds;
    co.forest = cfg.forest;
    co.seed = seed;
    for (std::size_t m = 0; m < metrics.models.size(); ++m) {
      try {
        results[m] = train_and_evaluate(metrics.models[m].rows, outcome.split->labels, split, co, &diag);
      } catch (const std::exception& e) {
        failures.push_back({"M" + std::to_string(m + 1) + " classification", e.what()});
      }
    }
  } catch (const std::exception& e) {
    failures.push_back({"classification split", e.what()});
  }
  artifacts.write("classification.csv", [&](std::ostream& o) {
    csv::write_row(o, {"model_level", "cv_accuracy", "test_accuracy", "seed", "mtry"});
    for (std::size_t m = 0; m < results.size(); ++m) {
      if (!results[m]) {
        csv::write_row(o, {std::to_string(m + 1), "NA", "NA", std::to_string(seed), "NA"});
        continue;
      }
      csv::write_row(o, {std::to_string(m + 1), num(results[m]->cv_accuracy), num(results[m]->test_accuracy),
                         std::to_string(seed), std::to_string(results[m]->mtry)});
    }
  });
  return outcome;
}

const std::vector<std::pair<Stage, std::string>>& known_artifacts() {
  static const std::vector<std::pair<Stage, std::string>> list = [] {
    std::vector<std::pair<Stage, std::string>> l{
        {Stage::Ingest, "messages.csv"},          {Stage::Ingest, "participants.csv"},
        {Stage::Nvd, "records.csv"},              {Stage::Extract, "facts.csv"},
        {Stage::Networks, "graphs/social.csv"},   {Stage::Networks, "graphs/domains.csv"},
        {Stage::Metrics, "delays.csv"},           {Stage::Metrics, "delay_summary.csv"},
        {Stage::Metrics, "delay_annual.csv"},     {Stage::Regress, "coefficients.csv"},
        {Stage::Regress, "performance.csv"},      {Stage::Regress, "nested_tests.csv"},
        {Stage::Regress, "between_quantile.csv"}, {Stage::Regress, "lasso_path.csv"},
        {Stage::Regress, "cwe_sweep.csv"},        {Stage::Regress, "annual_subsets.csv"},
        {Stage::Regress, "annual_qr_effects.csv"}, {Stage::Classify, "classification.csv"}};
    for (int m = 1; m <= 6; ++m) l.emplace_back(Stage::Metrics, "model_matrix_M" + std::to_string(m) + ".csv");
    return l;
  }();
  return list;
}

std::set<Stage> with_prerequisites(const std::set<Stage>& selected) {
  std::set<Stage> out = selected;
  auto add_if = [&](std::initializer_list<Stage> triggers, std::initializer_list<Stage> deps) {
    if (needs(out, triggers)) out.insert(deps);
  };
  add_if({Stage::Regress, Stage::Classify}, {Stage::Metrics});
  add_if({Stage::Metrics}, {Stage::Networks, Stage::Nvd});
  add_if({Stage::Networks}, {Stage::Extract});
  add_if({Stage::Extract}, {Stage::Ingest});
  return out;
}

json config_json(const PipelineConfig& c) {
  json j;
  j["archive"] = c.archive.string();
  json feeds = json::array();
  for (const auto& f : c.feeds) feeds.push_back(f.string());
  j["feeds"] = feeds;
  j["from"] = format_date(c.window.first);
  j["to"] = format_date(c.window.last);
  j["delta"] = c.delta;
  j["merges"] = c.merges ? json(c.merges->string()) : json(nullptr);
  j["core_names"] = c.core_names;
  j["taus"] = c.taus;
  j["lambdas"] = c.lambdas;
  j["bootstrap_reps"] = c.bootstrap_reps;
  j["seed"] = c.seed;
  j["out"] = c.out.string();
  j["hc"] = std::string(to_string(c.hc));
  j["top_cwes"] = c.top_cwes;
  j["cwe_sweep"] = c.cwe_sweep;
  j["lasso_standardize"] = c.lasso_standardize;
  j["trees"] = c.forest.trees;
  j["mtry"] = c.forest.mtry;
  j["min_leaf"] = c.forest.min_leaf;
  j["max_depth"] = c.forest.max_depth;
  j["folds"] = c.folds;
  j["test_fraction"] = c.test_fraction;
  j["stratified_split"] = c.stratified_split;
  json stages = json::array();
  for (Stage s : kAllStages) {
    if (c.stages.count(s)) stages.push_back(std::string(to_string(s)));
  }
  j["stages"] = stages;
  return j;
}

constexpr std::size_t kMaxReportedWarnings = 1000;

}  // namespace

RunSummary run_pipeline(const PipelineConfig& config) {
  RunSummary summary;
  try {
    validate_config(config);
  } catch (const ConfigError& e) {
    return {2, "config_error", "", "config field '" + e.field() + "': " + e.what()};
  }
  const std::set<Stage> stages = with_prerequisites(config.stages);
  auto selected = [&](Stage s) { return config.stages.count(s) > 0; };

  try {
    std::filesystem::create_directories(config.out);
  } catch (const std::exception& e) {
    return {1, "failed", "", std::string("cannot create output directory: ") + e.what()};
  }

  Artifacts artifacts(config.out);
  Diagnostics diag;
  std::vector<Failure> failures;
  json timings = json::object();
  json counts = json::object();
  json classification = json::object();
  const std::uint64_t classify_seed = stream_seed(config.seed, 7);
  std::string current;

  using Clock = std::chrono::steady_clock;
  auto timed = [&](Stage s, const std::function<void()>& fn) {
    current = std::string(to_string(s));
    auto start = Clock::now();
    fn();
    timings[current] = std::chrono::duration<double>(Clock::now() - start).count();
  };

  try {
    IngestOutput ingest;
    RecordMap records;
    std::vector<MessageFacts> facts;
    NetworkOutput networks;
    MetricsOutput metrics;

    if (stages.count(Stage::Ingest)) {
      timed(Stage::Ingest, [&] {
        std::vector<NamePair> merges;
        if (config.merges) merges = load_manual_merges(config.merges->string());
        ingest = run_ingest(config.archive, config.window, config.delta, merges);
        diag.merge(ingest.diagnostics);
        std::size_t unknown = 0;
        for (const auto& p : ingest.table.participant) unknown += p.empty();
        counts["messages"] = ingest.table.messages.size();
        counts["unknown_sender_messages"] = unknown;
        counts["resolved_participants"] = ingest.participants.size();
        if (selected(Stage::Ingest)) {
          artifacts.write("messages.csv",
                          [&](std::ostream& o) { write_messages_csv(o, ingest.table, ingest.participants); });
          artifacts.write("participants.csv",
                          [&](std::ostream& o) { write_participants_csv(o, ingest.participants); });
        }
      });
    }
    if (stages.count(Stage::Nvd)) {
      timed(Stage::Nvd, [&] {
        Diagnostics nvd;
        records = load_records(config.feeds, nvd);
        diag.merge(nvd);
        counts["records"] = records.size();
        if (selected(Stage::Nvd)) {
          artifacts.write("records.csv", [&](std::ostream& o) { write_records_csv(o, records); });
        }
      });
    }
    if (stages.count(Stage::Extract)) {
      timed(Stage::Extract, [&] {
        facts = run_extract(ingest.table);
        std::set<std::string, CveIdLess> cves;
        for (const auto& f : facts) cves.insert(f.cve_ids.begin(), f.cve_ids.end());
        counts["mentioned_cves"] = cves.size();
        if (selected(Stage::Extract)) {
          artifacts.write("facts.csv", [&](std::ostream& o) { write_facts_csv(o, facts); });
        }
      });
    }
    if (stages.count(Stage::Networks)) {
      timed(Stage::Networks, [&] {
        networks = run_networks(ingest.table, facts);
        counts["participants"] = networks.social.left_count();
        counts["social_cves"] = networks.social.right_count();
        counts["social_edges"] = networks.social.edge_count();
        counts["domains"] = networks.domains.left_count();
        counts["domain_cves"] = networks.domains.right_count();
        counts["domain_edges"] = networks.domains.edge_count();
        if (selected(Stage::Networks)) {
          artifacts.write("graphs/social.csv",
                          [&](std::ostream& o) { networks.social.write_edge_list(o, "participant"); });
          artifacts.write("graphs/domains.csv",
                          [&](std::ostream& o) { networks.domains.write_edge_list(o, "domain"); });
        }
      });
    }
    if (stages.count(Stage::Metrics)) {
      timed(Stage::Metrics, [&] {
        metrics = run_metrics(ingest, facts, networks, records, config.core_names, config.top_cwes);
        diag.merge(metrics.diagnostics);
        counts["samples"] = metrics.delays.samples.size();
        counts["top_cwes"] = metrics.top_cwes;
        if (selected(Stage::Metrics)) {
          artifacts.write("delays.csv", [&](std::ostream& o) { write_delays(o, metrics.delays.samples); });
          if (!metrics.delays.samples.empty()) {
            const std::vector<double> probs{0.25, 0.5, 0.75, 0.9};
            DelaySummary s = summarize_delays(metrics.delays.samples, probs);
            artifacts.write("delay_summary.csv", [&](std::ostream& o) { write_delay_summary(o, s); });
            artifacts.write("delay_annual.csv", [&](std::ostream& o) { write_delay_annual(o, s); });
          }
          for (const auto& m : metrics.models) {
            artifacts.write("model_matrix_M" + std::to_string(m.model_level) + ".csv",
                            [&](std::ostream& o) { write_model_matrix(o, m); });
          }
        }
      });
    }
    if (stages.count(Stage::Regress)) {
      timed(Stage::Regress, [&] {
        if (metrics.delays.samples.empty()) throw std::runtime_error("no coordination samples to model");
        RegressContext ctx{config, metrics, records, artifacts, failures, counts};
        run_regress(ctx);
      });
    }
    if (stages.count(Stage::Classify)) {
      timed(Stage::Classify, [&] {
        ClassifyOutcome c = run_classify(config, metrics, classify_seed, artifacts, failures, diag);
        if (c.split) {
          classification["median_threshold"] = c.split->threshold;
          classification["low"] = c.split->low_count();
          classification["high"] = c.split->high_count();
        }
        classification["train"] = c.train;
        classification["test"] = c.test;
      });
    }
    summary = {0, "ok", "", ""};
  } catch (const ConfigError& e) {
    summary = {2, "config_error", current, "config field '" + e.field() + "': " + e.what()};
  } catch (const std::exception& e) {
    summary = {1, "failed", current, e.what()};
  }

  json run;
  run["tool"] = "coorddelay";
  run["version"] = std::string(kVersion);
  run["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)},
                      {"boost", std::to_string(BOOST_VERSION / 100000) + "." +
                                    std::to_string(BOOST_VERSION / 100 % 1000) + "." +
                                    std::to_string(BOOST_VERSION % 100)},
                      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  run["status"] = summary.status;
  run["failed_stage"] = summary.failed_stage.empty() ? json(nullptr) : json(summary.failed_stage);
  run["error"] = summary.message.empty() ? json(nullptr) : json(summary.message);
  run["config"] = config_json(config);
  json executed = json::array();
  for (Stage s : kAllStages) {
    if (stages.count(s)) executed.push_back(std::string(to_string(s)));
  }
  run["stages_executed"] = executed;
  run["seeds"] = {{"master", config.seed},
                  {"bootstrap", "stream_seed(master, 100 + 10 * model_index + tau_index); OLS uses tau_index = "
                                "number of quantiles"},
                  {"classification", classify_seed}};
  run["counts"] = counts;
  if (!classification.empty()) run["classification"] = classification;
  json fails = json::array();
  for (const auto& f : failures) fails.push_back({{"fit", f.what}, {"reason", f.reason}});
  run["model_failures"] = fails;
  run["diagnostics"] = {{"counters", diag.counters}, {"warnings_total", diag.warnings.size()}};
  json warnings = json::array();
  for (std::size_t i = 0; i < diag.warnings.size() && i < kMaxReportedWarnings; ++i) warnings.push_back(diag.warnings[i]);
  run["diagnostics"]["warnings"] = warnings;
  run["artifacts"] = artifacts.rows();
  json stale = json::array();
  std::set<std::string> written(artifacts.written().begin(), artifacts.written().end());
  for (const auto& [stage, rel] : known_artifacts()) {
    if (!written.count(rel) && std::filesystem::exists(config.out / rel)) stale.push_back(rel);
  }
  run["stale_artifacts"] = stale;
  run["timings_seconds"] = timings;
  run["notes"] = {{"qr_aic", "QR AIC uses the asymmetric-Laplace log-likelihood surrogate at the fitted scale."}};

  std::ofstream out(config.out / "run.json", std::ios::binary | std::ios::trunc);
  out << run.dump(2) << '\n';
  if (!out && summary.exit_code == 0) summary = {1, "failed", "", "cannot write run.json"};
  return summary;
}

}  // namespace coorddelay
