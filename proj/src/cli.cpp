#include "womble/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <new>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "womble/boundary.hpp"
#include "womble/diagnostics.hpp"
#include "womble/error.hpp"
#include "womble/io.hpp"
#include "womble/stats.hpp"

namespace womble {

namespace fs = std::filesystem;

namespace {

constexpr const char* kRunConfigFile = "run_config.txt";

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation:
      return kExitValidation;
    case ErrorKind::Io:
      return kExitIo;
    case ErrorKind::Numeric:
      return kExitNumeric;
  }
  return kExitNumeric;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

int guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ' ' << e.code() << ": " << one_line(e.what()) << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: IO filesystem: " << one_line(e.what()) << '\n';
    return kExitIo;
  } catch (const InternalError& e) {
    err << "error: NUMERIC internal: " << one_line(e.what()) << '\n';
    return kExitNumeric;
  } catch (const std::bad_alloc&) {
    err << "error: NUMERIC out_of_memory: allocation failed\n";
    return kExitNumeric;
  }
}

fs::path output_dir(const RunConfig& config) {
  const fs::path dir = config.out.empty() ? fs::path(".") : config.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail_io("unwritable_output", "cannot create output directory '" + dir.string() + "'");
  return dir;
}

std::string fmt(double v) { return format_double(v); }

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

struct FitInputs {
  AreasInput areas;
  AreaGraph graph;
};

FitInputs load_inputs(const RunConfig& config, bool with_geometry) {
  if (config.areas.empty()) fail_validation("missing_input", "--areas is required");
  if (config.adjacency.empty()) fail_validation("missing_input", "--adjacency is required");
  AreasInput areas = read_areas(config.areas, config.metrics);
  AreaGraph graph = read_adjacency(config.adjacency, areas.ids);
  if (with_geometry && !config.geojson.empty()) graph.set_shapes(read_geojson(config.geojson, graph));
  return {std::move(areas), std::move(graph)};
}

/// Border-level data with no metrics: the alpha = 0 model.
DissimilarityData no_metrics(const AreaGraph& graph) {
  DissimilarityData dis;
  dis.raw = Eigen::MatrixXd(static_cast<Eigen::Index>(graph.size()), 0);
  dis.border_metrics = Eigen::MatrixXd(static_cast<Eigen::Index>(graph.border_count()), 0);
  dis.scales = Eigen::VectorXd(0);
  return dis;
}

struct BaselineResult {
  RiskSummary risk;
  BlvResult blv;
  std::vector<std::uint8_t> flagged;
};

BaselineResult run_baseline(const FitInputs& in, const ChainConfig& chains, const BlvRuleSpec& rule) {
  ChainConfig cc = chains;
  cc.seed = derive_seed(chains.seed, "baseline");
  cc.fixed_alpha = Eigen::VectorXd(0);
  const auto dis = no_metrics(in.graph);
  const auto samples = run_chains(in.areas.data, in.graph, dis, cc);
  BaselineResult out;
  out.risk = risk_summary(samples);
  out.blv = blv(out.risk.median, in.graph);
  out.flagged = rule.rule == BlvRule::AbsoluteCutoff ? blv_rule_a(out.blv, rule.value) : blv_rule_b(out.blv, rule.value);
  return out;
}

CsvTable risk_table(const std::vector<std::string>& ids, const RiskSummary& risk) {
  CsvTable t{{"area_id", "R_median", "R_ci2.5", "R_ci97.5"}, {}};
  for (std::size_t k = 0; k < ids.size(); ++k)
    t.rows.push_back({ids[k], fmt(risk.median[k]), fmt(risk.lower[k]), fmt(risk.upper[k])});
  return t;
}

CsvTable blv_table(const AreaGraph& graph, const BaselineResult& base, const BlvRuleSpec& rule) {
  CsvTable t{{"area_id_1", "area_id_2", "blv", "rule", "flagged"}, {}};
  const std::string rule_text = rule.to_string();
  for (std::size_t b = 0; b < graph.border_count(); ++b) {
    const auto& br = graph.border(b);
    t.rows.push_back({graph.area_ids()[br.k], graph.area_ids()[br.j], fmt(base.blv.values[b]), rule_text,
                      base.flagged[b] ? "1" : "0"});
  }
  return t;
}

void add_summary_rows(CsvTable& t, const std::string& param, const std::vector<std::vector<double>>& per_chain) {
  std::vector<double> pooled;
  double ess_total = 0.0;
  for (std::size_t c = 0; c < per_chain.size(); ++c) {
    const auto& x = per_chain[c];
    const auto ci = equal_tailed_interval(x);
    const double ess = effective_sample_size(x);
    ess_total += ess;
    pooled.insert(pooled.end(), x.begin(), x.end());
    t.rows.push_back({param, std::to_string(c + 1), fmt(median(x)), fmt(mean(x)), fmt(ci.lower), fmt(ci.upper), fmt(ess)});
  }
  const auto ci = equal_tailed_interval(pooled);
  t.rows.push_back({param, "all", fmt(median(pooled)), fmt(mean(pooled)), fmt(ci.lower), fmt(ci.upper), fmt(ess_total)});
}

struct ScalarTrace {
  std::string name;
  std::vector<std::vector<double>> per_chain;
};

std::vector<ScalarTrace> scalar_traces(const PosteriorSamples& samples, const std::vector<std::string>& metric_names) {
  std::vector<ScalarTrace> out;
  ScalarTrace mu{"mu", {}}, tau2{"tau2", {}}, dev{"deviance", {}};
  for (const auto& c : samples.chains) {
    mu.per_chain.push_back(c.mu);
    tau2.per_chain.push_back(c.tau2);
    dev.per_chain.push_back(c.deviance);
  }
  out.push_back(std::move(mu));
  out.push_back(std::move(tau2));
  for (std::size_t i = 0; i < samples.n_metrics; ++i) {
    ScalarTrace a{"alpha_" + metric_names[i], {}};
    for (const auto& c : samples.chains) {
      const auto col = c.alpha.col(static_cast<Eigen::Index>(i));
      a.per_chain.emplace_back(col.begin(), col.end());
    }
    out.push_back(std::move(a));
  }
  out.push_back(std::move(dev));
  return out;
}

// key=value lines; the same format --config reads.
std::string run_config_text(const RunConfig& config) {
  std::ostringstream s;
  auto path = [](const fs::path& p) { return p.empty() ? std::string() : fs::absolute(p).lexically_normal().string(); };
  s << "areas=" << path(config.areas) << '\n';
  s << "adjacency=" << path(config.adjacency) << '\n';
  if (!config.geojson.empty()) s << "geojson=" << path(config.geojson) << '\n';
  if (!config.metrics.empty()) s << "metrics=" << join(config.metrics, ',') << '\n';
  const auto& c = config.chains;
  s << "chains=" << c.n_chains << "\nburnin=" << c.burn_in << "\nkeep=" << c.keep << "\nthin=" << c.thin
    << "\nseed=" << c.seed << "\nmax-boundary-fraction=" << fmt(c.max_boundary_fraction) << '\n';
  if (config.baseline_blv.rule != BlvRule::None) s << "baseline-blv=" << config.baseline_blv.to_string() << '\n';
  return s.str();
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail_validation("bad_config", source + ":" + std::to_string(number) + ": expected key=value");
    auto strip = [](std::string v) {
      const auto a = v.find_first_not_of(" \t");
      const auto b = v.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : v.substr(a, b - a + 1);
    };
    std::string key = strip(line.substr(0, eq));
    std::string value = strip(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (key.empty() || key == "config")
      fail_validation("bad_config", source + ":" + std::to_string(number) + ": invalid key '" + key + "'");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

// Replaces `--config FILE` with the file's keys as flags; flags given on the
// command line win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::vector<std::string> files;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) fail_validation("bad_config", "--config needs a file");
      files.push_back(args[++i]);
    } else if (args[i].rfind("--config=", 0) == 0) {
      files.push_back(args[i].substr(9));
    } else {
      out.push_back(args[i]);
    }
  }
  auto given = [&out](const std::string& key) {
    return std::any_of(out.begin(), out.end(), [&](const std::string& a) {
      return a == "--" + key || a.rfind("--" + key + "=", 0) == 0;
    });
  };
  std::vector<std::string> extra;
  for (const auto& file : files)
    for (auto& [key, value] : parse_key_values(read_text(file), file))
      if (!given(key)) extra.push_back("--" + key + "=" + value);
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

std::vector<std::string> partition_ids(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t c = t.column("area_id");
  std::vector<std::string> ids;
  for (const auto& row : t.rows) ids.push_back(row[c]);
  return ids;
}

SimScenario build_scenario(const RunConfig& config) {
  const bool custom = !config.adjacency.empty() || !config.partition.empty() || !config.centroids.empty();
  if (!custom) {
    SimScenario s = lattice_scenario(config.lattice, config.expected);
    if (!config.expected_file.empty()) s.expected = read_expected(config.expected_file, s.graph);
    return s;
  }
  if (config.adjacency.empty() || config.partition.empty() || config.centroids.empty())
    fail_validation("missing_input", "a custom simulation geometry needs --adjacency, --partition and --centroids");
  AreaGraph graph = read_adjacency(config.adjacency, partition_ids(config.partition));
  graph.set_centroids(read_centroids(config.centroids, graph));
  std::vector<int> groups = read_partition(config.partition, graph);
  Eigen::VectorXd expected = config.expected_file.empty()
                                 ? Eigen::VectorXd::Constant(static_cast<Eigen::Index>(graph.size()), config.expected)
                                 : read_expected(config.expected_file, graph);
  return {std::move(graph), std::move(groups), std::move(expected)};
}

std::string cell_file_name(double k1, double k2) { return "replicates_k1_" + fmt(k1) + "_k2_" + fmt(k2) + ".csv"; }

}  // namespace

BlvRuleSpec BlvRuleSpec::parse(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) fail_validation("bad_blv_rule", "expected c1=<cutoff> or c2=<percent>, got '" + text + "'");
  const std::string key = text.substr(0, eq);
  BlvRuleSpec spec;
  spec.value = parse_double(text.substr(eq + 1), "BLV rule value");
  if (key == "c1") {
    spec.rule = BlvRule::AbsoluteCutoff;
    if (!(spec.value >= 0.0) || !std::isfinite(spec.value))
      fail_validation("bad_blv_rule", "c1 must be a finite non-negative cutoff");
  } else if (key == "c2") {
    spec.rule = BlvRule::TopPercent;
    if (!(spec.value > 0.0 && spec.value <= 100.0)) fail_validation("bad_blv_rule", "c2 must be a percentage in (0, 100]");
  } else {
    fail_validation("bad_blv_rule", "unknown BLV rule '" + key + "' (use c1 or c2)");
  }
  return spec;
}

std::string BlvRuleSpec::to_string() const {
  switch (rule) {
    case BlvRule::AbsoluteCutoff:
      return "c1=" + format_double(value);
    case BlvRule::TopPercent:
      return "c2=" + format_double(value);
    case BlvRule::None:
      break;
  }
  return "none";
}

int cmd_fit(const RunConfig& config, std::ostream& log, std::ostream& err) {
  return guarded(
      [&] {
        const FitInputs in = load_inputs(config, true);
        const auto dis = compute_border_metrics(in.graph, in.areas.covariates, in.areas.metric_names);
        const fs::path dir = output_dir(config);
        if (config.verbosity > 0)
          log << "fit: " << in.graph.size() << " areas, " << in.graph.border_count() << " borders, "
              << dis.metric_count() << " metrics, " << config.chains.n_chains << " chains\n";

        const auto samples = run_chains(in.areas.data, in.graph, dis, config.chains);
        const auto risk = risk_summary(samples);
        const auto boundaries = classify_boundaries(samples);
        const auto blv_fit = blv(risk.median, in.graph);
        const auto d = dic(samples, in.areas.data);
        const auto& ids = in.graph.area_ids();

        CsvTable summary{{"param", "chain", "median", "mean", "ci2.5", "ci97.5", "ess"}, {}};
        CsvTable convergence{{"param", "rhat"}, {}};
        for (const auto& trace : scalar_traces(samples, dis.metric_names)) {
          add_summary_rows(summary, trace.name, trace.per_chain);
          const bool varies = std::any_of(trace.per_chain.begin(), trace.per_chain.end(), [](const auto& x) {
            return std::any_of(x.begin(), x.end(), [&](double v) { return v != x.front(); });
          });
          convergence.rows.push_back(
              {trace.name, trace.per_chain.size() > 1 && varies ? fmt(gelman_rubin(trace.per_chain)) : "NA"});
        }
        write_csv(dir / "posterior_summary.csv", summary);
        write_csv(dir / "convergence.csv", convergence);

        CsvTable acceptance{{"chain", "block", "rate"}, {}};
        for (const auto& c : samples.chains) {
          const std::string chain = std::to_string(c.chain + 1);
          acceptance.rows.push_back({chain, "phi", fmt(c.acceptance.phi)});
          acceptance.rows.push_back({chain, "tau2", fmt(c.acceptance.tau2)});
          for (std::size_t i = 0; i < c.acceptance.alpha.size(); ++i)
            acceptance.rows.push_back({chain, "alpha_" + dis.metric_names[i], fmt(c.acceptance.alpha[i])});
        }
        write_csv(dir / "acceptance.csv", acceptance);

        write_csv(dir / "risk.csv", risk_table(ids, risk));

        CsvTable bt{{"area_id_1", "area_id_2", "w_median", "w_mean", "is_boundary", "blv"}, {}};
        for (std::size_t b = 0; b < in.graph.border_count(); ++b) {
          const auto& br = in.graph.border(b);
          bt.rows.push_back({ids[br.k], ids[br.j], std::to_string(boundaries.w_median[b]), fmt(boundaries.w_mean[b]),
                             boundaries.is_boundary[b] ? "1" : "0", fmt(blv_fit.values[b])});
        }
        write_csv(dir / "boundaries.csv", bt);

        CsvTable effects{{"metric", "estimate", "ci2.5", "ci97.5", "alpha_min", "verdict"}, {}};
        for (std::size_t i = 0; i < dis.metric_count(); ++i) {
          const auto draws = samples.pooled_alpha(i);
          const auto ci = equal_tailed_interval(draws);
          const double amin = alpha_min(dis, i);
          effects.rows.push_back({dis.metric_names[i], fmt(median(draws)), fmt(ci.lower), fmt(ci.upper), fmt(amin),
                                  std::string(to_string(classify_effect(ci, amin)))});
        }
        write_csv(dir / "effects.csv", effects);

        write_csv(dir / "dic.csv", CsvTable{{"DIC", "p_D", "mean_deviance"}, {{fmt(d.dic), fmt(d.p_d), fmt(d.mean_deviance)}}});

        if (in.graph.shapes()) write_text(dir / "boundaries.geojson", boundary_geojson(in.graph, boundaries));

        if (config.baseline_blv.rule != BlvRule::None) {
          const auto base = run_baseline(in, config.chains, config.baseline_blv);
          write_csv(dir / "blv.csv", blv_table(in.graph, base, config.baseline_blv));
        }
        write_text(dir / kRunConfigFile, run_config_text(config));

        log << "fit: " << boundaries.boundary_count << " of " << in.graph.border_count()
            << " borders are boundaries; DIC " << fmt(d.dic) << '\n';
      },
      err);
}

int cmd_blv(const RunConfig& config, std::ostream& log, std::ostream& err) {
  return guarded(
      [&] {
        const BlvRuleSpec rule =
            config.baseline_blv.rule == BlvRule::None ? BlvRuleSpec{BlvRule::TopPercent, 10.0} : config.baseline_blv;
        if (config.areas.empty()) fail_validation("missing_input", "--areas is required");
        if (config.adjacency.empty()) fail_validation("missing_input", "--adjacency is required");
        AreasInput areas = read_counts(config.areas);
        AreaGraph graph = read_adjacency(config.adjacency, areas.ids);
        const FitInputs in{std::move(areas), std::move(graph)};
        const fs::path dir = output_dir(config);
        const auto base = run_baseline(in, config.chains, rule);
        write_csv(dir / "risk.csv", risk_table(in.graph.area_ids(), base.risk));
        write_csv(dir / "blv.csv", blv_table(in.graph, base, rule));
        const auto flagged = std::count(base.flagged.begin(), base.flagged.end(), std::uint8_t{1});
        log << "blv: " << flagged << " of " << in.graph.border_count() << " borders flagged (" << rule.to_string()
            << ")\n";
      },
      err);
}

int cmd_simulate(const RunConfig& config, std::ostream& log, std::ostream& err) {
  return guarded(
      [&] {
        if (config.k1_values.empty() || config.k2_values.empty())
          fail_validation("bad_sim_config", "at least one k1 and one k2 value are required");
        const SimScenario scenario = build_scenario(config);
        const fs::path dir = output_dir(config);
        CsvTable scorecard{{"k1", "k2", "BA", "NBA", "bias", "RMSE", "BA_se", "NBA_se", "bias_se", "RMSE_se", "replicates"},
                           {}};
        for (double k1 : config.k1_values)
          for (double k2 : config.k2_values) {
            SimConfig sim = config.sim;
            sim.k1 = k1;
            sim.k2 = k2;
            sim.seed = config.chains.seed;
            sim.threads = config.chains.threads;
            if (config.verbosity > 0) log << "simulate: k1=" << fmt(k1) << " k2=" << fmt(k2) << '\n';
            const auto study = run_study(scenario, sim, config.chains);
            const auto& s = study.score;
            scorecard.rows.push_back({fmt(k1), fmt(k2), fmt(s.ba), fmt(s.nba), fmt(s.bias), fmt(s.rmse), fmt(s.ba_se),
                                      fmt(s.nba_se), fmt(s.bias_se), fmt(s.rmse_se), std::to_string(s.replicates)});
            CsvTable detail{{"replicate", "BA", "NBA", "bias", "RMSE", "detected", "true_boundaries"}, {}};
            for (const auto& r : study.replicates)
              detail.rows.push_back({std::to_string(r.replicate + 1), fmt(r.ba), fmt(r.nba), fmt(r.bias), fmt(r.rmse),
                                     std::to_string(r.detected), std::to_string(r.true_boundaries)});
            write_csv(dir / cell_file_name(k1, k2), detail);
            log << "simulate: k1=" << fmt(k1) << " k2=" << fmt(k2) << " BA " << fmt(s.ba) << " NBA " << fmt(s.nba)
                << '\n';
          }
        write_csv(dir / "scorecard.csv", scorecard);
      },
      err);
}

int cmd_diagnose(const RunConfig& config, std::ostream& log, std::ostream& err) {
  return guarded(
      [&] {
        if (config.fit_dir.empty()) fail_validation("missing_input", "--fit is required");
        fs::path areas_path = config.areas;
        fs::path adjacency_path = config.adjacency;
        const fs::path recorded = config.fit_dir / kRunConfigFile;
        if ((areas_path.empty() || adjacency_path.empty()) && fs::exists(recorded)) {
          for (const auto& [key, value] : parse_key_values(read_text(recorded), recorded.string())) {
            if (key == "areas" && areas_path.empty()) areas_path = value;
            if (key == "adjacency" && adjacency_path.empty()) adjacency_path = value;
          }
        }
        if (areas_path.empty() || adjacency_path.empty())
          fail_validation("missing_input", "diagnose needs --areas and --adjacency, or a fit directory that records them");

        const AreasInput areas = read_counts(areas_path);
        const AreaGraph graph = read_adjacency(adjacency_path, areas.ids);
        const fs::path risk_path = config.fit_dir / "risk.csv";
        const CsvTable risk_csv = read_csv(risk_path);
        const std::size_t id_col = risk_csv.column("area_id");
        const std::size_t r_col = risk_csv.column("R_median");
        std::vector<double> risk(graph.size(), std::nan(""));
        for (const auto& row : risk_csv.rows) {
          const auto k = graph.find(row[id_col]);
          if (!k) fail_validation("unknown_area", risk_path.string() + ": area '" + row[id_col] + "' is not in the areas file");
          risk[*k] = parse_double(row[r_col], risk_path.string() + " R_median");
        }
        for (std::size_t k = 0; k < graph.size(); ++k)
          if (std::isnan(risk[k]))
            fail_validation("missing_area", risk_path.string() + ": no risk for area '" + graph.area_ids()[k] + "'");

        const Eigen::VectorXd residuals = pearson_residuals(areas.data, risk);
        const auto threads = config.chains.threads == 0 ? std::size_t{0} : config.chains.threads;
        const auto result = moran_permutation_test(residuals, graph, config.permutations, config.chains.seed, {}, threads);

        const fs::path dir = config.out.empty() ? config.fit_dir : output_dir(config);
        CsvTable res{{"area_id", "residual"}, {}};
        for (std::size_t k = 0; k < graph.size(); ++k)
          res.rows.push_back({graph.area_ids()[k], fmt(residuals(static_cast<Eigen::Index>(k)))});
        write_csv(dir / "residuals.csv", res);
        write_csv(dir / "moran.csv", CsvTable{{"I", "p_value", "n_permutations", "residual_type"},
                                              {{fmt(result.statistic), fmt(result.p_value),
                                                std::to_string(result.n_permutations), result.residual_type}}});
        log << "diagnose: Moran's I " << fmt(result.statistic) << ", p = " << fmt(result.p_value) << '\n';
      },
      err);
}

namespace {

void add_chain_options(CLI::App* app, RunConfig& c) {
  app->add_option("--chains", c.chains.n_chains, "Number of chains")->capture_default_str();
  app->add_option("--burnin", c.chains.burn_in, "Burn-in iterations per chain")->capture_default_str();
  app->add_option("--keep", c.chains.keep, "Retained iterations per chain")->capture_default_str();
  app->add_option("--thin", c.chains.thin, "Keep every thin-th draw")->capture_default_str();
  app->add_option("--seed", c.chains.seed, "Top-level random seed")->capture_default_str();
  app->add_option("--max-boundary-fraction", c.chains.max_boundary_fraction,
                  "Largest share of borders one metric alone may flag; sets the alpha prior bound")
      ->capture_default_str();
  app->add_option("--threads", c.chains.threads, "Worker threads (0 = all cores)")->capture_default_str();
}

void add_input_options(CLI::App* app, RunConfig& c) {
  app->add_option("--areas", c.areas, "Areas CSV: area_id,y,E,<covariates>");
  app->add_option("--adjacency", c.adjacency, "Pair list (area_id_1,area_id_2) or square 0/1 matrix");
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& log, std::ostream& err) {
  RunConfig c;
  std::string baseline;
  std::string rule = "c2=10";
  std::string pairs = "all";

  CLI::App app{"Bayesian areal boundary detection with covariate-driven adjacency"};
  app.name(raw_args.empty() ? "womble" : fs::path(raw_args.front()).filename().string());
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");
  app.add_option("--config", "key=value file; every key mirrors a flag, command-line flags win");

  auto* fit = app.add_subcommand("fit", "Fit the boundary model and write summaries");
  add_input_options(fit, c);
  fit->add_option("--geojson", c.geojson, "Area polygons keyed by properties.area_id (boundary overlay)");
  fit->add_option("--metrics", c.metrics, "Covariate columns to use (default: all)")->delimiter(',');
  fit->add_option("--out", c.out, "Output directory")->capture_default_str();
  fit->add_option("--baseline-blv", baseline, "Also fit the alpha = 0 baseline and apply c1=<cutoff> or c2=<percent>");
  add_chain_options(fit, c);

  auto* blv = app.add_subcommand("blv", "Fit the alpha = 0 baseline and flag borders by BLV");
  add_input_options(blv, c);
  blv->add_option("--rule", rule, "c1=<cutoff> or c2=<percent>")->capture_default_str();
  blv->add_option("--out", c.out, "Output directory")->capture_default_str();
  add_chain_options(blv, c);

  auto* sim = app.add_subcommand("simulate", "Run the synthetic boundary-detection study");
  sim->add_option("--k1", c.k1_values, "Mean log-risk offsets of the blocks")->delimiter(',')->capture_default_str();
  sim->add_option("--k2", c.k2_values, "Dissimilarity separations at true boundaries")->delimiter(',')->capture_default_str();
  sim->add_option("--lattice", c.lattice, "Lattice side")->capture_default_str();
  sim->add_option("--replicates", c.sim.replicates, "Replicates per cell")->capture_default_str();
  sim->add_option("--E", c.expected, "Constant expected count")->capture_default_str();
  sim->add_option("--expected-file", c.expected_file, "Per-area expected counts: area_id,E");
  sim->add_option("--field-sd", c.sim.field_sd, "Marginal SD of the Gaussian log-risk field")->capture_default_str();
  sim->add_option("--kappa", c.sim.kappa, "Matern smoothness")->capture_default_str();
  sim->add_option("--median-correlation", c.sim.target_median_correlation, "Target median Matern correlation")
      ->capture_default_str();
  sim->add_option("--correlation-pairs", pairs, "Pairs for the median: all or adjacent")
      ->check(CLI::IsMember({"all", "adjacent"}))
      ->capture_default_str();
  sim->add_option("--adjacency", c.adjacency, "Custom geometry: adjacency file");
  sim->add_option("--centroids", c.centroids, "Custom geometry: area_id,x,y");
  sim->add_option("--partition", c.partition, "Custom geometry: area_id,group (0 = background)");
  sim->add_option("--out", c.out, "Output directory")->capture_default_str();
  add_chain_options(sim, c);

  auto* diag = app.add_subcommand("diagnose", "Moran's I permutation test on a fit's Pearson residuals");
  diag->add_option("--fit", c.fit_dir, "Output directory of a completed fit")->required();
  add_input_options(diag, c);
  diag->add_option("--permutations", c.permutations, "Number of permutations")->capture_default_str();
  diag->add_option("--seed", c.chains.seed, "Permutation seed")->capture_default_str();
  diag->add_option("--threads", c.chains.threads, "Worker threads (0 = all cores)")->capture_default_str();
  diag->add_option("--out", c.out, "Output directory (default: the fit directory)");

  for (auto* sub : {fit, blv, sim, diag}) sub->add_flag("-v,--verbose", c.verbosity, "More progress output");

  std::vector<std::string> args;
  int code = guarded(
      [&] {
        args = expand_config(std::vector<std::string>(raw_args.begin() + (raw_args.empty() ? 0 : 1), raw_args.end()));
      },
      err);
  if (code != kExitOk) return code;

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    log << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    log << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: VALIDATION usage: " << one_line(e.what()) << '\n';
    return kExitValidation;
  }

  code = guarded(
      [&] {
        if (!baseline.empty()) c.baseline_blv = BlvRuleSpec::parse(baseline);
        if (blv->parsed()) c.baseline_blv = BlvRuleSpec::parse(rule);
        c.sim.pairs = pairs == "adjacent" ? CorrelationPairs::Adjacent : CorrelationPairs::All;
      },
      err);
  if (code != kExitOk) return code;

  if (fit->parsed()) {
    c.subcommand = "fit";
    if (c.out.empty()) c.out = ".";
    return cmd_fit(c, log, err);
  }
  if (blv->parsed()) {
    c.subcommand = "blv";
    if (c.out.empty()) c.out = ".";
    return cmd_blv(c, log, err);
  }
  if (sim->parsed()) {
    c.subcommand = "simulate";
    if (c.out.empty()) c.out = ".";
    return cmd_simulate(c, log, err);
  }
  c.subcommand = "diagnose";
  return cmd_diagnose(c, log, err);
}

}  // namespace womble
