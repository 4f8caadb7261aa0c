#include "ihmm/cli.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "csv.hpp"
#include "ihmm/error.hpp"
#include "ihmm/experiments.hpp"
#include "ihmm/log.hpp"
#include "ihmm/sampler.hpp"
#include "ihmm/simulate.hpp"

namespace ihmm {

namespace {

using nlohmann::json;

constexpr int kExitRunFailures = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitInternal = 4;

std::string num(double v) {
  std::ostringstream out;
  out << std::setprecision(10) << v;
  return out.str();
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParameterError(path.string() + ": " + e.what());
  }
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

KRange parse_k_range(const std::string& text) {
  const auto sep = text.find_first_of(":,-");
  if (sep == std::string::npos) throw ParameterError("K range must look like 2:5");
  try {
    KRange r{std::stoi(text.substr(0, sep)), std::stoi(text.substr(sep + 1))};
    if (r.min < 1 || r.max < r.min) throw ParameterError("K range must satisfy 1 <= min <= max");
    return r;
  } catch (const std::logic_error&) {
    throw ParameterError("K range must look like 2:5");
  }
}

json report_json(const ConvergenceReport& r) {
  json params = json::array();
  for (const auto& p : r.parameters) {
    params.push_back({{"name", p.name},
                      {"geweke_z", opt_json(p.geweke_z)},
                      {"act", opt_json(p.act)},
                      {"rhat", opt_json(p.rhat)},
                      {"note", p.note}});
  }
  return {{"geweke_success_rate", r.geweke_success_rate},
          {"median_act", r.median_act},
          {"act_q975", r.act_q975},
          {"verdict", r.verdict},
          {"parameters", params}};
}

std::string report_csv(const std::vector<ParameterDiagnostic>& params, const std::string& prefix_header = "",
                       const std::string& prefix = "") {
  std::ostringstream out;
  if (!prefix_header.empty()) out << prefix_header << ',';
  out << "parameter,geweke_z,act,rhat,note\n";
  for (const auto& p : params) {
    if (!prefix.empty()) out << prefix << ',';
    std::string note = p.note;
    std::replace(note.begin(), note.end(), ',', ';');
    out << p.name << ',' << opt_num(p.geweke_z) << ',' << opt_num(p.act) << ',' << opt_num(p.rhat) << ',' << note
        << '\n';
  }
  return out.str();
}

int modal_k(const ChainTrace& trace) {
  std::map<int, int> counts;
  for (const auto& r : trace.records) ++counts[r.occupied];
  int best = 0, best_count = -1;
  for (const auto& [k, c] : counts) {
    if (c > best_count) {
      best = k;
      best_count = c;
    }
  }
  return best;
}

}  // namespace

void FitConfig::validate() const {
  if (chains < 1) throw ParameterError("chains must be at least 1");
  if (iterations < 1) throw ParameterError("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw ParameterError("burn-in must lie in [0, iterations)");
  if (thinning < 1) throw ParameterError("thinning must be positive");
  if (k_range.min < 1 || k_range.max < k_range.min) throw ParameterError("invalid K range");
}

std::vector<StateSummary> summarize_states(const Dataset& data, const Labels& labels, const Priors& priors) {
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  std::vector<StateSummary> out;
  const auto p = data.dim();
  for (int s = 0; s < k; ++s) {
    std::vector<Eigen::Index> rows;
    for (std::size_t t = 0; t < labels.size(); ++t) {
      if (labels[t] == s) rows.push_back(static_cast<Eigen::Index>(t));
    }
    if (rows.empty()) continue;
    Matrix pts(static_cast<Eigen::Index>(rows.size()), p);
    for (std::size_t i = 0; i < rows.size(); ++i) pts.row(static_cast<Eigen::Index>(i)) = data.observations.row(rows[i]);
    const NiwPrior post = niw_posterior(priors.niw, pts);
    StateSummary st;
    st.label = s + 1;
    st.size = static_cast<long>(rows.size());
    st.mean = post.mean;
    st.covariance = post.scale / (post.dof - static_cast<double>(p) - 1.0);
    st.covariance_trace = st.covariance.trace();
    out.push_back(std::move(st));
  }
  return out;
}

FitResult fit_dataset(const Dataset& data, const FitConfig& config) {
  config.validate();
  data.validate();
  const Priors priors = config.priors.value_or(Priors::defaults(data.dim()));
  FitResult result;
  result.chains.resize(static_cast<std::size_t>(config.chains));

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c = next++; c < config.chains; c = next++) {
      ChainSummary& chain = result.chains[static_cast<std::size_t>(c)];
      chain.index = c + 1;
      try {
        RngStream init_rng(config.seed, derive_stream_id({0xF17u, static_cast<std::uint64_t>(c), 1}));
        InitOptions options;
        options.k_range = config.k_range;
        chain.init = initialize(data, config.init, init_rng, options);
        SamplerConfig sc;
        sc.iterations = config.iterations;
        sc.burn_in = config.burn_in;
        sc.thinning = config.thinning;
        sc.rng = RngStream(config.seed, derive_stream_id({0xF17u, static_cast<std::uint64_t>(c), 2}));
        chain.trace = run_chain(data, chain.init, priors, sc);
        chain.report = convergence_report(chain.trace, config.burn_in);
        chain.k_hat = modal_k(chain.trace);
        chain.ok = true;
      } catch (const Error& e) {
        chain.failure = e.what();
      }
    }
  };
  const int workers = std::min(resolve_workers(config.workers), config.chains);
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<ChainTrace> converged_traces;
  for (std::size_t c = 0; c < result.chains.size(); ++c) {
    const auto& chain = result.chains[c];
    if (!chain.ok) {
      ++result.failures;
      continue;
    }
    if (chain.report.verdict) {
      result.converged.push_back(static_cast<int>(c));
      converged_traces.push_back(chain.trace);
    }
  }
  if (converged_traces.size() >= 2) {
    result.rhat = convergence_report(std::span<const ChainTrace>(converged_traces), config.burn_in).parameters;
  }

  std::vector<int> pool_idx = result.converged;
  if (pool_idx.empty()) {
    result.pooled_all = true;
    for (std::size_t c = 0; c < result.chains.size(); ++c) {
      if (result.chains[c].ok) pool_idx.push_back(static_cast<int>(c));
    }
    if (!pool_idx.empty()) log_warning("no chain met the convergence criteria; MAP states pool every chain");
  }
  std::vector<Labels> draws;
  std::size_t reference = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int c : pool_idx) {
    const auto& tr = result.chains[static_cast<std::size_t>(c)].trace;
    std::map<long, double> ll;
    for (const auto& r : tr.records) ll[r.iteration] = r.log_likelihood;
    for (std::size_t d = 0; d < tr.state_draws.size(); ++d) {
      const double v = ll.count(tr.state_iterations[d]) ? ll[tr.state_iterations[d]] : -std::numeric_limits<double>::infinity();
      if (v > best_ll) {
        best_ll = v;
        reference = draws.size();
      }
      draws.push_back(tr.state_draws[d]);
    }
  }
  if (!draws.empty()) {
    result.map_states = map_states(draws, reference);
    result.states = summarize_states(data, result.map_states, priors);
  }

  if (config.write_files) {
    const auto& out = config.output_dir;
    std::filesystem::create_directories(out);
    std::ostringstream chains_csv, selection_csv;
    chains_csv << "chain,ok,init_method,initial_states,fallback,k_hat,geweke_success_rate,median_act,act_q975,converged,failure\n";
    selection_csv << "chain,k,score,std_error\n";
    json fit_json;
    fit_json["data"] = config.data.string();
    fit_json["init"] = std::string(to_string(config.init));
    fit_json["iterations"] = config.iterations;
    fit_json["burn_in"] = config.burn_in;
    fit_json["thinning"] = config.thinning;
    fit_json["seed"] = config.seed;
    fit_json["chains"] = json::array();
    for (const auto& chain : result.chains) {
      std::string failure = chain.failure;
      std::replace(failure.begin(), failure.end(), ',', ';');
      chains_csv << chain.index << ',' << (chain.ok ? 1 : 0) << ',' << to_string(config.init) << ','
                 << chain.init.num_states << ',' << (chain.init.fallback_reason ? 1 : 0) << ',' << chain.k_hat << ','
                 << num(chain.report.geweke_success_rate) << ',' << num(chain.report.median_act) << ','
                 << num(chain.report.act_q975) << ',' << (chain.report.verdict ? 1 : 0) << ',' << failure << '\n';
      for (const auto& s : chain.init.selection) {
        selection_csv << chain.index << ',' << s.k << ',' << num(s.score) << ',' << num(s.std_error) << '\n';
      }
      json cj = {{"chain", chain.index}, {"ok", chain.ok}, {"failure", chain.failure},
                 {"initial_states", chain.init.num_states}, {"k_hat", chain.k_hat}};
      if (chain.ok) {
        cj["report"] = report_json(chain.report);
        write_trace_csv(chain.trace, out / ("chain_" + std::to_string(chain.index) + "_trace.csv"));
        write_states_binary(chain.trace, out / ("chain_" + std::to_string(chain.index) + "_states.bin"));
        detail::write_file_atomic(out / ("chain_" + std::to_string(chain.index) + "_report.csv"),
                                  report_csv(chain.report.parameters));
      }
      fit_json["chains"].push_back(cj);
    }
    detail::write_file_atomic(out / "chains.csv", chains_csv.str());
    detail::write_file_atomic(out / "selection.csv", selection_csv.str());
    detail::write_file_atomic(out / "rhat.csv", report_csv(result.rhat));

    std::ostringstream map_csv;
    map_csv << "t,state\n";
    for (std::size_t t = 0; t < result.map_states.size(); ++t) map_csv << t + 1 << ',' << result.map_states[t] + 1 << '\n';
    detail::write_file_atomic(out / "map_states.csv", map_csv.str());

    std::ostringstream states_csv;
    states_csv << "state,size";
    for (Eigen::Index j = 0; j < data.dim(); ++j) states_csv << ",mean_" << j + 1;
    states_csv << ",covariance_trace\n";
    json states_json = json::array();
    for (const auto& s : result.states) {
      states_csv << s.label << ',' << s.size;
      for (Eigen::Index j = 0; j < s.mean.size(); ++j) states_csv << ',' << num(s.mean(j));
      states_csv << ',' << num(s.covariance_trace) << '\n';
      json cov = json::array();
      for (Eigen::Index r = 0; r < s.covariance.rows(); ++r) {
        cov.push_back(std::vector<double>(s.covariance.cols()));
        for (Eigen::Index c = 0; c < s.covariance.cols(); ++c) cov.back()[static_cast<std::size_t>(c)] = s.covariance(r, c);
      }
      states_json.push_back({{"state", s.label},
                             {"size", s.size},
                             {"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
                             {"covariance", cov},
                             {"covariance_trace", s.covariance_trace}});
    }
    detail::write_file_atomic(out / "state_summary.csv", states_csv.str());
    fit_json["converged_chains"] = result.converged;
    fit_json["map_pooled_all_chains"] = result.pooled_all;
    fit_json["states"] = states_json;
    detail::write_file_atomic(out / "fit.json", fit_json.dump(2) + "\n");
  }
  return result;
}

namespace {

int cmd_simulate(const std::optional<std::string>& config_path, ScenarioSpec spec, const std::string& family,
                 const std::string& summary, const std::string& out, const CLI::App& app) {
  if (config_path) {
    const json j = read_json_file(*config_path);
    if (j.contains("omega") && app.count("--omega") == 0) spec.omega = j.at("omega").get<double>();
    if (j.contains("K") && app.count("--K") == 0) spec.num_states = j.at("K").get<int>();
    if (j.contains("T") && app.count("--T") == 0) spec.length = j.at("T").get<long>();
    if (j.contains("P") && app.count("--P") == 0) spec.dim = j.at("P").get<int>();
    if (j.contains("seed") && app.count("--seed") == 0) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("family") && app.count("--family") == 0) spec.family = parse_family(j.at("family").get<std::string>());
  }
  if (app.count("--family") > 0) spec.family = parse_family(family);
  if (summary != "max" && summary != "average") throw ParameterError("--overlap must be max or average");
  spec.calibration.summary = summary == "max" ? OverlapSummary::kMax : OverlapSummary::kAverage;
  const GeneratedDataset g = simulate_hmm(spec);
  const std::filesystem::path path(out);
  save_dataset_csv(g.data, path);
  auto sidecar = path;
  sidecar.replace_extension(".params.json");
  write_params_json(g, spec, sidecar);
  std::cout << "wrote " << path.string() << " (T=" << spec.length << ", P=" << spec.dim
            << ", achieved overlap " << num(g.achieved_overlap) << ")\n";
  return 0;
}

int cmd_fit(FitConfig config, const std::optional<std::string>& config_path, const std::string& init,
            const std::string& k_range, const CLI::App& app) {
  if (config_path) {
    const json j = read_json_file(*config_path);
    auto unset = [&](const char* flag) { return app.count(flag) == 0; };
    if (j.contains("data") && unset("--data")) config.data = j.at("data").get<std::string>();
    if (j.contains("output_dir") && unset("--out")) config.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("init") && unset("--init")) config.init = parse_init_method(j.at("init").get<std::string>());
    if (j.contains("iterations") && unset("--iterations")) config.iterations = j.at("iterations").get<long>();
    if (j.contains("burn_in") && unset("--burn-in")) config.burn_in = j.at("burn_in").get<long>();
    if (j.contains("thinning") && unset("--thinning")) config.thinning = j.at("thinning").get<long>();
    if (j.contains("chains") && unset("--chains")) config.chains = j.at("chains").get<int>();
    if (j.contains("seed") && unset("--seed")) config.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("k_range") && unset("--k-range")) {
      const auto r = j.at("k_range").get<std::vector<int>>();
      if (r.size() != 2) throw ParameterError("k_range needs two values");
      config.k_range = {r[0], r[1]};
    }
    if (j.contains("priors")) {
      const json& p = j.at("priors");
      config.priors = Priors{};
      config.priors->concentration.a_alpha = p.value("a_alpha", 1.0);
      config.priors->concentration.b_alpha = p.value("b_alpha", 1.0);
      config.priors->concentration.a_gamma = p.value("a_gamma", 2.0);
      config.priors->concentration.b_gamma = p.value("b_gamma", 1.0);
      config.priors->niw.kappa = p.value("kappa0", 0.01);
      config.priors->niw.dof = p.value("nu0", 0.0);  // 0 means P + 2
    }
  }
  if (app.count("--init") > 0) config.init = parse_init_method(init);
  if (app.count("--k-range") > 0) config.k_range = parse_k_range(k_range);
  if (config.data.empty()) throw ParameterError("no dataset given (use --data)");
  const Dataset data = load_dataset_csv(config.data);
  if (config.priors) {
    const auto p = data.dim();
    const double kappa = config.priors->niw.kappa;
    const double dof = config.priors->niw.dof;
    config.priors->niw = NiwPrior::vague(p);
    config.priors->niw.kappa = kappa;
    if (dof > 0.0) config.priors->niw.dof = dof;
    config.priors->niw.validate();
    config.priors->concentration.validate();
  }
  const FitResult r = fit_dataset(data, config);
  std::cout << "chains: " << r.chains.size() << ", converged: " << r.converged.size() << ", failed: " << r.failures
            << "\n";
  for (const auto& c : r.chains) {
    std::cout << "  chain " << c.index << ": ";
    if (!c.ok) {
      std::cout << "failed (" << c.failure << ")\n";
      continue;
    }
    std::cout << "K0=" << c.init.num_states << " K-hat=" << c.k_hat << " Geweke=" << num(c.report.geweke_success_rate)
              << " median ACT=" << num(c.report.median_act) << (c.report.verdict ? " converged" : "") << "\n";
  }
  std::cout << "MAP states: " << r.states.size() << " (written to " << config.output_dir.string() << ")\n";
  return r.failures > 0 ? kExitRunFailures : 0;
}

int cmd_diagnose(const std::vector<std::string>& traces, long burn_in, const std::string& out) {
  if (traces.empty()) throw ParameterError("no trace files given");
  std::vector<ChainTrace> loaded;
  for (const auto& t : traces) loaded.push_back(read_trace_csv(t));
  std::vector<ConvergenceReport> per_chain;
  for (const auto& t : loaded) per_chain.push_back(convergence_report(t, burn_in));
  std::optional<ConvergenceReport> pooled;
  if (loaded.size() >= 2) pooled = convergence_report(std::span<const ChainTrace>(loaded), burn_in);

  std::ostringstream csv;
  csv << "trace,parameter,geweke_z,act,rhat,note\n";
  json j;
  j["chains"] = json::array();
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    for (const auto& p : per_chain[i].parameters) {
      csv << traces[i] << ',' << p.name << ',' << opt_num(p.geweke_z) << ',' << opt_num(p.act) << ",,\n";
    }
    json cj = report_json(per_chain[i]);
    cj["trace"] = traces[i];
    j["chains"].push_back(cj);
  }
  if (pooled) {
    for (const auto& p : pooled->parameters) csv << "pooled," << p.name << ",,," << opt_num(p.rhat) << ",\n";
    j["pooled"] = report_json(*pooled);
  }
  std::cout << csv.str();
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    std::cout << "# " << traces[i] << ": success rate " << num(per_chain[i].geweke_success_rate) << ", median ACT "
              << num(per_chain[i].median_act) << ", 97.5% ACT " << num(per_chain[i].act_q975) << ", verdict "
              << (per_chain[i].verdict ? "converged" : "not converged") << "\n";
  }
  if (!out.empty()) detail::write_file_atomic(out, j.dump(2) + "\n");
  return 0;
}

int cmd_experiment(const std::optional<std::string>& config_path, const std::string& profile, const std::string& out,
                   long iterations, std::uint64_t seed, const std::vector<std::string>& inits, const std::string& k_range,
                   const CLI::App& app) {
  GridSpec grid = GridSpec::profile(parse_profile(profile));
  if (config_path) {
    const std::string text = slurp(*config_path);
    grid = grid_from_json(text, grid);
    if (app.count("--profile") > 0) grid.replications = GridSpec::profile(parse_profile(profile)).replications;
  }
  if (app.count("--out") > 0) grid.output_dir = out;
  if (app.count("--iterations") > 0) grid.iterations = iterations;
  if (app.count("--seed") > 0) grid.seed = seed;
  if (app.count("--k-range") > 0) grid.init.k_range = parse_k_range(k_range);
  if (!inits.empty()) {
    grid.methods.clear();
    for (const auto& m : inits) grid.methods.push_back(parse_init_method(m));
  }
  grid.validate();
  std::mutex io;
  const auto runs = run_grid(grid, [&](const RunResult& r, std::size_t done, std::size_t total) {
    std::lock_guard<std::mutex> lock(io);
    std::cerr << "[" << done << "/" << total << "] " << r.id() << (r.ok ? "" : " FAILED: " + r.failure) << "\n";
  });
  aggregate_tables(runs, grid.output_dir);
  const auto failed = std::count_if(runs.begin(), runs.end(), [](const RunResult& r) { return !r.ok; });
  std::cout << "runs: " << runs.size() << ", failed: " << failed << ", tables in " << grid.output_dir.string() << "\n";
  return failed > 0 ? kExitRunFailures : 0;
}

int cmd_report(const std::string& dir) {
  const auto runs = load_runs(dir);
  if (runs.empty()) throw IoError("no results found in " + dir);
  aggregate_tables(runs, dir);
  std::cout << slurp(std::filesystem::path(dir) / "tables.md");
  const auto failed = std::count_if(runs.begin(), runs.end(), [](const RunResult& r) { return !r.ok; });
  return failed > 0 ? kExitRunFailures : 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Infinite hidden Markov model with beam sampling"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Generate a regime-switching dataset");
  ScenarioSpec spec;
  std::optional<std::string> sim_config;
  std::string family = "gaussian", overlap = "max", sim_out = "simulated.csv";
  sim->add_option("--config", sim_config, "JSON scenario");
  sim->add_option("--omega", spec.omega, "Target pairwise overlap");
  sim->add_option("--K", spec.num_states, "Number of states");
  sim->add_option("--T", spec.length, "Series length");
  sim->add_option("--P", spec.dim, "Dimension");
  sim->add_option("--family", family, "gaussian or student_t[:dof]");
  sim->add_option("--seed", spec.seed, "Master seed");
  sim->add_option("--overlap", overlap, "Calibrate the max or average pairwise overlap");
  sim->add_option("--out", sim_out, "Output CSV");

  auto* fit = app.add_subcommand("fit", "Fit the model to a CSV dataset");
  FitConfig fc;
  std::optional<std::string> fit_config;
  std::string fit_data, fit_out = "fit", init = "kmeans", k_range = "2:5";
  fit->add_option("--config", fit_config, "JSON run configuration");
  fit->add_option("--data", fit_data, "Dataset CSV");
  fit->add_option("--out", fit_out, "Output directory");
  fit->add_option("--init", init, "uniform, kmeans, pam or mixtures");
  fit->add_option("--iterations", fc.iterations, "Sweeps per chain");
  fit->add_option("--burn-in", fc.burn_in, "Discarded sweeps");
  fit->add_option("--thinning", fc.thinning, "Keep every n-th sweep");
  fit->add_option("--chains", fc.chains, "Independent chains");
  fit->add_option("--seed", fc.seed, "Master seed");
  fit->add_option("--k-range", k_range, "Candidate K for GAP/BIC, e.g. 2:5");

  auto* diag = app.add_subcommand("diagnose", "Convergence diagnostics for trace CSVs");
  std::vector<std::string> traces;
  long diag_burn = 0;
  std::string diag_out;
  diag->add_option("traces", traces, "Trace CSV files")->required();
  diag->add_option("--burn-in", diag_burn, "Ignore iterations up to this one");
  diag->add_option("--out", diag_out, "Write the report as JSON");

  auto* exp = app.add_subcommand("experiment", "Run a simulation grid");
  std::optional<std::string> exp_config;
  std::string profile = "desk", exp_out = "results", exp_k_range = "2:5";
  long exp_iterations = 1500;
  std::uint64_t exp_seed = 1;
  std::vector<std::string> exp_inits;
  exp->add_option("--config", exp_config, "JSON grid");
  exp->add_option("--profile", profile, "desk (5 replications) or full (50)");
  exp->add_option("--out", exp_out, "Results directory");
  exp->add_option("--iterations", exp_iterations, "Sweeps per run");
  exp->add_option("--seed", exp_seed, "Master seed");
  exp->add_option("--init", exp_inits, "Restrict to these initialization methods");
  exp->add_option("--k-range", exp_k_range, "Candidate K for GAP/BIC");

  auto* rep = app.add_subcommand("report", "Aggregate finished runs into tables");
  std::string rep_dir = "results";
  rep->add_option("--results", rep_dir, "Results directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*sim) return cmd_simulate(sim_config, spec, family, overlap, sim_out, *sim);
    if (*fit) {
      if (fit->count("--data") > 0) fc.data = fit_data;
      if (fit->count("--out") > 0 || !fit_config) fc.output_dir = fit_out;
      if (fit->count("--init") == 0 && !fit_config) fc.init = parse_init_method(init);
      return cmd_fit(fc, fit_config, init, k_range, *fit);
    }
    if (*diag) return cmd_diagnose(traces, diag_burn, diag_out);
    if (*exp) return cmd_experiment(exp_config, profile, exp_out, exp_iterations, exp_seed, exp_inits, exp_k_range, *exp);
    if (*rep) return cmd_report(rep_dir);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRunFailures;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace ihmm
