#include "ihmm/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "csv.hpp"
#include "ihmm/error.hpp"
#include "ihmm/sampler.hpp"

namespace ihmm {

namespace {

using nlohmann::json;

std::uint64_t milli(double v) { return static_cast<std::uint64_t>(std::llround(v * 1000.0)); }

std::uint64_t cell_stream(const CellKey& c) {
  return derive_stream_id({milli(c.omega), static_cast<std::uint64_t>(c.num_states), static_cast<std::uint64_t>(c.length),
                           static_cast<std::uint64_t>(c.dim), static_cast<std::uint64_t>(c.family.kind),
                           milli(c.family.dof)});
}

std::string format_number(double v, int digits = 6) {
  std::ostringstream out;
  out << std::setprecision(digits) << v;
  return out.str();
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int method_rank(InitMethod m) { return static_cast<int>(m); }

bool run_less(const RunResult& a, const RunResult& b) {
  if (a.cell < b.cell) return true;
  if (b.cell < a.cell) return false;
  if (method_rank(a.method) != method_rank(b.method)) return method_rank(a.method) < method_rank(b.method);
  return a.replication < b.replication;
}

int modal_value(const std::vector<int>& values) {
  std::map<int, int> counts;
  for (int v : values) ++counts[v];
  int best = 0, best_count = -1;
  for (const auto& [v, c] : counts) {
    if (c > best_count) {
      best = v;
      best_count = c;
    }
  }
  return best;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

}  // namespace

Profile parse_profile(std::string_view name) {
  if (name == "desk") return Profile::kDesk;
  if (name == "full") return Profile::kFull;
  throw ParameterError("unknown profile '" + std::string(name) + "' (expected desk or full)");
}

GridSpec GridSpec::profile(Profile p) {
  GridSpec g;
  g.replications = p == Profile::kDesk ? 5 : 50;
  return g;
}

void GridSpec::validate() const {
  if (omegas.empty() || num_states.empty() || lengths.empty() || dims.empty() || families.empty() || methods.empty()) {
    throw ParameterError("every grid axis needs at least one value");
  }
  if (replications < 1) throw ParameterError("replications must be at least 1");
  if (iterations < 1) throw ParameterError("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw ParameterError("burn-in must lie in [0, iterations)");
  if (final_window < 1 || final_window > iterations) throw ParameterError("final window must lie in [1, iterations]");
  for (double w : omegas) {
    if (!(w >= 0.0 && w < 0.5)) throw ParameterError("omega values must lie in [0, 0.5)");
  }
  for (int k : num_states) {
    if (k < 1) throw ParameterError("K values must be positive");
  }
  for (long t : lengths) {
    if (t < 2) throw ParameterError("T values must be at least 2");
  }
  for (int p : dims) {
    if (p < 1) throw ParameterError("P values must be positive");
  }
}

GridSpec grid_from_json(const std::string& text, GridSpec base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("grid config is not valid JSON: ") + e.what());
  }
  try {
    if (j.contains("profile")) {
      const GridSpec p = GridSpec::profile(parse_profile(j.at("profile").get<std::string>()));
      base.replications = p.replications;
    }
    if (j.contains("omegas")) base.omegas = j.at("omegas").get<std::vector<double>>();
    if (j.contains("K")) base.num_states = j.at("K").get<std::vector<int>>();
    if (j.contains("T")) base.lengths = j.at("T").get<std::vector<long>>();
    if (j.contains("P")) base.dims = j.at("P").get<std::vector<int>>();
    if (j.contains("families")) {
      base.families.clear();
      for (const auto& f : j.at("families")) base.families.push_back(parse_family(f.get<std::string>()));
    }
    if (j.contains("methods")) {
      base.methods.clear();
      for (const auto& m : j.at("methods")) base.methods.push_back(parse_init_method(m.get<std::string>()));
    }
    if (j.contains("replications")) base.replications = j.at("replications").get<int>();
    if (j.contains("iterations")) base.iterations = j.at("iterations").get<long>();
    if (j.contains("burn_in")) base.burn_in = j.at("burn_in").get<long>();
    if (j.contains("final_window")) base.final_window = j.at("final_window").get<long>();
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_dir")) base.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("workers")) base.workers = j.at("workers").get<int>();
    if (j.contains("write_traces")) base.write_traces = j.at("write_traces").get<bool>();
    if (j.contains("k_range")) {
      const auto r = j.at("k_range").get<std::vector<int>>();
      if (r.size() != 2) throw ParameterError("k_range needs two values");
      base.init.k_range = {r[0], r[1]};
    }
    if (j.contains("gap_references")) base.init.gap.references = j.at("gap_references").get<int>();
    if (j.contains("gap_rule")) {
      const auto r = j.at("gap_rule").get<std::string>();
      if (r == "global_max") {
        base.init.gap.rule = GapRule::kGlobalMax;
      } else if (r == "tibshirani") {
        base.init.gap.rule = GapRule::kTibshirani;
      } else {
        throw ParameterError("gap_rule must be global_max or tibshirani");
      }
    }
    if (j.contains("gap_reference")) {
      const auto r = j.at("gap_reference").get<std::string>();
      if (r == "uniform") {
        base.init.gap.reference = GapReference::kUniformRange;
      } else if (r == "permutation") {
        base.init.gap.reference = GapReference::kPermutation;
      } else {
        throw ParameterError("gap_reference must be uniform or permutation");
      }
    }
    if (j.contains("overlap_summary")) {
      const auto s = j.at("overlap_summary").get<std::string>();
      if (s != "max" && s != "average") throw ParameterError("overlap_summary must be max or average");
      base.calibration.summary = s == "max" ? OverlapSummary::kMax : OverlapSummary::kAverage;
    }
    if (j.contains("overlap_samples")) {
      base.calibration.search_samples = j.at("overlap_samples").get<long>();
      base.calibration.check_samples = base.calibration.search_samples;
    }
  } catch (const json::exception& e) {
    throw ParameterError(std::string("bad grid config field: ") + e.what());
  }
  base.validate();
  return base;
}

std::string grid_to_json(const GridSpec& g) {
  json j;
  j["omegas"] = g.omegas;
  j["K"] = g.num_states;
  j["T"] = g.lengths;
  j["P"] = g.dims;
  json fam = json::array();
  for (const auto& f : g.families) fam.push_back(to_string(f));
  j["families"] = fam;
  json methods = json::array();
  for (auto m : g.methods) methods.push_back(std::string(to_string(m)));
  j["methods"] = methods;
  j["replications"] = g.replications;
  j["iterations"] = g.iterations;
  j["burn_in"] = g.burn_in;
  j["final_window"] = g.final_window;
  j["seed"] = g.seed;
  j["output_dir"] = g.output_dir.string();
  j["workers"] = g.workers;
  j["write_traces"] = g.write_traces;
  j["k_range"] = {g.init.k_range.min, g.init.k_range.max};
  j["gap_references"] = g.init.gap.references;
  j["gap_rule"] = g.init.gap.rule == GapRule::kGlobalMax ? "global_max" : "tibshirani";
  j["gap_reference"] = g.init.gap.reference == GapReference::kUniformRange ? "uniform" : "permutation";
  j["overlap_summary"] = g.calibration.summary == OverlapSummary::kMax ? "max" : "average";
  j["overlap_samples"] = g.calibration.search_samples;
  return j.dump(2);
}

std::string CellKey::id() const {
  std::ostringstream out;
  out << "omega" << format_number(omega) << "_K" << num_states << "_T" << length << "_P" << dim << "_"
      << (family.kind == FamilyKind::kGaussian ? std::string("gaussian") : "t" + format_number(family.dof));
  return out.str();
}

bool operator<(const CellKey& a, const CellKey& b) {
  auto tie = [](const CellKey& c) {
    return std::make_tuple(static_cast<int>(c.family.kind), c.family.dof, c.omega, c.num_states, c.length, c.dim);
  };
  return tie(a) < tie(b);
}

std::string RunResult::id() const {
  std::ostringstream out;
  out << cell.id() << "_r" << std::setw(3) << std::setfill('0') << replication << "_" << to_string(method);
  return out.str();
}

std::string run_to_json(const RunResult& r) {
  json j;
  j["omega"] = r.cell.omega;
  j["K"] = r.cell.num_states;
  j["T"] = r.cell.length;
  j["P"] = r.cell.dim;
  j["family"] = to_string(r.cell.family);
  j["replication"] = r.replication;
  j["method"] = std::string(to_string(r.method));
  j["ok"] = r.ok;
  j["failure"] = r.failure;
  j["initial_states"] = r.initial_states;
  j["ari_final"] = r.ari_final;
  j["ari_converged"] = r.ari_converged;
  j["k_hat"] = r.k_hat;
  j["log_likelihood"] = r.log_likelihood;
  j["geweke_success"] = r.geweke_success;
  j["median_act"] = r.median_act;
  j["act_q975"] = r.act_q975;
  j["converged"] = r.converged;
  j["achieved_overlap"] = r.achieved_overlap;
  j["seconds"] = r.seconds;
  j["ari_trajectory"] = r.ari_trajectory;
  j["k_trajectory"] = r.k_trajectory;
  return j.dump();
}

RunResult run_from_json(const std::string& text) {
  RunResult r;
  try {
    const json j = json::parse(text);
    r.cell.omega = j.at("omega").get<double>();
    r.cell.num_states = j.at("K").get<int>();
    r.cell.length = j.at("T").get<long>();
    r.cell.dim = j.at("P").get<int>();
    r.cell.family = parse_family(j.at("family").get<std::string>());
    r.replication = j.at("replication").get<int>();
    r.method = parse_init_method(j.at("method").get<std::string>());
    r.ok = j.at("ok").get<bool>();
    r.failure = j.at("failure").get<std::string>();
    r.initial_states = j.at("initial_states").get<int>();
    r.ari_final = j.at("ari_final").get<double>();
    r.ari_converged = j.at("ari_converged").get<double>();
    r.k_hat = j.at("k_hat").get<int>();
    r.log_likelihood = j.at("log_likelihood").get<double>();
    r.geweke_success = j.at("geweke_success").get<double>();
    r.median_act = j.at("median_act").get<double>();
    r.act_q975 = j.at("act_q975").get<double>();
    r.converged = j.at("converged").get<bool>();
    r.achieved_overlap = j.at("achieved_overlap").get<double>();
    r.seconds = j.at("seconds").get<double>();
    r.ari_trajectory = j.at("ari_trajectory").get<std::vector<double>>();
    r.k_trajectory = j.at("k_trajectory").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed run file: ") + e.what());
  }
  return r;
}

std::uint64_t dataset_seed(const GridSpec& grid, const CellKey& cell, int replication) {
  return mix64(grid.seed ^ derive_stream_id({cell_stream(cell), static_cast<std::uint64_t>(replication)}));
}

namespace {

RunResult execute_run_impl(const GridSpec& grid, const CellKey& cell, int replication, InitMethod method,
                           const GeneratedDataset& generated, const std::filesystem::path* trace_path) {
  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  r.cell = cell;
  r.replication = replication;
  r.method = method;
  r.achieved_overlap = generated.achieved_overlap;
  const std::uint64_t stream =
      derive_stream_id({cell_stream(cell), static_cast<std::uint64_t>(replication), static_cast<std::uint64_t>(method)});
  try {
    const Labels& truth = generated.data.true_states.value();
    RngStream init_rng(grid.seed, stream, 0);
    const InitAssignment init = initialize(generated.data, method, init_rng, grid.init);
    r.initial_states = init.num_states;

    SamplerConfig config;
    config.iterations = grid.iterations;
    config.record_states = false;
    config.rng = RngStream(grid.seed, mix64(stream), 0);
    r.ari_trajectory.reserve(static_cast<std::size_t>(grid.iterations));
    r.k_trajectory.reserve(static_cast<std::size_t>(grid.iterations));
    const ChainTrace trace = run_chain(generated.data, init, Priors::defaults(cell.dim), config,
                                       [&](long, const ModelState& s) {
                                         r.ari_trajectory.push_back(adjusted_rand_index(s.states, truth));
                                         r.k_trajectory.push_back(s.occupied_count());
                                       });
    const auto window = static_cast<std::ptrdiff_t>(grid.final_window);
    r.ari_final = r.ari_trajectory.back();
    r.ari_converged = median(std::vector<double>(r.ari_trajectory.end() - window, r.ari_trajectory.end()));
    r.k_hat = modal_value(std::vector<int>(r.k_trajectory.end() - window, r.k_trajectory.end()));
    r.log_likelihood = trace.records.back().log_likelihood;
    const ConvergenceReport report = convergence_report(trace, grid.burn_in);
    r.geweke_success = report.geweke_success_rate;
    r.median_act = report.median_act;
    r.act_q975 = report.act_q975;
    r.converged = report.verdict;
    if (trace_path != nullptr) write_trace_csv(trace, *trace_path);
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.failure = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace

RunResult execute_run(const GridSpec& grid, const CellKey& cell, int replication, InitMethod method,
                      const GeneratedDataset& data) {
  return execute_run_impl(grid, cell, replication, method, data, nullptr);
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("IHMM_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::vector<RunResult> load_runs(const std::filesystem::path& dir) {
  std::vector<RunResult> out;
  const auto runs_dir = dir / "runs";
  if (!std::filesystem::is_directory(runs_dir)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(runs_dir)) {
    if (entry.path().extension() != ".json") continue;
    out.push_back(run_from_json(read_text(entry.path())));
  }
  std::sort(out.begin(), out.end(), run_less);
  return out;
}

std::vector<RunResult> run_grid(const GridSpec& grid, const ProgressCallback& progress) {
  grid.validate();
  const auto runs_dir = grid.output_dir / "runs";
  const auto traces_dir = grid.output_dir / "traces";
  std::filesystem::create_directories(runs_dir);
  if (grid.write_traces) std::filesystem::create_directories(traces_dir);
  detail::write_file_atomic(grid.output_dir / "grid.json", grid_to_json(grid) + "\n");

  struct Task {
    CellKey cell;
    int replication;
  };
  std::vector<Task> tasks;
  for (const auto& family : grid.families) {
    for (double omega : grid.omegas) {
      for (int k : grid.num_states) {
        for (long t : grid.lengths) {
          for (int p : grid.dims) {
            for (int rep = 0; rep < grid.replications; ++rep) tasks.push_back({{omega, k, t, p, family}, rep});
          }
        }
      }
    }
  }
  const std::size_t total = tasks.size() * grid.methods.size();
  std::vector<RunResult> results;
  std::mutex mutex;
  std::atomic<std::size_t> next{0};
  std::size_t done = 0;

  auto finish = [&](RunResult r, bool fresh) {
    if (fresh) detail::write_file_atomic(runs_dir / (r.id() + ".json"), run_to_json(r) + "\n");
    std::lock_guard<std::mutex> lock(mutex);
    ++done;
    if (progress) progress(r, done, total);
    results.push_back(std::move(r));
  };

  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const Task& task = tasks[i];
      std::vector<InitMethod> pending;
      for (InitMethod m : grid.methods) {
        RunResult probe;
        probe.cell = task.cell;
        probe.replication = task.replication;
        probe.method = m;
        const auto file = runs_dir / (probe.id() + ".json");
        bool loaded = false;
        if (std::filesystem::exists(file)) {
          try {
            finish(run_from_json(read_text(file)), false);
            loaded = true;
          } catch (const IoError&) {
          }
        }
        if (!loaded) pending.push_back(m);
      }
      if (pending.empty()) continue;

      std::optional<GeneratedDataset> generated;
      std::string sim_error;
      try {
        ScenarioSpec spec;
        spec.omega = task.cell.omega;
        spec.num_states = task.cell.num_states;
        spec.length = task.cell.length;
        spec.dim = task.cell.dim;
        spec.family = task.cell.family;
        spec.seed = dataset_seed(grid, task.cell, task.replication);
        spec.calibration = grid.calibration;
        generated = simulate_hmm(spec);
      } catch (const Error& e) {
        sim_error = std::string("simulation failed: ") + e.what();
      }
      for (InitMethod m : pending) {
        RunResult r;
        if (generated) {
          RunResult probe;
          probe.cell = task.cell;
          probe.replication = task.replication;
          probe.method = m;
          const auto trace_file = traces_dir / (probe.id() + ".csv");
          r = execute_run_impl(grid, task.cell, task.replication, m, *generated, grid.write_traces ? &trace_file : nullptr);
        } else {
          r.cell = task.cell;
          r.replication = task.replication;
          r.method = m;
          r.failure = sim_error;
        }
        finish(std::move(r), true);
      }
    }
  };

  const int workers = std::min<int>(resolve_workers(grid.workers), static_cast<int>(std::max<std::size_t>(1, tasks.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::sort(results.begin(), results.end(), run_less);
  return results;
}

std::vector<CellResult> aggregate(const std::vector<RunResult>& runs) {
  std::map<std::pair<CellKey, int>, std::vector<const RunResult*>> groups;
  for (const auto& r : runs) groups[{r.cell, method_rank(r.method)}].push_back(&r);
  std::vector<CellResult> out;
  for (const auto& [key, members] : groups) {
    CellResult c;
    c.cell = key.first;
    c.method = members.front()->method;
    std::vector<double> ari, khat, gew, act_med, act_hi;
    for (const auto* r : members) {
      if (!r->ok) {
        ++c.failures;
        continue;
      }
      ari.push_back(r->ari_converged);
      khat.push_back(r->k_hat);
      gew.push_back(r->geweke_success);
      act_med.push_back(r->median_act);
      act_hi.push_back(r->act_q975);
    }
    c.runs = static_cast<int>(ari.size());
    if (c.runs == 0) continue;
    c.ari_median = median(ari);
    c.ari_q025 = quantile(ari, 0.025);
    c.ari_q975 = quantile(ari, 0.975);
    c.ari_sd = sample_sd(ari);
    c.k_hat_median = median(khat);
    c.geweke_mean = mean_of(gew);
    c.geweke_sd = sample_sd(gew);
    c.act_median = mean_of(act_med);
    c.act_q975 = mean_of(act_hi);
    out.push_back(c);
  }
  return out;
}

namespace {

std::string opt(const std::optional<double>& v, bool markdown) {
  if (!v) return markdown ? "NA" : "";
  return markdown ? fixed(*v) : format_number(*v, 10);
}

std::string family_label(const EmissionFamily& f) {
  return f.kind == FamilyKind::kGaussian ? "Gaussian" : "Student-t (nu = " + format_number(f.dof) + ")";
}

void write_markdown(const std::vector<CellResult>& cells, const std::filesystem::path& path) {
  std::ostringstream md;
  std::vector<EmissionFamily> families;
  for (const auto& c : cells) {
    const bool seen = std::any_of(families.begin(), families.end(), [&](const EmissionFamily& f) {
      return f.kind == c.cell.family.kind && f.dof == c.cell.family.dof;
    });
    if (!seen) families.push_back(c.cell.family);
  }
  for (const auto& fam : families) {
    md << "## " << family_label(fam) << " emissions\n\n";
    md << "### Classification\n\n";
    md << "| omega | K | T | P | Method | Median ARI | 2.5% | 97.5% | SD | K-hat | Runs |\n";
    md << "|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& c : cells) {
      if (c.cell.family.kind != fam.kind || c.cell.family.dof != fam.dof) continue;
      md << "| " << format_number(c.cell.omega) << " | " << c.cell.num_states << " | " << c.cell.length << " | "
         << c.cell.dim << " | " << to_string(c.method) << " | " << fixed(c.ari_median) << " | " << fixed(c.ari_q025)
         << " | " << fixed(c.ari_q975) << " | " << opt(c.ari_sd, true) << " | " << fixed(c.k_hat_median, 1) << " | "
         << c.runs << (c.failures > 0 ? " (+" + std::to_string(c.failures) + " failed)" : "") << " |\n";
    }
    md << "\n### Convergence\n\n";
    md << "| omega | K | T | P | Method | Geweke | SD Geweke | ACT | 97.5% ACT |\n";
    md << "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& c : cells) {
      if (c.cell.family.kind != fam.kind || c.cell.family.dof != fam.dof) continue;
      md << "| " << format_number(c.cell.omega) << " | " << c.cell.num_states << " | " << c.cell.length << " | "
         << c.cell.dim << " | " << to_string(c.method) << " | " << fixed(c.geweke_mean) << " | "
         << opt(c.geweke_sd, true) << " | " << fixed(c.act_median) << " | " << fixed(c.act_q975) << " |\n";
    }
    md << "\n";
  }
  detail::write_file_atomic(path, md.str());
}

}  // namespace

void aggregate_tables(const std::vector<RunResult>& runs, const std::filesystem::path& dir) {
  if (runs.empty()) throw IoError("no results to aggregate in " + dir.string());
  const auto cells = aggregate(runs);

  std::ostringstream csv;
  csv << "omega,K,T,P,family,method,runs,failures,ari_median,ari_q025,ari_q975,ari_sd,k_hat_median,"
         "geweke_mean,geweke_sd,act_median,act_q975\n";
  for (const auto& c : cells) {
    csv << format_number(c.cell.omega) << ',' << c.cell.num_states << ',' << c.cell.length << ',' << c.cell.dim << ','
        << to_string(c.cell.family) << ',' << to_string(c.method) << ',' << c.runs << ',' << c.failures << ','
        << format_number(c.ari_median, 10) << ',' << format_number(c.ari_q025, 10) << ','
        << format_number(c.ari_q975, 10) << ',' << opt(c.ari_sd, false) << ',' << format_number(c.k_hat_median) << ','
        << format_number(c.geweke_mean, 10) << ',' << opt(c.geweke_sd, false) << ','
        << format_number(c.act_median, 10) << ',' << format_number(c.act_q975, 10) << '\n';
  }
  detail::write_file_atomic(dir / "aggregate.csv", csv.str());
  write_markdown(cells, dir / "tables.md");

  std::ostringstream traj;
  traj << "run,omega,K,T,P,family,method,replication,iteration,ari,k_occupied\n";
  for (const auto& r : runs) {
    if (!r.ok) continue;
    const std::string prefix = r.id() + ',' + format_number(r.cell.omega) + ',' + std::to_string(r.cell.num_states) +
                               ',' + std::to_string(r.cell.length) + ',' + std::to_string(r.cell.dim) + ',' +
                               to_string(r.cell.family) + ',' + std::string(to_string(r.method)) + ',' +
                               std::to_string(r.replication) + ',';
    for (std::size_t i = 0; i < r.ari_trajectory.size(); ++i) {
      traj << prefix << i + 1 << ',' << format_number(r.ari_trajectory[i], 8) << ',' << r.k_trajectory[i] << '\n';
    }
  }
  detail::write_file_atomic(dir / "trajectories.csv", traj.str());

  std::ostringstream fail;
  fail << "run,reason\n";
  for (const auto& r : runs) {
    if (r.ok) continue;
    std::string reason = r.failure;
    std::replace(reason.begin(), reason.end(), '"', '\'');
    fail << r.id() << ",\"" << reason << "\"\n";
  }
  detail::write_file_atomic(dir / "failures.csv", fail.str());
}

}  // namespace ihmm
