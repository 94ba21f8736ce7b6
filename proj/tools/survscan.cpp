// Command-line front end: simulate / fit / cv / bootstrap / bench.
// Every result document embeds a manifest (command, resolved config, dataset
// fingerprint, version, timings); timings live in their own subtree so two
// runs of the same command differ in no other byte.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "survscan/ccd.hpp"
#include "survscan/crossval.hpp"
#include "survscan/dataset.hpp"
#include "survscan/engine.hpp"
#include "survscan/errors.hpp"
#include "survscan/simgen.hpp"

#ifndef SURVSCAN_VERSION
#define SURVSCAN_VERSION "0.0.0"
#endif

using json = nlohmann::json;
using namespace survscan;

namespace {

enum ExitCode : int {
  kOk = 0,
  kError = 1,
  kNotConverged = 2,
  kUsage = 64,
  kData = 65,
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

unsigned resolve_threads(int flag_value) {
  if (flag_value > 0) return static_cast<unsigned>(flag_value);
  if (const char* env = std::getenv("SURVSCAN_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return ChunkPlan::default_workers();
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json fingerprint(const SurvivalDataset& ds) {
  return {{"rows", ds.n()},
          {"columns", ds.p()},
          {"nonzeros", ds.nnz_total()},
          {"content_hash", hash_hex(ds.content_hash())}};
}

json manifest(const std::string& command, json config, json dataset, json timings) {
  return {{"command", command},
          {"config", std::move(config)},
          {"dataset", std::move(dataset)},
          {"version", SURVSCAN_VERSION},
          {"timings", std::move(timings)}};
}

json fit_json(const FitResult& fr) {
  json beta = json::object();
  for (std::size_t j = 0; j < fr.beta.size(); ++j)
    if (fr.beta[j] != 0.0) beta[std::to_string(j)] = fr.beta[j];
  return {{"beta", std::move(beta)},
          {"objective", fr.objective},
          {"cycles", fr.cycles},
          {"converged", fr.converged},
          {"nonzero_count", fr.nonzero_count},
          {"skipped_steps", fr.skipped_steps},
          {"monotonicity_violations", fr.monotonicity_violations}};
}

int emit(const json& doc, const std::string& out) {
  const std::string text = doc.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
    return kOk;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) {
    std::cerr << "survscan: cannot write " << out << "\n";
    return kError;
  }
  f << text;
  return kOk;
}

// Flags shared by fit / cv / bootstrap.
struct FitArgs {
  std::string obs, matrix, csv;
  std::string model = "cox";
  std::string penalty = "none";
  double strength = 0.0;
  std::vector<std::size_t> exempt;
  double tol = 1e-6;
  std::size_t max_cycles = 1000;
  int threads = 0;  // 0: SURVSCAN_THREADS, then hardware
  std::size_t chunk_size = 65536;
  std::string out;

  void add_input_flags(CLI::App* sub) {
    auto* obs_opt = sub->add_option("--obs", obs, "observation file (row_id,time,status)");
    sub->add_option("--matrix", matrix, "COO covariate file (row_id,col_id,value)")
        ->needs(obs_opt);
    sub->add_option("--csv", csv, "dense CSV with time/status columns")
        ->excludes(obs_opt);
  }

  void add_fit_flags(CLI::App* sub) {
    sub->add_option("--model", model)->check(CLI::IsMember({"cox", "finegray"}));
    sub->add_option("--penalty", penalty)->check(CLI::IsMember({"none", "l1", "l2"}));
    sub->add_option("--strength", strength, "gamma (l1) or tau (l2)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--exempt", exempt, "columns excluded from the penalty")
        ->delimiter(',');
    sub->add_option("--tol", tol)->check(CLI::PositiveNumber);
    sub->add_option("--max-cycles", max_cycles)->check(CLI::PositiveNumber);
    sub->add_option("--threads", threads, "scan workers (default: SURVSCAN_THREADS or all cores)");
    sub->add_option("--chunk-size", chunk_size)->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "result path ('-' = stdout)");
  }

  Model model_kind() const {
    return model == "cox" ? Model::cox : Model::fine_gray;
  }

  PenaltySpec penalty_spec() const {
    PenaltyKind kind = PenaltyKind::none;
    if (penalty == "l1") kind = PenaltyKind::l1;
    if (penalty == "l2") kind = PenaltyKind::l2;
    return {kind, strength, exempt};
  }

  FitConfig fit_config() const {
    FitConfig cfg;
    cfg.tolerance = tol;
    cfg.max_cycles = max_cycles;
    cfg.plan.chunk_size = chunk_size;
    cfg.plan.worker_count = resolve_threads(threads);
    return cfg;
  }

  json config_json() const {
    json input = json::object();
    if (!csv.empty())
      input["csv"] = csv;
    else
      input = {{"obs", obs}, {"matrix", matrix}};
    return {{"input", std::move(input)},
            {"model", model},
            {"penalty", penalty},
            {"strength", strength},
            {"exempt", exempt},
            {"tolerance", tol},
            {"max_cycles", max_cycles},
            {"threads", resolve_threads(threads)},
            {"chunk_size", chunk_size}};
  }

  // Errors here are "data errors": unreadable or malformed input files.
  SurvivalDataset load() const {
    if (!csv.empty()) return load_dense_csv(csv);
    if (obs.empty() || matrix.empty())
      throw CLI::ValidationError("input", "need --csv or both --obs and --matrix");
    return load_sparse_coo(obs, matrix);
  }
};

int cmd_fit(const FitArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  SurvivalDataset ds;
  try {
    ds = a.load();
  } catch (const CLI::ValidationError& e) {
    std::cerr << "survscan fit: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "survscan fit: " << e.what() << "\n";
    return kData;
  }
  const double load_s = seconds_since(t0);

  FitResult fr;
  try {
    fr = fit(ds, a.model_kind(), a.penalty_spec(), a.fit_config());
  } catch (const Error& e) {
    std::cerr << "survscan fit: " << e.what() << "\n";
    return kError;
  }

  const json doc = {
      {"schema", "survscan-result/1"},
      {"manifest", manifest("fit", a.config_json(), fingerprint(ds),
                            {{"load_seconds", load_s},
                             {"fit_seconds", fr.wall_seconds},
                             {"grad_hess_seconds", fr.grad_hess_seconds},
                             {"total_seconds", seconds_since(t0)}})},
      {"result", fit_json(fr)}};
  const int rc = emit(doc, a.out);
  if (rc != kOk) return rc;
  return fr.converged ? kOk : kNotConverged;
}

int cmd_cv(const FitArgs& a, std::uint32_t folds, std::uint32_t reps,
           const std::string& grid_text, std::uint64_t seed,
           std::uint32_t replicate_workers) {
  CVConfig cv;
  cv.folds = folds;
  cv.repetitions = reps;
  cv.seed = seed;
  cv.parallel_replicates = replicate_workers;
  if (!grid_text.empty() && grid_text != "auto") {
    std::size_t pos = 0;
    for (const auto& piece : CLI::detail::split(grid_text, ',')) {
      try {
        cv.grid.push_back(std::stod(piece, &pos));
        if (pos != piece.size()) throw std::invalid_argument(piece);
      } catch (const std::exception&) {
        std::cerr << "survscan cv: bad --grid value '" << piece << "'\n";
        return kUsage;
      }
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  SurvivalDataset ds;
  try {
    ds = a.load();
  } catch (const CLI::ValidationError& e) {
    std::cerr << "survscan cv: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "survscan cv: " << e.what() << "\n";
    return kData;
  }
  const double load_s = seconds_since(t0);

  CVResult res;
  try {
    res = cross_validate(ds, a.model_kind(), a.penalty_spec().kind, cv,
                         a.fit_config());
  } catch (const Error& e) {
    std::cerr << "survscan cv: " << e.what() << "\n";
    return kError;
  }

  json curve = json::array();
  for (const auto& pt : res.points)
    curve.push_back({{"strength", pt.strength},
                     {"mean_loglik", pt.mean_loglik},
                     {"spread", pt.spread},
                     {"evaluations", pt.evaluations}});

  json config = a.config_json();
  config["folds"] = folds;
  config["repetitions"] = reps;
  config["grid"] = grid_text.empty() ? "auto" : grid_text;
  config["seed"] = seed;
  config["replicate_workers"] = replicate_workers;

  const json doc = {
      {"schema", "survscan-result/1"},
      {"manifest", manifest("cv", std::move(config), fingerprint(ds),
                            {{"load_seconds", load_s},
                             {"total_seconds", seconds_since(t0)}})},
      {"result",
       {{"curve", std::move(curve)},
        {"selected", res.selected_value},
        {"failed_replicates", res.failed_replicates},
        {"final_fit", fit_json(res.final_fit)}}}};
  const int rc = emit(doc, a.out);
  if (rc != kOk) return rc;
  return res.final_fit.converged ? kOk : kNotConverged;
}

int cmd_bootstrap(const FitArgs& a, std::size_t coef, std::uint32_t resamples,
                  std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  SurvivalDataset ds;
  try {
    ds = a.load();
  } catch (const CLI::ValidationError& e) {
    std::cerr << "survscan bootstrap: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "survscan bootstrap: " << e.what() << "\n";
    return kData;
  }
  const double load_s = seconds_since(t0);

  BootstrapInterval iv;
  try {
    iv = bootstrap_interval(ds, a.model_kind(), a.penalty_spec(),
                            a.fit_config(), coef, resamples, seed);
  } catch (const Error& e) {
    std::cerr << "survscan bootstrap: " << e.what() << "\n";
    return kError;
  }

  json config = a.config_json();
  config["coefficient"] = coef;
  config["resamples"] = resamples;
  config["seed"] = seed;

  const json doc = {
      {"schema", "survscan-result/1"},
      {"manifest", manifest("bootstrap", std::move(config), fingerprint(ds),
                            {{"load_seconds", load_s},
                             {"total_seconds", seconds_since(t0)}})},
      {"result",
       {{"coefficient", coef},
        {"lower", iv.lower},
        {"upper", iv.upper},
        {"failed_resamples", iv.failed_resamples}}}};
  return emit(doc, a.out);
}

int cmd_simulate(const std::string& model, const SimConfig& cfg,
                 bool has_censor_quantile, const std::string& prefix,
                 const std::string& format) {
  SimConfig c = cfg;
  if (!has_censor_quantile) c.censoring_quantile.reset();
  try {
    std::ofstream truth(prefix + ".truth.csv", std::ios::binary);
    if (!truth) {
      std::cerr << "survscan simulate: cannot write " << prefix << ".truth.csv\n";
      return kError;
    }
    const SurvivalDataset* ds = nullptr;
    CoxSim cox_sim;
    FineGraySim fg_sim;
    if (model == "cox") {
      cox_sim = simulate_cox(c);
      ds = &cox_sim.data;
      truth << "column,beta\n";
      for (std::size_t j = 0; j < cox_sim.true_beta.size(); ++j)
        truth << j << ',' << cox_sim.true_beta[j] << '\n';
    } else {
      fg_sim = simulate_finegray(c);
      ds = &fg_sim.data;
      truth << "column,beta1,beta2\n";
      for (std::size_t j = 0; j < fg_sim.true_beta1.size(); ++j)
        truth << j << ',' << fg_sim.true_beta1[j] << ',' << fg_sim.true_beta2[j]
              << '\n';
    }
    if (format == "csv")
      write_dense_csv(*ds, prefix + ".csv");
    else
      write_sparse_coo(*ds, prefix + ".obs", prefix + ".coo");
  } catch (const Error& e) {
    std::cerr << "survscan simulate: " << e.what() << "\n";
    return kError;
  }
  return kOk;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

int cmd_bench(const std::string& sizes_text, const std::string& threads_text,
              const std::string& model, std::size_t p, double density,
              std::uint32_t reps, std::uint64_t seed, const FitArgs& a) {
  std::vector<std::size_t> sizes;
  std::vector<unsigned> thread_counts;
  try {
    for (const auto& piece : CLI::detail::split(sizes_text, ','))
      sizes.push_back(std::stoull(piece));
    for (const auto& piece : CLI::detail::split(threads_text, ','))
      thread_counts.push_back(static_cast<unsigned>(std::stoul(piece)));
  } catch (const std::exception&) {
    std::cerr << "survscan bench: bad --sizes or --threads-list\n";
    return kUsage;
  }
  if (sizes.empty() || thread_counts.empty()) {
    std::cerr << "survscan bench: empty --sizes or --threads-list\n";
    return kUsage;
  }

  json rows = json::array();
  json medians = json::array();
  std::printf("n threads rep total_seconds gradhess_seconds cycles\n");
  try {
    for (const std::size_t n : sizes) {
      SimConfig sim_cfg;
      sim_cfg.n = n;
      sim_cfg.p = p;
      sim_cfg.density = density;
      sim_cfg.seed = seed;
      SurvivalDataset ds;
      if (model == "cox")
        ds = simulate_cox(sim_cfg).data;
      else
        ds = simulate_finegray(sim_cfg).data;

      std::vector<double> first_medians, last_medians;
      for (const unsigned workers : thread_counts) {
        FitConfig cfg = a.fit_config();
        cfg.plan.worker_count = workers;
        std::vector<double> totals, gradhess;
        for (std::uint32_t rep = 0; rep < reps; ++rep) {
          const FitResult fr =
              fit(ds, model == "cox" ? Model::cox : Model::fine_gray,
                  a.penalty_spec(), cfg);
          std::printf("%zu %u %u %.6f %.6f %zu\n", n, workers, rep,
                      fr.wall_seconds, fr.grad_hess_seconds, fr.cycles);
          rows.push_back({{"n", n},
                          {"threads", workers},
                          {"rep", rep},
                          {"total_seconds", fr.wall_seconds},
                          {"gradhess_seconds", fr.grad_hess_seconds},
                          {"cycles", fr.cycles}});
          totals.push_back(fr.wall_seconds);
          gradhess.push_back(fr.grad_hess_seconds);
        }
        const double mt = median_of(totals), mg = median_of(gradhess);
        std::printf("median %zu %u %.6f %.6f\n", n, workers, mt, mg);
        medians.push_back({{"n", n},
                           {"threads", workers},
                           {"total_seconds", mt},
                           {"gradhess_seconds", mg}});
        if (workers == thread_counts.front()) first_medians.push_back(mt);
        if (workers == thread_counts.back()) last_medians.push_back(mt);
      }
      if (thread_counts.size() > 1)
        std::printf("speedup %zu %u->%u %.4f\n", n, thread_counts.front(),
                    thread_counts.back(),
                    first_medians.front() / last_medians.front());
    }
  } catch (const Error& e) {
    std::cerr << "survscan bench: " << e.what() << "\n";
    return kError;
  }

  if (!a.out.empty() && a.out != "-") {
    json config = {{"sizes", sizes_text},     {"threads_list", threads_text},
                   {"model", model},          {"p", p},
                   {"density", density},      {"reps", reps},
                   {"seed", seed},            {"penalty", a.penalty},
                   {"strength", a.strength},  {"max_cycles", a.max_cycles},
                   {"chunk_size", a.chunk_size}};
    const json doc = {{"schema", "survscan-result/1"},
                      {"manifest", manifest("bench", std::move(config),
                                            json::object(), json::object())},
                      {"result", {{"rows", std::move(rows)},
                                  {"medians", std::move(medians)}}}};
    return emit(doc, a.out);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scan-based Cox / Fine-Gray regression at scale"};
  app.set_version_flag("--version", SURVSCAN_VERSION);
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_sub = app.add_subcommand("fit", "fit one penalized model");
  fit_args.add_input_flags(fit_sub);
  fit_args.add_fit_flags(fit_sub);

  FitArgs cv_args;
  std::uint32_t folds = 10, reps = 10, replicate_workers = 1;
  std::uint64_t cv_seed = 0;
  std::string grid_text = "auto";
  auto* cv_sub = app.add_subcommand("cv", "cross-validate the penalty strength");
  cv_args.add_input_flags(cv_sub);
  cv_args.add_fit_flags(cv_sub);
  cv_sub->add_option("--folds", folds)->check(CLI::Range(2u, 1000000u));
  cv_sub->add_option("--reps", reps)->check(CLI::PositiveNumber);
  cv_sub->add_option("--grid", grid_text, "comma list of strengths, or 'auto'");
  cv_sub->add_option("--seed", cv_seed);
  cv_sub->add_option("--replicate-workers", replicate_workers)
      ->check(CLI::PositiveNumber);

  FitArgs boot_args;
  std::size_t coef = 0;
  std::uint32_t resamples = 200;
  std::uint64_t boot_seed = 0;
  auto* boot_sub =
      app.add_subcommand("bootstrap", "percentile interval for one coefficient");
  boot_args.add_input_flags(boot_sub);
  boot_args.add_fit_flags(boot_sub);
  boot_sub->add_option("--coef", coef, "coefficient index")->required();
  boot_sub->add_option("--resamples", resamples)->check(CLI::Range(100u, 1000000u));
  boot_sub->add_option("--seed", boot_seed);

  std::string sim_model = "cox", prefix, format = "coo";
  SimConfig sim_cfg;
  auto* sim_sub = app.add_subcommand("simulate", "write a synthetic dataset");
  sim_sub->add_option("--model", sim_model)->check(CLI::IsMember({"cox", "finegray"}));
  sim_sub->add_option("--n", sim_cfg.n)->check(CLI::PositiveNumber);
  sim_sub->add_option("--p", sim_cfg.p);
  sim_sub->add_option("--density", sim_cfg.density)->check(CLI::Range(0.0, 1.0));
  sim_sub->add_option("--beta-sparsity", sim_cfg.beta_sparsity)
      ->check(CLI::Range(0.0, 1.0));
  sim_sub->add_option("--p-mix", sim_cfg.p_mix);
  sim_sub->add_option("--seed", sim_cfg.seed);
  double censor_quantile = 0.0;
  auto* cq_opt = sim_sub->add_option("--censor-quantile", censor_quantile,
                                     "administrative censoring quantile")
                     ->check(CLI::Range(0.0, 1.0));
  sim_sub->add_option("--out-prefix", prefix)->required();
  sim_sub->add_option("--format", format)->check(CLI::IsMember({"coo", "csv"}));

  std::string bench_sizes = "100000", bench_threads = "1", bench_model = "cox";
  std::size_t bench_p = 100;
  double bench_density = 0.05;
  std::uint32_t bench_reps = 3;
  std::uint64_t bench_seed = 99;
  FitArgs bench_args;
  bench_args.max_cycles = 5;  // timing runs are cycle-capped by default
  auto* bench_sub = app.add_subcommand("bench", "time fits across sizes and workers");
  bench_sub->add_option("--sizes", bench_sizes, "comma list of N");
  bench_sub->add_option("--threads-list", bench_threads, "comma list of worker counts");
  bench_sub->add_option("--model", bench_model)
      ->check(CLI::IsMember({"cox", "finegray"}));
  bench_sub->add_option("--p", bench_p)->check(CLI::PositiveNumber);
  bench_sub->add_option("--density", bench_density)->check(CLI::Range(0.0, 1.0));
  bench_sub->add_option("--reps", bench_reps)->check(CLI::PositiveNumber);
  bench_sub->add_option("--seed", bench_seed);
  bench_sub->add_option("--penalty", bench_args.penalty)
      ->check(CLI::IsMember({"none", "l1", "l2"}));
  bench_sub->add_option("--strength", bench_args.strength)
      ->check(CLI::NonNegativeNumber);
  bench_sub->add_option("--max-cycles", bench_args.max_cycles)
      ->check(CLI::PositiveNumber);
  bench_sub->add_option("--chunk-size", bench_args.chunk_size)
      ->check(CLI::PositiveNumber);
  bench_sub->add_option("--out", bench_args.out, "also write a JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (fit_sub->parsed()) return cmd_fit(fit_args);
  if (cv_sub->parsed())
    return cmd_cv(cv_args, folds, reps, grid_text, cv_seed, replicate_workers);
  if (boot_sub->parsed())
    return cmd_bootstrap(boot_args, coef, resamples, boot_seed);
  if (sim_sub->parsed()) {
    sim_cfg.censoring_quantile = censor_quantile;
    return cmd_simulate(sim_model, sim_cfg, cq_opt->count() > 0, prefix, format);
  }
  if (bench_sub->parsed())
    return cmd_bench(bench_sizes, bench_threads, bench_model, bench_p,
                     bench_density, bench_reps, bench_seed, bench_args);
  return kUsage;
}
