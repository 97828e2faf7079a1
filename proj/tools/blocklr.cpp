// blocklr: command-line front end.
//
// Exit codes: 0 success, 1 usage or invalid input, 2 solver non-convergence,
// 3 I/O failure. Diagnostics go to stderr; results go to stdout or --out.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "blocklr/baselines.hpp"
#include "blocklr/estimator.hpp"
#include "blocklr/experiments.hpp"
#include "blocklr/io.hpp"
#include "blocklr/norms.hpp"
#include "blocklr/sensing.hpp"
#include "blocklr/theory.hpp"

namespace {

using namespace blocklr;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitSolver = 2;
constexpr int kExitIo = 3;

class UsageError : public Error {
 public:
  using Error::Error;
};

struct AdmmFlags {
  double rho;
  int max_iter;
  double eps_abs;
  double eps_rel;

  explicit AdmmFlags(const AdmmSettings& d = AdmmSettings{})
      : rho(d.rho0), max_iter(d.max_iter), eps_abs(d.eps_abs), eps_rel(d.eps_rel) {}

  void add_to(CLI::App* app) {
    app->add_option("--rho", rho, "Initial ADMM step size")->check(CLI::PositiveNumber);
    app->add_option("--max-iter", max_iter, "ADMM iteration limit")->check(CLI::PositiveNumber);
    app->add_option("--eps-abs", eps_abs, "Absolute stopping tolerance")->check(CLI::PositiveNumber);
    app->add_option("--eps-rel", eps_rel, "Relative stopping tolerance")->check(CLI::PositiveNumber);
  }

  void apply(AdmmSettings& s) const {
    s.rho0 = rho;
    s.max_iter = max_iter;
    s.eps_abs = eps_abs;
    s.eps_rel = eps_rel;
  }

  json to_json() const {
    return {{"rho", rho}, {"max_iter", max_iter}, {"eps_abs", eps_abs}, {"eps_rel", eps_rel}};
  }
};

void print_config(const std::string& command, const json& cfg) {
  std::cerr << "blocklr " << command << " config: " << cfg.dump() << "\n";
}

void emit(const std::string& out_path, const json& result) {
  const std::string text = result.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text(out_path, text);
  }
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed, const std::string& command) {
  if (!seed) throw UsageError(command + ": --seed is required");
  return *seed;
}

// ---- dollar-norm ----------------------------------------------------------

struct DollarNormCmd {
  std::string input;
  std::string out;
  std::optional<std::uint64_t> seed;
  AdmmFlags admm{DollarNormSolverConfig{}};

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("dollar-norm", "Compute the $-norm of a stored block matrix");
    sub->add_option("--input", input, "Matrix file")->required();
    sub->add_option("--out", out, "Write the result JSON here instead of stdout");
    sub->add_option("--seed", seed, "Accepted for uniformity; the computation is deterministic");
    admm.add_to(sub);
    sub->callback([this] { run(); });
  }

  void run() const {
    print_config("dollar-norm", {{"input", input}, {"out", out}, {"admm", admm.to_json()}});
    const BlockMatrixd x = read_matrix(input);
    DollarNormSolverConfig cfg;
    admm.apply(cfg);
    const auto res = dollar_norm(x, cfg);
    emit(out, {{"value", json(res.value)},
               {"inf_frob_norm", json(inf_frob_norm(x))},
               {"iters", res.iters},
               {"primal_residual", json(res.primal_residual)},
               {"dual_residual", json(res.dual_residual)},
               {"primal_tol", json(res.primal_tol)},
               {"dual_tol", json(res.dual_tol)}});
  }
};

// ---- simulate ---------------------------------------------------------------

struct SimulateCmd {
  std::optional<std::uint64_t> seed;
  std::uint64_t ensemble_seed = 0;
  ProblemDims dims;
  std::optional<double> snr_db;
  std::string truth_out;
  std::string meas_out;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand(
        "simulate", "Draw a ground truth and its block-wise measurements");
    sub->add_option("--seed", seed, "Seed for the ground truth and the noise");
    sub->add_option("--ensemble-seed", ensemble_seed, "Seed of the sensing ensemble")
        ->required()
        ->default_str("");
    sub->add_option("--rows", dims.M, "Rows M")->check(CLI::PositiveNumber);
    sub->add_option("--block-cols", dims.N, "Columns per block N")->check(CLI::PositiveNumber);
    sub->add_option("--blocks", dims.K, "Number of blocks K")->check(CLI::PositiveNumber);
    sub->add_option("--measurements", dims.L, "Measurements per block L")->check(CLI::PositiveNumber);
    sub->add_option("--rank", dims.r, "Rank r")->check(CLI::PositiveNumber);
    sub->add_option("--snr-db", snr_db, "Signal-to-noise ratio in dB (omit for noiseless)");
    sub->add_option("--truth", truth_out, "Output matrix file for X")->required();
    sub->add_option("--meas", meas_out, "Output measurement file")->required();
    sub->callback([this] { run(); });
  }

  void run() const {
    const std::uint64_t s = require_seed(seed, "simulate");
    print_config("simulate", {{"seed", s},
                              {"ensemble_seed", ensemble_seed},
                              {"dims", dims.str()},
                              {"snr_db", snr_db ? json(*snr_db) : json("noiseless")},
                              {"truth", truth_out},
                              {"meas", meas_out}});
    const auto truth = gen_ground_truth<double>(dims, derive_seed(s, Stream::kGroundTruth));
    const auto ens = gen_ensemble<double>(dims, ensemble_seed);
    const double sigma = snr_db ? sigma_for_snr_db(truth.X, *snr_db) : 0.0;
    const auto ms = measure(truth.X, ens, sigma, derive_seed(s, Stream::kNoise));
    write_matrix(truth_out, truth.X);
    write_measurements(meas_out, ms);
  }
};

// ---- shared by estimate and baseline ----------------------------------------

struct ProblemFlags {
  std::string meas;
  std::optional<std::uint64_t> ensemble_seed;
  Index rows = 0;
  Index block_cols = 0;

  void add_to(CLI::App* sub) {
    sub->add_option("--meas", meas, "Measurement file")->required();
    sub->add_option("--ensemble-seed", ensemble_seed, "Seed of the sensing ensemble");
    sub->add_option("--rows", rows, "Rows M")
        ->required()
        ->default_str("")
        ->check(CLI::PositiveNumber);
    sub->add_option("--block-cols", block_cols, "Columns per block N")
        ->required()
        ->default_str("")
        ->check(CLI::PositiveNumber);
  }

  struct Loaded {
    MeasurementSet<double> ms;
    SensingEnsemble<double> ens;
  };

  Loaded load(Index rank, const std::string& command) const {
    if (!ensemble_seed) throw UsageError(command + ": --ensemble-seed is required");
    auto ms = read_measurements(meas);
    const ProblemDims dims{rows, block_cols, ms.blocks(), ms.measurements(), rank};
    return {std::move(ms), gen_ensemble<double>(dims, *ensemble_seed)};
  }

  json to_json() const {
    return {{"meas", meas},
            {"ensemble_seed", ensemble_seed ? json(*ensemble_seed) : json(nullptr)},
            {"rows", rows},
            {"block_cols", block_cols}};
  }
};

// ---- estimate ---------------------------------------------------------------

struct EstimateCmd {
  ProblemFlags problem;
  std::optional<double> alpha;
  std::optional<double> beta;
  Index rank = 1;
  std::optional<Index> init_rank;
  std::string out;
  std::optional<std::uint64_t> seed;
  AdmmFlags admm;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("estimate", "Run the constrained least-squares estimator");
    problem.add_to(sub);
    sub->add_option("--alpha", alpha, "Bound on the max block Frobenius norm (default: estimated)");
    sub->add_option("--beta", beta, "Bound on the $-norm (default: estimated)");
    sub->add_option("--rank", rank, "Rank used to estimate missing alpha/beta")
        ->check(CLI::PositiveNumber);
    sub->add_option("--init-rank", init_rank,
                    "Rank truncation of the warm start (default: --rank; 0 = none)");
    sub->add_option("--out", out, "Output matrix file for the estimate")->required();
    sub->add_option("--seed", seed, "Accepted for uniformity; randomness comes from --ensemble-seed");
    admm.add_to(sub);
    sub->callback([this] { run(); });
  }

  void run() const {
    json cfg = problem.to_json();
    cfg["alpha"] = alpha ? json(*alpha) : json("estimated");
    cfg["beta"] = beta ? json(*beta) : json("estimated");
    cfg["rank"] = rank;
    cfg["init_rank"] = init_rank.value_or(rank);
    cfg["out"] = out;
    cfg["admm"] = admm.to_json();
    print_config("estimate", cfg);

    const auto data = problem.load(rank, "estimate");
    EstimatorConfig ec;
    admm.apply(ec);
    ec.init_rank = init_rank.value_or(rank);
    if (!alpha || !beta) {
      // Same solver defaults as a sweep, so the estimated pair matches.
      const auto ab = estimate_alpha_beta(backproject(data.ens, data.ms), rank,
                                          DollarNormSolverConfig{});
      std::cerr << "estimated alpha=" << format_double(ab.alpha)
                << " beta=" << format_double(ab.beta) << "\n";
      ec.alpha = alpha.value_or(ab.alpha);
      ec.beta = beta.value_or(ab.beta);
    } else {
      ec.alpha = *alpha;
      ec.beta = *beta;
    }
    const auto res = estimate(data.ens, data.ms, ec);
    write_matrix(out, res.X_hat);
    emit("", {{"alpha", json(ec.alpha)},
              {"beta", json(ec.beta)},
              {"objective", json(res.objective)},
              {"iters", res.iters},
              {"primal_residual", json(res.primal_residual)},
              {"dual_residual", json(res.dual_residual)},
              {"inf_frob_norm", json(res.feasibility.inf_frob)},
              {"certificate_min_eig", json(res.feasibility.certificate_min_eig)}});
  }
};

// ---- baseline ---------------------------------------------------------------

struct BaselineCmd {
  ProblemFlags problem;
  Index rank = 1;
  std::string method = "spectral";
  std::string out;
  std::optional<std::uint64_t> seed;
  GdConfig gd;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("baseline", "Spectral or gradient-descent estimate");
    problem.add_to(sub);
    sub->add_option("--rank", rank, "Target rank r")->check(CLI::PositiveNumber);
    sub->add_option("--method", method, "spectral or gd")
        ->check(CLI::IsMember({"spectral", "gd"}));
    sub->add_option("--max-iter", gd.max_iter, "Gradient-descent iteration limit")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "Output matrix file for the estimate")->required();
    sub->add_option("--seed", seed, "Accepted for uniformity; randomness comes from --ensemble-seed");
    sub->callback([this] { run(); });
  }

  void run() const {
    json cfg = problem.to_json();
    cfg["rank"] = rank;
    cfg["method"] = method;
    cfg["max_iter"] = gd.max_iter;
    cfg["out"] = out;
    print_config("baseline", cfg);

    const auto data = problem.load(rank, "baseline");
    const BlockMatrixd x0 = backproject(data.ens, data.ms);
    json result = {{"method", method}};
    if (method == "spectral") {
      const BlockMatrixd x_hat = truncate_rank(x0, rank);
      write_matrix(out, x_hat);
      result["objective"] = json(data_fit(data.ens, data.ms, x_hat));
    } else {
      GdResult<double> res;
      try {
        res = gd_refine(data.ens, data.ms, spectral_init(x0, rank), gd);
      } catch (const GdStalled<double>& e) {
        std::cerr << "warning: " << e.what() << "; writing last iterate\n";
        res = e.last();
      }
      write_matrix(out, res.iterate.assemble());
      result["objective"] = json(res.objective_history.back());
      result["iters"] = res.iters;
      result["converged"] = res.converged;
    }
    emit("", result);
  }
};

// ---- sweep and phase-diagram -------------------------------------------------

void write_phase_diagram(const std::filesystem::path& dir, const PhaseDiagram& pd,
                         std::vector<Artifact>* artifacts) {
  const std::string grid = pd.grid_csv();
  const std::string mask = pd.mask_pgm();
  write_text((dir / "grid.csv").string(), grid);
  write_text((dir / "mask.pgm").string(), mask);
  if (artifacts) {
    artifacts->push_back({"grid.csv", grid});
    artifacts->push_back({"mask.pgm", mask});
  }
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

struct SweepCmd {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> snr_db;
  std::optional<std::string> method;
  std::optional<std::string> metric;
  double threshold_log10 = -1.5;
  int threads = 1;
  AdmmFlags admm;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("sweep", "Monte Carlo sweep over a (K, L) grid");
    sub->add_option("--config", config, "JSON sweep configuration")->required();
    sub->add_option("--out", out, "Output directory")->required();
    sub->add_option("--seed", seed, "Master seed (overrides master_seed in the config)");
    sub->add_option("--snr-db", snr_db, "Override snr_db");
    sub->add_option("--method", method, "Override method")
        ->check(CLI::IsMember({"convex", "spectral", "gd"}));
    sub->add_option("--metric", metric, "Override metric")
        ->check(CLI::IsMember({"subspace_angle", "normalized_error"}));
    sub->add_option("--threshold-log10", threshold_log10, "Success threshold on log10 median");
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    admm.add_to(sub);
    sub->callback([this] { run(); });
  }

  void run() const {
    json j;
    try {
      j = json::parse(read_text(config));
    } catch (const json::parse_error& e) {
      throw UsageError(config + ": " + e.what());
    }
    if (!seed && !(j.is_object() && j.contains("master_seed"))) {
      throw UsageError("sweep: --seed is required when the config has no master_seed");
    }
    SweepConfig cfg = sweep_config_from_json(j);
    if (seed) cfg.master_seed = *seed;
    if (snr_db) cfg.snr_db = *snr_db;
    if (method) cfg.method = parse_method(*method);
    if (metric) cfg.metric = parse_metric(*metric);
    cfg.validate();
    SweepSolvers solvers;
    admm.apply(solvers.admm);
    solvers.threads = threads;
    print_config("sweep", {{"sweep", to_json(cfg)},
                           {"solvers", to_json(solvers)},
                           {"threads", threads},
                           {"threshold_log10", threshold_log10},
                           {"out", out}});

    const std::filesystem::path dir(out);
    ensure_dir(dir);
    const auto records = run_sweep(cfg, solvers, [](const TrialOutcome& o) {
      std::cerr << "K=" << o.K << " L=" << o.L << " trial=" << o.trial << " "
                << format_double(o.value) << " " << o.status;
      if (!o.detail.empty()) std::cerr << " (" << o.detail << ")";
      std::cerr << "\n";
    });
    std::vector<Artifact> artifacts;
    const std::string results = results_csv(records, cfg.metric);
    write_text((dir / "results.csv").string(), results);
    artifacts.push_back({"results.csv", results});
    write_phase_diagram(dir, emit_phase_diagram(records, threshold_log10), &artifacts);
    write_text((dir / "manifest.json").string(),
               run_manifest(cfg, solvers, artifacts).dump(2) + "\n");

    int failures = 0;
    for (const auto& r : records) failures += r.failures;
    std::cout << "cells " << records.size() << ", failed trials " << failures << "\n";
  }
};

struct PhaseDiagramCmd {
  std::string input;
  std::string out;
  std::optional<std::uint64_t> seed;
  double threshold_log10 = -1.5;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("phase-diagram", "Grid and success mask from a results file");
    sub->add_option("--input", input, "results.csv from a sweep")->required();
    sub->add_option("--out", out, "Output directory")->required();
    sub->add_option("--threshold-log10", threshold_log10, "Success threshold on log10 median");
    sub->add_option("--seed", seed, "Accepted for uniformity; the computation is deterministic");
    sub->callback([this] { run(); });
  }

  void run() const {
    print_config("phase-diagram",
                 {{"input", input}, {"out", out}, {"threshold_log10", threshold_log10}});
    const auto records = parse_results_csv(read_text(input));
    const std::filesystem::path dir(out);
    ensure_dir(dir);
    write_phase_diagram(dir, emit_phase_diagram(records, threshold_log10), nullptr);
  }
};

// ---- bounds and packing -------------------------------------------------------

struct BoundsCmd {
  BoundInputs b;
  std::string out;
  std::optional<std::uint64_t> seed;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("bounds", "Evaluate the sample-rate threshold and minimax bound");
    sub->add_option("--alpha", b.alpha, "Max block Frobenius norm bound")->check(CLI::PositiveNumber);
    sub->add_option("--beta", b.beta, "$-norm bound")->check(CLI::PositiveNumber);
    sub->add_option("--sigma", b.sigma, "Noise standard deviation")->check(CLI::NonNegativeNumber);
    sub->add_option("--rows", b.M, "Rows M")->check(CLI::PositiveNumber);
    sub->add_option("--block-cols", b.N, "Columns per block N")->check(CLI::PositiveNumber);
    sub->add_option("--blocks", b.K, "Number of blocks K")->check(CLI::PositiveNumber);
    sub->add_option("--measurements", b.L, "Measurements per block L")->check(CLI::PositiveNumber);
    sub->add_option("--constant", b.C, "Numerical constant of the sample-rate threshold")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "Write the result JSON here instead of stdout");
    sub->add_option("--seed", seed, "Accepted for uniformity; the computation is deterministic");
    sub->callback([this] { run(); });
  }

  void run() const {
    print_config("bounds", {{"alpha", b.alpha}, {"beta", b.beta}, {"sigma", b.sigma},
                            {"M", b.M}, {"N", b.N}, {"K", b.K}, {"L", b.L}, {"C", b.C}});
    json result = {{"sample_rate_threshold", json(sample_rate_threshold(b))}};
    try {
      result["minimax_lower_bound"] = json(minimax_lower_bound(b));
    } catch (const DomainError& e) {
      result["minimax_lower_bound"] = nullptr;
      result["minimax_note"] = e.what();
    }
    emit(out, result);
  }
};

struct PackingCmd {
  Index M = 16, N = 2, K = 8, B = 4;
  double alpha = 1.0;
  double gamma = 1.0;
  int count = 10;
  std::optional<std::uint64_t> seed;
  std::string out;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("packing", "Generate and check a sign-matrix packing set");
    sub->add_option("--seed", seed, "Seed of the first matrix; matrix i uses a derived stream");
    sub->add_option("--rows", M, "Rows M")->check(CLI::PositiveNumber);
    sub->add_option("--block-cols", N, "Columns per block N")->check(CLI::PositiveNumber);
    sub->add_option("--blocks", K, "Number of blocks K")->check(CLI::PositiveNumber);
    sub->add_option("--packing-rank", B, "Number of distinct rows B")->check(CLI::PositiveNumber);
    sub->add_option("--alpha", alpha, "alpha")->check(CLI::PositiveNumber);
    sub->add_option("--gamma", gamma, "gamma in (0, 1]")->check(CLI::PositiveNumber);
    sub->add_option("--count", count, "Number of matrices")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "Directory for the generated matrices (optional)");
    sub->callback([this] { run(); });
  }

  void run() const {
    const std::uint64_t s = require_seed(seed, "packing");
    print_config("packing", {{"seed", s}, {"M", M}, {"N", N}, {"K", K}, {"B", B},
                             {"alpha", alpha}, {"gamma", gamma}, {"count", count}, {"out", out}});
    std::vector<BlockMatrixd> set;
    for (int i = 0; i < count; ++i) {
      set.push_back(gen_packing_matrix<double>(M, N, K, alpha, gamma, B,
                                               derive_seed(s, {std::uint64_t(Stream::kPacking),
                                                               std::uint64_t(i)})));
    }
    if (!out.empty()) {
      const std::filesystem::path dir(out);
      ensure_dir(dir);
      for (int i = 0; i < count; ++i) {
        write_matrix((dir / ("H" + std::to_string(i) + ".csv")).string(), set[i]);
      }
    }
    const auto rep = verify_packing(set, alpha, gamma, K);
    emit("", {{"min_pair_distance_sq",
               count > 1 ? json(rep.min_pair_distance_sq) : json(nullptr)},
              {"pair_threshold", json(rep.pair_threshold)},
              {"pairs_ok", rep.pairs_ok},
              {"max_inf_frob_error", json(rep.max_inf_frob_error)},
              {"max_frob_sq_error", json(rep.max_frob_sq_error)}});
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Jointly sketched low-rank block matrices: estimator, baselines, experiments",
               "blocklr"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  DollarNormCmd dollar;
  SimulateCmd simulate;
  EstimateCmd est;
  BaselineCmd baseline;
  SweepCmd sweep;
  PhaseDiagramCmd phase;
  BoundsCmd bounds;
  PackingCmd packing;
  dollar.add(app);
  simulate.add(app);
  est.add(app);
  baseline.add(app);
  sweep.add(app);
  phase.add(app);
  bounds.add(app);
  packing.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const NonConvergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const NumericalFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}
