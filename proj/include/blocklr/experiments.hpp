#pragma once

// Monte Carlo sweeps over (K, L) grids, median aggregation and phase-diagram
// output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "blocklr/baselines.hpp"
#include "blocklr/core.hpp"
#include "blocklr/estimator.hpp"
#include "blocklr/norms.hpp"

namespace blocklr {

/// Largest |U^T U - I| entry.
template <typename Scalar>
Scalar gram_deviation(const Mat<Scalar>& u) {
  return (u.transpose() * u - Mat<Scalar>::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff();
}

/// Sine of the largest principal angle, ||(I - U_est U_est^T) U_true||_2.
template <typename Scalar>
Scalar subspace_angle(const Mat<Scalar>& u_true, const Mat<Scalar>& u_est) {
  if (u_true.rows() != u_est.rows() || u_true.cols() != u_est.cols()) {
    throw DimensionMismatch("subspace_angle: " + shape_string(u_true.rows(), u_true.cols()) +
                            " vs " + shape_string(u_est.rows(), u_est.cols()));
  }
  for (const Mat<Scalar>* u : {&u_true, &u_est}) {
    const Scalar dev = gram_deviation(*u);
    if (!(dev <= Scalar(1e-8))) {
      throw DomainError("subspace_angle: columns not orthonormal (Gram deviation " +
                        std::to_string(double(dev)) + ")");
    }
  }
  const Mat<Scalar> residual = u_true - u_est * (u_est.transpose() * u_true);
  const Scalar s = thin_svd(residual).singular_values(0);
  return std::clamp(s, Scalar(0), Scalar(1));
}

/// ||X_hat - X||_F^2 / ||X||_F^2.
template <typename Scalar>
Scalar normalized_error(const BlockMatrix<Scalar>& x_hat, const BlockMatrix<Scalar>& x) {
  const Scalar denom = x.matrix().squaredNorm();
  if (!(denom > Scalar(0))) throw UndefinedValue("normalized_error: zero ground truth");
  return (x_hat - x).matrix().squaredNorm() / denom;
}

enum class Method { kConvex, kSpectral, kGd };
enum class Metric { kSubspaceAngle, kNormalizedError };
enum class AlphaBetaSource { kOracle, kEstimated };

std::string to_string(Method m);
std::string to_string(Metric m);
std::string to_string(AlphaBetaSource s);
Method parse_method(const std::string& s);
Metric parse_metric(const std::string& s);
AlphaBetaSource parse_alpha_beta_source(const std::string& s);

struct SweepConfig {
  Index M = 40;
  Index N = 4;
  Index r = 2;
  std::vector<Index> K_values{4, 8, 16, 32};
  std::vector<Index> L_values{8, 16, 32, 64, 128};
  std::optional<double> snr_db;  // empty = noiseless
  int trials = 20;
  std::uint64_t master_seed = 0;
  Method method = Method::kConvex;
  Metric metric = Metric::kSubspaceAngle;
  AlphaBetaSource alpha_beta_source = AlphaBetaSource::kEstimated;

  void validate() const;
};

/// Field names match SweepConfig members; unknown keys are rejected.
nlohmann::json to_json(const SweepConfig& cfg);
SweepConfig sweep_config_from_json(const nlohmann::json& j);

/// Solver parameters shared by every trial of a sweep.
struct SweepSolvers {
  AdmmSettings admm;  // estimator ADMM (alpha, beta are set per trial)
  DollarNormSolverConfig dollar;
  GdConfig gd;
  int threads = 1;
};

nlohmann::json to_json(const SweepSolvers& s);

/// Trial status strings written to the results file.
inline constexpr const char* kStatusOk = "ok";
inline constexpr const char* kStatusStalled = "stalled";        // GD line search, iterate kept
inline constexpr const char* kStatusFailed = "nonconverged";    // excluded from medians
inline constexpr const char* kStatusError = "error";            // excluded from medians

struct TrialOutcome {
  Index K = 0;
  Index L = 0;
  int trial = 0;
  double value = std::nan("");
  std::string status = kStatusOk;
  std::string detail;  // diagnostic for failed trials

  bool counts() const { return status == kStatusOk || status == kStatusStalled; }
};

struct ExperimentRecord {
  Index K = 0;
  Index L = 0;
  std::vector<TrialOutcome> trials;  // ordered by trial index
  double median = std::nan("");      // over counted trials; NaN if none
  int failures = 0;

  bool valid() const { return failures < int(trials.size()); }
};

double median_of(std::vector<double> values);

/// Seed of trial t in cell (K, L).
std::uint64_t trial_seed(std::uint64_t master, Index K, Index L, int t);

/// One trial: generate truth, ensemble and noise from the trial seed, run the
/// method and evaluate the metric.
TrialOutcome run_trial(const SweepConfig& cfg, const SweepSolvers& solvers, Index K, Index L,
                       int t);

using ProgressFn = std::function<void(const TrialOutcome&)>;

/// Records in (K, L) order. Results do not depend on the thread count.
std::vector<ExperimentRecord> run_sweep(const SweepConfig& cfg, const SweepSolvers& solvers = {},
                                        const ProgressFn& progress = {});

std::string results_csv(const std::vector<ExperimentRecord>& records, Metric metric);
std::vector<ExperimentRecord> parse_results_csv(const std::string& text);

struct PhaseDiagram {
  std::vector<Index> K_values;             // columns
  std::vector<Index> L_values;             // rows, ascending
  std::vector<std::vector<double>> log10_median;  // [L index][K index]; NaN if invalid
  std::vector<std::vector<bool>> success;
  double threshold_log10 = -1.5;

  std::string grid_csv() const;
  /// P2 graymap, one pixel per cell, largest L on the top row.
  std::string mask_pgm() const;
};

/// Throws DomainError listing the missing (K, L) cells if the records do not
/// cover the full grid spanned by their K and L values.
PhaseDiagram emit_phase_diagram(const std::vector<ExperimentRecord>& records,
                                double threshold_log10 = -1.5);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

struct Artifact {
  std::string name;
  std::string contents;
};

/// Config, solver settings and a checksum per artifact.
nlohmann::json run_manifest(const SweepConfig& cfg, const SweepSolvers& solvers,
                            const std::vector<Artifact>& artifacts);

}  // namespace blocklr
