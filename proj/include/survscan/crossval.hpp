#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "survscan/ccd.hpp"
#include "survscan/dataset.hpp"
#include "survscan/engine.hpp"

namespace survscan {

struct CVConfig {
  std::uint32_t folds = 10;
  std::uint32_t repetitions = 10;
  std::vector<double> grid;  // strictly ascending; empty = derive a default
  std::uint64_t seed = 0;
  std::uint32_t parallel_replicates = 1;

  void validate() const;
};

// One grid value's held-out summary.  `spread` is the sample standard
// deviation over the individual fold evaluations (0 when fewer than two).
struct CVPoint {
  double strength = 0.0;
  double mean_loglik = 0.0;
  double spread = 0.0;
  std::uint32_t evaluations = 0;
};

struct CVResult {
  std::vector<CVPoint> points;       // one per grid value, ascending
  double selected_value = 0.0;       // grid value maximizing mean_loglik
  FitResult final_fit;               // refit on the full dataset at selected_value
  std::uint32_t failed_replicates = 0;
};

// Fold id per row for replicate `replicate` of grid point `grid_index`:
// a seeded shuffle dealt round-robin, so fold sizes differ by at most one.
// Seeding is counter-based on (seed, grid_index, replicate), never on
// execution order.
std::vector<std::uint32_t> fold_assignment(std::size_t n, std::uint32_t folds,
                                           std::uint64_t seed,
                                           std::uint64_t grid_index,
                                           std::uint64_t replicate);

// Log-likelihood of one fold treated as its own dataset: rows are extracted
// with fresh ids, censoring weights (fine_gray) re-estimated on the fold
// alone, then the supplied beta is evaluated.  Nothing outside the fold can
// influence the value.
double held_out_loglik(const SurvivalDataset& ds,
                       const std::vector<std::uint32_t>& fold_of,
                       std::uint32_t fold, Model model,
                       const std::vector<double>& beta, const ChunkPlan& plan);

// Smallest l1 strength that keeps every coefficient parked at zero:
// max_j |g'_j(0)|.
double gamma_max(const SurvivalDataset& ds, Model model,
                 const ChunkPlan& plan = {});

// Ten log-spaced strengths spanning [top/1000, top], endpoints exact.
std::vector<double> auto_grid(double top);

// k-fold x r-replicate selection of the penalty strength.  For every grid
// value and replicate a fresh seeded partition is drawn, a model is fitted on
// each k-1 fold union, and the left-out fold is scored via held_out_loglik;
// the grid value with the best mean score wins (first on ties) and is refit
// on the full data.  Replicates run as independent tasks on
// parallel_replicates threads; results are merged by (grid, replicate) index,
// so the thread count can never change the output.  A replicate whose fit
// fails is dropped and counted in failed_replicates; a partition with an
// event-free fold raises EmptyFoldError before any fitting starts.
CVResult cross_validate(const SurvivalDataset& ds, Model model,
                        PenaltyKind kind, const CVConfig& cv,
                        const FitConfig& fit_config = {});

struct BootstrapInterval {
  double lower = 0.0;
  double upper = 0.0;
  std::uint32_t failed_resamples = 0;
};

// Percentile interval for one coefficient: `resamples` (>= 100) draws of n
// subjects with replacement, each refit at the fixed penalty, then the
// empirical 2.5% / 97.5% quantiles of that coefficient.  Failed refits are
// dropped; more than 10% of them is an error.
BootstrapInterval bootstrap_interval(const SurvivalDataset& ds, Model model,
                                     const PenaltySpec& penalty,
                                     const FitConfig& fit_config,
                                     std::size_t coefficient_index,
                                     std::uint32_t resamples,
                                     std::uint64_t seed);

}  // namespace survscan
