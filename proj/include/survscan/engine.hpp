#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "survscan/censoring.hpp"
#include "survscan/dataset.hpp"
#include "survscan/errors.hpp"
#include "survscan/scan.hpp"

namespace survscan {

enum class Model { cox, fine_gray };

// Per-coordinate derivatives of the log-(partial/pseudo-)likelihood.
// gradient already contains fixed_term (= delta' X_j, constant across the
// whole fit); hessian is clamped into (-inf, 0] since each risk-set term is a
// negated variance.
struct GradHess {
  double gradient = 0.0;
  double hessian = 0.0;
  double fixed_term = 0.0;
};

// delta' X_j for every column.
std::vector<double> precompute_fixed_terms(const SurvivalDataset& ds);

// Holds the running linear predictor and its exponential over one dataset,
// and evaluates likelihood and per-coordinate derivatives in O(N) by chunked
// scans.  One engine serves one fitting thread; several engines may share a
// read-only dataset.
class Engine {
 public:
  // For fine_gray the censoring weights are estimated from `ds` itself.
  // cox refuses datasets with competing-event rows, fine_gray accepts both
  // (with no status-2 rows it degrades to exactly the cox computation).
  explicit Engine(const SurvivalDataset& ds, Model model, ChunkPlan plan = {},
                  std::size_t recompute_interval = 100);

  const SurvivalDataset& data() const { return *ds_; }
  Model model_kind() const { return model_; }
  const ChunkPlan& plan() const { return plan_; }

  // Replaces beta and recomputes all state from scratch.
  void load_beta(std::span<const double> beta);

  // beta[column] += delta with incremental O(nnz_j) state maintenance.
  // Validates the new linear predictor before touching anything and throws
  // OverflowError if any |xbeta| would exceed 700.  Every recompute_interval
  // accepted updates the caches are rebuilt from beta to stop drift.
  void update_xbeta_sparse(std::size_t column, double delta);

  // Rebuild xbeta and exp(xbeta) from beta.
  void refresh();

  // Derivatives of the objective along coordinate `column`; the fused path is
  // a single two-phase pass, the separated path materializes the three scans
  // (kept as a cross-check and for benchmarking the fusion gain).
  GradHess grad_hessian(std::size_t column);
  GradHess grad_hessian_separated(std::size_t column);

  double log_likelihood() const;

  std::span<const double> beta() const { return beta_; }
  std::span<const double> xbeta() const { return xbeta_; }
  std::span<const double> exp_xbeta() const { return exp_xbeta_; }
  std::span<const double> fixed_terms() const { return fixed_terms_; }
  const IpcwWeights& ipcw() const { return ipcw_; }
  std::size_t accepted_updates() const { return accepted_; }
  std::size_t refresh_count() const { return refreshes_; }

 private:
  GradHess finish(std::size_t column, GradHessSums sums) const;

  const SurvivalDataset* ds_;
  Model model_;
  ChunkPlan plan_;
  std::size_t recompute_interval_;

  std::vector<double> beta_;
  std::vector<double> xbeta_;
  std::vector<double> exp_xbeta_;
  std::vector<double> fixed_terms_;
  IpcwWeights ipcw_;  // empty vectors for cox

  Tuple3Buffer scratch_;  // separated path only
  std::size_t accepted_ = 0;
  std::size_t refreshes_ = 0;
};

}  // namespace survscan
