#pragma once

#include <cstddef>
#include <vector>

#include "survscan/dataset.hpp"
#include "survscan/engine.hpp"

namespace survscan {

enum class PenaltyKind { none, l1, l2 };

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::none;
  double strength = 0.0;  // gamma for l1 (>= 0), tau for l2 (> 0)
  std::vector<std::size_t> exempt;

  void validate(std::size_t p) const;
  bool applies_to(std::size_t j) const;
};

struct FitConfig {
  double tolerance = 1e-6;   // relative objective change per full cycle
  std::size_t max_cycles = 1000;
  double trust_init = 1.0;
  std::size_t recompute_interval = 100;
  ChunkPlan plan;

  void validate() const;
};

struct FitResult {
  std::vector<double> beta;
  double objective = 0.0;  // penalized log-likelihood at beta
  std::size_t cycles = 0;
  bool converged = false;
  std::size_t nonzero_count = 0;
  std::vector<double> objective_trace;  // initial value, then one per cycle
  double wall_seconds = 0.0;
  double grad_hess_seconds = 0.0;
  std::size_t skipped_steps = 0;
  std::size_t monotonicity_violations = 0;
};

// One damped Newton step along a single coordinate, as pure arithmetic.
// Folds the penalty into the derivatives (l2 curvature, l1 subgradient with
// the both-sided test at zero), clamps an l1 step that would cross zero to
// land exactly on it, clips to the trust halfwidth, and grows/shrinks the
// halfwidth from the applied step.  A flat-but-sloped coordinate
// (hess_eff >= 0 with grad_eff != 0) is skipped: nothing moves and the
// halfwidth is kept.
struct StepOutcome {
  double new_beta = 0.0;
  double applied = 0.0;
  double new_halfwidth = 0.0;
  bool skipped = false;
};

StepOutcome coordinate_step(double beta_j, const GradHess& gh,
                            const PenaltySpec& penalty, bool penalized,
                            double halfwidth);

// Cyclic coordinate descent over all columns (ascending, exempt included)
// until the relative objective change over a full cycle drops below
// config.tolerance.  NotConverged is reported through the flag, not thrown.
FitResult fit(const SurvivalDataset& ds, Model model, const PenaltySpec& penalty,
              const FitConfig& config = {});

// Same loop driving a caller-provided engine (used by cross-validation to
// reuse one engine per worker); the engine's beta is reset to zero first.
FitResult fit_with_engine(Engine& engine, const PenaltySpec& penalty,
                          const FitConfig& config);

}  // namespace survscan
