#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "survscan/dataset.hpp"

namespace survscan {

// Synthetic survival designs: binary covariates, sparse Gaussian effects,
// exponential event times.  Generation is blocked so partitions of the row
// range can be produced independently with derived seeds.
struct SimConfig {
  std::size_t n = 0;
  std::size_t p = 0;
  double density = 0.05;        // fraction of nonzero indicator entries
  double beta_sparsity = 0.80;  // probability a true coefficient is zeroed
  double p_mix = 0.5;           // mixture mass of the primary event at x = 0
  std::uint64_t seed = 0;
  std::optional<double> censoring_quantile;  // administrative cutoff, in (0,1)
};

struct CoxSim {
  SurvivalDataset data;
  std::vector<double> true_beta;
};

struct FineGraySim {
  SurvivalDataset data;
  std::vector<double> true_beta1;
  std::vector<double> true_beta2;  // always the negation of true_beta1
};

// Event times are Exponential with rate exp(x'beta); all rows are events
// unless an administrative cutoff is configured, which replaces every later
// time by the cutoff itself with status 0 (creating a tied block there).
CoxSim simulate_cox(const SimConfig& config);

// Two competing events.  The primary event happens with probability
// 1 - (1-p_mix)^exp(x'beta1) and its time follows the subdistribution
// 1 - [1 - p_mix(1-e^-t)]^exp(x'beta1), sampled by inverse CDF; otherwise the
// time is Exponential with rate exp(x'beta2).
FineGraySim simulate_finegray(const SimConfig& config);

}  // namespace survscan
