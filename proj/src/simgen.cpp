#include "survscan/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

#include "survscan/errors.hpp"
#include "survscan/util.hpp"

namespace survscan {

namespace {

constexpr std::size_t kGenBlockRows = 65536;
constexpr std::uint64_t kBetaStream = 1;
constexpr std::uint64_t kRowStream = 2;

void check_config(const SimConfig& c) {
  if (!(c.density >= 0.0 && c.density <= 1.0))
    throw DomainError("density must lie in [0, 1]");
  if (!(c.beta_sparsity >= 0.0 && c.beta_sparsity <= 1.0))
    throw DomainError("beta_sparsity must lie in [0, 1]");
  if (!(c.p_mix > 0.0 && c.p_mix < 1.0))
    throw DomainError("p_mix must lie in (0, 1)");
  if (c.censoring_quantile &&
      !(*c.censoring_quantile > 0.0 && *c.censoring_quantile < 1.0))
    throw DomainError("censoring_quantile must lie in (0, 1)");
}

std::vector<double> draw_beta(const SimConfig& c) {
  std::mt19937_64 rng(derive_seed(c.seed, kBetaStream, 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution drop(c.beta_sparsity);
  std::vector<double> beta(c.p, 0.0);
  for (auto& b : beta)
    if (!drop(rng)) b = normal(rng);
  return beta;
}

// Uniform k-subset of [0, p) by Floyd's algorithm; appended to `out` unsorted.
void sample_columns(std::mt19937_64& rng, std::size_t p, std::size_t k,
                    std::unordered_set<std::uint32_t>& seen,
                    std::vector<std::uint32_t>& out) {
  seen.clear();
  out.clear();
  for (std::size_t j = p - k; j < p; ++j) {
    std::uniform_int_distribution<std::uint32_t> pick(
        0, static_cast<std::uint32_t>(j));
    const std::uint32_t t = pick(rng);
    const std::uint32_t chosen =
        seen.insert(t).second ? t : static_cast<std::uint32_t>(j);
    if (chosen != t) seen.insert(chosen);
    out.push_back(chosen);
  }
}

// Drives the per-row draws: covariates first, then row_fn(rng, xbeta) for the
// outcome.  Each block of rows gets its own generator, so a given row's draw
// depends only on (seed, block, offset in block).
template <class RowFn>
RawData generate_rows(const SimConfig& c, const std::vector<double>& beta,
                      RowFn&& row_fn) {
  RawData raw;
  raw.n_cols = c.p;
  raw.obs.resize(c.n);

  std::unordered_set<std::uint32_t> seen;
  std::vector<std::uint32_t> cols;
  const std::size_t blocks = c.n == 0 ? 0 : 1 + (c.n - 1) / kGenBlockRows;
  for (std::size_t b = 0; b < blocks; ++b) {
    std::mt19937_64 rng(derive_seed(c.seed, kRowStream, b));
    std::binomial_distribution<int> nnz_of_row(static_cast<int>(c.p), c.density);
    const std::size_t lo = b * kGenBlockRows;
    const std::size_t hi = std::min(c.n, lo + kGenBlockRows);
    for (std::size_t i = lo; i < hi; ++i) {
      const auto k = static_cast<std::size_t>(nnz_of_row(rng));
      double xbeta = 0.0;
      if (k > 0) {
        sample_columns(rng, c.p, k, seen, cols);
        std::sort(cols.begin(), cols.end());
        for (const std::uint32_t j : cols) {
          xbeta += beta[j];
          raw.entries.push_back({static_cast<std::int64_t>(i), j, 1.0});
        }
      }
      const auto [time, status] = row_fn(rng, xbeta);
      raw.obs[i] = {time, status, static_cast<std::int64_t>(i)};
    }
  }
  return raw;
}

void apply_administrative_censoring(RawData& raw, double level) {
  std::vector<double> sorted(raw.obs.size());
  for (std::size_t i = 0; i < raw.obs.size(); ++i) sorted[i] = raw.obs[i].time;
  std::sort(sorted.begin(), sorted.end());
  const double cutoff = quantile_sorted(sorted, level);
  for (auto& o : raw.obs)
    if (o.time > cutoff) {
      o.time = cutoff;
      o.status = 0;
    }
}

}  // namespace

CoxSim simulate_cox(const SimConfig& config) {
  check_config(config);
  const std::vector<double> beta = draw_beta(config);
  RawData raw =
      generate_rows(config, beta, [](std::mt19937_64& rng, double xbeta) {
        std::exponential_distribution<double> event(std::exp(xbeta));
        return std::pair<double, int>(event(rng), 1);
      });
  if (config.censoring_quantile)
    apply_administrative_censoring(raw, *config.censoring_quantile);
  return {sort_and_block(std::move(raw)), beta};
}

FineGraySim simulate_finegray(const SimConfig& config) {
  check_config(config);
  const std::vector<double> beta = draw_beta(config);
  const double log_keep = std::log1p(-config.p_mix);  // log(1 - p)

  RawData raw = generate_rows(
      config, beta, [&](std::mt19937_64& rng, double xbeta) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const double eta = std::exp(xbeta);
        const double p1 = -std::expm1(eta * log_keep);  // 1 - (1-p)^eta
        if (unif(rng) < p1) {
          // invert the subdistribution conditional on the primary event
          double t;
          do {
            const double u = unif(rng);
            const double inner =
                -std::expm1(std::log1p(-u * p1) / eta) / config.p_mix;
            t = -std::log1p(-inner);
          } while (!std::isfinite(t));
          return std::pair<double, int>(t, 1);
        }
        std::exponential_distribution<double> other(std::exp(-xbeta));
        return std::pair<double, int>(other(rng), 2);
      });
  if (config.censoring_quantile)
    apply_administrative_censoring(raw, *config.censoring_quantile);

  std::vector<double> beta2(beta.size());
  for (std::size_t j = 0; j < beta.size(); ++j) beta2[j] = -beta[j];
  return {sort_and_block(std::move(raw)), beta, std::move(beta2)};
}

}  // namespace survscan
