#include "survscan/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "survscan/errors.hpp"

using namespace survscan;

namespace {

// One-sample Kolmogorov-Smirnov statistic against an exact CDF.
template <class Cdf>
double ks_stat(std::vector<double> x, Cdf&& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max(d, std::max(std::abs(f - static_cast<double>(i) / n),
                             std::abs(f - static_cast<double>(i + 1) / n)));
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() && ib < b.size()) {
    if (a[ia] <= b[ib])
      ++ia;
    else
      ++ib;
    d = std::max(d, std::abs(static_cast<double>(ia) / a.size() -
                             static_cast<double>(ib) / b.size()));
  }
  return d;
}

// Subdistribution of the primary event and its total mass, written from the
// model definition (not from the sampler's inverse formula).
double sub_cdf(double t, double eta, double p) {
  const double base = 1.0 - p * (-std::expm1(-t));
  return -std::expm1(eta * std::log(base));
}
double sub_mass(double eta, double p) {
  return -std::expm1(eta * std::log1p(-p));
}

// Brute-force sampler for the conditional primary-event time: rejection from
// an Exp(1) proposal.  The subdensity is eta*p*e^-t*(1-p(1-e^-t))^(eta-1),
// bounded by eta*p*max(1, (1-p)^(eta-1)) times the proposal density.
double rejection_t1(std::mt19937_64& rng, double eta, double p) {
  std::exponential_distribution<double> proposal(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double cap = eta >= 1.0 ? 1.0 : std::pow(1.0 - p, eta - 1.0);
  while (true) {
    const double t = proposal(rng);
    const double base = 1.0 - p * (-std::expm1(-t));
    const double ratio = std::pow(base, eta - 1.0) / cap;
    if (unif(rng) < ratio) return t;
  }
}

}  // namespace

TEST_CASE("generation is a pure function of the config") {
  SimConfig cfg{.n = 3000, .p = 40, .seed = 91};
  const CoxSim a = simulate_cox(cfg);
  const CoxSim b = simulate_cox(cfg);
  CHECK(a.data == b.data);
  CHECK(a.true_beta == b.true_beta);

  cfg.seed = 92;
  const CoxSim c = simulate_cox(cfg);
  CHECK(a.data.content_hash() != c.data.content_hash());

  const FineGraySim fa = simulate_finegray(cfg);
  const FineGraySim fb = simulate_finegray(cfg);
  CHECK(fa.data == fb.data);
  for (std::size_t j = 0; j < fa.true_beta1.size(); ++j)
    CHECK(fa.true_beta2[j] == -fa.true_beta1[j]);
}

TEST_CASE("indicator density matches the binomial budget") {
  const std::size_t n = 20000, p = 50;
  const double d = 0.05;
  const CoxSim sim = simulate_cox({.n = n, .p = p, .density = d, .seed = 5});
  const double mean = static_cast<double>(n * p) * d;
  const double sd = std::sqrt(static_cast<double>(n * p) * d * (1 - d));
  CHECK(std::abs(static_cast<double>(sim.data.nnz_total()) - mean) < 3 * sd);
  for (const auto& c : sim.data.columns())
    CHECK(c.kind == ColumnKind::sparse_indicator);
}

TEST_CASE("degenerate configs collapse as promised") {
  const CoxSim zero = simulate_cox({.n = 20000, .p = 8, .density = 0.0, .seed = 3});
  CHECK(zero.data.nnz_total() == 0);
  // all rates are exp(0): unit exponential times
  CHECK(ks_stat(zero.data.times(), [](double t) { return -std::expm1(-t); }) <
        0.015);

  const CoxSim flat =
      simulate_cox({.n = 100, .p = 12, .beta_sparsity = 1.0, .seed = 4});
  CHECK(flat.true_beta == std::vector<double>(12, 0.0));

  const CoxSim full =
      simulate_cox({.n = 100, .p = 12, .beta_sparsity = 0.0, .seed = 4});
  for (const double b : full.true_beta) CHECK(b != 0.0);
}

TEST_CASE("administrative censoring cuts at the exact quantile") {
  const std::size_t n = 1000;
  const CoxSim sim = simulate_cox(
      {.n = n, .p = 10, .seed = 17, .censoring_quantile = 0.7});
  const auto& t = sim.data.times();
  const auto& s = sim.data.status();

  const double cutoff = t.front();  // sorted decreasing
  std::size_t censored = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (s[i] == 0) {
      ++censored;
      CHECK(t[i] == cutoff);
    } else {
      CHECK(t[i] <= cutoff);
    }
  }
  // continuous times: exactly the rows above the interpolated quantile move
  CHECK(censored == 300);
  CHECK(sim.data.blocks().ends[0] == censored - 1);  // one tied block at the cut
}

TEST_CASE("mixture mass at x = 0 is p_mix") {
  const std::size_t n = 100000;
  const FineGraySim sim = simulate_finegray({.n = n, .p = 0, .seed = 23});
  std::size_t primary = 0;
  for (const int s : sim.data.status()) primary += s == 1;
  const double frac = static_cast<double>(primary) / static_cast<double>(n);
  CHECK(std::abs(frac - 0.5) < 3 * std::sqrt(0.25 / n));
}

TEST_CASE("nearly-degenerate mixture gives all-primary unit exponentials") {
  const FineGraySim sim = simulate_finegray(
      {.n = 20000, .p = 6, .beta_sparsity = 1.0, .p_mix = 1.0 - 1e-12, .seed = 29});
  for (const int s : sim.data.status()) CHECK(s == 1);
  CHECK(ks_stat(sim.data.times(), [](double t) { return -std::expm1(-t); }) <
        0.015);
}

TEST_CASE("empirical primary CIF at x = 0 tracks the closed form") {
  const std::size_t n = 100000;
  const FineGraySim sim = simulate_finegray({.n = n, .p = 0, .seed = 31});
  // F1(t) = 0.5 (1 - e^-t); compare on a fine grid through the bulk
  std::vector<double> primary_times;
  for (std::size_t i = 0; i < n; ++i)
    if (sim.data.status()[i] == 1) primary_times.push_back(sim.data.times()[i]);
  std::sort(primary_times.begin(), primary_times.end());

  double worst = 0.0;
  for (double t = 0.05; t <= 12.0; t += 0.05) {
    const auto below = std::upper_bound(primary_times.begin(), primary_times.end(), t);
    const double empirical =
        static_cast<double>(below - primary_times.begin()) / static_cast<double>(n);
    const double exact = 0.5 * (-std::expm1(-t));
    worst = std::max(worst, std::abs(empirical - exact));
  }
  CHECK(worst <= 0.01);
}

TEST_CASE("inverse-CDF sampler recovers uniforms through the model CDF") {
  // mixed covariates: every primary-event row is pushed back through its own
  // conditional CDF; the result must be uniform regardless of eta
  const std::size_t n = 100000, p = 30;
  const FineGraySim sim =
      simulate_finegray({.n = n, .p = p, .density = 0.1, .seed = 37});
  std::vector<double> w;
  for (std::size_t i = 0; i < n; ++i) {
    if (sim.data.status()[i] != 1) continue;
    double xbeta = 0.0;
    for (std::size_t j = 0; j < p; ++j)
      xbeta += sim.data.covariate(i, j) * sim.true_beta1[j];
    const double eta = std::exp(xbeta);
    w.push_back(sub_cdf(sim.data.times()[i], eta, 0.5) / sub_mass(eta, 0.5));
  }
  REQUIRE(w.size() > 40000);
  CHECK(ks_stat(std::move(w), [](double u) { return u; }) < 0.01);
}

TEST_CASE("inverse-CDF sampler agrees with a rejection sampler") {
  // single always-on covariate so every row shares one known eta
  const std::size_t n = 30000;
  const FineGraySim sim = simulate_finegray(
      {.n = n, .p = 1, .density = 1.0, .beta_sparsity = 0.0, .seed = 41});
  const double eta = std::exp(sim.true_beta1[0]);

  std::vector<double> lib;
  for (std::size_t i = 0; i < n; ++i)
    if (sim.data.status()[i] == 1) lib.push_back(sim.data.times()[i]);

  std::mt19937_64 rng(99);
  std::vector<double> ref(lib.size());
  for (auto& t : ref) t = rejection_t1(rng, eta, 0.5);

  REQUIRE(lib.size() > 5000);
  CHECK(ks_two_sample(std::move(lib), std::move(ref)) < 0.025);
}

TEST_CASE("config domains are enforced") {
  CHECK_THROWS_AS(simulate_cox({.n = 10, .p = 2, .density = 1.5}), DomainError);
  CHECK_THROWS_AS(simulate_cox({.n = 10, .p = 2, .beta_sparsity = -0.1}),
                  DomainError);
  CHECK_THROWS_AS(simulate_finegray({.n = 10, .p = 2, .p_mix = 0.0}), DomainError);
  CHECK_THROWS_AS(simulate_finegray({.n = 10, .p = 2, .p_mix = 1.0}), DomainError);
  CHECK_THROWS_AS(
      simulate_cox({.n = 10, .p = 2, .seed = 1, .censoring_quantile = 1.0}),
      DomainError);
}
