#include "survscan/crossval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numeric>
#include <random>
#include <thread>

#include "survscan/errors.hpp"
#include "survscan/util.hpp"

namespace survscan {

namespace {

// Runs body(0..count-1) on `workers` threads pulling from an atomic counter.
// Each task writes only its own slot, so scheduling cannot affect the merged
// result.  Non-library exceptions are rethrown in task order after the join.
template <typename Body>
void run_tasks(std::uint32_t workers, std::size_t count, const Body& body) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> boom(count);
  const std::size_t nthreads = std::min<std::size_t>(workers, count);
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (std::size_t w = 0; w < nthreads; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          boom[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : boom)
    if (e) std::rethrow_exception(e);
}

std::vector<std::uint32_t> fold_positions(const std::vector<std::uint32_t>& fold_of,
                                          std::uint32_t fold, bool held_out) {
  std::vector<std::uint32_t> pos;
  for (std::uint32_t i = 0; i < fold_of.size(); ++i)
    if ((fold_of[i] == fold) == held_out) pos.push_back(i);
  return pos;
}

struct ReplicateOutcome {
  std::vector<double> fold_loglik;  // one value per fold, in fold order
  bool failed = false;
};

}  // namespace

void CVConfig::validate() const {
  if (folds < 2) throw DomainError("cross-validation needs at least 2 folds");
  if (repetitions < 1) throw DomainError("repetitions must be at least 1");
  if (parallel_replicates < 1)
    throw DomainError("parallel_replicates must be at least 1");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || !std::isfinite(grid[i]))
      throw DomainError("grid values must be positive and finite");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw DomainError("grid must be strictly ascending");
  }
}

std::vector<std::uint32_t> fold_assignment(std::size_t n, std::uint32_t folds,
                                           std::uint64_t seed,
                                           std::uint64_t grid_index,
                                           std::uint64_t replicate) {
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::mt19937_64 rng(derive_seed(seed, grid_index, replicate));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::uint32_t> fold_of(n);
  for (std::size_t i = 0; i < n; ++i)
    fold_of[order[i]] = static_cast<std::uint32_t>(i % folds);
  return fold_of;
}

double held_out_loglik(const SurvivalDataset& ds,
                       const std::vector<std::uint32_t>& fold_of,
                       std::uint32_t fold, Model model,
                       const std::vector<double>& beta, const ChunkPlan& plan) {
  const std::vector<std::uint32_t> pos = fold_positions(fold_of, fold, true);
  const SurvivalDataset part = ds.subset_rows(pos, /*fresh_row_ids=*/true);
  Engine eng(part, model, plan);
  eng.load_beta(beta);
  return eng.log_likelihood();
}

double gamma_max(const SurvivalDataset& ds, Model model, const ChunkPlan& plan) {
  Engine eng(ds, model, plan);
  double top = 0.0;
  for (std::size_t j = 0; j < ds.p(); ++j)
    top = std::max(top, std::abs(eng.grad_hessian(j).gradient));
  return top;
}

std::vector<double> auto_grid(double top) {
  if (!(top > 0.0) || !std::isfinite(top))
    throw DomainError("cannot derive a strength grid: max |g'(0)| is not positive");
  std::vector<double> grid(10);
  for (int i = 0; i < 10; ++i)
    grid[i] = top * std::pow(1000.0, (i - 9) / 9.0);
  grid.front() = top / 1000.0;
  grid.back() = top;
  return grid;
}

CVResult cross_validate(const SurvivalDataset& ds, Model model,
                        PenaltyKind kind, const CVConfig& cv,
                        const FitConfig& fit_config) {
  cv.validate();
  fit_config.validate();
  if (cv.folds > ds.n())
    throw DomainError("more folds than observations");

  const std::vector<double> grid =
      cv.grid.empty() ? auto_grid(gamma_max(ds, model, fit_config.plan)) : cv.grid;
  const std::size_t n_grid = grid.size();
  const std::size_t n_tasks = n_grid * cv.repetitions;

  // Every fold of every partition must keep at least one primary event, both
  // to fit on the k-1 complement and to score the fold itself.  Checked up
  // front so the failure is an error, not a quietly dropped replicate.
  for (std::size_t task = 0; task < n_tasks; ++task) {
    const std::uint64_t gi = task / cv.repetitions;
    const std::uint64_t t = task % cv.repetitions;
    const std::vector<std::uint32_t> fold_of =
        fold_assignment(ds.n(), cv.folds, cv.seed, gi, t);
    std::vector<std::uint32_t> events(cv.folds, 0);
    for (std::size_t i = 0; i < ds.n(); ++i)
      if (ds.status()[i] == 1) ++events[fold_of[i]];
    for (std::uint32_t f = 0; f < cv.folds; ++f)
      if (events[f] == 0)
        throw EmptyFoldError("fold " + std::to_string(f) + " of replicate " +
                             std::to_string(t) + " holds no events");
  }

  std::vector<ReplicateOutcome> slots(n_tasks);
  run_tasks(cv.parallel_replicates, n_tasks, [&](std::size_t task) {
    const std::uint64_t gi = task / cv.repetitions;
    const std::uint64_t t = task % cv.repetitions;
    ReplicateOutcome& out = slots[task];
    try {
      const std::vector<std::uint32_t> fold_of =
          fold_assignment(ds.n(), cv.folds, cv.seed, gi, t);
      PenaltySpec penalty{kind, grid[gi], {}};
      for (std::uint32_t f = 0; f < cv.folds; ++f) {
        const std::vector<std::uint32_t> train =
            fold_positions(fold_of, f, false);
        const SurvivalDataset part = ds.subset_rows(train, /*fresh_row_ids=*/true);
        const FitResult fr = fit(part, model, penalty, fit_config);
        out.fold_loglik.push_back(
            held_out_loglik(ds, fold_of, f, model, fr.beta, fit_config.plan));
      }
    } catch (const Error&) {
      out.fold_loglik.clear();
      out.failed = true;
    }
  });

  CVResult result;
  result.points.resize(n_grid);
  for (std::size_t gi = 0; gi < n_grid; ++gi) {
    CVPoint& pt = result.points[gi];
    pt.strength = grid[gi];
    double sum = 0.0;
    std::vector<double> values;
    for (std::uint32_t t = 0; t < cv.repetitions; ++t) {
      const ReplicateOutcome& out = slots[gi * cv.repetitions + t];
      if (out.failed) {
        ++result.failed_replicates;
        continue;
      }
      for (double v : out.fold_loglik) {
        values.push_back(v);
        sum += v;
      }
    }
    pt.evaluations = static_cast<std::uint32_t>(values.size());
    if (!values.empty()) pt.mean_loglik = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - pt.mean_loglik) * (v - pt.mean_loglik);
      pt.spread = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
  }

  std::size_t best = n_grid;
  for (std::size_t gi = 0; gi < n_grid; ++gi) {
    if (result.points[gi].evaluations == 0) continue;
    if (best == n_grid || result.points[gi].mean_loglik > result.points[best].mean_loglik)
      best = gi;
  }
  if (best == n_grid)
    throw DomainError("every cross-validation replicate failed; nothing to select");

  result.selected_value = grid[best];
  result.final_fit =
      fit(ds, model, PenaltySpec{kind, result.selected_value, {}}, fit_config);
  return result;
}

BootstrapInterval bootstrap_interval(const SurvivalDataset& ds, Model model,
                                     const PenaltySpec& penalty,
                                     const FitConfig& fit_config,
                                     std::size_t coefficient_index,
                                     std::uint32_t resamples,
                                     std::uint64_t seed) {
  penalty.validate(ds.p());
  fit_config.validate();
  if (resamples < 100)
    throw DomainError("bootstrap needs at least 100 resamples");
  if (coefficient_index >= ds.p())
    throw IndexError("coefficient index out of range");
  if (ds.n() == 0) throw DomainError("bootstrap of an empty dataset");

  const auto n = static_cast<std::uint32_t>(ds.n());
  BootstrapInterval out;
  std::vector<double> draws;
  draws.reserve(resamples);
  std::vector<std::uint32_t> idx(n);
  for (std::uint32_t b = 0; b < resamples; ++b) {
    std::mt19937_64 rng(derive_seed(seed, 0, b));
    std::uniform_int_distribution<std::uint32_t> pick(0, n - 1);
    for (auto& i : idx) i = pick(rng);
    std::sort(idx.begin(), idx.end());
    try {
      const SurvivalDataset part = ds.subset_rows(idx, /*fresh_row_ids=*/true);
      const FitResult fr = fit(part, model, penalty, fit_config);
      draws.push_back(fr.beta[coefficient_index]);
    } catch (const Error&) {
      ++out.failed_resamples;
    }
  }
  if (out.failed_resamples * 10 > resamples)
    throw DomainError("more than 10% of bootstrap resamples failed to fit");

  std::sort(draws.begin(), draws.end());
  out.lower = quantile_sorted(draws, 0.025);
  out.upper = quantile_sorted(draws, 0.975);
  return out;
}

}  // namespace survscan
