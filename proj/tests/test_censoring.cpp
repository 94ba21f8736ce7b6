#include "survscan/censoring.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "survscan/dataset.hpp"
#include "survscan/errors.hpp"

using namespace survscan;

namespace {

SurvivalDataset make_ds(std::vector<double> times, std::vector<int> status) {
  RawData raw;
  raw.n_cols = 0;
  for (std::size_t i = 0; i < times.size(); ++i)
    raw.obs.push_back({times[i], status[i], static_cast<std::int64_t>(i)});
  return sort_and_block(std::move(raw));
}

// Direct O(N^2) reference: walk the distinct times in ascending order and
// count risk sets by rescanning the whole sample each time.
struct BruteCurve {
  std::vector<double> jumps, values;

  explicit BruteCurve(const SurvivalDataset& ds) {
    std::set<double> distinct(ds.times().begin(), ds.times().end());
    double surv = 1.0;
    for (const double s : distinct) {
      std::size_t at_or_above = 0, failed_here = 0, censored_here = 0;
      for (std::size_t i = 0; i < ds.n(); ++i) {
        if (ds.times()[i] >= s) ++at_or_above;
        if (ds.times()[i] == s && ds.status()[i] != 0) ++failed_here;
        if (ds.times()[i] == s && ds.status()[i] == 0) ++censored_here;
      }
      if (censored_here == 0) continue;
      surv *= 1.0 - static_cast<double>(censored_here) /
                        static_cast<double>(at_or_above - failed_here);
      jumps.push_back(s);
      values.push_back(surv);
    }
  }

  double before(double t) const {
    double v = 1.0;
    for (std::size_t k = 0; k < jumps.size(); ++k)
      if (jumps[k] < t) v = values[k];
    return v;
  }
};

SurvivalDataset random_survival(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> tick(1, 12);  // heavy ties
  std::discrete_distribution<int> st({0.35, 0.40, 0.25});
  std::vector<double> times(n);
  std::vector<int> status(n);
  for (std::size_t i = 0; i < n; ++i) {
    times[i] = 0.5 * tick(rng);
    status[i] = st(rng);
  }
  return make_ds(std::move(times), std::move(status));
}

}  // namespace

TEST_CASE("single censoring between two failures") {
  const SurvivalDataset ds = make_ds({3.0, 2.0, 1.0}, {1, 0, 1});
  const CensoringCurve curve = km_censoring(ds);

  REQUIRE(curve.jump_times() == std::vector<double>{2.0});
  CHECK(curve.values_after() == std::vector<double>{0.5});
  CHECK(curve.at(1.9) == 1.0);
  CHECK(curve.at(2.0) == 0.5);
  CHECK(curve.at(10.0) == 0.5);
  CHECK(curve.before(2.0) == 1.0);
  CHECK(curve.before(2.5) == 0.5);

  const IpcwWeights w = build_ipcw(ds, curve);
  CHECK(w.g == std::vector<double>{0.5, 1.0, 1.0});  // sorted times 3, 2, 1
  CHECK(w.u == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("all-censored sample gives the classic product") {
  const std::size_t n = 10;
  std::vector<double> times(n);
  std::vector<int> status(n, 0);
  for (std::size_t i = 0; i < n; ++i) times[i] = static_cast<double>(i + 1);
  const SurvivalDataset ds = make_ds(std::move(times), std::move(status));
  const CensoringCurve curve = km_censoring(ds);

  REQUIRE(curve.jump_times().size() == n);
  // with distinct times, G after the k-th smallest is (n-k)/n
  for (std::size_t k = 1; k <= n; ++k)
    CHECK(curve.at(static_cast<double>(k)) ==
          doctest::Approx(static_cast<double>(n - k) / n).epsilon(1e-15));
}

TEST_CASE("failures leave the censoring risk set first on ties") {
  // at t=1: two rows, one failure and one censoring -> risk set for the
  // censoring is 3 total at 1 minus 1 failure = 2 (the t=2 row plus itself)
  const SurvivalDataset ds = make_ds({2.0, 1.0, 1.0, 1.0}, {0, 1, 0, 2});
  const CensoringCurve curve = km_censoring(ds);
  REQUIRE(curve.jump_times().size() == 2);
  CHECK(curve.jump_times() == std::vector<double>{1.0, 2.0});
  CHECK(curve.values_after()[0] == 0.5);  // 1 - 1/(4 - 2)
  CHECK(curve.values_after()[1] == 0.0);  // the final row always censors to 0

  const IpcwWeights w = build_ipcw(ds, curve);
  // the competing event at t=1 uses G(1-) = 1, untouched by its own tie
  CHECK(w.u == std::vector<double>{0.0, 0.0, 0.0, 1.0});
  CHECK(w.g == std::vector<double>{0.5, 1.0, 1.0, 1.0});
}

TEST_CASE("matches the rescan reference on random tied data") {
  for (std::uint64_t seed : {11u, 12u, 13u, 14u}) {
    const SurvivalDataset ds = random_survival(seed, 250);
    const CensoringCurve curve = km_censoring(ds);
    const BruteCurve brute(ds);

    REQUIRE(curve.jump_times() == brute.jumps);
    CHECK(curve.values_after() == brute.values);
    for (const double t : {0.25, 0.5, 1.75, 3.0, 6.0, 100.0}) {
      CHECK(curve.before(t) == brute.before(t));
    }

    const IpcwWeights w = build_ipcw(ds, curve);
    for (std::size_t i = 0; i < ds.n(); ++i) {
      CHECK(w.g[i] == brute.before(ds.times()[i]));
      if (ds.status()[i] == 2)
        CHECK(w.u[i] == 1.0 / brute.before(ds.times()[i]));
      else
        CHECK(w.u[i] == 0.0);
    }
  }
}

TEST_CASE("weights only depend on time order, not scale") {
  const SurvivalDataset a = random_survival(77, 300);
  std::vector<double> scaled(a.times());
  for (double& t : scaled) t *= 1000.0;
  std::vector<int> status(a.status());
  // a's rows are already sorted; re-enter them with fresh ids in that order
  const SurvivalDataset b = make_ds(std::move(scaled), std::move(status));

  const IpcwWeights wa = build_ipcw(a);
  const IpcwWeights wb = build_ipcw(b);
  CHECK(wa.u == wb.u);
  CHECK(wa.g == wb.g);
}

TEST_CASE("no censored rows means a flat curve and unit weights") {
  const SurvivalDataset ds = make_ds({4.0, 3.0, 2.0, 1.0}, {1, 2, 1, 2});
  const CensoringCurve curve = km_censoring(ds);
  CHECK(curve.jump_times().empty());
  const IpcwWeights w = build_ipcw(ds, curve);
  CHECK(w.g == std::vector<double>(4, 1.0));
  CHECK(w.u == std::vector<double>{0.0, 1.0, 0.0, 1.0});
}

TEST_CASE("a vanished curve under a competing event is an error") {
  const SurvivalDataset ds = make_ds({3.0, 1.0}, {2, 0});
  const CensoringCurve dead({0.5}, {0.0});
  CHECK_THROWS_AS(build_ipcw(ds, dead), DegenerateCurveError);
  // the estimate itself never dies early: anything outliving the censoring
  // time keeps its risk set positive, so the genuine weights are finite
  const IpcwWeights w = build_ipcw(ds);
  CHECK(w.u == std::vector<double>{2.0, 0.0});
}

TEST_CASE("curve constructor rejects malformed steps") {
  CHECK_THROWS_AS(CensoringCurve({1.0, 1.0}, {0.5, 0.25}), DomainError);
  CHECK_THROWS_AS(CensoringCurve({2.0, 1.0}, {0.5, 0.25}), DomainError);
  CHECK_THROWS_AS(CensoringCurve({1.0, 2.0}, {0.5, 0.75}), DomainError);
  CHECK_THROWS_AS(CensoringCurve({1.0}, {1.5}), DomainError);
  CHECK_THROWS_AS(CensoringCurve({1.0}, {0.5, 0.25}), DomainError);
}

TEST_CASE("empty dataset yields an empty curve") {
  const SurvivalDataset ds = sort_and_block(RawData{});
  const CensoringCurve curve = km_censoring(ds);
  CHECK(curve.jump_times().empty());
  CHECK(curve.at(1.0) == 1.0);
  const IpcwWeights w = build_ipcw(ds, curve);
  CHECK(w.u.empty());
  CHECK(w.g.empty());
}
