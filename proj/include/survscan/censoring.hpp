#pragma once

#include <vector>

#include "survscan/dataset.hpp"
#include "survscan/errors.hpp"

namespace survscan {

// Kaplan-Meier estimate of the censoring survival function G.  The curve is a
// right-continuous step function: at(t) includes a jump located exactly at t,
// before(t) is the left limit G(t-).  Outside the observed range the curve is
// 1 before the first jump and flat after the last one.
class CensoringCurve {
 public:
  CensoringCurve() = default;
  CensoringCurve(std::vector<double> jump_times, std::vector<double> value_after);

  double at(double t) const;
  double before(double t) const;

  const std::vector<double>& jump_times() const { return jump_times_; }
  const std::vector<double>& values_after() const { return value_after_; }

 private:
  std::vector<double> jump_times_;   // strictly ascending
  std::vector<double> value_after_;  // G right after the matching jump
};

// Censoring curve of a dataset.  Ties between failures and censorings at the
// same time are broken "failures first": subjects failing at s are already out
// of the censoring risk set when the censorings at s are counted.
CensoringCurve km_censoring(const SurvivalDataset& ds);

// Per-row inverse-probability-of-censoring weights, in dataset (sorted) order:
//   u[r] = 1 / G(Y_r-)  when row r ended with the competing event, else 0
//   g[i] = G(Y_i-)       for every row
// The ratio g[i] * u[r] is then the weight of subject r inside the risk set of
// an event at Y_i < Y_r's horizon.  Throws DegenerateCurveError when a compet-
// ing-event row needs 1/0.
struct IpcwWeights {
  std::vector<double> u;
  std::vector<double> g;
};

IpcwWeights build_ipcw(const SurvivalDataset& ds, const CensoringCurve& curve);
IpcwWeights build_ipcw(const SurvivalDataset& ds);

}  // namespace survscan
