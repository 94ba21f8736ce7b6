#include "survscan/censoring.hpp"

#include <algorithm>
#include <cmath>

namespace survscan {

CensoringCurve::CensoringCurve(std::vector<double> jump_times,
                               std::vector<double> value_after)
    : jump_times_(std::move(jump_times)), value_after_(std::move(value_after)) {
  if (jump_times_.size() != value_after_.size())
    throw DomainError("censoring curve: jump/value length mismatch");
  double prev_t = -1.0, prev_v = 1.0;
  for (std::size_t k = 0; k < jump_times_.size(); ++k) {
    const double t = jump_times_[k];
    const double v = value_after_[k];
    if (!(t > prev_t)) throw DomainError("censoring curve: jumps must ascend");
    if (!(v >= 0.0) || v > prev_v)
      throw DomainError("censoring curve: values must decrease within [0, 1]");
    prev_t = t;
    prev_v = v;
  }
}

double CensoringCurve::at(double t) const {
  // last jump <= t decides the value
  const auto it = std::upper_bound(jump_times_.begin(), jump_times_.end(), t);
  if (it == jump_times_.begin()) return 1.0;
  return value_after_[static_cast<std::size_t>(it - jump_times_.begin()) - 1];
}

double CensoringCurve::before(double t) const {
  // only jumps strictly below t count
  const auto it = std::lower_bound(jump_times_.begin(), jump_times_.end(), t);
  if (it == jump_times_.begin()) return 1.0;
  return value_after_[static_cast<std::size_t>(it - jump_times_.begin()) - 1];
}

CensoringCurve km_censoring(const SurvivalDataset& ds) {
  const auto& status = ds.status();
  const auto& times = ds.times();
  const auto& ends = ds.blocks().ends;

  std::vector<double> jumps, values;
  double surv = 1.0;
  // rows are sorted by decreasing time, so walk the blocks backwards to visit
  // event times in ascending order; everything at positions <= block end is
  // still at risk when that time is reached.
  for (std::size_t b = ends.size(); b-- > 0;) {
    const std::size_t end = ends[b];
    const std::size_t start = b == 0 ? 0 : ends[b - 1] + 1;
    std::size_t censored = 0, failed = 0;
    for (std::size_t i = start; i <= end; ++i)
      (status[i] == 0 ? censored : failed) += 1;
    if (censored == 0) continue;
    // subjects failing at this time leave before the censorings are counted
    const double at_risk = static_cast<double>(end + 1 - failed);
    surv *= 1.0 - static_cast<double>(censored) / at_risk;
    jumps.push_back(times[end]);
    values.push_back(surv);
  }
  return CensoringCurve(std::move(jumps), std::move(values));
}

IpcwWeights build_ipcw(const SurvivalDataset& ds, const CensoringCurve& curve) {
  const std::size_t n = ds.n();
  const auto& status = ds.status();
  const auto& times = ds.times();
  const auto& ends = ds.blocks().ends;

  IpcwWeights w;
  w.u.assign(n, 0.0);
  w.g.assign(n, 1.0);
  std::size_t start = 0;
  for (const std::size_t end : ends) {
    const double gb = curve.before(times[start]);
    for (std::size_t i = start; i <= end; ++i) {
      w.g[i] = gb;
      if (status[i] == 2) {
        if (!(gb > 0.0))
          throw DegenerateCurveError(
              "censoring curve vanishes before a competing event at time " +
              std::to_string(times[i]));
        w.u[i] = 1.0 / gb;
      }
    }
    start = end + 1;
  }
  return w;
}

IpcwWeights build_ipcw(const SurvivalDataset& ds) {
  return build_ipcw(ds, km_censoring(ds));
}

}  // namespace survscan
