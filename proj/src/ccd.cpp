#include "survscan/ccd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "survscan/errors.hpp"

namespace survscan {

namespace {

constexpr double kHalfwidthFloor = 1e-300;

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double penalty_value(const PenaltySpec& pen, std::span<const double> beta) {
  if (pen.kind == PenaltyKind::none) return 0.0;
  double acc = 0.0;
  for (std::size_t j = 0; j < beta.size(); ++j) {
    if (!pen.applies_to(j)) continue;
    if (pen.kind == PenaltyKind::l1)
      acc += pen.strength * std::abs(beta[j]);
    else
      acc += beta[j] * beta[j] / (2.0 * pen.strength);
  }
  return acc;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

void PenaltySpec::validate(std::size_t p) const {
  switch (kind) {
    case PenaltyKind::none:
      break;
    case PenaltyKind::l1:
      if (!std::isfinite(strength) || strength < 0.0)
        throw DomainError("l1 strength must be finite and >= 0");
      break;
    case PenaltyKind::l2:
      if (!std::isfinite(strength) || strength <= 0.0)
        throw DomainError("l2 strength must be finite and > 0");
      break;
  }
  for (const std::size_t j : exempt)
    if (j >= p)
      throw DomainError("exempt column " + std::to_string(j) + " outside [0, " +
                        std::to_string(p) + ")");
}

bool PenaltySpec::applies_to(std::size_t j) const {
  if (kind == PenaltyKind::none) return false;
  return std::find(exempt.begin(), exempt.end(), j) == exempt.end();
}

void FitConfig::validate() const {
  if (!std::isfinite(tolerance) || tolerance <= 0.0)
    throw DomainError("tolerance must be > 0");
  if (max_cycles == 0) throw DomainError("max_cycles must be >= 1");
  if (!std::isfinite(trust_init) || trust_init <= 0.0)
    throw DomainError("trust_init must be > 0");
  if (recompute_interval == 0) throw DomainError("recompute_interval must be >= 1");
  plan.validate();
}

StepOutcome coordinate_step(double beta_j, const GradHess& gh,
                            const PenaltySpec& penalty, bool penalized,
                            double halfwidth) {
  double geff = gh.gradient;
  double heff = gh.hessian;
  bool at_zero_l1 = false;
  if (penalized) {
    switch (penalty.kind) {
      case PenaltyKind::l2:
        geff -= beta_j / penalty.strength;
        heff -= 1.0 / penalty.strength;
        break;
      case PenaltyKind::l1:
        if (beta_j != 0.0)
          geff -= penalty.strength * sgn(beta_j);
        else
          at_zero_l1 = true;
        break;
      case PenaltyKind::none:
        break;
    }
  }

  StepOutcome out;
  out.new_beta = beta_j;
  out.new_halfwidth = halfwidth;

  if (at_zero_l1) {
    // both one-sided derivatives of ll - gamma|b| at 0 are <= 0 unless the
    // plain gradient beats gamma; otherwise stay parked at zero
    if (std::abs(geff) <= penalty.strength) {
      out.new_halfwidth = std::max(halfwidth / 2.0, kHalfwidthFloor);
      return out;
    }
    geff -= penalty.strength * sgn(geff);
  }

  if (!(heff < 0.0)) {
    if (geff != 0.0) {
      out.skipped = true;  // sloped but flat; keep the halfwidth as-is
      return out;
    }
    out.new_halfwidth = std::max(halfwidth / 2.0, kHalfwidthFloor);
    return out;
  }

  double raw = -geff / heff;
  // an l1 step may not cross zero: park exactly on it, before the trust clip
  if (penalized && penalty.kind == PenaltyKind::l1 && beta_j != 0.0 &&
      sgn(beta_j + raw) != sgn(beta_j))
    raw = -beta_j;

  const double applied = sgn(raw) * std::min(std::abs(raw), halfwidth);
  out.applied = applied;
  out.new_beta = beta_j + applied;
  out.new_halfwidth =
      std::max({2.0 * std::abs(applied), halfwidth / 2.0, kHalfwidthFloor});
  return out;
}

FitResult fit_with_engine(Engine& eng, const PenaltySpec& penalty,
                          const FitConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t p = eng.data().p();
  penalty.validate(p);
  config.validate();
  eng.load_beta(std::vector<double>(p, 0.0));

  FitResult res;
  std::vector<double> halfwidth(p, config.trust_init);
  std::vector<char> penalized(p);
  for (std::size_t j = 0; j < p; ++j) penalized[j] = penalty.applies_to(j) ? 1 : 0;

  const auto objective = [&]() {
    return eng.log_likelihood() - penalty_value(penalty, eng.beta());
  };

  double prev = objective();
  res.objective_trace.push_back(prev);
  res.converged = p == 0;

  for (std::size_t cycle = 1; !res.converged && cycle <= config.max_cycles;
       ++cycle) {
    for (std::size_t j = 0; j < p; ++j) {
      const auto g0 = std::chrono::steady_clock::now();
      const GradHess gh = eng.grad_hessian(j);
      res.grad_hess_seconds += seconds_since(g0);
      const StepOutcome step =
          coordinate_step(eng.beta()[j], gh, penalty, penalized[j] != 0,
                          halfwidth[j]);
      if (step.skipped) {
        ++res.skipped_steps;
        continue;
      }
      if (step.applied != 0.0) eng.update_xbeta_sparse(j, step.applied);
      halfwidth[j] = step.new_halfwidth;
    }
    res.cycles = cycle;
    const double obj = objective();
    res.objective_trace.push_back(obj);
    if (obj < prev - 1e-10) ++res.monotonicity_violations;
    if (std::abs(obj - prev) / std::max(1.0, std::abs(obj)) < config.tolerance)
      res.converged = true;
    prev = obj;
  }

  res.beta.assign(eng.beta().begin(), eng.beta().end());
  res.objective = prev;
  res.nonzero_count = static_cast<std::size_t>(
      std::count_if(res.beta.begin(), res.beta.end(),
                    [](double b) { return b != 0.0; }));
  res.wall_seconds = seconds_since(t0);
  return res;
}

FitResult fit(const SurvivalDataset& ds, Model model, const PenaltySpec& penalty,
              const FitConfig& config) {
  config.validate();
  Engine eng(ds, model, config.plan, config.recompute_interval);
  return fit_with_engine(eng, penalty, config);
}

}  // namespace survscan
