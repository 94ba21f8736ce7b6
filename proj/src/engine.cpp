#include "survscan/engine.hpp"

#include <algorithm>
#include <cmath>

#include "survscan/scan_kernels.hpp"

namespace survscan {

namespace {

constexpr double kXbetaBound = 700.0;  // exp() stays finite with slack to 709

// Lane source over (exp(xbeta), exp(xbeta)*x_j, exp(xbeta)*x_j^2) that walks a
// stored column instead of materializing the three vectors.
struct ColumnSource {
  const double* e;
  const SparseColumn* col;

  struct Walker {
    const double* e;
    const SparseColumn* col;
    std::size_t pos;
    std::size_t cursor;  // next stored nonzero (sparse kinds)

    detail::Lane3 next() {
      const double ev = *e++;
      double x = 0.0;
      if (col->kind == ColumnKind::dense) {
        x = col->values[pos];
      } else if (cursor < col->indices.size() && col->indices[cursor] == pos) {
        x = col->kind == ColumnKind::sparse_indicator ? 1.0 : col->values[cursor];
        ++cursor;
      }
      ++pos;
      const double ex = ev * x;
      return {ev, ex, ex * x};
    }
  };

  struct RWalker {
    const double* e;
    const SparseColumn* col;
    std::size_t pos;
    std::size_t cursor;  // count of stored nonzeros strictly below pos

    detail::Lane3 prev() {
      const double ev = *--e;
      --pos;
      double x = 0.0;
      if (col->kind == ColumnKind::dense) {
        x = col->values[pos];
      } else if (cursor > 0 && col->indices[cursor - 1] == pos) {
        --cursor;
        x = col->kind == ColumnKind::sparse_indicator ? 1.0 : col->values[cursor];
      }
      const double ex = ev * x;
      return {ev, ex, ex * x};
    }
  };

  std::size_t skip_to(std::size_t k) const {
    if (col->kind == ColumnKind::dense) return 0;
    return static_cast<std::size_t>(
        std::lower_bound(col->indices.begin(), col->indices.end(),
                         static_cast<std::uint32_t>(k)) -
        col->indices.begin());
  }
  Walker forward_from(std::size_t k) const { return {e + k, col, k, skip_to(k)}; }
  RWalker backward_from(std::size_t end) const {
    return {e + end, col, end, skip_to(end)};
  }
};

// x_j scattered over the event mask without densifying the column.
double column_event_dot(const SurvivalDataset& ds, const SparseColumn& col) {
  const auto& mask = ds.event_mask();
  double acc = 0.0;
  switch (col.kind) {
    case ColumnKind::dense:
      for (std::size_t i = 0; i < col.length; ++i) acc += mask[i] * col.values[i];
      break;
    case ColumnKind::sparse_indicator:
      for (const std::uint32_t i : col.indices) acc += mask[i];
      break;
    case ColumnKind::sparse_valued:
      for (std::size_t k = 0; k < col.indices.size(); ++k)
        acc += mask[col.indices[k]] * col.values[k];
      break;
  }
  return acc;
}

}  // namespace

std::vector<double> precompute_fixed_terms(const SurvivalDataset& ds) {
  std::vector<double> out(ds.p());
  for (std::size_t j = 0; j < ds.p(); ++j)
    out[j] = column_event_dot(ds, ds.columns()[j]);
  return out;
}

Engine::Engine(const SurvivalDataset& ds, Model model, ChunkPlan plan,
               std::size_t recompute_interval)
    : ds_(&ds), model_(model), plan_(plan),
      recompute_interval_(recompute_interval) {
  plan_.validate();
  if (recompute_interval_ == 0)
    throw DomainError("recompute_interval must be at least 1");
  if (model_ == Model::cox && ds.has_competing())
    throw DomainError(
        "cox model cannot ingest competing-event rows; fit fine_gray instead");
  if (model_ == Model::fine_gray) ipcw_ = build_ipcw(ds);
  beta_.assign(ds.p(), 0.0);
  xbeta_.assign(ds.n(), 0.0);
  exp_xbeta_.assign(ds.n(), 1.0);
  fixed_terms_ = precompute_fixed_terms(ds);
}

void Engine::load_beta(std::span<const double> beta) {
  if (beta.size() != ds_->p())
    throw InvalidColumnError("load_beta: expected " + std::to_string(ds_->p()) +
                             " coefficients, got " + std::to_string(beta.size()));
  for (const double b : beta)
    if (!std::isfinite(b)) throw DomainError("load_beta: non-finite coefficient");

  std::vector<double> fresh(ds_->n(), 0.0);
  for (std::size_t j = 0; j < ds_->p(); ++j) {
    const double bj = beta[j];
    if (bj == 0.0) continue;
    const SparseColumn& col = ds_->columns()[j];
    switch (col.kind) {
      case ColumnKind::dense:
        for (std::size_t i = 0; i < col.length; ++i) fresh[i] += bj * col.values[i];
        break;
      case ColumnKind::sparse_indicator:
        for (const std::uint32_t i : col.indices) fresh[i] += bj;
        break;
      case ColumnKind::sparse_valued:
        for (std::size_t k = 0; k < col.indices.size(); ++k)
          fresh[col.indices[k]] += bj * col.values[k];
        break;
    }
  }
  for (const double v : fresh)
    if (std::abs(v) > kXbetaBound)
      throw OverflowError("load_beta: |x'beta| exceeds " +
                          std::to_string(kXbetaBound));

  beta_.assign(beta.begin(), beta.end());
  xbeta_ = std::move(fresh);
  exp_xbeta_.resize(xbeta_.size());
  for (std::size_t i = 0; i < xbeta_.size(); ++i) exp_xbeta_[i] = std::exp(xbeta_[i]);
}

void Engine::refresh() {
  std::vector<double> beta(beta_);  // load_beta re-validates and rebuilds
  load_beta(beta);
  ++refreshes_;
}

void Engine::update_xbeta_sparse(std::size_t column, double delta) {
  if (column >= ds_->p())
    throw InvalidColumnError("update: column " + std::to_string(column) +
                             " outside [0, " + std::to_string(ds_->p()) + ")");
  if (!std::isfinite(delta)) throw DomainError("update: non-finite delta");
  if (delta == 0.0) return;

  const SparseColumn& col = ds_->columns()[column];

  // validate every touched entry before mutating anything
  const auto check = [&](std::size_t i, double x) {
    if (std::abs(xbeta_[i] + x * delta) > kXbetaBound)
      throw OverflowError("update: |x'beta| would exceed " +
                          std::to_string(kXbetaBound) + " at row " +
                          std::to_string(i));
  };
  switch (col.kind) {
    case ColumnKind::dense:
      for (std::size_t i = 0; i < col.length; ++i)
        if (col.values[i] != 0.0) check(i, col.values[i]);
      break;
    case ColumnKind::sparse_indicator:
      for (const std::uint32_t i : col.indices) check(i, 1.0);
      break;
    case ColumnKind::sparse_valued:
      for (std::size_t k = 0; k < col.indices.size(); ++k)
        check(col.indices[k], col.values[k]);
      break;
  }

  switch (col.kind) {
    case ColumnKind::dense:
      for (std::size_t i = 0; i < col.length; ++i)
        if (col.values[i] != 0.0) {
          xbeta_[i] += col.values[i] * delta;
          exp_xbeta_[i] = std::exp(xbeta_[i]);
        }
      break;
    case ColumnKind::sparse_indicator: {
      const double factor = std::exp(delta);
      for (const std::uint32_t i : col.indices) {
        xbeta_[i] += delta;
        exp_xbeta_[i] *= factor;
      }
      break;
    }
    case ColumnKind::sparse_valued:
      for (std::size_t k = 0; k < col.indices.size(); ++k) {
        const std::uint32_t i = col.indices[k];
        xbeta_[i] += col.values[k] * delta;
        exp_xbeta_[i] = std::exp(xbeta_[i]);
      }
      break;
  }
  beta_[column] += delta;
  if (++accepted_ % recompute_interval_ == 0) refresh();
}

GradHess Engine::finish(std::size_t column, GradHessSums sums) const {
  GradHess out;
  out.fixed_term = fixed_terms_[column];
  out.gradient = out.fixed_term - sums.grad_sum;
  out.hessian = -sums.hess_sum;
  if (out.hessian > 0.0) out.hessian = 0.0;  // negated variance, up to rounding
  if (!std::isfinite(out.gradient) || !std::isfinite(out.hessian))
    throw NonPositiveDenominatorError(
        "derivatives overflowed; risk-set sums are not finite");
  return out;
}

GradHess Engine::grad_hessian(std::size_t column) {
  if (column >= ds_->p())
    throw InvalidColumnError("grad_hessian: column " + std::to_string(column) +
                             " outside [0, " + std::to_string(ds_->p()) + ")");
  const ColumnSource src{exp_xbeta_.data(), &ds_->columns()[column]};
  const bool weighted = model_ == Model::fine_gray && ds_->has_competing();
  const GradHessSums sums = detail::fused_grad_hess(
      src, ds_->n(), weighted ? ipcw_.u.data() : nullptr,
      weighted ? ipcw_.g.data() : nullptr, ds_->blocks(), plan_);
  return finish(column, sums);
}

GradHess Engine::grad_hessian_separated(std::size_t column) {
  if (column >= ds_->p())
    throw InvalidColumnError("grad_hessian: column " + std::to_string(column) +
                             " outside [0, " + std::to_string(ds_->p()) + ")");
  const std::size_t n = ds_->n();
  const SparseColumn& col = ds_->columns()[column];

  // materialize the three lanes
  scratch_.a.assign(exp_xbeta_.begin(), exp_xbeta_.end());
  scratch_.b.assign(n, 0.0);
  scratch_.c.assign(n, 0.0);
  const auto put = [&](std::size_t i, double x) {
    const double ex = exp_xbeta_[i] * x;
    scratch_.b[i] = ex;
    scratch_.c[i] = ex * x;
  };
  switch (col.kind) {
    case ColumnKind::dense:
      for (std::size_t i = 0; i < n; ++i) put(i, col.values[i]);
      break;
    case ColumnKind::sparse_indicator:
      for (const std::uint32_t i : col.indices) put(i, 1.0);
      break;
    case ColumnKind::sparse_valued:
      for (std::size_t k = 0; k < col.indices.size(); ++k)
        put(col.indices[k], col.values[k]);
      break;
  }

  const Tuple3Buffer pre = tuple3_scan(scratch_, ScanDirection::forward, plan_);
  const bool weighted = model_ == Model::fine_gray && ds_->has_competing();
  Tuple3Buffer suf;
  if (weighted) {
    Tuple3Buffer wl;
    wl.a.resize(n);
    wl.b.resize(n);
    wl.c.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double ui = ipcw_.u[i];
      wl.a[i] = ui * scratch_.a[i];
      wl.b[i] = ui * scratch_.b[i];
      wl.c[i] = ui * scratch_.c[i];
    }
    suf = tuple3_scan(wl, ScanDirection::backward, plan_);
  }

  // elementwise transform at each tied-block end, then the two reductions.
  // Reduction partials are grouped by the chunk holding each block end (the
  // same grouping reduce_sum and the fused kernel use), so both derivative
  // paths add the identical terms in the identical order.
  const auto& blocks = ds_->blocks();
  GradHessSums sums;
  bool bad = false;
  const std::size_t nchunks = plan_.chunks_for(n);
  std::size_t cur = 0;
  for (std::size_t c = 0; c < nchunks && !bad; ++c) {
    const std::size_t chunk_end = detail::chunk_range(c, plan_.chunk_size, n).end;
    double lg = 0.0, lh = 0.0;
    for (; cur < blocks.ends.size() && blocks.ends[cur] < chunk_end; ++cur) {
      const double cnt = blocks.event_count[cur];
      if (cnt <= 0.0) continue;
      const std::size_t end = blocks.ends[cur];
      double den = pre.a[end], n1 = pre.b[end], n2 = pre.c[end];
      if (weighted && end + 1 < n) {
        const double gi = ipcw_.g[end];
        den += gi * suf.a[end + 1];
        n1 += gi * suf.b[end + 1];
        n2 += gi * suf.c[end + 1];
      }
      if (!(den > 0.0)) {
        bad = true;
        break;
      }
      const double G = n1 / den;
      const double H = n2 / den;
      lg += cnt * G;
      lh += cnt * (H - G * G);
    }
    sums.grad_sum += lg;
    sums.hess_sum += lh;
  }
  if (bad)
    throw NonPositiveDenominatorError(
        "separated path: accumulated risk-set denominator <= 0");
  return finish(column, sums);
}

double Engine::log_likelihood() const {
  const bool weighted = model_ == Model::fine_gray && ds_->has_competing();
  const std::span<const double> u =
      weighted ? std::span<const double>(ipcw_.u) : std::span<const double>();
  const std::span<const double> g =
      weighted ? std::span<const double>(ipcw_.g) : std::span<const double>();
  const double fixed = masked_dot(ds_->event_mask(), xbeta_, plan_);
  const double logden =
      fused_log_denominator(exp_xbeta_, u, g, ds_->blocks(), plan_);
  return fixed - logden;
}

}  // namespace survscan
