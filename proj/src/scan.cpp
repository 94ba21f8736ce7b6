#include "survscan/scan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "survscan/scan_kernels.hpp"

namespace survscan {

using detail::chunk_range;
using detail::for_each_chunk;

// ---------------------------------------------------------------------------
// TiedBlocks
// ---------------------------------------------------------------------------

TiedBlocks TiedBlocks::from_mask(std::span<const double> event_mask,
                                 std::span<const std::size_t> block_ends) {
  TiedBlocks tb;
  tb.ends.assign(block_ends.begin(), block_ends.end());
  tb.event_count.resize(tb.ends.size(), 0.0);
  std::size_t start = 0;
  for (std::size_t bi = 0; bi < tb.ends.size(); ++bi) {
    double cnt = 0.0;
    for (std::size_t k = start; k <= tb.ends[bi]; ++k) cnt += event_mask[k];
    tb.event_count[bi] = cnt;
    start = tb.ends[bi] + 1;
  }
  tb.validate(event_mask.size());
  return tb;
}

TiedBlocks TiedBlocks::singletons(std::span<const double> event_mask) {
  TiedBlocks tb;
  tb.ends.resize(event_mask.size());
  std::iota(tb.ends.begin(), tb.ends.end(), std::size_t{0});
  tb.event_count.assign(event_mask.begin(), event_mask.end());
  return tb;
}

void TiedBlocks::validate(std::size_t n) const {
  if (ends.size() != event_count.size())
    throw DomainError("TiedBlocks: ends/event_count size mismatch");
  if (n == 0) {
    if (!ends.empty()) throw DomainError("TiedBlocks: blocks on empty input");
    return;
  }
  if (ends.empty() || ends.back() != n - 1)
    throw DomainError("TiedBlocks: blocks must cover [0, n)");
  for (std::size_t i = 1; i < ends.size(); ++i)
    if (ends[i] <= ends[i - 1]) throw DomainError("TiedBlocks: ends not increasing");
}

// ---------------------------------------------------------------------------
// scans
// ---------------------------------------------------------------------------

namespace detail {

void prefix_scan_into(std::span<const double> v, std::span<double> out,
                      const ChunkPlan& plan) {
  const std::size_t n = v.size();
  const std::size_t nchunks = plan.chunks_for(n);
  if (n == 0) return;
  const std::size_t cs = plan.chunk_size;

  std::vector<double> tot(nchunks);
  for_each_chunk(nchunks, plan.worker_count, [&](std::size_t c) {
    const auto [b, e] = chunk_range(c, cs, n);
    double acc = 0.0;
    for (std::size_t k = b; k < e; ++k) acc += v[k];
    tot[c] = acc;
  });

  std::vector<double> off(nchunks);
  double acc = 0.0;
  for (std::size_t c = 0; c < nchunks; ++c) {
    off[c] = acc;
    acc += tot[c];
  }

  for_each_chunk(nchunks, plan.worker_count, [&](std::size_t c) {
    const auto [b, e] = chunk_range(c, cs, n);
    double run = 0.0;
    for (std::size_t k = b; k < e; ++k) {
      run += v[k];
      out[k] = off[c] + run;
    }
  });
}

void suffix_scan_into(std::span<const double> v, std::span<double> out,
                      const ChunkPlan& plan) {
  const std::size_t n = v.size();
  const std::size_t nchunks = plan.chunks_for(n);
  if (n == 0) return;
  const std::size_t cs = plan.chunk_size;

  std::vector<double> tot(nchunks);
  for_each_chunk(nchunks, plan.worker_count, [&](std::size_t c) {
    const auto [b, e] = chunk_range(c, cs, n);
    double acc = 0.0;
    for (std::size_t k = e; k-- > b;) acc += v[k];
    tot[c] = acc;
  });

  std::vector<double> off(nchunks);
  double acc = 0.0;
  for (std::size_t c = nchunks; c-- > 0;) {
    off[c] = acc;
    acc += tot[c];
  }

  for_each_chunk(nchunks, plan.worker_count, [&](std::size_t c) {
    const auto [b, e] = chunk_range(c, cs, n);
    double run = 0.0;
    for (std::size_t k = e; k-- > b;) {
      run += v[k];
      out[k] = off[c] + run;
    }
  });
}

}  // namespace detail

std::vector<double> prefix_scan(std::span<const double> v, const ChunkPlan& plan) {
  plan.validate();
  std::vector<double> out(v.size());
  detail::prefix_scan_into(v, out, plan);
  return out;
}

std::vector<double> suffix_scan(std::span<const double> v, const ChunkPlan& plan) {
  plan.validate();
  std::vector<double> out(v.size());
  detail::suffix_scan_into(v, out, plan);
  return out;
}

Tuple3Buffer tuple3_scan(const Tuple3Buffer& lanes, ScanDirection dir,
                         const ChunkPlan& plan) {
  plan.validate();
  lanes.validate();
  Tuple3Buffer out(lanes.size());
  const std::size_t n = lanes.size();
  const std::size_t nchunks = plan.chunks_for(n);
  if (n == 0) return out;
  const std::size_t cs = plan.chunk_size;

  std::vector<detail::Lane3> tot(nchunks);
  const bool fwd = (dir == ScanDirection::forward);
  for_each_chunk(nchunks, plan.worker_count, [&](std::size_t c) {
    const auto [b, e] = chunk_range(c, cs, n);
    detail::Lane3 acc{};
    if (fwd) {
      for (std::size_t k = b; k < e; ++k) {
        acc.a += lanes.a[k];
        acc.b += lanes.b[k];
        acc.c += lanes.c[k];
      }
    } else {
      for (std::size_t k = e; k-- > b;) {
        acc.a += lanes.a[k];
        acc.b += lanes.b[k];
        acc.c += lanes.c[k];
      }
    }
    tot[c] = acc;
  });

  std::vector<detail::Lane3> off(nchunks);
  detail::Lane3 acc{};
  if (fwd) {
    for (std::size_t c = 0; c < nchunks; ++c) {
      off[c] = acc;
      acc.a += tot[c].a;
      acc.b += tot[c].b;
      acc.c += tot[c].c;
    }
  } else {
    for (std::size_t c = nchunks; c-- > 0;) {
      off[c] = acc;
      acc.a += tot[c].a;
      acc.b += tot[c].b;
      acc.c += tot[c].c;
    }
  }

  for_each_chunk(nchunks, plan.worker_count, [&](std::size_t c) {
    const auto [b, e] = chunk_range(c, cs, n);
    detail::Lane3 run{};
    if (fwd) {
      for (std::size_t k = b; k < e; ++k) {
        run.a += lanes.a[k];
        run.b += lanes.b[k];
        run.c += lanes.c[k];
        out.a[k] = off[c].a + run.a;
        out.b[k] = off[c].b + run.b;
        out.c[k] = off[c].c + run.c;
      }
    } else {
      for (std::size_t k = e; k-- > b;) {
        run.a += lanes.a[k];
        run.b += lanes.b[k];
        run.c += lanes.c[k];
        out.a[k] = off[c].a + run.a;
        out.b[k] = off[c].b + run.b;
        out.c[k] = off[c].c + run.c;
      }
    }
  });
  return out;
}

double reduce_sum(std::span<const double> v, const ChunkPlan& plan) {
  plan.validate();
  const std::size_t n = v.size();
  const std::size_t nchunks = plan.chunks_for(n);
  if (n == 0) return 0.0;
  std::vector<double> tot(nchunks);
  for_each_chunk(nchunks, plan.worker_count, [&](std::size_t c) {
    const auto [b, e] = chunk_range(c, plan.chunk_size, n);
    double acc = 0.0;
    for (std::size_t k = b; k < e; ++k) acc += v[k];
    tot[c] = acc;
  });
  double acc = 0.0;
  for (std::size_t c = 0; c < nchunks; ++c) acc += tot[c];
  return acc;
}

double masked_dot(std::span<const double> mask, std::span<const double> v,
                  const ChunkPlan& plan) {
  plan.validate();
  if (mask.size() != v.size()) throw DomainError("masked_dot: length mismatch");
  const std::size_t n = v.size();
  const std::size_t nchunks = plan.chunks_for(n);
  if (n == 0) return 0.0;
  std::vector<double> tot(nchunks);
  for_each_chunk(nchunks, plan.worker_count, [&](std::size_t c) {
    const auto [b, e] = chunk_range(c, plan.chunk_size, n);
    double acc = 0.0;
    for (std::size_t k = b; k < e; ++k) acc += mask[k] * v[k];
    tot[c] = acc;
  });
  double acc = 0.0;
  for (std::size_t c = 0; c < nchunks; ++c) acc += tot[c];
  return acc;
}

// ---------------------------------------------------------------------------
// fused entry points
// ---------------------------------------------------------------------------

GradHessSums fused_scan_transform_reduce(const Tuple3Buffer& lanes,
                                         std::span<const double> backward_weights,
                                         std::span<const double> suffix_factors,
                                         const TiedBlocks& blocks,
                                         const ChunkPlan& plan) {
  lanes.validate();
  const std::size_t n = lanes.size();
  const double* u = nullptr;
  const double* g = nullptr;
  if (!backward_weights.empty()) {
    if (backward_weights.size() != n || suffix_factors.size() != n)
      throw DomainError("fused scan: weight/factor length mismatch");
    u = backward_weights.data();
    g = suffix_factors.data();
  }
  detail::TupleSource src{lanes.a.data(), lanes.b.data(), lanes.c.data()};
  return detail::fused_grad_hess(src, n, u, g, blocks, plan);
}

double fused_log_denominator(std::span<const double> denom_lane,
                             std::span<const double> backward_weights,
                             std::span<const double> suffix_factors,
                             const TiedBlocks& blocks, const ChunkPlan& plan) {
  plan.validate();
  const std::size_t n = denom_lane.size();
  blocks.validate(n);
  if (n == 0) return 0.0;
  const double* u = backward_weights.empty() ? nullptr : backward_weights.data();
  const double* g = suffix_factors.empty() ? nullptr : suffix_factors.data();
  if ((u != nullptr) && (backward_weights.size() != n || suffix_factors.size() != n))
    throw DomainError("fused log-denominator: weight/factor length mismatch");
  const std::size_t cs = plan.chunk_size;
  const std::size_t nchunks = plan.chunks_for(n);
  const bool weighted = (u != nullptr);
  const double* v = denom_lane.data();

  std::vector<double> fwd_tot(nchunks), bwd_tot(weighted ? nchunks : 0);
  for_each_chunk(nchunks, plan.worker_count, [&](std::size_t c) {
    const auto [b, e] = chunk_range(c, cs, n);
    double acc = 0.0;
    for (std::size_t k = b; k < e; ++k) acc += v[k];
    fwd_tot[c] = acc;
    if (weighted) {
      double s = 0.0;
      for (std::size_t k = e; k-- > b;) s += u[k] * v[k];
      bwd_tot[c] = s;
    }
  });

  std::vector<double> fwd_off(nchunks), bwd_off(weighted ? nchunks : 0);
  {
    double acc = 0.0;
    for (std::size_t c = 0; c < nchunks; ++c) {
      fwd_off[c] = acc;
      acc += fwd_tot[c];
    }
  }
  if (weighted) {
    double acc = 0.0;
    for (std::size_t c = nchunks; c-- > 0;) {
      bwd_off[c] = acc;
      acc += bwd_tot[c];
    }
  }

  std::vector<double> part(nchunks, 0.0);
  std::vector<unsigned char> bad(nchunks, 0);
  const std::size_t nblocks = blocks.ends.size();
  for_each_chunk(nchunks, plan.worker_count, [&](std::size_t c) {
    const auto [b, e] = chunk_range(c, cs, n);
    static thread_local std::vector<double> ls;
    if (weighted) {
      ls.resize(e - b + 1);
      ls[e - b] = bwd_off[c];
      double run = 0.0;
      for (std::size_t k = e; k-- > b;) {
        run += u[k] * v[k];
        ls[k - b] = bwd_off[c] + run;
      }
    }
    std::size_t cur = static_cast<std::size_t>(
        std::lower_bound(blocks.ends.begin(), blocks.ends.end(), b) -
        blocks.ends.begin());
    double run = 0.0, lsum = 0.0;
    bool flag = false;
    for (std::size_t k = b; k < e; ++k) {
      run += v[k];
      if (cur < nblocks && k == blocks.ends[cur]) {
        const double cnt = blocks.event_count[cur];
        if (cnt > 0.0) {
          double den = fwd_off[c] + run;
          if (weighted) den += g[k] * ls[k + 1 - b];
          if (!(den > 0.0))
            flag = true;
          else
            lsum += cnt * std::log(den);
        }
        ++cur;
      }
    }
    part[c] = lsum;
    bad[c] = flag ? 1 : 0;
  });

  for (std::size_t c = 0; c < nchunks; ++c)
    if (bad[c])
      throw NonPositiveDenominatorError(
          "log-likelihood: accumulated risk-set denominator <= 0");
  double acc = 0.0;
  for (std::size_t c = 0; c < nchunks; ++c) acc += part[c];
  return acc;
}

}  // namespace survscan
