#pragma once

// Chunked two-phase kernels shared by the public scan entry points and the
// solver engine.  The engine instantiates the fused kernel with a lane source
// that synthesizes (exp(xb), exp(xb)*x, exp(xb)*x^2) from a sparse column on
// the fly instead of materializing three N-vectors.
//
// Reproducibility contract: chunk boundaries depend only on chunk_size, every
// in-chunk accumulation is strictly left-to-right (suffix: right-to-left), and
// cross-chunk combines are serial.  worker_count never changes a result.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "survscan/scan.hpp"

namespace survscan::detail {

struct Lane3 {
  double a = 0.0, b = 0.0, c = 0.0;
};

struct ChunkRange {
  std::size_t begin, end;
};

inline ChunkRange chunk_range(std::size_t c, std::size_t chunk_size, std::size_t n) {
  const std::size_t b = c * chunk_size;
  const std::size_t e = (chunk_size >= n - b) ? n : b + chunk_size;
  return {b, e};
}

template <class F>
void for_each_chunk(std::size_t nchunks, unsigned workers, F&& f) {
  if (nchunks == 0) return;
  const auto nw = static_cast<unsigned>(
      std::min<std::size_t>(workers, nchunks));
  if (nw <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c) f(c);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(static_cast<int>(nw))
  for (long long c = 0; c < static_cast<long long>(nchunks); ++c)
    f(static_cast<std::size_t>(c));
#else
  for (std::size_t c = 0; c < nchunks; ++c) f(c);
#endif
}

// Reads three parallel arrays; the trivial lane source.
struct TupleSource {
  const double* a;
  const double* b;
  const double* c;

  struct Walker {
    const double *pa, *pb, *pc;
    Lane3 next() { return Lane3{*pa++, *pb++, *pc++}; }
  };
  struct RWalker {
    const double *pa, *pb, *pc;
    Lane3 prev() { return Lane3{*--pa, *--pb, *--pc}; }
  };

  Walker forward_from(std::size_t k) const { return {a + k, b + k, c + k}; }
  RWalker backward_from(std::size_t end) const { return {a + end, b + end, c + end}; }
};

// Fused scan/transform/reduce over any lane source.  `u` (element weights for
// the backward accumulation) and `g` (per-element factors applied to the
// backward sums at each tied block) are either both given or both null.
template <class Source>
GradHessSums fused_grad_hess(const Source& src, std::size_t n, const double* u,
                             const double* g, const TiedBlocks& blocks,
                             const ChunkPlan& plan) {
  plan.validate();
  blocks.validate(n);
  if (n == 0) return {};
  const std::size_t cs = plan.chunk_size;
  const std::size_t nchunks = plan.chunks_for(n);
  const bool weighted = (u != nullptr);

  // phase 1: per-chunk lane totals (and weighted totals, accumulated
  // right-to-left to mirror the suffix scan exactly)
  std::vector<Lane3> fwd_tot(nchunks);
  std::vector<Lane3> bwd_tot(weighted ? nchunks : 0);
  for_each_chunk(nchunks, plan.worker_count, [&](std::size_t c) {
    const auto [b, e] = chunk_range(c, cs, n);
    Lane3 t{};
    auto w = src.forward_from(b);
    for (std::size_t k = b; k < e; ++k) {
      const Lane3 v = w.next();
      t.a += v.a;
      t.b += v.b;
      t.c += v.c;
    }
    fwd_tot[c] = t;
    if (weighted) {
      Lane3 s{};
      auto r = src.backward_from(e);
      for (std::size_t k = e; k-- > b;) {
        const Lane3 v = r.prev();
        const double uk = u[k];
        s.a += uk * v.a;
        s.b += uk * v.b;
        s.c += uk * v.c;
      }
      bwd_tot[c] = s;
    }
  });

  // serial cross-chunk offsets
  std::vector<Lane3> fwd_off(nchunks);
  {
    Lane3 acc{};
    for (std::size_t c = 0; c < nchunks; ++c) {
      fwd_off[c] = acc;
      acc.a += fwd_tot[c].a;
      acc.b += fwd_tot[c].b;
      acc.c += fwd_tot[c].c;
    }
  }
  std::vector<Lane3> bwd_off(weighted ? nchunks : 0);
  if (weighted) {
    Lane3 acc{};
    for (std::size_t c = nchunks; c-- > 0;) {
      bwd_off[c] = acc;
      acc.a += bwd_tot[c].a;
      acc.b += bwd_tot[c].b;
      acc.c += bwd_tot[c].c;
    }
  }

  // phase 2: rescan, evaluate G/H at tied-block ends, reduce per chunk
  std::vector<double> part_g(nchunks, 0.0), part_h(nchunks, 0.0);
  std::vector<unsigned char> bad(nchunks, 0);
  const std::size_t nblocks = blocks.ends.size();
  for_each_chunk(nchunks, plan.worker_count, [&](std::size_t c) {
    const auto [b, e] = chunk_range(c, cs, n);

    // inclusive global suffix of the weighted lanes at [b, e]
    static thread_local std::vector<Lane3> ls;
    if (weighted) {
      ls.resize(e - b + 1);
      ls[e - b] = bwd_off[c];
      Lane3 run{};
      auto r = src.backward_from(e);
      for (std::size_t k = e; k-- > b;) {
        const Lane3 v = r.prev();
        const double uk = u[k];
        run.a += uk * v.a;
        run.b += uk * v.b;
        run.c += uk * v.c;
        ls[k - b] = Lane3{bwd_off[c].a + run.a, bwd_off[c].b + run.b,
                          bwd_off[c].c + run.c};
      }
    }

    std::size_t cur = static_cast<std::size_t>(
        std::lower_bound(blocks.ends.begin(), blocks.ends.end(), b) -
        blocks.ends.begin());
    Lane3 run{};
    double lg = 0.0, lh = 0.0;
    bool flag = false;
    auto w = src.forward_from(b);
    for (std::size_t k = b; k < e; ++k) {
      const Lane3 v = w.next();
      run.a += v.a;
      run.b += v.b;
      run.c += v.c;
      if (cur < nblocks && k == blocks.ends[cur]) {
        const double cnt = blocks.event_count[cur];
        if (cnt > 0.0) {
          double den = fwd_off[c].a + run.a;
          double n1 = fwd_off[c].b + run.b;
          double n2 = fwd_off[c].c + run.c;
          if (weighted) {
            const Lane3& s = ls[k + 1 - b];
            const double gi = g[k];
            den += gi * s.a;
            n1 += gi * s.b;
            n2 += gi * s.c;
          }
          if (!(den > 0.0)) {
            flag = true;
          } else {
            const double G = n1 / den;
            const double H = n2 / den;
            lg += cnt * G;
            lh += cnt * (H - G * G);
          }
        }
        ++cur;
      }
    }
    part_g[c] = lg;
    part_h[c] = lh;
    bad[c] = flag ? 1 : 0;
  });

  for (std::size_t c = 0; c < nchunks; ++c)
    if (bad[c])
      throw NonPositiveDenominatorError(
          "fused scan: accumulated risk-set denominator <= 0 (exp overflow?)");

  GradHessSums out;
  for (std::size_t c = 0; c < nchunks; ++c) {
    out.grad_sum += part_g[c];
    out.hess_sum += part_h[c];
  }
  return out;
}

// In-place scan variants used by the engine's separated path (callers own the
// output buffers; out[k] = cross-chunk offset + in-chunk running sum).
void prefix_scan_into(std::span<const double> v, std::span<double> out,
                      const ChunkPlan& plan);
void suffix_scan_into(std::span<const double> v, std::span<double> out,
                      const ChunkPlan& plan);

}  // namespace survscan::detail
