#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <thread>
#include <vector>

#include "survscan/errors.hpp"

namespace survscan {

// ============================================================================
// Execution geometry
// ============================================================================
//
// Every bulk operation runs chunk-by-chunk: per-chunk partials first, one
// serial combine over chunk totals, then a second per-chunk pass that applies
// the carried offsets.  Chunk boundaries are a pure function of chunk_size, so
// results are identical for any worker_count and across reruns.

struct ChunkPlan {
  std::size_t chunk_size = 65536;
  unsigned worker_count = default_workers();

  static unsigned default_workers() {
    const unsigned h = std::thread::hardware_concurrency();
    return h ? h : 1;
  }

  // One chunk, one worker: plain left-to-right evaluation.
  static ChunkPlan serial() {
    return ChunkPlan{std::numeric_limits<std::size_t>::max(), 1};
  }

  std::size_t chunks_for(std::size_t n) const {
    validate();
    if (n == 0) return 0;
    return 1 + (n - 1) / chunk_size;
  }

  void validate() const {
    if (chunk_size == 0) throw DomainError("ChunkPlan: chunk_size must be >= 1");
    if (worker_count == 0) throw DomainError("ChunkPlan: worker_count must be >= 1");
  }
};

// Three equal-length lanes scanned together (denominator, first and second
// moment lanes in the solver; arbitrary payloads here).
struct Tuple3Buffer {
  std::vector<double> a, b, c;

  Tuple3Buffer() = default;
  explicit Tuple3Buffer(std::size_t n) : a(n), b(n), c(n) {}

  std::size_t size() const { return a.size(); }
  void validate() const {
    if (a.size() != b.size() || a.size() != c.size())
      throw DomainError("Tuple3Buffer: lanes must have equal length");
  }
};

// Maximal runs of equal survival time.  `ends` holds the inclusive offset of
// each run's last element; `event_count` the number of primary events inside
// the run.  Generic inputs can treat every element as its own run.
struct TiedBlocks {
  std::vector<std::size_t> ends;
  std::vector<double> event_count;

  std::size_t block_count() const { return ends.size(); }

  static TiedBlocks from_mask(std::span<const double> event_mask,
                              std::span<const std::size_t> block_ends);
  static TiedBlocks singletons(std::span<const double> event_mask);

  void validate(std::size_t n) const;

  bool operator==(const TiedBlocks&) const = default;
};

enum class ScanDirection { forward, backward };

// ============================================================================
// Scan primitives
// ============================================================================

// out[i] = v[0] + ... + v[i]
std::vector<double> prefix_scan(std::span<const double> v, const ChunkPlan& plan = {});

// out[i] = v[i] + ... + v[n-1]
std::vector<double> suffix_scan(std::span<const double> v, const ChunkPlan& plan = {});

// Lane-wise prefix (forward) or suffix (backward) scan in one pass.
Tuple3Buffer tuple3_scan(const Tuple3Buffer& lanes, ScanDirection dir,
                         const ChunkPlan& plan = {});

// Chunked total; bit-identical to prefix_scan(v).back() under the same plan.
double reduce_sum(std::span<const double> v, const ChunkPlan& plan = {});

// sum_i mask[i] * v[i], chunked like reduce_sum.
double masked_dot(std::span<const double> mask, std::span<const double> v,
                  const ChunkPlan& plan = {});

// ============================================================================
// Fused scan -> transform -> reduce
// ============================================================================
//
// Single pass producing the two reductions the coordinate solver consumes:
//
//   grad_sum = sum_i delta_i * G_i,   hess_sum = sum_i delta_i * (H_i - G_i^2)
//
// where, writing P*(k) for the forward running sums of the lanes broadcast to
// the end of i's tied block and S*(k) for the backward running sums of the
// u-weighted lanes just past the block,
//
//   D_i = P_a + g_i * S_a,  G_i = (P_b + g_i * S_b) / D_i,
//   H_i = (P_c + g_i * S_c) / D_i.
//
// Pass empty `backward_weights` for the forward-only (no competing risks)
// case; then `suffix_factors` is ignored.  Intermediate scan buffers are never
// materialized.

struct GradHessSums {
  double grad_sum = 0.0;
  double hess_sum = 0.0;
};

GradHessSums fused_scan_transform_reduce(const Tuple3Buffer& lanes,
                                         std::span<const double> backward_weights,
                                         std::span<const double> suffix_factors,
                                         const TiedBlocks& blocks,
                                         const ChunkPlan& plan = {});

// Companion reduction for the log-likelihood: sum_B count_B * log(D_B) with
// the same accumulation scheme as the fused kernel.
double fused_log_denominator(std::span<const double> denom_lane,
                             std::span<const double> backward_weights,
                             std::span<const double> suffix_factors,
                             const TiedBlocks& blocks, const ChunkPlan& plan = {});

}  // namespace survscan
