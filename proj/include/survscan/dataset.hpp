#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "survscan/errors.hpp"
#include "survscan/scan.hpp"

namespace survscan {

// status codes: 0 censored, 1 primary event, 2 competing event
struct Observation {
  double time = 0.0;
  int status = 0;
  std::int64_t row_id = 0;
};

enum class ColumnKind { dense, sparse_valued, sparse_indicator };

// One covariate column over the sorted subject order.  Storage is chosen at
// construction: columns below 25% density drop their zeros, and all-ones
// sparse columns drop the value array too.
struct SparseColumn {
  ColumnKind kind = ColumnKind::sparse_indicator;
  std::size_t length = 0;
  std::vector<std::uint32_t> indices;  // strictly ascending row offsets (sparse kinds)
  std::vector<double> values;          // dense: length entries; valued: one per index

  static SparseColumn make(std::size_t n,
                           std::vector<std::pair<std::uint32_t, double>> nonzeros);

  std::size_t nnz() const {
    if (kind == ColumnKind::dense) {
      std::size_t c = 0;
      for (double v : values)
        if (v != 0.0) ++c;
      return c;
    }
    return indices.size();
  }
  double density() const {
    return length == 0 ? 0.0 : static_cast<double>(nnz()) / static_cast<double>(length);
  }
  // Slow random access; kernels iterate instead.
  double at(std::size_t i) const;

  bool operator==(const SparseColumn&) const = default;
};

// Unsorted ingestion buffer: what loaders and generators hand to sort_and_block.
struct RawData {
  std::vector<Observation> obs;
  std::size_t n_cols = 0;
  struct Entry {
    std::int64_t row;  // refers to Observation::row_id
    std::size_t col;
    double value;
  };
  std::vector<Entry> entries;
};

class SurvivalDataset {
 public:
  SurvivalDataset() = default;

  std::size_t n() const { return times_.size(); }
  std::size_t p() const { return columns_.size(); }
  std::size_t n_events() const { return n_events_; }
  bool has_competing() const { return has_competing_; }
  std::size_t nnz_total() const;

  // decreasing; ties broken by ascending original row id
  const std::vector<double>& times() const { return times_; }
  const std::vector<int>& status() const { return status_; }
  const std::vector<std::int64_t>& row_ids() const { return row_ids_; }
  const std::vector<SparseColumn>& columns() const { return columns_; }
  const std::vector<double>& event_mask() const { return event_mask_; }
  const TiedBlocks& blocks() const { return blocks_; }
  const std::vector<std::uint32_t>& block_end_of() const { return block_end_of_; }

  double covariate(std::size_t i, std::size_t j) const { return columns_[j].at(i); }

  // Gather rows by sorted (non-decreasing) positions; repeats are allowed for
  // resampling, in which case callers should request fresh row ids.
  SurvivalDataset subset_rows(std::span<const std::uint32_t> positions,
                              bool fresh_row_ids = false) const;

  std::size_t approx_bytes() const;
  std::uint64_t content_hash() const;

  bool operator==(const SurvivalDataset&) const = default;

  friend SurvivalDataset sort_and_block(RawData raw);

 private:
  std::vector<double> times_;
  std::vector<int> status_;
  std::vector<std::int64_t> row_ids_;
  std::vector<SparseColumn> columns_;
  std::vector<double> event_mask_;
  TiedBlocks blocks_;
  std::vector<std::uint32_t> block_end_of_;
  std::size_t n_events_ = 0;
  bool has_competing_ = false;

  static SurvivalDataset assemble(
      std::vector<Observation> sorted_obs, std::size_t n_cols,
      std::vector<std::vector<std::pair<std::uint32_t, double>>> col_nonzeros);
};

// Validate, sort by decreasing time (row id tiebreak), group tied blocks, and
// columnize.  Consumes the raw buffer.
SurvivalDataset sort_and_block(RawData raw);

// Dense CSV: header row naming a `time` and a `status` column; every other
// column is a covariate.  No quoting; all cells numeric.
SurvivalDataset load_dense_csv(const std::string& path);
void write_dense_csv(const SurvivalDataset& ds, const std::string& path);

// Sparse pair: an observation file of `row_id,time,status` lines and a COO
// matrix file of `row_id,col_id,value` lines; `#` comments and blank lines are
// skipped; absent cells are exact zeros.
SurvivalDataset load_sparse_coo(const std::string& obs_path,
                                const std::string& matrix_path);
void write_sparse_coo(const SurvivalDataset& ds, const std::string& obs_path,
                      const std::string& matrix_path);

}  // namespace survscan
