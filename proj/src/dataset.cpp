#include "survscan/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string_view>
#include <unordered_set>

#include "survscan/util.hpp"

namespace survscan {

namespace {

constexpr double kSparseDensityCutoff = 0.25;

std::string location(const std::string& path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

double parse_double(std::string_view tok, const std::string& path, std::size_t line_no) {
  if (tok.empty())
    throw ParseError("missing value at " + location(path, line_no));
  double out = 0.0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last)
    throw ParseError("bad numeric value '" + std::string(tok) + "' at " +
                     location(path, line_no));
  return out;
}

std::int64_t parse_int(std::string_view tok, const std::string& path,
                       std::size_t line_no) {
  if (tok.empty())
    throw ParseError("missing value at " + location(path, line_no));
  std::int64_t out = 0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last)
    throw ParseError("bad integer '" + std::string(tok) + "' at " +
                     location(path, line_no));
  return out;
}

int parse_status(std::string_view tok, const std::string& path, std::size_t line_no) {
  const double v = parse_double(tok, path, line_no);
  if (v != 0.0 && v != 1.0 && v != 2.0)
    throw DomainError("status must be 0, 1 or 2 at " + location(path, line_no));
  return static_cast<int>(v);
}

double parse_time(std::string_view tok, const std::string& path, std::size_t line_no) {
  const double t = parse_double(tok, path, line_no);
  if (!std::isfinite(t) || t < 0.0)
    throw DomainError("time must be finite and >= 0 at " + location(path, line_no));
  return t;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

// Reads a whole file line by line, skipping blanks and '#' comments.  Calls
// fn(line, line_no) for every payload line.  A `# cols: P` comment (written by
// write_sparse_coo so empty trailing columns survive a round trip) is reported
// through declared_cols when the caller asks for it.
template <class Fn>
void for_each_data_line(const std::string& path, Fn&& fn,
                        std::size_t* declared_cols = nullptr) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view sv(line);
    const auto first = sv.find_first_not_of(" \t");
    if (first == std::string_view::npos) continue;
    if (sv[first] == '#') {
      constexpr std::string_view tag = "# cols:";
      if (declared_cols != nullptr && sv.substr(first).starts_with(tag)) {
        auto rest = sv.substr(first + tag.size());
        const auto ws = rest.find_first_not_of(" \t");
        if (ws != std::string_view::npos)
          *declared_cols =
              static_cast<std::size_t>(parse_int(rest.substr(ws), path, line_no));
      }
      continue;
    }
    fn(sv, line_no);
  }
}

void format_double(std::string& out, double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
  out.append(buf, static_cast<std::size_t>(len));
}

}  // namespace

// ---------------------------------------------------------------------------
// SparseColumn
// ---------------------------------------------------------------------------

SparseColumn SparseColumn::make(
    std::size_t n, std::vector<std::pair<std::uint32_t, double>> nonzeros) {
  SparseColumn col;
  col.length = n;
  const double density =
      n == 0 ? 0.0 : static_cast<double>(nonzeros.size()) / static_cast<double>(n);
  if (density < kSparseDensityCutoff) {
    bool all_ones = true;
    for (const auto& [i, v] : nonzeros)
      if (v != 1.0) {
        all_ones = false;
        break;
      }
    col.indices.reserve(nonzeros.size());
    if (all_ones) {
      col.kind = ColumnKind::sparse_indicator;
      for (const auto& [i, v] : nonzeros) col.indices.push_back(i);
    } else {
      col.kind = ColumnKind::sparse_valued;
      col.values.reserve(nonzeros.size());
      for (const auto& [i, v] : nonzeros) {
        col.indices.push_back(i);
        col.values.push_back(v);
      }
    }
  } else {
    col.kind = ColumnKind::dense;
    col.values.assign(n, 0.0);
    for (const auto& [i, v] : nonzeros) col.values[i] = v;
  }
  return col;
}

double SparseColumn::at(std::size_t i) const {
  if (kind == ColumnKind::dense) return values[i];
  const auto it = std::lower_bound(indices.begin(), indices.end(),
                                   static_cast<std::uint32_t>(i));
  if (it == indices.end() || *it != i) return 0.0;
  if (kind == ColumnKind::sparse_indicator) return 1.0;
  return values[static_cast<std::size_t>(it - indices.begin())];
}

// ---------------------------------------------------------------------------
// assembly
// ---------------------------------------------------------------------------

SurvivalDataset SurvivalDataset::assemble(
    std::vector<Observation> sorted_obs, std::size_t n_cols,
    std::vector<std::vector<std::pair<std::uint32_t, double>>> col_nonzeros) {
  SurvivalDataset ds;
  const std::size_t n = sorted_obs.size();
  ds.times_.resize(n);
  ds.status_.resize(n);
  ds.row_ids_.resize(n);
  ds.event_mask_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.times_[i] = sorted_obs[i].time;
    ds.status_[i] = sorted_obs[i].status;
    ds.row_ids_[i] = sorted_obs[i].row_id;
    ds.event_mask_[i] = sorted_obs[i].status == 1 ? 1.0 : 0.0;
    if (sorted_obs[i].status == 1) ++ds.n_events_;
    if (sorted_obs[i].status == 2) ds.has_competing_ = true;
  }

  // tied blocks over the (already sorted) decreasing times
  ds.block_end_of_.resize(n);
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = start;
    while (end + 1 < n && ds.times_[end + 1] == ds.times_[start]) ++end;
    ds.blocks_.ends.push_back(end);
    double cnt = 0.0;
    for (std::size_t k = start; k <= end; ++k) {
      cnt += ds.event_mask_[k];
      ds.block_end_of_[k] = static_cast<std::uint32_t>(end);
    }
    ds.blocks_.event_count.push_back(cnt);
    start = end + 1;
  }

  ds.columns_.reserve(n_cols);
  for (std::size_t j = 0; j < n_cols; ++j)
    ds.columns_.push_back(SparseColumn::make(n, std::move(col_nonzeros[j])));
  return ds;
}

SurvivalDataset sort_and_block(RawData raw) {
  const std::size_t n = raw.obs.size();
  if (n >= std::numeric_limits<std::uint32_t>::max())
    throw DomainError("dataset too large for 32-bit row offsets");

  for (const auto& o : raw.obs) {
    if (!std::isfinite(o.time) || o.time < 0.0)
      throw DomainError("observation time must be finite and >= 0");
    if (o.status != 0 && o.status != 1 && o.status != 2)
      throw DomainError("status must be 0, 1 or 2");
  }

  // map row_id -> sorted position; ids must be a permutation of [0, n)
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (raw.obs[a].time != raw.obs[b].time) return raw.obs[a].time > raw.obs[b].time;
    return raw.obs[a].row_id < raw.obs[b].row_id;
  });

  std::vector<Observation> sorted_obs(n);
  std::vector<std::uint32_t> pos_of_id(n);
  std::vector<unsigned char> seen(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Observation& o = raw.obs[order[i]];
    if (o.row_id < 0 || static_cast<std::size_t>(o.row_id) >= n)
      throw IndexError("row id " + std::to_string(o.row_id) + " outside [0, " +
                       std::to_string(n) + ")");
    if (seen[static_cast<std::size_t>(o.row_id)]++)
      throw DuplicateEntryError("row id " + std::to_string(o.row_id) +
                                " appears more than once");
    sorted_obs[i] = o;
    pos_of_id[static_cast<std::size_t>(o.row_id)] = static_cast<std::uint32_t>(i);
  }

  std::vector<std::vector<std::pair<std::uint32_t, double>>> cols(raw.n_cols);
  for (const auto& e : raw.entries) {
    if (e.row < 0 || static_cast<std::size_t>(e.row) >= n)
      throw IndexError("matrix row " + std::to_string(e.row) + " outside [0, " +
                       std::to_string(n) + ")");
    if (e.col >= raw.n_cols)
      throw IndexError("matrix column " + std::to_string(e.col) + " outside [0, " +
                       std::to_string(raw.n_cols) + ")");
    if (!std::isfinite(e.value)) throw DomainError("matrix value must be finite");
    if (e.value == 0.0) continue;  // absent cells are exact zeros
    cols[e.col].emplace_back(pos_of_id[static_cast<std::size_t>(e.row)], e.value);
  }
  for (auto& c : cols) std::sort(c.begin(), c.end());

  return SurvivalDataset::assemble(std::move(sorted_obs), raw.n_cols, std::move(cols));
}

// ---------------------------------------------------------------------------
// subsetting
// ---------------------------------------------------------------------------

SurvivalDataset SurvivalDataset::subset_rows(
    std::span<const std::uint32_t> positions, bool fresh_row_ids) const {
  const std::size_t m = positions.size();
  for (std::size_t i = 0; i + 1 < m; ++i)
    if (positions[i] > positions[i + 1])
      throw DomainError("subset_rows: positions must be non-decreasing");
  if (!positions.empty() && positions.back() >= n())
    throw IndexError("subset_rows: position outside dataset");

  std::vector<Observation> obs(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t src = positions[i];
    obs[i] = {times_[src], status_[src],
              fresh_row_ids ? static_cast<std::int64_t>(i) : row_ids_[src]};
  }
  if (!fresh_row_ids) {
    // repeated positions would duplicate ids; catch misuse early
    for (std::size_t i = 0; i + 1 < m; ++i)
      if (positions[i] == positions[i + 1])
        throw DuplicateEntryError("subset_rows: repeated position needs fresh ids");
  }

  std::vector<std::vector<std::pair<std::uint32_t, double>>> cols(p());
  for (std::size_t j = 0; j < p(); ++j) {
    const SparseColumn& col = columns_[j];
    auto& out = cols[j];
    if (col.kind == ColumnKind::dense) {
      for (std::size_t i = 0; i < m; ++i) {
        const double v = col.values[positions[i]];
        if (v != 0.0) out.emplace_back(static_cast<std::uint32_t>(i), v);
      }
    } else {
      // two pointers over sorted positions and sorted column indices
      std::size_t pi = 0, ci = 0;
      while (pi < m && ci < col.indices.size()) {
        if (positions[pi] < col.indices[ci]) {
          ++pi;
        } else if (positions[pi] > col.indices[ci]) {
          ++ci;
        } else {
          const double v =
              col.kind == ColumnKind::sparse_indicator ? 1.0 : col.values[ci];
          out.emplace_back(static_cast<std::uint32_t>(pi), v);
          ++pi;  // repeats of the same position sit adjacent; ci stays put
          while (pi < m && positions[pi] == positions[pi - 1]) {
            out.emplace_back(static_cast<std::uint32_t>(pi), v);
            ++pi;
          }
          ++ci;
        }
      }
    }
  }
  return assemble(std::move(obs), p(), std::move(cols));
}

// ---------------------------------------------------------------------------
// accounting
// ---------------------------------------------------------------------------

std::size_t SurvivalDataset::nnz_total() const {
  std::size_t acc = 0;
  for (const auto& c : columns_) acc += c.nnz();
  return acc;
}

std::size_t SurvivalDataset::approx_bytes() const {
  std::size_t bytes = times_.capacity() * sizeof(double) +
                      status_.capacity() * sizeof(int) +
                      row_ids_.capacity() * sizeof(std::int64_t) +
                      event_mask_.capacity() * sizeof(double) +
                      block_end_of_.capacity() * sizeof(std::uint32_t) +
                      blocks_.ends.capacity() * sizeof(std::size_t) +
                      blocks_.event_count.capacity() * sizeof(double);
  for (const auto& c : columns_)
    bytes += c.indices.capacity() * sizeof(std::uint32_t) +
             c.values.capacity() * sizeof(double);
  return bytes;
}

std::uint64_t SurvivalDataset::content_hash() const {
  std::uint64_t h = fnv1a(times_.data(), times_.size() * sizeof(double));
  h = fnv1a(status_.data(), status_.size() * sizeof(int), h);
  for (const auto& c : columns_) {
    const auto kind = static_cast<std::uint32_t>(c.kind);
    h = fnv1a(&kind, sizeof(kind), h);
    h = fnv1a(c.indices.data(), c.indices.size() * sizeof(std::uint32_t), h);
    h = fnv1a(c.values.data(), c.values.size() * sizeof(double), h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// dense CSV
// ---------------------------------------------------------------------------

SurvivalDataset load_dense_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_csv(line);
  std::size_t time_col = header.size(), status_col = header.size();
  std::vector<std::size_t> covariate_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "time") {
      if (time_col != header.size())
        throw SchemaError("duplicate 'time' column in '" + path + "'");
      time_col = i;
    } else if (header[i] == "status") {
      if (status_col != header.size())
        throw SchemaError("duplicate 'status' column in '" + path + "'");
      status_col = i;
    } else {
      covariate_cols.push_back(i);
    }
  }
  if (time_col == header.size())
    throw SchemaError("'" + path + "' has no 'time' column");
  if (status_col == header.size())
    throw SchemaError("'" + path + "' has no 'status' column");

  RawData raw;
  raw.n_cols = covariate_cols.size();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()) + " at " + location(path, line_no));
    Observation o;
    o.row_id = static_cast<std::int64_t>(raw.obs.size());
    o.time = parse_time(cells[time_col], path, line_no);
    o.status = parse_status(cells[status_col], path, line_no);
    for (std::size_t j = 0; j < covariate_cols.size(); ++j) {
      const double v = parse_double(cells[covariate_cols[j]], path, line_no);
      if (!std::isfinite(v))
        throw DomainError("covariate must be finite at " + location(path, line_no));
      if (v != 0.0) raw.entries.push_back({o.row_id, j, v});
    }
    raw.obs.push_back(o);
  }
  return sort_and_block(std::move(raw));
}

void write_dense_csv(const SurvivalDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  std::string buf = "time,status";
  for (std::size_t j = 0; j < ds.p(); ++j) {
    buf += ",x";
    buf += std::to_string(j);
  }
  buf += '\n';
  out << buf;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    buf.clear();
    format_double(buf, ds.times()[i]);
    buf += ',';
    buf += std::to_string(ds.status()[i]);
    for (std::size_t j = 0; j < ds.p(); ++j) {
      buf += ',';
      format_double(buf, ds.columns()[j].at(i));
    }
    buf += '\n';
    out << buf;
  }
  if (!out) throw ParseError("short write to '" + path + "'");
}

// ---------------------------------------------------------------------------
// sparse COO pair
// ---------------------------------------------------------------------------

SurvivalDataset load_sparse_coo(const std::string& obs_path,
                                const std::string& matrix_path) {
  RawData raw;
  for_each_data_line(obs_path, [&](std::string_view line, std::size_t line_no) {
    const auto cells = split_csv(line);
    if (cells.size() != 3)
      throw ParseError("expected 'row_id,time,status' at " +
                       location(obs_path, line_no));
    Observation o;
    o.row_id = parse_int(cells[0], obs_path, line_no);
    o.time = parse_time(cells[1], obs_path, line_no);
    o.status = parse_status(cells[2], obs_path, line_no);
    raw.obs.push_back(o);
  });

  const std::size_t n = raw.obs.size();
  std::unordered_set<std::uint64_t> seen_cells;
  std::size_t max_col = 0;
  bool any_entry = false;
  std::size_t declared_cols = 0;
  const auto on_matrix_line = [&](std::string_view line, std::size_t line_no) {
    const auto cells = split_csv(line);
    if (cells.size() != 3)
      throw ParseError("expected 'row_id,col_id,value' at " +
                       location(matrix_path, line_no));
    const std::int64_t row = parse_int(cells[0], matrix_path, line_no);
    const std::int64_t col = parse_int(cells[1], matrix_path, line_no);
    const double value = parse_double(cells[2], matrix_path, line_no);
    if (row < 0 || static_cast<std::size_t>(row) >= n)
      throw IndexError("matrix row " + std::to_string(row) + " outside [0, " +
                       std::to_string(n) + ") at " + location(matrix_path, line_no));
    if (col < 0)
      throw IndexError("negative column at " + location(matrix_path, line_no));
    const std::uint64_t key =
        (static_cast<std::uint64_t>(row) << 32) | static_cast<std::uint64_t>(col);
    if (!seen_cells.insert(key).second)
      throw DuplicateEntryError("cell (" + std::to_string(row) + "," +
                                std::to_string(col) + ") given twice at " +
                                location(matrix_path, line_no));
    if (!std::isfinite(value))
      throw DomainError("matrix value must be finite at " +
                        location(matrix_path, line_no));
    any_entry = true;
    max_col = std::max(max_col, static_cast<std::size_t>(col));
    if (value != 0.0)
      raw.entries.push_back({row, static_cast<std::size_t>(col), value});
  };
  for_each_data_line(matrix_path, on_matrix_line, &declared_cols);
  const std::size_t inferred = any_entry ? max_col + 1 : 0;
  if (declared_cols > 0 && inferred > declared_cols)
    throw IndexError("matrix column " + std::to_string(max_col) +
                     " outside declared width " + std::to_string(declared_cols) +
                     " in '" + matrix_path + "'");
  raw.n_cols = std::max(declared_cols, inferred);
  return sort_and_block(std::move(raw));
}

void write_sparse_coo(const SurvivalDataset& ds, const std::string& obs_path,
                      const std::string& matrix_path) {
  {
    std::ofstream out(obs_path);
    if (!out) throw ParseError("cannot write '" + obs_path + "'");
    out << "# row_id,time,status\n";
    std::string buf;
    for (std::size_t i = 0; i < ds.n(); ++i) {
      buf.clear();
      buf += std::to_string(ds.row_ids()[i]);
      buf += ',';
      format_double(buf, ds.times()[i]);
      buf += ',';
      buf += std::to_string(ds.status()[i]);
      buf += '\n';
      out << buf;
    }
    if (!out) throw ParseError("short write to '" + obs_path + "'");
  }
  std::ofstream out(matrix_path);
  if (!out) throw ParseError("cannot write '" + matrix_path + "'");
  out << "# row_id,col_id,value\n";
  out << "# cols: " << ds.p() << '\n';
  std::string buf;
  for (std::size_t j = 0; j < ds.p(); ++j) {
    const SparseColumn& col = ds.columns()[j];
    if (col.kind == ColumnKind::dense) {
      for (std::size_t i = 0; i < col.length; ++i) {
        if (col.values[i] == 0.0) continue;
        buf.clear();
        buf += std::to_string(ds.row_ids()[i]);
        buf += ',';
        buf += std::to_string(j);
        buf += ',';
        format_double(buf, col.values[i]);
        buf += '\n';
        out << buf;
      }
    } else {
      for (std::size_t k = 0; k < col.indices.size(); ++k) {
        buf.clear();
        buf += std::to_string(ds.row_ids()[col.indices[k]]);
        buf += ',';
        buf += std::to_string(j);
        buf += ',';
        format_double(buf,
                      col.kind == ColumnKind::sparse_indicator ? 1.0 : col.values[k]);
        buf += '\n';
        out << buf;
      }
    }
  }
  if (!out) throw ParseError("short write to '" + matrix_path + "'");
}

}  // namespace survscan
