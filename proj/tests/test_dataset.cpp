#include "survscan/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "survscan/errors.hpp"

using namespace survscan;
namespace fs = std::filesystem;

namespace {

// Scratch directory shared by the file-format tests; wiped at process exit.
struct TempDir {
  fs::path root;
  TempDir() {
    root = fs::temp_directory_path() / "survscan_dataset_tests";
    fs::create_directories(root);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
  std::string file(const std::string& name) const { return (root / name).string(); }
};

TempDir& tmp() {
  static TempDir dir;
  return dir;
}

std::string write_file(const std::string& name, const std::string& content) {
  const std::string path = tmp().file(name);
  std::ofstream out(path);
  out << content;
  return path;
}

// A small mixed dataset used across several tests.  Built directly from rows so
// the expected sorted layout can be written down by hand.
RawData toy_raw() {
  RawData raw;
  // id: 0    1    2    3    4    5
  // t : 2.0  5.0  2.0  1.0  5.0  2.0
  // s : 1    0    2    1    1    1
  raw.obs = {{2.0, 1, 0}, {5.0, 0, 1}, {2.0, 2, 2},
             {1.0, 1, 3}, {5.0, 1, 4}, {2.0, 1, 5}};
  raw.n_cols = 3;
  // col 0: dense-ish values; col 1: all-ones indicator; col 2: empty
  raw.entries = {{0, 0, 1.5}, {1, 0, -2.0}, {2, 0, 0.5}, {4, 0, 3.0},
                 {5, 0, -1.0}, {0, 1, 1.0}, {3, 1, 1.0}, {4, 1, 1.0}};
  return raw;
}

SurvivalDataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t p) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> value(-3.0, 3.0);
  std::uniform_int_distribution<int> tick(0, 20);  // coarse grid => ties
  std::uniform_int_distribution<int> st(0, 2);

  RawData raw;
  raw.n_cols = p;
  raw.obs.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    raw.obs[i] = {0.25 * tick(rng), st(rng), static_cast<std::int64_t>(i)};
  std::shuffle(raw.obs.begin(), raw.obs.end(), rng);

  for (std::size_t j = 0; j < p; ++j) {
    if (j + 1 == p) continue;  // keep the last column empty on purpose
    const double density = (j % 3 == 0) ? 0.6 : 0.05;
    const bool indicator = (j % 3 == 2);
    std::bernoulli_distribution hit(density);
    for (std::size_t i = 0; i < n; ++i)
      if (hit(rng))
        raw.entries.push_back(
            {static_cast<std::int64_t>(i), j, indicator ? 1.0 : value(rng)});
  }
  return sort_and_block(std::move(raw));
}

}  // namespace

TEST_CASE("rows sort by decreasing time with stable id tie-break") {
  const SurvivalDataset ds = sort_and_block(toy_raw());

  REQUIRE(ds.n() == 6);
  REQUIRE(ds.p() == 3);
  CHECK(ds.times() == std::vector<double>{5.0, 5.0, 2.0, 2.0, 2.0, 1.0});
  CHECK(ds.row_ids() == std::vector<std::int64_t>{1, 4, 0, 2, 5, 3});
  CHECK(ds.status() == std::vector<int>{0, 1, 1, 2, 1, 1});
  CHECK(ds.n_events() == 4);
  CHECK(ds.has_competing());

  // tied blocks: [0,1] at t=5, [2,4] at t=2, [5,5] at t=1
  CHECK(ds.blocks().ends == std::vector<std::size_t>{1, 4, 5});
  CHECK(ds.blocks().event_count == std::vector<double>{1.0, 2.0, 1.0});
  CHECK(ds.block_end_of() ==
        std::vector<std::uint32_t>{1, 1, 4, 4, 4, 5});

  // covariates land at the sorted positions of their row ids
  CHECK(ds.covariate(0, 0) == -2.0);  // id 1
  CHECK(ds.covariate(1, 0) == 3.0);   // id 4
  CHECK(ds.covariate(2, 0) == 1.5);   // id 0
  CHECK(ds.covariate(3, 0) == 0.5);   // id 2
  CHECK(ds.covariate(4, 0) == -1.0);  // id 5
  CHECK(ds.covariate(5, 0) == 0.0);   // id 3
  CHECK(ds.covariate(1, 1) == 1.0);
  CHECK(ds.covariate(0, 1) == 0.0);
  for (std::size_t i = 0; i < 6; ++i) CHECK(ds.covariate(i, 2) == 0.0);

  // 3 of 6 rows nonzero: 50% density keeps the all-ones column dense
  CHECK(ds.columns()[1].kind == ColumnKind::dense);
  CHECK(ds.nnz_total() == 8);
}

TEST_CASE("sort_and_block validates ids, entries and domains") {
  SUBCASE("row ids must be a permutation") {
    RawData raw = toy_raw();
    raw.obs[2].row_id = 0;  // duplicate
    CHECK_THROWS_AS(sort_and_block(std::move(raw)), DuplicateEntryError);
  }
  SUBCASE("row id outside range") {
    RawData raw = toy_raw();
    raw.obs[2].row_id = 17;
    CHECK_THROWS_AS(sort_and_block(std::move(raw)), IndexError);
  }
  SUBCASE("entry column outside range") {
    RawData raw = toy_raw();
    raw.entries.push_back({0, 3, 1.0});
    CHECK_THROWS_AS(sort_and_block(std::move(raw)), IndexError);
  }
  SUBCASE("negative time") {
    RawData raw = toy_raw();
    raw.obs[0].time = -1.0;
    CHECK_THROWS_AS(sort_and_block(std::move(raw)), DomainError);
  }
  SUBCASE("status outside {0,1,2}") {
    RawData raw = toy_raw();
    raw.obs[0].status = 3;
    CHECK_THROWS_AS(sort_and_block(std::move(raw)), DomainError);
  }
  SUBCASE("explicit zero entries are dropped") {
    RawData raw = toy_raw();
    raw.entries.push_back({3, 0, 0.0});
    const SurvivalDataset ds = sort_and_block(std::move(raw));
    CHECK(ds.nnz_total() == 8);
  }
  SUBCASE("empty dataset is fine") {
    const SurvivalDataset ds = sort_and_block(RawData{});
    CHECK(ds.n() == 0);
    CHECK(ds.blocks().block_count() == 0);
  }
}

TEST_CASE("column representation picks by density and value set") {
  const std::size_t n = 100;
  std::vector<std::pair<std::uint32_t, double>> ones, mixed, wide;
  for (std::uint32_t i = 0; i < 24; ++i) {
    ones.emplace_back(i * 4, 1.0);
    mixed.emplace_back(i * 4, i == 7 ? 2.0 : 1.0);
  }
  for (std::uint32_t i = 0; i < 25; ++i) wide.emplace_back(i * 4, 1.0);

  const SparseColumn a = SparseColumn::make(n, ones);
  const SparseColumn b = SparseColumn::make(n, mixed);
  const SparseColumn c = SparseColumn::make(n, wide);  // exactly 25%: not sparse

  CHECK(a.kind == ColumnKind::sparse_indicator);
  CHECK(b.kind == ColumnKind::sparse_valued);
  CHECK(c.kind == ColumnKind::dense);
  CHECK(a.values.empty());
  CHECK(c.values.size() == n);
  CHECK(a.density() == doctest::Approx(0.24));

  for (std::size_t i = 0; i < n; ++i) {
    const double expect_a = (i % 4 == 0 && i < 96) ? 1.0 : 0.0;
    CHECK(a.at(i) == expect_a);
    CHECK(b.at(i) == (i == 28 ? 2.0 : expect_a));
    CHECK(c.at(i) == ((i % 4 == 0) ? 1.0 : 0.0));
  }
}

TEST_CASE("dense csv loads into the canonical layout") {
  const std::string path = write_file("basic.csv",
                                      "time,status,x0,x1\n"
                                      "1.5,1,0.25,0\n"
                                      "3,0,0,1\n"
                                      "1.5,2,-1,0\n");
  const SurvivalDataset ds = load_dense_csv(path);
  REQUIRE(ds.n() == 3);
  REQUIRE(ds.p() == 2);
  CHECK(ds.times() == std::vector<double>{3.0, 1.5, 1.5});
  CHECK(ds.row_ids() == std::vector<std::int64_t>{1, 0, 2});
  CHECK(ds.status() == std::vector<int>{0, 1, 2});
  CHECK(ds.blocks().ends == std::vector<std::size_t>{0, 2});
  CHECK(ds.covariate(1, 0) == 0.25);
  CHECK(ds.covariate(2, 0) == -1.0);
  CHECK(ds.covariate(0, 1) == 1.0);
}

TEST_CASE("dense csv rejects broken files") {
  CHECK_THROWS_AS(load_dense_csv(tmp().file("nope.csv")), ParseError);
  CHECK_THROWS_AS(
      load_dense_csv(write_file("h1.csv", "time,x0\n1,0\n")), SchemaError);
  CHECK_THROWS_AS(
      load_dense_csv(write_file("h2.csv", "time,status,status\n1,0,0\n")),
      SchemaError);
  CHECK_THROWS_AS(
      load_dense_csv(write_file("c1.csv", "time,status,x0\n1,0\n")), ParseError);
  CHECK_THROWS_AS(
      load_dense_csv(write_file("c2.csv", "time,status,x0\n1,0,abc\n")), ParseError);
  CHECK_THROWS_AS(
      load_dense_csv(write_file("c3.csv", "time,status,x0\n-1,0,1\n")), DomainError);
  CHECK_THROWS_AS(
      load_dense_csv(write_file("c4.csv", "time,status,x0\ninf,0,1\n")), DomainError);
  CHECK_THROWS_AS(
      load_dense_csv(write_file("c5.csv", "time,status,x0\n1,3,1\n")), DomainError);
  CHECK_THROWS_AS(
      load_dense_csv(write_file("c6.csv", "time,status,x0\n1,0,nan\n")), DomainError);
}

TEST_CASE("coo loader skips comments and ignores line order") {
  const std::string obs = write_file("a.obs",
                                     "# row_id,time,status\n"
                                     "\n"
                                     "0,2.0,1\n"
                                     "1,1.0,0\n"
                                     "  # indented comment\n"
                                     "2,3.0,2\n");
  const std::string m1 = write_file("a1.mat",
                                    "0,0,1.5\n"
                                    "2,1,-2\n"
                                    "1,0,0.5\n");
  const std::string m2 = write_file("a2.mat",
                                    "1,0,0.5\n"
                                    "0,0,1.5\n"
                                    "2,1,-2\n");
  const SurvivalDataset da = load_sparse_coo(obs, m1);
  const SurvivalDataset db = load_sparse_coo(obs, m2);
  CHECK(da == db);
  REQUIRE(da.n() == 3);
  CHECK(da.p() == 2);
  CHECK(da.times() == std::vector<double>{3.0, 2.0, 1.0});
  CHECK(da.covariate(1, 0) == 1.5);
  CHECK(da.covariate(0, 1) == -2.0);
}

TEST_CASE("coo loader rejects bad references") {
  const std::string obs = write_file("b.obs", "0,2.0,1\n1,1.0,0\n");
  CHECK_THROWS_AS(
      load_sparse_coo(obs, write_file("b1.mat", "0,0,1\n0,0,2\n")),
      DuplicateEntryError);
  CHECK_THROWS_AS(load_sparse_coo(obs, write_file("b2.mat", "5,0,1\n")), IndexError);
  CHECK_THROWS_AS(load_sparse_coo(obs, write_file("b3.mat", "0,-1,1\n")), IndexError);
  CHECK_THROWS_AS(load_sparse_coo(obs, write_file("b4.mat", "0,0\n")), ParseError);
  CHECK_THROWS_AS(load_sparse_coo(obs, write_file("b5.mat", "0,0,inf\n")),
                  DomainError);
  CHECK_THROWS_AS(
      load_sparse_coo(write_file("b.obs2", "0,2.0,1\n0,1.0,0\n"),
                      write_file("b6.mat", "")),
      DuplicateEntryError);
  // a declared width narrower than the data is a contradiction
  CHECK_THROWS_AS(
      load_sparse_coo(obs, write_file("b7.mat", "# cols: 1\n0,1,1\n")), IndexError);
}

TEST_CASE("coo round trip reproduces the dataset exactly") {
  const SurvivalDataset ds = random_dataset(20260815, 200, 8);
  REQUIRE(ds.p() == 8);
  CHECK(ds.columns().back().nnz() == 0);  // empty trailing column kept

  const std::string obs = tmp().file("rt.obs");
  const std::string mat = tmp().file("rt.mat");
  write_sparse_coo(ds, obs, mat);
  const SurvivalDataset back = load_sparse_coo(obs, mat);
  CHECK(back == ds);
  CHECK(back.content_hash() == ds.content_hash());
}

TEST_CASE("dense csv round trip preserves payload") {
  const SurvivalDataset ds = random_dataset(7, 120, 4);
  const std::string path = tmp().file("rt.csv");
  write_dense_csv(ds, path);
  const SurvivalDataset back = load_dense_csv(path);
  // ids are re-assigned by file order; everything else must match bit for bit
  CHECK(back.times() == ds.times());
  CHECK(back.status() == ds.status());
  CHECK(back.columns() == ds.columns());
  CHECK(back.content_hash() == ds.content_hash());
}

TEST_CASE("subset_rows keeps provenance for folds") {
  const SurvivalDataset ds = sort_and_block(toy_raw());
  const std::vector<std::uint32_t> keep = {0, 2, 3, 5};
  const SurvivalDataset sub = ds.subset_rows(keep);

  REQUIRE(sub.n() == 4);
  CHECK(sub.times() == std::vector<double>{5.0, 2.0, 2.0, 1.0});
  CHECK(sub.row_ids() == std::vector<std::int64_t>{1, 0, 2, 3});
  CHECK(sub.blocks().ends == std::vector<std::size_t>{0, 2, 3});
  CHECK(sub.blocks().event_count == std::vector<double>{0.0, 1.0, 1.0});
  for (std::size_t i = 0; i < keep.size(); ++i)
    for (std::size_t j = 0; j < ds.p(); ++j)
      CHECK(sub.covariate(i, j) == ds.covariate(keep[i], j));
}

TEST_CASE("subset_rows with repeats models bootstrap resamples") {
  const SurvivalDataset ds = sort_and_block(toy_raw());
  const std::vector<std::uint32_t> draw = {0, 0, 2, 4, 4, 4};

  CHECK_THROWS_AS(ds.subset_rows(draw, false), DuplicateEntryError);

  const SurvivalDataset sub = ds.subset_rows(draw, true);
  REQUIRE(sub.n() == 6);
  CHECK(sub.row_ids() == std::vector<std::int64_t>{0, 1, 2, 3, 4, 5});
  for (std::size_t i = 0; i < draw.size(); ++i) {
    CHECK(sub.times()[i] == ds.times()[draw[i]]);
    CHECK(sub.status()[i] == ds.status()[draw[i]]);
    for (std::size_t j = 0; j < ds.p(); ++j)
      CHECK(sub.covariate(i, j) == ds.covariate(draw[i], j));
  }
  // duplicated tied rows coalesce into one block per distinct time
  CHECK(sub.blocks().ends == std::vector<std::size_t>{1, 5});
  CHECK(sub.blocks().event_count == std::vector<double>{0.0, 4.0});

  CHECK_THROWS_AS(ds.subset_rows(std::vector<std::uint32_t>{2, 1}), DomainError);
  CHECK_THROWS_AS(ds.subset_rows(std::vector<std::uint32_t>{0, 6}), IndexError);
}

TEST_CASE("subset_rows agrees with a dense gather on random data") {
  const SurvivalDataset ds = random_dataset(99, 300, 6);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint32_t> pick(0, 299);
  std::vector<std::uint32_t> draw(150);
  for (auto& d : draw) d = pick(rng);
  std::sort(draw.begin(), draw.end());

  const SurvivalDataset sub = ds.subset_rows(draw, true);
  for (std::size_t i = 0; i < draw.size(); ++i)
    for (std::size_t j = 0; j < ds.p(); ++j)
      CHECK(sub.covariate(i, j) == ds.covariate(draw[i], j));
}

TEST_CASE("sparse storage stays proportional to nonzeros") {
  const std::size_t n = 20000, p = 40;
  std::mt19937_64 rng(11);
  std::bernoulli_distribution hit(0.02);
  RawData raw;
  raw.n_cols = p;
  raw.obs.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    raw.obs[i] = {static_cast<double>(i % 97), i % 5 == 0 ? 1 : 0,
                  static_cast<std::int64_t>(i)};
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t i = 0; i < n; ++i)
      if (hit(rng)) raw.entries.push_back({static_cast<std::int64_t>(i), j, 2.5});
  const SurvivalDataset ds = sort_and_block(std::move(raw));

  for (const auto& c : ds.columns()) CHECK(c.kind != ColumnKind::dense);
  const std::size_t dense_bytes = n * p * sizeof(double);
  CHECK(ds.approx_bytes() < dense_bytes / 4);
}

TEST_CASE("content hash reacts to payload changes") {
  const SurvivalDataset a = random_dataset(42, 80, 3);
  const SurvivalDataset b = random_dataset(42, 80, 3);
  const SurvivalDataset c = random_dataset(43, 80, 3);
  CHECK(a.content_hash() == b.content_hash());
  CHECK(a.content_hash() != c.content_hash());
}
