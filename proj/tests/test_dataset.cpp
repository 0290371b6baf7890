#include "scdiff/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "scdiff/errors.hpp"
#include "scdiff/rng.hpp"

using namespace scdiff;

namespace {

ExpressionMatrix make_matrix(std::vector<std::vector<double>> rows,
                             std::vector<std::string> genes) {
  ExpressionMatrix m;
  m.gene_names = std::move(genes);
  m.values.resize(static_cast<Index>(rows.size()),
                  static_cast<Index>(m.gene_names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("coefficient of variation on known columns") {
  Vector constant(3);
  constant << 2, 2, 2;
  CHECK(coefficient_of_variation(constant) == 0.0);

  Vector two(2);
  two << 0, 2;  // mean 1, population sd 1
  CHECK(coefficient_of_variation(two) == doctest::Approx(1.0).epsilon(1e-12));

  Vector zeros = Vector::Zero(3);
  CHECK_THROWS_AS(coefficient_of_variation(zeros), ZeroMeanGene);
  CHECK_THROWS_AS(coefficient_of_variation(Vector{}), EmptyMatrix);
}

TEST_CASE("hypervariable selection ranks by cv with name tie-break") {
  // cv: a -> 0 (constant), b -> 1, c -> 1, d -> sd/mean of {1,5}=2/3
  auto m = make_matrix({{3, 0, 0, 1}, {3, 2, 2, 5}}, {"a", "b", "c", "d"});
  auto sel = select_hypervariable(m, 3);
  CHECK(sel.spec.selected_genes == std::vector<std::string>{"b", "c", "d"});
  CHECK(sel.spec.selected_indices == std::vector<Index>{1, 2, 3});
  CHECK(sel.reduced.genes() == 3);
  CHECK(sel.reduced.values(1, 0) == 2);
  CHECK(sel.reduced.values(1, 2) == 5);
  CHECK(sel.spec.skipped_zero_mean.empty());

  auto top1 = select_hypervariable(m, 1);
  CHECK(top1.spec.selected_genes == std::vector<std::string>{"b"});

  // More requested than rankable: keeps everything, in rank order.
  auto all = select_hypervariable(m, 99);
  CHECK(all.spec.selected_genes == std::vector<std::string>{"b", "c", "d", "a"});
}

TEST_CASE("zero-mean genes are skipped, not ranked") {
  auto m = make_matrix({{0, 1}, {0, 3}}, {"dead", "live"});
  auto sel = select_hypervariable(m, 2);
  CHECK(sel.spec.selected_genes == std::vector<std::string>{"live"});
  CHECK(sel.spec.skipped_zero_mean == std::vector<std::string>{"dead"});
  CHECK(sel.reduced.genes() == 1);
}

TEST_CASE("selection rejects empty matrices and bad top_k") {
  ExpressionMatrix empty;
  empty.values.resize(0, 0);
  CHECK_THROWS_AS(select_hypervariable(empty, 5), EmptyMatrix);
  auto m = make_matrix({{1}}, {"g"});
  CHECK_THROWS_AS(select_hypervariable(m, 0), InvalidConfig);
}

TEST_CASE("selection matches brute-force oracle on random matrices") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const Index cells = 2 + static_cast<Index>(rng.uniform_int(0, 6));
    const Index genes = 1 + static_cast<Index>(rng.uniform_int(0, 9));
    ExpressionMatrix m;
    m.values.resize(cells, genes);
    for (Index i = 0; i < cells; ++i)
      for (Index j = 0; j < genes; ++j)
        m.values(i, j) = rng.uniform() < 0.3 ? 0.0 : rng.uniform() * 10.0;
    for (Index j = 0; j < genes; ++j)
      m.gene_names.push_back("g" + std::to_string(j));
    const int k = 1 + static_cast<int>(rng.uniform_int(0, genes));

    // Oracle: compute every defined cv with plain loops, sort descending.
    std::vector<std::pair<double, std::string>> ranked;
    for (Index j = 0; j < genes; ++j) {
      double mean = 0;
      for (Index i = 0; i < cells; ++i) mean += m.values(i, j);
      mean /= static_cast<double>(cells);
      if (mean == 0.0) continue;
      double var = 0;
      for (Index i = 0; i < cells; ++i) {
        const double d = m.values(i, j) - mean;
        var += d * d;
      }
      var /= static_cast<double>(cells);
      ranked.emplace_back(std::sqrt(var) / mean, m.gene_names[static_cast<std::size_t>(j)]);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    ranked.resize(std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k)));

    auto sel = select_hypervariable(m, k);
    REQUIRE(sel.spec.selected_genes.size() == ranked.size());
    for (std::size_t r = 0; r < ranked.size(); ++r)
      CHECK(sel.spec.selected_genes[r] == ranked[r].second);
  }
}

TEST_CASE("zero negation replaces exact zeros only") {
  Matrix v(2, 3);
  v << 0, 1.5, 0, 2, 0, 1e-300;
  Matrix neg = zero_negate(v, -10);
  CHECK(neg(0, 0) == -10);
  CHECK(neg(0, 1) == 1.5);
  CHECK(neg(0, 2) == -10);
  CHECK(neg(1, 1) == -10);
  CHECK(neg(1, 2) == 1e-300);  // tiny but nonzero: untouched

  CHECK_THROWS_AS(zero_negate(neg, -10), NotRaw);
  CHECK_THROWS_AS(zero_negate(v, 0.0), InvalidConfig);
  CHECK_THROWS_AS(zero_negate(v, 3.0), InvalidConfig);
}

TEST_CASE("truncation clamps negatives to exactly zero") {
  Matrix v(1, 4);
  v << -10, 0.5, -1e-12, 0;
  Matrix t = truncate_negatives(v);
  CHECK(t(0, 0) == 0.0);
  CHECK(t(0, 1) == 0.5);
  CHECK(t(0, 2) == 0.0);
  CHECK(t(0, 3) == 0.0);
}

TEST_CASE("negate then truncate restores the raw matrix") {
  Rng rng(5);
  Matrix v(8, 8);
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j)
      v(i, j) = rng.uniform() < 0.4 ? 0.0 : rng.uniform() * 7;
  Matrix round = truncate_negatives(zero_negate(v, -10));
  CHECK(round == v);
}

TEST_CASE("apply_preprocess reproduces selection plus negation") {
  auto m = make_matrix({{3, 0, 0, 1}, {3, 2, 2, 5}}, {"a", "b", "c", "d"});
  auto sel = select_hypervariable(m, 2, -7.0);
  auto proc = apply_preprocess(m, sel.spec);
  CHECK(proc.gene_names == sel.spec.selected_genes);
  CHECK(proc.values == zero_negate(sel.reduced.values, -7.0));

  PreprocessSpec bad = sel.spec;
  bad.selected_genes[0] = "zzz";
  CHECK_THROWS_AS(apply_preprocess(m, bad), InvalidSpec);
  bad = sel.spec;
  bad.selected_indices[0] = 99;
  CHECK_THROWS_AS(apply_preprocess(m, bad), InvalidSpec);
}

TEST_CASE("csv round trip is bit exact") {
  TempFile f("scdiff_test_roundtrip.csv");
  ExpressionMatrix m;
  m.gene_names = {"g1", "Gene.2", "g-3_x"};
  m.cell_ids = {"c1", "c2"};
  m.values.resize(2, 3);
  m.values << 0.1, 1e-300, 12345.678901234567, 0, 2.5e17, 3;
  save_csv(m, f.path);
  auto back = load_csv(f.path);
  CHECK(back.gene_names == m.gene_names);
  CHECK(back.cell_ids == m.cell_ids);
  REQUIRE(back.values.rows() == 2);
  REQUIRE(back.values.cols() == 3);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 3; ++j)
      CHECK(back.values(i, j) == m.values(i, j));
}

TEST_CASE("csv round trip survives random doubles") {
  TempFile f("scdiff_test_random.csv");
  Rng rng(11);
  ExpressionMatrix m;
  m.values.resize(20, 5);
  for (Index j = 0; j < 5; ++j) m.gene_names.push_back("g" + std::to_string(j));
  for (Index i = 0; i < 20; ++i)
    for (Index j = 0; j < 5; ++j)
      m.values(i, j) =
          rng.gaussian() * std::pow(10.0, static_cast<double>(rng.uniform_int(0, 24)) - 12.0);
  save_csv(m, f.path);
  auto back = load_csv(f.path);
  for (Index i = 0; i < 20; ++i)
    for (Index j = 0; j < 5; ++j)
      CHECK(back.values(i, j) == m.values(i, j));
  // Default cell ids are synthesized on save.
  CHECK(back.cell_ids[0] == "cell_0");
  CHECK(back.cell_ids[19] == "cell_19");
}

TEST_CASE("csv loader rejects malformed input") {
  TempFile f("scdiff_test_bad.csv");
  auto write = [&](const std::string& text) {
    std::ofstream out(f.path);
    out << text;
  };

  write("gene,a,b\nc1,1,2\n");
  CHECK_THROWS_AS(load_csv(f.path), ParseError);

  write("cell_id,a,a\nc1,1,2\n");
  CHECK_THROWS_AS(load_csv(f.path), DuplicateGene);

  write("cell_id,a,b!\nc1,1,2\n");
  CHECK_THROWS_AS(load_csv(f.path), ParseError);

  write("cell_id,a,b\nc1,1\n");
  CHECK_THROWS_AS(load_csv(f.path), ParseError);

  write("cell_id,a,b\nc1,1,oops\n");
  CHECK_THROWS_AS(load_csv(f.path), ParseError);

  write("cell_id,a,b\nc1,1,inf\n");
  CHECK_THROWS_AS(load_csv(f.path), ParseError);

  write("cell_id,a,b\nc1,1,nan\n");
  CHECK_THROWS_AS(load_csv(f.path), ParseError);

  write("cell_id,a,b\nc1,1,-0.5\n");
  CHECK_NOTHROW(load_csv(f.path));
  CHECK_THROWS_AS(load_csv(f.path, /*require_nonnegative=*/true), NegativeValue);

  write("");
  CHECK_THROWS_AS(load_csv(f.path), ParseError);

  CHECK_THROWS_AS(load_csv("/nonexistent/dir/file.csv"), IoError);
}

TEST_CASE("csv loader tolerates crlf and trailing blank lines") {
  TempFile f("scdiff_test_crlf.csv");
  {
    std::ofstream out(f.path);
    out << "cell_id,a\r\nc1,1.5\r\n\r\n";
  }
  auto m = load_csv(f.path);
  CHECK(m.cells() == 1);
  CHECK(m.values(0, 0) == 1.5);
}
