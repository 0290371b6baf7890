#include "scdiff/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "scdiff/errors.hpp"
#include "scdiff/textio.hpp"

namespace scdiff {

namespace {

bool valid_gene_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.' &&
        c != '-')
      return false;
  }
  return true;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

double coefficient_of_variation(const Vector& gene_column) {
  if (gene_column.size() == 0) throw EmptyMatrix("gene column has no cells");
  const double mean = gene_column.mean();
  if (mean == 0.0)
    throw ZeroMeanGene("coefficient of variation undefined for zero-mean gene");
  const double var = (gene_column.array() - mean).square().mean();
  return std::sqrt(var) / mean;
}

SelectionResult select_hypervariable(const ExpressionMatrix& m, int top_k,
                                     double negation) {
  if (m.cells() == 0 || m.genes() == 0)
    throw EmptyMatrix("cannot rank genes of an empty matrix");
  if (top_k < 1) throw InvalidConfig("top_k must be at least 1");

  std::vector<Index> rankable;
  std::vector<double> cv(static_cast<std::size_t>(m.genes()), 0.0);
  SelectionResult out;
  out.spec.top_k = top_k;
  out.spec.negation = negation;
  for (Index j = 0; j < m.genes(); ++j) {
    try {
      cv[static_cast<std::size_t>(j)] = coefficient_of_variation(m.values.col(j));
      rankable.push_back(j);
    } catch (const ZeroMeanGene&) {
      out.spec.skipped_zero_mean.push_back(m.gene_names[static_cast<std::size_t>(j)]);
    }
  }
  std::sort(rankable.begin(), rankable.end(), [&](Index a, Index b) {
    const double ca = cv[static_cast<std::size_t>(a)];
    const double cb = cv[static_cast<std::size_t>(b)];
    if (ca != cb) return ca > cb;
    return m.gene_names[static_cast<std::size_t>(a)] <
           m.gene_names[static_cast<std::size_t>(b)];
  });
  const std::size_t keep =
      std::min<std::size_t>(rankable.size(), static_cast<std::size_t>(top_k));
  rankable.resize(keep);

  out.reduced.values.resize(m.cells(), static_cast<Index>(keep));
  out.reduced.cell_ids = m.cell_ids;
  for (std::size_t k = 0; k < keep; ++k) {
    const Index j = rankable[k];
    out.spec.selected_indices.push_back(j);
    out.spec.selected_genes.push_back(m.gene_names[static_cast<std::size_t>(j)]);
    out.reduced.gene_names.push_back(m.gene_names[static_cast<std::size_t>(j)]);
    out.reduced.values.col(static_cast<Index>(k)) = m.values.col(j);
  }
  return out;
}

Matrix zero_negate(const Matrix& values, double n) {
  if (!(n < 0.0)) throw InvalidConfig("negation value must be negative");
  if ((values.array() < 0.0).any())
    throw NotRaw("matrix already holds negative values; refusing to negate zeros");
  return (values.array() == 0.0).select(n, values);
}

Matrix truncate_negatives(const Matrix& values) {
  return (values.array() < 0.0).select(0.0, values);
}

ExpressionMatrix apply_preprocess(const ExpressionMatrix& raw,
                                  const PreprocessSpec& spec) {
  ExpressionMatrix out;
  out.cell_ids = raw.cell_ids;
  out.values.resize(raw.cells(), static_cast<Index>(spec.selected_indices.size()));
  for (std::size_t k = 0; k < spec.selected_indices.size(); ++k) {
    const Index j = spec.selected_indices[k];
    if (j < 0 || j >= raw.genes())
      throw InvalidSpec("selected gene index " + std::to_string(j) +
                        " out of range for matrix with " +
                        std::to_string(raw.genes()) + " genes");
    if (raw.gene_names[static_cast<std::size_t>(j)] != spec.selected_genes[k])
      throw InvalidSpec("gene at column " + std::to_string(j) + " is '" +
                        raw.gene_names[static_cast<std::size_t>(j)] +
                        "' but the preprocess record expects '" +
                        spec.selected_genes[k] + "'");
    out.values.col(static_cast<Index>(k)) = raw.values.col(j);
    out.gene_names.push_back(spec.selected_genes[k]);
  }
  out.values = zero_negate(out.values, spec.negation);
  return out;
}

ExpressionMatrix load_csv(const std::string& path, bool require_nonnegative) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  ExpressionMatrix m;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::vector<double>> rows;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (lineno == 1) {
      if (fields[0] != "cell_id")
        throw ParseError("line 1: header must start with 'cell_id', got '" +
                         fields[0] + "'");
      std::unordered_set<std::string> seen;
      for (std::size_t j = 1; j < fields.size(); ++j) {
        if (!valid_gene_name(fields[j]))
          throw ParseError("line 1, column " + std::to_string(j + 1) +
                           ": invalid gene name '" + fields[j] + "'");
        if (!seen.insert(fields[j]).second)
          throw DuplicateGene("gene '" + fields[j] + "' appears twice in header");
        m.gene_names.push_back(fields[j]);
      }
      continue;
    }
    if (fields.size() != m.gene_names.size() + 1)
      throw ParseError("line " + std::to_string(lineno) + ": expected " +
                       std::to_string(m.gene_names.size() + 1) +
                       " fields, got " + std::to_string(fields.size()));
    m.cell_ids.push_back(fields[0]);
    std::vector<double> row;
    row.reserve(m.gene_names.size());
    for (std::size_t j = 1; j < fields.size(); ++j) {
      double v;
      if (!parse_double(fields[j], v))
        throw ParseError("line " + std::to_string(lineno) + ", column " +
                         std::to_string(j + 1) + ": cannot parse '" +
                         fields[j] + "' as a number");
      if (!std::isfinite(v))
        throw ParseError("line " + std::to_string(lineno) + ", column " +
                         std::to_string(j + 1) + ": non-finite value '" +
                         fields[j] + "'");
      if (require_nonnegative && v < 0.0)
        throw NegativeValue("line " + std::to_string(lineno) + ", column " +
                            std::to_string(j + 1) + ": negative value " +
                            fields[j] + " in raw matrix");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (lineno == 0) throw ParseError("'" + path + "' is empty");

  m.values.resize(static_cast<Index>(rows.size()),
                  static_cast<Index>(m.gene_names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

void save_csv(const ExpressionMatrix& m, const std::string& path) {
  if (!m.cell_ids.empty() &&
      m.cell_ids.size() != static_cast<std::size_t>(m.cells()))
    throw ShapeMismatch("cell_ids size does not match row count");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "cell_id";
  for (const auto& g : m.gene_names) out << ',' << g;
  out << '\n';
  for (Index i = 0; i < m.cells(); ++i) {
    if (m.cell_ids.empty())
      out << "cell_" << i;
    else
      out << m.cell_ids[static_cast<std::size_t>(i)];
    for (Index j = 0; j < m.genes(); ++j) out << ',' << format_double(m.values(i, j));
    out << '\n';
  }
  if (!out) throw IoError("error while writing '" + path + "'");
}

}  // namespace scdiff
