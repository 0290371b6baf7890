#include "scdiff/report.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "scdiff/errors.hpp"
#include "scdiff/textio.hpp"

namespace scdiff {

using nlohmann::json;

namespace {

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;  // NaN entries serialize as null
}

void check_gene_count(const MetricsReport& r,
                      const std::vector<std::string>& genes) {
  if (static_cast<Index>(genes.size()) != r.real_stats.cv.size())
    throw DimensionMismatch("report has " +
                            std::to_string(r.real_stats.cv.size()) +
                            " genes but " + std::to_string(genes.size()) +
                            " names were supplied");
}

}  // namespace

std::string metrics_report_json(const MetricsReport& r,
                                const std::vector<std::string>& genes) {
  check_gene_count(r, genes);
  json doc;
  doc["format_version"] = kReportFormatVersion;
  doc["kl"] = r.kl;
  doc["wasserstein"] = r.wasserstein;
  doc["mmd"] = r.mmd;
  doc["n_real"] = r.n_real;
  doc["n_synth"] = r.n_synth;
  doc["kernel_bandwidth"] = r.kernel_bandwidth;
  doc["histogram_bins"] = r.histogram_bins;
  doc["genes"] = genes;
  doc["per_gene_cv"] = {{"real", vector_to_json(r.real_stats.cv)},
                        {"synth", vector_to_json(r.synth_stats.cv)}};
  doc["per_gene_zero_prop"] = {
      {"real", vector_to_json(r.real_stats.zero_prop)},
      {"synth", vector_to_json(r.synth_stats.zero_prop)}};
  return doc.dump(2) + "\n";
}

std::string gene_stats_csv(const MetricsReport& r,
                           const std::vector<std::string>& genes) {
  check_gene_count(r, genes);
  std::ostringstream out;
  out << "gene,cv_real,cv_synth,zeroprop_real,zeroprop_synth\n";
  auto field = [](double v) { return std::isnan(v) ? "" : format_double(v); };
  for (std::size_t g = 0; g < genes.size(); ++g) {
    const auto i = static_cast<Index>(g);
    out << genes[g] << ',' << field(r.real_stats.cv(i)) << ','
        << field(r.synth_stats.cv(i)) << ','
        << format_double(r.real_stats.zero_prop(i)) << ','
        << format_double(r.synth_stats.zero_prop(i)) << '\n';
  }
  return out.str();
}

std::string pca_coords_csv(const PcaProjection& p) {
  std::ostringstream out;
  out << "set,dim1,dim2\n";
  auto rows = [&](const char* label, const Matrix& coords) {
    for (Index i = 0; i < coords.rows(); ++i) {
      out << label;
      for (Index k = 0; k < coords.cols(); ++k)
        out << ',' << format_double(coords(i, k));
      out << '\n';
    }
  };
  rows("real", p.real_coords);
  rows("synth", p.synth_coords);
  return out.str();
}

}  // namespace scdiff
