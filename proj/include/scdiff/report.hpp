#pragma once

#include <string>
#include <vector>

#include "scdiff/metrics.hpp"

namespace scdiff {

/// Bumped whenever the JSON report schema below changes incompatibly.
inline constexpr unsigned kReportFormatVersion = 1;

/// Stable sorted-key JSON rendering of a report. Undefined per-gene cv
/// values (zero-mean genes) serialize as null.
std::string metrics_report_json(const MetricsReport& r,
                                const std::vector<std::string>& genes);

/// CSV `gene,cv_real,cv_synth,zeroprop_real,zeroprop_synth`; undefined cv
/// renders as an empty field.
std::string gene_stats_csv(const MetricsReport& r,
                           const std::vector<std::string>& genes);

/// CSV `set,dim1,dim2` with one row per projected cell, real set first.
std::string pca_coords_csv(const PcaProjection& p);

}  // namespace scdiff
