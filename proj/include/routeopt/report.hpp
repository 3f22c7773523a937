#pragma once

#include <string>
#include <vector>

#include "routeopt/harness.hpp"

namespace routeopt::report {

// Writes the comparison table, per-replication records, per-edge deviation
// tables, model evaluation tables (when a model was trained) and SVG
// charts into out_dir. Every file embeds the config hash and master seed;
// identical batches produce byte-identical files. Throws before touching
// the filesystem if the batch is empty.
std::vector<std::string> emit_report(const harness::ComparisonBatch& batch,
                                     const std::string& out_dir);

// Rows of replications.csv, used to rebuild aggregate outputs without
// re-running the pipeline.
struct ReplicationRow {
  std::string scenario;
  harness::ReplicationRecord record;
};

std::string serialize_replications(const harness::ComparisonBatch& batch);
std::vector<ReplicationRow> parse_replications(const std::string& text);

// Rebuilds comparison.csv and the two charts from a replications file.
std::vector<std::string> rebuild_report(const std::string& replications_csv,
                                        const std::string& out_dir);

// Deterministic bar chart (mean with stddev whiskers) used for the
// flow-deviation and travel-time panels.
std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& means, const std::vector<double>& stds,
                          const std::string& meta_comment);

}  // namespace routeopt::report
