#pragma once

#include <string>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/federation.hpp"
#include "fedsim/ingest.hpp"
#include "fedsim/metrics.hpp"

namespace fedsim::experiment {

// Output of the full data pipeline: load/generate, feature selection,
// splitting, (optional) holdout extraction, standardization, augmentation,
// central test assembly.
struct PreparedData {
    federation::PreparedExperiment prepared;
    ingest::FeatureSchema schema;  // post feature selection
    std::size_t dropped_rows = 0;
    std::vector<std::string> held_out_ids;
};

PreparedData prepare(const config::ExperimentConfig& cfg);

// Dispatches to the central/sync/async orchestrator.
federation::RunOutput run_prepared(const config::ExperimentConfig& cfg,
                                   const federation::PreparedExperiment& prepared);
federation::RunOutput run_in_memory(const config::ExperimentConfig& cfg);

// Full run with artifacts: metrics.csv, final_params.bin, manifest.json and
// (unless disabled) events.tsv under cfg.output_dir.
federation::RunOutput run_experiment(const config::ExperimentConfig& cfg);

// Mean of the last `k` central-test evaluations of a trace.
metrics::MetricsRecord average_last_evals(const std::vector<metrics::MetricsRecord>& trace,
                                          std::size_t k = 5);

struct CellSummary {
    std::string label;
    metrics::MetricsRecord last5;  // averaged central-test metrics
};

// Runs every grid cell against the shared prepared data. With a non-empty
// artifact root, each cell writes its outputs under <root>/cell<i>/.
std::vector<CellSummary> run_grid(const config::ExperimentConfig& base,
                                  const config::GridSpec& grid,
                                  const std::string& artifact_root = "",
                                  std::vector<std::string>* class_names_out = nullptr);

// Table-style text: one metric per row (m-F1, BA, F1 of the named class),
// one column per cell.
std::string format_grid_summary(const std::vector<CellSummary>& cells,
                                const std::vector<std::string>& class_names);

// Per-client boxplot text for one class on one sensor group, computed on the
// prepared (post-scaling) data.
std::string skew_report_text(const config::ExperimentConfig& cfg, const std::string& class_name,
                             const std::string& sensor_name);

}  // namespace fedsim::experiment
