#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/types.hpp"

namespace fedsim::ingest {

struct RawRow {
    double timestamp = 0.0;
    std::vector<double> features;  // NaN marks a missing value
    int label = -1;                // index into FeatureSchema::class_names
};

struct RawClientTable {
    std::string client_id;
    std::vector<RawRow> rows;
    // Rows rejected at load time because zero or more than one of the
    // mutually exclusive activity flags was set.
    std::size_t dropped_rows = 0;
};

struct SensorGroup {
    std::string name;
    std::vector<std::size_t> columns;  // indices into feature_names
};

struct FeatureSchema {
    std::vector<std::string> feature_names;
    std::vector<SensorGroup> sensor_groups;
    std::vector<std::size_t> selected_columns;
    std::vector<std::string> class_names;

    std::size_t feature_count() const { return feature_names.size(); }
    std::size_t class_count() const { return class_names.size(); }
};

// The six primary activities, in the order used throughout traces and the
// metrics CSV: lying, sitting, standing, walking, running, bicycling.
std::vector<std::string> activity_class_names();

struct LoadResult {
    std::vector<RawClientTable> tables;
    FeatureSchema schema;
    std::size_t dropped_rows_total = 0;
};

// Loads one CSV per client from `data_dir` (or the files listed in a
// manifest.json index if present). Header names the columns; label columns
// are prefixed "label:"; empty cells are missing values. Rows matching zero
// or several activity classes are dropped and counted. Tables come back
// sorted by client id.
LoadResult load_clients(const std::string& data_dir,
                        const std::vector<std::string>& class_names = activity_class_names());

// Drops every sensor group containing any feature whose pooled (all-client)
// missing fraction exceeds `missing_threshold`; rewrites the tables to the
// surviving columns. Throws if nothing survives.
LoadResult select_features(const LoadResult& input, double missing_threshold = 0.6);

struct SyntheticConfig {
    std::size_t client_count = 1;
    std::size_t class_count = 6;
    std::size_t feature_dim = 8;
    // Global class proportions (must sum to 1). Per-client proportions are
    // either these exactly (dirichlet_alpha == 0) or drawn from
    // Dirichlet(alpha * proportions * class_count).
    std::vector<double> proportions;
    double dirichlet_alpha = 0.0;
    // Explicit per-client proportions (row-major, client_count x class_count
    // values, each row summing to 1). When non-empty this overrides both
    // `proportions` and the Dirichlet draw.
    std::vector<double> per_client_proportions;
    std::vector<std::size_t> samples_per_client;  // size 1 => same count for all
    double class_sep = 1.0;    // scale on the class-conditional means
    double noise_std = 1.0;    // within-class feature noise
    double shift_std = 0.0;    // per-client additive mean shift (feature skew)
    double scale_jitter = 0.0; // per-client multiplicative scale, exp(N(0,jitter))
    std::uint64_t seed = 0;

    void validate() const;
};

// Class-conditional Gaussian generator with per-client mean shifts; produces
// all three skews (label, quantity, feature). Deterministic per seed. Class
// counts are quota-rounded so realized shares track the proportions closely.
LoadResult generate_synthetic(const SyntheticConfig& cfg);

}  // namespace fedsim::ingest
