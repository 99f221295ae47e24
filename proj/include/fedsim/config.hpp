#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "fedsim/federation.hpp"
#include "fedsim/ingest.hpp"
#include "fedsim/neural.hpp"
#include "fedsim/preprocess.hpp"
#include "fedsim/simclock.hpp"
#include "fedsim/types.hpp"

namespace fedsim::config {

// Minimal TOML-style reader: [section] / [nested.section] headers, key =
// value pairs, # comments, strings, numbers, booleans and flat arrays.
// Values are addressed by their dotted path. Unknown keys are rejected by the
// typed extraction layer, with the line they came from.
struct TomlValue {
    enum class Kind { String, Number, Boolean, Array };
    Kind kind = Kind::String;
    std::string str;
    double num = 0.0;
    bool boolean = false;
    std::vector<TomlValue> array;
    std::size_t line = 0;
};

std::map<std::string, TomlValue> parse_toml(const std::string& text);

enum class Mode { Central, Sync, Async };
enum class ScalingScope { Local, Global };
enum class TestScheme { Fair, Holdout };

struct Seeds {
    std::uint64_t data = 1;
    std::uint64_t model = 2;
    std::uint64_t selection = 3;
    std::uint64_t latency = 4;
};

struct ExperimentConfig {
    Mode mode = Mode::Sync;

    // Data source: a client CSV directory or a synthetic generator config.
    std::string data_dir;  // empty when synthetic
    bool synthetic = false;
    ingest::SyntheticConfig synthetic_cfg;
    double missing_threshold = 0.6;

    ScalingScope scaling = ScalingScope::Global;
    preprocess::AugmentationMode augmentation = preprocess::AugmentationMode::None;
    std::vector<std::size_t> replication;  // base-mode plan; empty = activity default
    double augment_noise_std = 1e-4;
    TestScheme test_scheme = TestScheme::Fair;
    std::size_t holdout_k = 1;

    std::vector<std::size_t> hidden{64, 16};
    double leaky_slope = 0.01;
    std::size_t batch_size = 128;
    neural::OptimizerConfig optimizer;
    bool persist_optimizer_state = false;

    federation::AggregationConfig agg;
    simclock::LatencyModel latency;
    simclock::DelayProfile delays;
    bool distributed_eval = true;

    Seeds seeds;
    std::string output_dir = "out";
    bool write_events = true;

    void validate() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Canonical serialization: sorted key = value lines covering every
// semantically meaningful field. parse(serialize(c)) == c, and the config
// hash is the FNV-1a of this text.
std::string serialize_config(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

// Cartesian hyperparameter grid over named config fields.
struct GridSpec {
    // field name -> list of values; fields: batch_size, learning_rate,
    // optimizer, scaling, augmentation, mixing_ratio, local_epochs.
    std::vector<std::pair<std::string, std::vector<TomlValue>>> axes;

    std::size_t cell_count() const;
};

GridSpec parse_grid_file(const std::string& path);
GridSpec parse_grid_text(const std::string& text);

// Applies one grid cell (by flat index, row-major over the axes) to a copy of
// the base config. Returns the modified config plus a short cell label.
std::pair<ExperimentConfig, std::string> apply_grid_cell(const ExperimentConfig& base,
                                                         const GridSpec& grid, std::size_t cell);

}  // namespace fedsim::config
