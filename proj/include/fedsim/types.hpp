#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedsim {

// Flat model parameters in layer order W1,b1,W2,b2,...; weights row-major
// (output neuron index is the row).
using ParamVector = std::vector<double>;

// Error raised by configuration/input validation; everything else surfaces as
// std::runtime_error. The C API maps these to exit codes 2 and 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// One preprocessed observation. Features may hold NaN (missing) until
// standardization imputes them.
struct Sample {
    std::vector<double> features;
    int label = 0;
};

struct ClientDataset {
    std::string client_id;
    std::vector<Sample> train;
    std::vector<Sample> val;
    std::vector<Sample> test;

    // n_i: local training sample count (post-augmentation when applied).
    std::size_t sample_count() const { return train.size(); }
};

enum class StatsScope { Local, Global };

struct FeatureStats {
    StatsScope scope = StatsScope::Local;
    std::string client_id;  // empty for global scope
    std::vector<double> mean;
    std::vector<double> stddev;
    std::size_t count = 0;
};

// Centralized test set; each sample is tagged with its source client.
struct CentralTestSet {
    std::vector<Sample> samples;
    std::vector<std::uint32_t> source;  // index into client_ids, parallel to samples
    std::vector<std::string> client_ids;
};

}  // namespace fedsim
