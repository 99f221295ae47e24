#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/neural.hpp"
#include "fedsim/types.hpp"

namespace fedsim::metrics {

struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::size_t> counts;  // rows = true class, cols = predicted

    explicit ConfusionMatrix(std::size_t k = 0) : classes(k), counts(k * k, 0) {}
    std::size_t& at(std::size_t truth, std::size_t pred) { return counts[truth * classes + pred]; }
    std::size_t at(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }
    std::size_t total() const;
};

// Argmax with ties broken toward the lowest class index.
std::vector<int> argmax_rows(const std::vector<double>& probs, std::size_t rows, std::size_t cols);

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          std::size_t classes);

// Mean per-class recall; zero-support classes are excluded from the mean.
double balanced_accuracy(const ConfusionMatrix& cm);

// Per-class F1 with the 0-on-zero-division convention; macro over supported
// (nonzero row sum) classes.
std::vector<double> per_class_f1(const ConfusionMatrix& cm);
double macro_f1(const ConfusionMatrix& cm);

enum class Vantage { Central, Distributed };
enum class SplitKind { Test, Validation };

struct MetricsRecord {
    double virtual_time = 0.0;
    std::size_t round = 0;  // sync round or async merge count
    double avg_updates = 0.0;
    Vantage vantage = Vantage::Central;
    SplitKind split = SplitKind::Test;
    double loss = 0.0;
    double ba = 0.0;
    double macro_f1 = 0.0;
    std::vector<double> f1;  // per class
};

// Forward + argmax + all metrics over a sample set.
MetricsRecord evaluate(const neural::MlpArchitecture& arch, const ParamVector& params,
                       const std::vector<Sample>& samples, Vantage vantage, SplitKind split);

// Trace CSV per the simulator's on-disk contract; one row per evaluation.
// For six-class runs the per-class columns carry the activity names.
std::string trace_csv_header(const std::vector<std::string>& class_names);
std::string trace_csv_row(const MetricsRecord& rec);
void write_trace_csv(const std::string& path, const std::vector<MetricsRecord>& trace,
                     const std::vector<std::string>& class_names);

// Tukey boxplot statistics of post-scaling feature values, per client, for
// one class on one sensor group's features.
struct BoxStats {
    std::string client_id;
    std::string feature;
    std::size_t samples = 0;
    double q1 = 0.0, median = 0.0, q3 = 0.0;
    double whisker_lo = 0.0, whisker_hi = 0.0;
};

std::vector<BoxStats> skew_report(const std::vector<ClientDataset>& clients, int class_index,
                                  const std::vector<std::size_t>& feature_columns,
                                  const std::vector<std::string>& feature_names);

std::string format_skew_report(const std::vector<BoxStats>& report);

}  // namespace fedsim::metrics
