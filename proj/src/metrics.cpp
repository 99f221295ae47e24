#include "fedsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fedsim::metrics {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// Type-7 (linear interpolation) quantile of sorted data.
double quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::vector<int> argmax_rows(const std::vector<double>& probs, std::size_t rows, std::size_t cols) {
    std::vector<int> preds(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* p = probs.data() + r * cols;
        std::size_t best = 0;
        for (std::size_t c = 1; c < cols; ++c) {
            if (p[c] > p[best]) best = c;
        }
        preds[r] = static_cast<int>(best);
    }
    return preds;
}

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          std::size_t classes) {
    if (preds.size() != labels.size()) throw std::runtime_error("confusion: size mismatch");
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        cm.at(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(preds[i]))++;
    }
    return cm;
}

double balanced_accuracy(const ConfusionMatrix& cm) {
    double sum = 0.0;
    std::size_t supported = 0;
    for (std::size_t c = 0; c < cm.classes; ++c) {
        std::size_t row = 0;
        for (std::size_t p = 0; p < cm.classes; ++p) row += cm.at(c, p);
        if (row == 0) continue;
        sum += static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
        ++supported;
    }
    return supported ? sum / static_cast<double>(supported) : 0.0;
}

std::vector<double> per_class_f1(const ConfusionMatrix& cm) {
    std::vector<double> f1(cm.classes, 0.0);
    for (std::size_t c = 0; c < cm.classes; ++c) {
        std::size_t tp = cm.at(c, c), row = 0, col = 0;
        for (std::size_t i = 0; i < cm.classes; ++i) {
            row += cm.at(c, i);
            col += cm.at(i, c);
        }
        const std::size_t denom = row + col;  // 2TP+FP+FN
        f1[c] = denom ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
    }
    return f1;
}

double macro_f1(const ConfusionMatrix& cm) {
    const auto f1 = per_class_f1(cm);
    double sum = 0.0;
    std::size_t supported = 0;
    for (std::size_t c = 0; c < cm.classes; ++c) {
        std::size_t row = 0;
        for (std::size_t p = 0; p < cm.classes; ++p) row += cm.at(c, p);
        if (row == 0) continue;
        sum += f1[c];
        ++supported;
    }
    return supported ? sum / static_cast<double>(supported) : 0.0;
}

MetricsRecord evaluate(const neural::MlpArchitecture& arch, const ParamVector& params,
                       const std::vector<Sample>& samples, Vantage vantage, SplitKind split) {
    MetricsRecord rec;
    rec.vantage = vantage;
    rec.split = split;
    if (samples.empty()) {
        rec.f1.assign(arch.classes, 0.0);
        return rec;
    }
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    const neural::Batch batch = neural::make_batch(samples, idx, 0, samples.size());
    const auto probs = neural::forward(arch, params, batch);
    rec.loss = neural::loss_ce(probs, batch.y, arch.classes);
    const auto preds = argmax_rows(probs, batch.rows, arch.classes);
    const auto cm = confusion(preds, batch.y, arch.classes);
    rec.ba = balanced_accuracy(cm);
    rec.macro_f1 = macro_f1(cm);
    rec.f1 = per_class_f1(cm);
    return rec;
}

std::string trace_csv_header(const std::vector<std::string>& class_names) {
    std::string h = "virtual_time_s,round,avg_updates,vantage,split,loss,ba,macro_f1";
    for (const auto& name : class_names) h += ",f1_" + name;
    h += "\n";
    return h;
}

std::string trace_csv_row(const MetricsRecord& rec) {
    std::string row = fmt(rec.virtual_time);
    row += "," + std::to_string(rec.round);
    row += "," + fmt(rec.avg_updates);
    row += rec.vantage == Vantage::Central ? ",central" : ",distributed";
    row += rec.split == SplitKind::Test ? ",test" : ",validation";
    row += "," + fmt(rec.loss);
    row += "," + fmt(rec.ba);
    row += "," + fmt(rec.macro_f1);
    for (double f : rec.f1) row += "," + fmt(f);
    row += "\n";
    return row;
}

void write_trace_csv(const std::string& path, const std::vector<MetricsRecord>& trace,
                     const std::vector<std::string>& class_names) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << trace_csv_header(class_names);
    for (const auto& rec : trace) out << trace_csv_row(rec);
}

std::vector<BoxStats> skew_report(const std::vector<ClientDataset>& clients, int class_index,
                                  const std::vector<std::size_t>& feature_columns,
                                  const std::vector<std::string>& feature_names) {
    std::vector<BoxStats> report;
    for (const auto& client : clients) {
        for (std::size_t col : feature_columns) {
            std::vector<double> values;
            for (const auto* split : {&client.train, &client.val, &client.test}) {
                for (const auto& s : *split) {
                    if (s.label == class_index) values.push_back(s.features[col]);
                }
            }
            BoxStats box;
            box.client_id = client.client_id;
            box.feature = col < feature_names.size() ? feature_names[col] : std::to_string(col);
            box.samples = values.size();
            if (!values.empty()) {
                std::sort(values.begin(), values.end());
                box.q1 = quantile(values, 0.25);
                box.median = quantile(values, 0.5);
                box.q3 = quantile(values, 0.75);
                const double iqr = box.q3 - box.q1;
                const double lo_fence = box.q1 - 1.5 * iqr;
                const double hi_fence = box.q3 + 1.5 * iqr;
                box.whisker_lo = values.back();
                box.whisker_hi = values.front();
                for (double v : values) {
                    if (v >= lo_fence) {
                        box.whisker_lo = v;
                        break;
                    }
                }
                for (auto it = values.rbegin(); it != values.rend(); ++it) {
                    if (*it <= hi_fence) {
                        box.whisker_hi = *it;
                        break;
                    }
                }
            }
            report.push_back(std::move(box));
        }
    }
    return report;
}

std::string format_skew_report(const std::vector<BoxStats>& report) {
    std::ostringstream out;
    out << "client\tfeature\tn\twhisker_lo\tq1\tmedian\tq3\twhisker_hi\n";
    for (const auto& b : report) {
        out << b.client_id << '\t' << b.feature << '\t' << b.samples << '\t' << fmt(b.whisker_lo)
            << '\t' << fmt(b.q1) << '\t' << fmt(b.median) << '\t' << fmt(b.q3) << '\t'
            << fmt(b.whisker_hi) << '\n';
    }
    return out.str();
}

}  // namespace fedsim::metrics
