#include "fedsim/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "fedsim/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace fedsim::ingest {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string to_lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// Maps a raw label column name onto one of the six activity classes, or -1.
// The dataset uses decorated names (LYING_DOWN, OR_standing, FIX_walking...),
// so matching is by substring on the lowercased name.
int match_activity(const std::string& label_name) {
    const std::string n = to_lower(label_name);
    if (n.find("lying") != std::string::npos || n.find("laying") != std::string::npos) return 0;
    if (n.find("sitting") != std::string::npos) return 1;
    if (n.find("standing") != std::string::npos) return 2;
    if (n.find("walking") != std::string::npos) return 3;
    if (n.find("running") != std::string::npos) return 4;
    if (n.find("cycling") != std::string::npos) return 5;
    return -1;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell) {
    if (cell.empty()) return kNaN;
    try {
        std::size_t pos = 0;
        const double v = std::stod(cell, &pos);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("unparseable numeric cell '" + cell + "'");
    }
}

std::string sensor_prefix(const std::string& feature_name) {
    const auto pos = feature_name.find(':');
    return pos == std::string::npos ? std::string("misc") : feature_name.substr(0, pos);
}

RawClientTable load_one_csv(const fs::path& file, const std::string& client_id,
                            std::vector<std::string>& feature_names_out, bool first_file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file.string());

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file " + file.string());
    const auto header = split_csv_line(line);

    // Column roles: timestamp, feature, activity label (one of 6), ignored.
    std::vector<int> label_class(header.size(), -1);
    std::vector<bool> is_feature(header.size(), false);
    int ts_col = -1;
    std::vector<std::string> feature_names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& name = header[c];
        const std::string lower = to_lower(name);
        if (lower == "timestamp") {
            ts_col = static_cast<int>(c);
        } else if (lower.rfind("label", 0) == 0) {
            label_class[c] = match_activity(name);
        } else {
            is_feature[c] = true;
            feature_names.push_back(name);
        }
    }
    if (first_file) {
        feature_names_out = feature_names;
    } else if (feature_names != feature_names_out) {
        throw std::runtime_error("feature arity/name mismatch in " + file.string());
    }

    RawClientTable table;
    table.client_id = client_id;
    std::size_t line_no = 1;
    double prev_ts = -std::numeric_limits<double>::infinity();
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw std::runtime_error(file.string() + ":" + std::to_string(line_no) +
                                     ": expected " + std::to_string(header.size()) +
                                     " cells, got " + std::to_string(cells.size()));
        }
        RawRow row;
        row.features.reserve(feature_names.size());
        int label = -1;
        int flags_set = 0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v;
            try {
                v = parse_cell(cells[c]);
            } catch (const std::exception& e) {
                throw std::runtime_error(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
            if (static_cast<int>(c) == ts_col) {
                row.timestamp = v;
            } else if (label_class[c] >= 0) {
                if (!std::isnan(v) && v != 0.0) {
                    ++flags_set;
                    label = label_class[c];
                }
            } else if (is_feature[c]) {
                row.features.push_back(v);
            }
        }
        if (flags_set != 1) {
            ++table.dropped_rows;
            continue;
        }
        if (row.timestamp < prev_ts) {
            // Ordering is an input invariant but some exports shuffle; sort below.
        }
        prev_ts = row.timestamp;
        row.label = label;
        table.rows.push_back(std::move(row));
    }
    std::stable_sort(table.rows.begin(), table.rows.end(),
                     [](const RawRow& a, const RawRow& b) { return a.timestamp < b.timestamp; });
    return table;
}

std::vector<SensorGroup> groups_from_names(const std::vector<std::string>& names) {
    std::vector<SensorGroup> groups;
    std::map<std::string, std::size_t> index;
    for (std::size_t c = 0; c < names.size(); ++c) {
        const std::string g = sensor_prefix(names[c]);
        auto it = index.find(g);
        if (it == index.end()) {
            index.emplace(g, groups.size());
            groups.push_back(SensorGroup{g, {c}});
        } else {
            groups[it->second].columns.push_back(c);
        }
    }
    return groups;
}

// Marsaglia-Tsang gamma sampler, deterministic through Rng.
double sample_gamma(Rng& rng, double alpha) {
    if (alpha < 1.0) {
        const double u = rng.uniform01();
        return sample_gamma(rng, alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform01();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

// Largest-remainder rounding of n*p_k to integer class counts summing to n.
std::vector<std::size_t> quota_counts(std::size_t n, const std::vector<double>& p) {
    const std::size_t k = p.size();
    std::vector<std::size_t> counts(k);
    std::vector<std::pair<double, std::size_t>> rema(k);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double exact = static_cast<double>(n) * p[i];
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        rema[i] = {exact - std::floor(exact), i};
        assigned += counts[i];
    }
    std::stable_sort(rema.begin(), rema.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) counts[rema[i % k].second]++;
    return counts;
}

}  // namespace

std::vector<std::string> activity_class_names() {
    return {"lying", "sitting", "standing", "walking", "running", "bicycling"};
}

LoadResult load_clients(const std::string& data_dir, const std::vector<std::string>& class_names) {
    if (!fs::is_directory(data_dir)) {
        throw ValidationError("data directory not found: " + data_dir);
    }

    // (client_id, file) pairs, from manifest.json if present else *.csv glob.
    std::vector<std::pair<std::string, fs::path>> entries;
    const fs::path manifest = fs::path(data_dir) / "manifest.json";
    if (fs::exists(manifest)) {
        std::ifstream in(manifest);
        nlohmann::json j = nlohmann::json::parse(in);
        const nlohmann::json& clients = j.contains("clients") ? j.at("clients") : j;
        for (const auto& [id, file] : clients.items()) {
            entries.emplace_back(id, fs::path(data_dir) / file.get<std::string>());
        }
    } else {
        for (const auto& e : fs::directory_iterator(data_dir)) {
            if (e.is_regular_file() && e.path().extension() == ".csv") {
                entries.emplace_back(e.path().stem().string(), e.path());
            }
        }
    }
    if (entries.empty()) throw ValidationError("no client files in " + data_dir);
    std::sort(entries.begin(), entries.end());

    LoadResult result;
    result.schema.class_names = class_names;
    bool first = true;
    for (const auto& [id, path] : entries) {
        auto table = load_one_csv(path, id, result.schema.feature_names, first);
        first = false;
        result.dropped_rows_total += table.dropped_rows;
        result.tables.push_back(std::move(table));
    }
    result.schema.sensor_groups = groups_from_names(result.schema.feature_names);
    result.schema.selected_columns.resize(result.schema.feature_names.size());
    for (std::size_t c = 0; c < result.schema.selected_columns.size(); ++c) {
        result.schema.selected_columns[c] = c;
    }
    return result;
}

LoadResult select_features(const LoadResult& input, double missing_threshold) {
    if (!(missing_threshold > 0.0 && missing_threshold <= 1.0)) {
        throw ValidationError("missing_threshold must be in (0,1]");
    }
    const std::size_t dim = input.schema.feature_count();
    std::vector<std::size_t> missing(dim, 0);
    std::size_t total_rows = 0;
    for (const auto& t : input.tables) {
        total_rows += t.rows.size();
        for (const auto& row : t.rows) {
            for (std::size_t c = 0; c < dim; ++c) {
                if (std::isnan(row.features[c])) ++missing[c];
            }
        }
    }

    // A group survives only if every one of its features is below threshold.
    std::vector<bool> keep_col(dim, false);
    FeatureSchema schema;
    schema.class_names = input.schema.class_names;
    for (const auto& g : input.schema.sensor_groups) {
        bool keep = true;
        for (std::size_t c : g.columns) {
            const double frac = total_rows == 0 ? 0.0
                              : static_cast<double>(missing[c]) / static_cast<double>(total_rows);
            if (frac > missing_threshold) {
                keep = false;
                break;
            }
        }
        if (keep) {
            for (std::size_t c : g.columns) keep_col[c] = true;
        }
    }

    std::vector<std::size_t> old_cols;
    for (std::size_t c = 0; c < dim; ++c) {
        if (keep_col[c]) old_cols.push_back(c);
    }
    if (old_cols.empty()) throw std::runtime_error("feature selection dropped every sensor group");

    std::vector<std::size_t> new_index(dim, SIZE_MAX);
    for (std::size_t i = 0; i < old_cols.size(); ++i) new_index[old_cols[i]] = i;
    for (std::size_t c = 0; c < old_cols.size(); ++c) {
        schema.feature_names.push_back(input.schema.feature_names[old_cols[c]]);
        schema.selected_columns.push_back(c);
    }
    for (const auto& g : input.schema.sensor_groups) {
        if (!g.columns.empty() && keep_col[g.columns.front()]) {
            SensorGroup ng{g.name, {}};
            for (std::size_t c : g.columns) ng.columns.push_back(new_index[c]);
            schema.sensor_groups.push_back(std::move(ng));
        }
    }

    LoadResult out;
    out.schema = std::move(schema);
    out.dropped_rows_total = input.dropped_rows_total;
    out.tables.reserve(input.tables.size());
    for (const auto& t : input.tables) {
        RawClientTable nt;
        nt.client_id = t.client_id;
        nt.dropped_rows = t.dropped_rows;
        nt.rows.reserve(t.rows.size());
        for (const auto& row : t.rows) {
            RawRow nr;
            nr.timestamp = row.timestamp;
            nr.label = row.label;
            nr.features.reserve(old_cols.size());
            for (std::size_t c : old_cols) nr.features.push_back(row.features[c]);
            nt.rows.push_back(std::move(nr));
        }
        out.tables.push_back(std::move(nt));
    }
    return out;
}

void SyntheticConfig::validate() const {
    if (client_count == 0 || class_count == 0 || feature_dim == 0) {
        throw ValidationError("synthetic config: counts must be positive");
    }
    if (proportions.size() != class_count) {
        throw ValidationError("synthetic config: proportions size must equal class count");
    }
    double sum = 0.0;
    for (double p : proportions) {
        if (p < 0.0) throw ValidationError("synthetic config: negative class proportion");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ValidationError("synthetic config: proportions must sum to 1");
    }
    if (!per_client_proportions.empty()) {
        if (per_client_proportions.size() != client_count * class_count) {
            throw ValidationError(
                "synthetic config: per-client proportions need client_count x class_count values");
        }
        for (std::size_t c = 0; c < client_count; ++c) {
            double row = 0.0;
            for (std::size_t k = 0; k < class_count; ++k) {
                const double p = per_client_proportions[c * class_count + k];
                if (p < 0.0) throw ValidationError("synthetic config: negative class proportion");
                row += p;
            }
            if (std::abs(row - 1.0) > 1e-9) {
                throw ValidationError(
                    "synthetic config: per-client proportion rows must sum to 1");
            }
        }
    }
    if (samples_per_client.empty()) {
        throw ValidationError("synthetic config: samples_per_client required");
    }
    if (samples_per_client.size() != 1 && samples_per_client.size() != client_count) {
        throw ValidationError("synthetic config: samples_per_client must have 1 or client_count entries");
    }
    for (std::size_t n : samples_per_client) {
        if (n == 0) throw ValidationError("synthetic config: zero samples for a client");
    }
    if (noise_std < 0.0 || shift_std < 0.0 || scale_jitter < 0.0 || dirichlet_alpha < 0.0) {
        throw ValidationError("synthetic config: negative magnitude parameter");
    }
}

LoadResult generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();

    // Class-conditional means are shared across clients.
    Rng mean_rng(mix_seed(cfg.seed, 0xC1A55));
    std::vector<std::vector<double>> class_mean(cfg.class_count,
                                                std::vector<double>(cfg.feature_dim));
    for (auto& m : class_mean) {
        for (auto& v : m) v = cfg.class_sep * mean_rng.normal();
    }

    LoadResult result;
    result.schema.class_names.reserve(cfg.class_count);
    for (std::size_t k = 0; k < cfg.class_count; ++k) {
        result.schema.class_names.push_back("c" + std::to_string(k));
    }
    for (std::size_t j = 0; j < cfg.feature_dim; ++j) {
        result.schema.feature_names.push_back("synth:f" + std::to_string(j));
    }
    result.schema.sensor_groups = {SensorGroup{"synth", {}}};
    for (std::size_t j = 0; j < cfg.feature_dim; ++j) {
        result.schema.sensor_groups[0].columns.push_back(j);
        result.schema.selected_columns.push_back(j);
    }

    for (std::size_t c = 0; c < cfg.client_count; ++c) {
        Rng rng(mix_seed(cfg.seed, 1 + c));
        const std::size_t n = cfg.samples_per_client.size() == 1 ? cfg.samples_per_client[0]
                                                                 : cfg.samples_per_client[c];
        std::vector<double> shift(cfg.feature_dim), scale(cfg.feature_dim);
        for (std::size_t j = 0; j < cfg.feature_dim; ++j) shift[j] = rng.normal(0.0, cfg.shift_std);
        for (std::size_t j = 0; j < cfg.feature_dim; ++j) {
            scale[j] = cfg.scale_jitter > 0.0 ? std::exp(rng.normal(0.0, cfg.scale_jitter)) : 1.0;
        }

        std::vector<double> p = cfg.proportions;
        if (!cfg.per_client_proportions.empty()) {
            const auto* row = cfg.per_client_proportions.data() + c * cfg.class_count;
            p.assign(row, row + cfg.class_count);
        } else if (cfg.dirichlet_alpha > 0.0) {
            double sum = 0.0;
            for (std::size_t k = 0; k < p.size(); ++k) {
                const double a = cfg.dirichlet_alpha * cfg.proportions[k] *
                                 static_cast<double>(cfg.class_count);
                p[k] = a > 0.0 ? sample_gamma(rng, a) : 0.0;
                sum += p[k];
            }
            for (auto& v : p) v /= sum;
        }

        const auto counts = quota_counts(n, p);
        std::vector<int> labels;
        labels.reserve(n);
        for (std::size_t k = 0; k < counts.size(); ++k) {
            labels.insert(labels.end(), counts[k], static_cast<int>(k));
        }
        rng.shuffle(labels);

        RawClientTable table;
        char idbuf[16];
        std::snprintf(idbuf, sizeof idbuf, "s%03zu", c);
        table.client_id = idbuf;
        table.rows.reserve(n);
        for (std::size_t r = 0; r < n; ++r) {
            RawRow row;
            row.timestamp = static_cast<double>(r);
            row.label = labels[r];
            row.features.resize(cfg.feature_dim);
            const auto& mu = class_mean[static_cast<std::size_t>(labels[r])];
            for (std::size_t j = 0; j < cfg.feature_dim; ++j) {
                row.features[j] = (mu[j] + rng.normal(0.0, cfg.noise_std)) * scale[j] + shift[j];
            }
            table.rows.push_back(std::move(row));
        }
        result.tables.push_back(std::move(table));
    }
    return result;
}

}  // namespace fedsim::ingest
