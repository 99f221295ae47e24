#include "fedsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "fedsim/rng.hpp"

namespace fedsim::config {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

TomlValue parse_scalar(const std::string& raw, std::size_t line) {
    TomlValue v;
    v.line = line;
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
        v.kind = TomlValue::Kind::String;
        v.str = raw.substr(1, raw.size() - 2);
        return v;
    }
    if (raw == "true" || raw == "false") {
        v.kind = TomlValue::Kind::Boolean;
        v.boolean = raw == "true";
        return v;
    }
    try {
        std::size_t pos = 0;
        v.num = std::stod(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
        v.kind = TomlValue::Kind::Number;
        return v;
    } catch (const std::exception&) {
        throw ValidationError("line " + std::to_string(line) + ": cannot parse value '" + raw + "'");
    }
}

TomlValue parse_value(const std::string& raw, std::size_t line) {
    if (!raw.empty() && raw.front() == '[') {
        if (raw.back() != ']') {
            throw ValidationError("line " + std::to_string(line) + ": unterminated array");
        }
        TomlValue v;
        v.kind = TomlValue::Kind::Array;
        v.line = line;
        const std::string body = trim(raw.substr(1, raw.size() - 2));
        if (body.empty()) return v;
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) {
            v.array.push_back(parse_scalar(trim(item), line));
        }
        return v;
    }
    return parse_scalar(raw, line);
}

// Tracks which keys a reader consumed so leftovers can be rejected.
class KeyReader {
public:
    explicit KeyReader(std::map<std::string, TomlValue> values) : values_(std::move(values)) {}

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) {
        const TomlValue* v = take(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::String) fail(key, *v, "a string");
        return v->str;
    }

    double get_number(const std::string& key, double fallback) {
        const TomlValue* v = take(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::Number) fail(key, *v, "a number");
        return v->num;
    }

    std::size_t get_count(const std::string& key, std::size_t fallback) {
        const TomlValue* v = take(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::Number || v->num < 0 || v->num != std::floor(v->num)) {
            fail(key, *v, "a non-negative integer");
        }
        return static_cast<std::size_t>(v->num);
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
        const TomlValue* v = take(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::Number || v->num < 0 || v->num != std::floor(v->num)) {
            fail(key, *v, "a non-negative integer");
        }
        return static_cast<std::uint64_t>(v->num);
    }

    bool get_bool(const std::string& key, bool fallback) {
        const TomlValue* v = take(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::Boolean) fail(key, *v, "a boolean");
        return v->boolean;
    }

    std::vector<double> get_number_array(const std::string& key, std::vector<double> fallback) {
        const TomlValue* v = take(key);
        if (!v) return fallback;
        std::vector<double> out;
        if (v->kind == TomlValue::Kind::Number) {
            out.push_back(v->num);
            return out;
        }
        if (v->kind != TomlValue::Kind::Array) fail(key, *v, "an array of numbers");
        for (const auto& item : v->array) {
            if (item.kind != TomlValue::Kind::Number) fail(key, *v, "an array of numbers");
            out.push_back(item.num);
        }
        return out;
    }

    std::vector<std::size_t> get_count_array(const std::string& key,
                                             std::vector<std::size_t> fallback) {
        const TomlValue* v = values_.count(key) ? &values_.at(key) : nullptr;
        if (!v) return fallback;
        const auto nums = get_number_array(key, {});
        std::vector<std::size_t> out;
        for (double n : nums) {
            if (n < 0 || n != std::floor(n)) fail(key, *v, "non-negative integers");
            out.push_back(static_cast<std::size_t>(n));
        }
        return out;
    }

    void reject_unconsumed() const {
        for (const auto& [key, value] : values_) {
            if (!consumed_.count(key)) {
                throw ValidationError("line " + std::to_string(value.line) + ": unknown key '" +
                                      key + "'");
            }
        }
    }

private:
    const TomlValue* take(const std::string& key) {
        auto it = values_.find(key);
        if (it == values_.end()) return nullptr;
        consumed_.insert(key);
        return &it->second;
    }

    [[noreturn]] void fail(const std::string& key, const TomlValue& v, const char* expected) {
        throw ValidationError("line " + std::to_string(v.line) + ": '" + key + "' must be " +
                              expected);
    }

    std::map<std::string, TomlValue> values_;
    std::set<std::string> consumed_;
};

template <typename T>
T parse_enum(const std::string& key, const std::string& raw,
             std::initializer_list<std::pair<const char*, T>> options) {
    for (const auto& [name, value] : options) {
        if (raw == name) return value;
    }
    std::string names;
    for (const auto& [name, value] : options) {
        if (!names.empty()) names += "|";
        names += name;
    }
    throw ValidationError("'" + key + "' must be one of " + names + ", got '" + raw + "'");
}

std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_counts(const std::vector<std::size_t>& xs) {
    std::string out = "[";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(xs[i]);
    }
    return out + "]";
}

std::string fmt_nums(const std::vector<double>& xs) {
    std::string out = "[";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ", ";
        out += fmt_num(xs[i]);
    }
    return out + "]";
}

}  // namespace

std::map<std::string, TomlValue> parse_toml(const std::string& text) {
    std::map<std::string, TomlValue> values;
    std::stringstream ss(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ValidationError("line " + std::to_string(line_no) + ": malformed section");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string raw = trim(line.substr(eq + 1));
        if (key.empty() || raw.empty()) {
            throw ValidationError("line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string full = section.empty() ? key : section + "." + key;
        if (values.count(full)) {
            throw ValidationError("line " + std::to_string(line_no) + ": duplicate key '" + full +
                                  "'");
        }
        values.emplace(full, parse_value(raw, line_no));
    }
    return values;
}

ExperimentConfig parse_config_text(const std::string& text) {
    KeyReader r(parse_toml(text));
    ExperimentConfig cfg;

    cfg.mode = parse_enum("mode", r.get_string("mode", "sync"),
                          {std::pair{"central", Mode::Central}, {"sync", Mode::Sync},
                           {"async", Mode::Async}});

    cfg.data_dir = r.get_string("data.dir", "");
    const char* synth_keys[] = {"data.synthetic.clients",     "data.synthetic.classes",
                                "data.synthetic.features",    "data.synthetic.samples",
                                "data.synthetic.proportions", "data.synthetic.proportions_per_client",
                                "data.synthetic.dirichlet_alpha",
                                "data.synthetic.class_sep",   "data.synthetic.noise_std",
                                "data.synthetic.shift_std",   "data.synthetic.scale_jitter"};
    for (const char* k : synth_keys) {
        if (r.has(k)) cfg.synthetic = true;
    }
    if (cfg.synthetic) {
        auto& s = cfg.synthetic_cfg;
        s.client_count = r.get_count("data.synthetic.clients", 2);
        s.class_count = r.get_count("data.synthetic.classes", 6);
        s.feature_dim = r.get_count("data.synthetic.features", 8);
        s.samples_per_client = r.get_count_array("data.synthetic.samples", {100});
        s.proportions = r.get_number_array(
            "data.synthetic.proportions",
            std::vector<double>(s.class_count, 1.0 / static_cast<double>(s.class_count)));
        s.per_client_proportions =
            r.get_number_array("data.synthetic.proportions_per_client", {});
        s.dirichlet_alpha = r.get_number("data.synthetic.dirichlet_alpha", 0.0);
        s.class_sep = r.get_number("data.synthetic.class_sep", 1.0);
        s.noise_std = r.get_number("data.synthetic.noise_std", 1.0);
        s.shift_std = r.get_number("data.synthetic.shift_std", 0.0);
        s.scale_jitter = r.get_number("data.synthetic.scale_jitter", 0.0);
    }

    cfg.missing_threshold = r.get_number("preprocess.missing_threshold", 0.6);
    cfg.scaling = parse_enum("preprocess.scaling", r.get_string("preprocess.scaling", "global"),
                             {std::pair{"local", ScalingScope::Local},
                              {"global", ScalingScope::Global}});
    cfg.test_scheme = parse_enum("preprocess.test_scheme",
                                 r.get_string("preprocess.test_scheme", "fair"),
                                 {std::pair{"fair", TestScheme::Fair},
                                  {"holdout", TestScheme::Holdout}});
    cfg.holdout_k = r.get_count("preprocess.holdout_k", 1);

    cfg.augmentation = parse_enum(
        "augmentation.mode", r.get_string("augmentation.mode", "none"),
        {std::pair{"none", preprocess::AugmentationMode::None},
         {"base", preprocess::AugmentationMode::Base},
         {"balanced", preprocess::AugmentationMode::Balanced}});
    cfg.replication = r.get_count_array("augmentation.replication", {});
    cfg.augment_noise_std = r.get_number("augmentation.noise_std", 1e-4);

    cfg.hidden = r.get_count_array("model.hidden", {64, 16});
    cfg.leaky_slope = r.get_number("model.leaky_slope", 0.01);

    cfg.batch_size = r.get_count("train.batch_size", 128);
    cfg.optimizer.kind = parse_enum("train.optimizer", r.get_string("train.optimizer", "sgdm"),
                                    {std::pair{"sgdm", neural::OptimizerKind::Sgdm},
                                     {"adam", neural::OptimizerKind::Adam}});
    cfg.optimizer.learning_rate = r.get_number("train.learning_rate", 0.01);
    cfg.optimizer.momentum = r.get_number("train.momentum", 0.9);
    cfg.optimizer.beta1 = r.get_number("train.beta1", 0.9);
    cfg.optimizer.beta2 = r.get_number("train.beta2", 0.999);
    cfg.optimizer.epsilon = r.get_number("train.epsilon", 1e-8);
    cfg.agg.local_epochs = r.get_count("train.local_epochs", 2);
    cfg.persist_optimizer_state = r.get_bool("train.persist_optimizer_state", false);

    cfg.agg.clients_per_round = r.get_count("federation.clients_per_round", 0);
    cfg.agg.mixing_ratio = r.get_number("federation.mixing_ratio", 0.8);
    cfg.agg.rule_form = parse_enum("federation.rule_form",
                                   r.get_string("federation.rule_form", "convex"),
                                   {std::pair{"convex", federation::RuleForm::Convex},
                                    {"literal", federation::RuleForm::Literal}});
    cfg.agg.weight_norm =
        parse_enum("federation.async_weight_norm",
                   r.get_string("federation.async_weight_norm", "proportional"),
                   {std::pair{"proportional", federation::AsyncWeightNorm::Proportional},
                    {"client_normalized", federation::AsyncWeightNorm::ClientNormalized}});
    cfg.agg.max_rounds = r.get_count("federation.max_rounds", 100);
    cfg.agg.early_stop_patience = r.get_count("federation.patience", 50);
    cfg.agg.max_virtual_duration = r.get_number("federation.max_virtual_duration", 2400.0);
    cfg.agg.target_avg_updates = r.get_number("federation.target_avg_updates", 0.0);
    cfg.agg.eval_period = r.get_number("federation.eval_period", 20.0);

    const std::string lat_mode = r.get_string("latency.mode", "proportional");
    cfg.latency.proportional =
        parse_enum("latency.mode", lat_mode,
                   {std::pair{"proportional", true}, {"fixed", false}});
    cfg.latency.base_seconds = r.get_number("latency.base_seconds", 5.0);
    cfg.latency.seconds_per_sample = r.get_number("latency.seconds_per_sample", 0.01);
    cfg.latency.jitter = parse_enum("latency.jitter", r.get_string("latency.jitter", "lognormal"),
                                    {std::pair{"none", simclock::JitterKind::None},
                                     {"uniform", simclock::JitterKind::Uniform},
                                     {"lognormal", simclock::JitterKind::Lognormal}});
    cfg.latency.lognormal_sigma = r.get_number("latency.sigma", 0.1);
    cfg.latency.uniform_lo = r.get_number("latency.uniform_lo", 0.9);
    cfg.latency.uniform_hi = r.get_number("latency.uniform_hi", 1.1);

    cfg.delays.pre_eval_seconds = r.get_number("delays.pre_eval", 0.0);
    cfg.delays.pre_merge_seconds = r.get_number("delays.pre_merge", 0.0);
    cfg.distributed_eval = r.get_bool("eval.distributed", true);

    cfg.seeds.data = r.get_u64("seeds.data", 1);
    cfg.seeds.model = r.get_u64("seeds.model", 2);
    cfg.seeds.selection = r.get_u64("seeds.selection", 3);
    cfg.seeds.latency = r.get_u64("seeds.latency", 4);
    cfg.synthetic_cfg.seed = cfg.seeds.data;
    cfg.latency.seed = cfg.seeds.latency;

    cfg.output_dir = r.get_string("output.dir", "out");
    cfg.write_events = r.get_bool("output.events", true);

    r.reject_unconsumed();
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void ExperimentConfig::validate() const {
    if (synthetic && !data_dir.empty()) {
        throw ValidationError("specify either data.dir or data.synthetic.*, not both");
    }
    if (!synthetic && data_dir.empty()) {
        throw ValidationError("a data source is required: data.dir or data.synthetic.*");
    }
    if (synthetic) synthetic_cfg.validate();
    if (batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
    if (!(optimizer.learning_rate > 0.0)) throw ValidationError("train.learning_rate must be > 0");
    if (!(agg.eval_period > 0.0)) throw ValidationError("federation.eval_period must be > 0");
    if (!(agg.mixing_ratio > 0.0 && agg.mixing_ratio <= 1.0)) {
        throw ValidationError("federation.mixing_ratio must be in (0,1]");
    }
    if (agg.early_stop_patience < 1) throw ValidationError("federation.patience must be >= 1");
    if (!(missing_threshold > 0.0 && missing_threshold <= 1.0)) {
        throw ValidationError("preprocess.missing_threshold must be in (0,1]");
    }
    if (augment_noise_std < 0.0) throw ValidationError("augmentation.noise_std must be >= 0");
    if (hidden.empty()) throw ValidationError("model.hidden needs at least one layer");
    if (delays.pre_eval_seconds < 0.0 || delays.pre_merge_seconds < 0.0) {
        throw ValidationError("delays must be >= 0");
    }
    if (mode == Mode::Async && agg.max_virtual_duration <= 0.0 && agg.target_avg_updates <= 0.0) {
        throw ValidationError("async mode needs max_virtual_duration or target_avg_updates");
    }
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["mode"] = cfg.mode == Mode::Central ? "\"central\""
                 : cfg.mode == Mode::Sync  ? "\"sync\""
                                           : "\"async\"";
    if (cfg.synthetic) {
        const auto& s = cfg.synthetic_cfg;
        kv["data.synthetic.clients"] = std::to_string(s.client_count);
        kv["data.synthetic.classes"] = std::to_string(s.class_count);
        kv["data.synthetic.features"] = std::to_string(s.feature_dim);
        kv["data.synthetic.samples"] = fmt_counts(s.samples_per_client);
        kv["data.synthetic.proportions"] = fmt_nums(s.proportions);
        if (!s.per_client_proportions.empty()) {
            kv["data.synthetic.proportions_per_client"] = fmt_nums(s.per_client_proportions);
        }
        kv["data.synthetic.dirichlet_alpha"] = fmt_num(s.dirichlet_alpha);
        kv["data.synthetic.class_sep"] = fmt_num(s.class_sep);
        kv["data.synthetic.noise_std"] = fmt_num(s.noise_std);
        kv["data.synthetic.shift_std"] = fmt_num(s.shift_std);
        kv["data.synthetic.scale_jitter"] = fmt_num(s.scale_jitter);
    } else {
        kv["data.dir"] = "\"" + cfg.data_dir + "\"";
    }
    kv["preprocess.missing_threshold"] = fmt_num(cfg.missing_threshold);
    kv["preprocess.scaling"] = cfg.scaling == ScalingScope::Local ? "\"local\"" : "\"global\"";
    kv["preprocess.test_scheme"] =
        cfg.test_scheme == TestScheme::Fair ? "\"fair\"" : "\"holdout\"";
    kv["preprocess.holdout_k"] = std::to_string(cfg.holdout_k);
    kv["augmentation.mode"] = cfg.augmentation == preprocess::AugmentationMode::None   ? "\"none\""
                              : cfg.augmentation == preprocess::AugmentationMode::Base ? "\"base\""
                                                                                       : "\"balanced\"";
    kv["augmentation.replication"] = fmt_counts(cfg.replication);
    kv["augmentation.noise_std"] = fmt_num(cfg.augment_noise_std);
    kv["model.hidden"] = fmt_counts(cfg.hidden);
    kv["model.leaky_slope"] = fmt_num(cfg.leaky_slope);
    kv["train.batch_size"] = std::to_string(cfg.batch_size);
    kv["train.optimizer"] = cfg.optimizer.kind == neural::OptimizerKind::Sgdm ? "\"sgdm\""
                                                                              : "\"adam\"";
    kv["train.learning_rate"] = fmt_num(cfg.optimizer.learning_rate);
    kv["train.momentum"] = fmt_num(cfg.optimizer.momentum);
    kv["train.beta1"] = fmt_num(cfg.optimizer.beta1);
    kv["train.beta2"] = fmt_num(cfg.optimizer.beta2);
    kv["train.epsilon"] = fmt_num(cfg.optimizer.epsilon);
    kv["train.local_epochs"] = std::to_string(cfg.agg.local_epochs);
    kv["train.persist_optimizer_state"] = cfg.persist_optimizer_state ? "true" : "false";
    kv["federation.clients_per_round"] = std::to_string(cfg.agg.clients_per_round);
    kv["federation.mixing_ratio"] = fmt_num(cfg.agg.mixing_ratio);
    kv["federation.rule_form"] =
        cfg.agg.rule_form == federation::RuleForm::Convex ? "\"convex\"" : "\"literal\"";
    kv["federation.async_weight_norm"] =
        cfg.agg.weight_norm == federation::AsyncWeightNorm::Proportional ? "\"proportional\""
                                                                         : "\"client_normalized\"";
    kv["federation.max_rounds"] = std::to_string(cfg.agg.max_rounds);
    kv["federation.patience"] = std::to_string(cfg.agg.early_stop_patience);
    kv["federation.max_virtual_duration"] = fmt_num(cfg.agg.max_virtual_duration);
    kv["federation.target_avg_updates"] = fmt_num(cfg.agg.target_avg_updates);
    kv["federation.eval_period"] = fmt_num(cfg.agg.eval_period);
    kv["latency.mode"] = cfg.latency.proportional ? "\"proportional\"" : "\"fixed\"";
    kv["latency.base_seconds"] = fmt_num(cfg.latency.base_seconds);
    kv["latency.seconds_per_sample"] = fmt_num(cfg.latency.seconds_per_sample);
    kv["latency.jitter"] = cfg.latency.jitter == simclock::JitterKind::None      ? "\"none\""
                           : cfg.latency.jitter == simclock::JitterKind::Uniform ? "\"uniform\""
                                                                                 : "\"lognormal\"";
    kv["latency.sigma"] = fmt_num(cfg.latency.lognormal_sigma);
    kv["latency.uniform_lo"] = fmt_num(cfg.latency.uniform_lo);
    kv["latency.uniform_hi"] = fmt_num(cfg.latency.uniform_hi);
    kv["delays.pre_eval"] = fmt_num(cfg.delays.pre_eval_seconds);
    kv["delays.pre_merge"] = fmt_num(cfg.delays.pre_merge_seconds);
    kv["eval.distributed"] = cfg.distributed_eval ? "true" : "false";
    kv["seeds.data"] = std::to_string(cfg.seeds.data);
    kv["seeds.model"] = std::to_string(cfg.seeds.model);
    kv["seeds.selection"] = std::to_string(cfg.seeds.selection);
    kv["seeds.latency"] = std::to_string(cfg.seeds.latency);
    kv["output.dir"] = "\"" + cfg.output_dir + "\"";
    kv["output.events"] = cfg.write_events ? "true" : "false";

    std::string out;
    for (const auto& [key, value] : kv) out += key + " = " + value + "\n";
    return out;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    // output.dir is where artifacts land, not what the experiment computes.
    ExperimentConfig canonical = cfg;
    canonical.output_dir = "";
    const std::string text = serialize_config(canonical);
    return fnv1a64(text.data(), text.size());
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return serialize_config(a) == serialize_config(b);
}

std::size_t GridSpec::cell_count() const {
    std::size_t n = 1;
    for (const auto& [name, values] : axes) n *= values.size();
    return n;
}

GridSpec parse_grid_text(const std::string& text) {
    const auto values = parse_toml(text);
    static const std::set<std::string> known = {
        "grid.batch_size", "grid.learning_rate", "grid.optimizer",   "grid.scaling",
        "grid.augmentation", "grid.mixing_ratio", "grid.local_epochs"};
    GridSpec grid;
    for (const auto& [key, value] : values) {
        if (!known.count(key)) {
            throw ValidationError("line " + std::to_string(value.line) + ": unknown grid key '" +
                                  key + "'");
        }
        if (value.kind != TomlValue::Kind::Array || value.array.empty()) {
            throw ValidationError("grid axis '" + key + "' must be a non-empty array");
        }
        grid.axes.emplace_back(key.substr(5), value.array);
    }
    if (grid.axes.empty()) throw ValidationError("grid file defines no axes");
    return grid;
}

GridSpec parse_grid_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open grid file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_grid_text(buf.str());
}

std::pair<ExperimentConfig, std::string> apply_grid_cell(const ExperimentConfig& base,
                                                         const GridSpec& grid, std::size_t cell) {
    ExperimentConfig cfg = base;
    std::string label;
    std::size_t rest = cell;
    for (auto it = grid.axes.rbegin(); it != grid.axes.rend(); ++it) {
        const auto& [name, values] = *it;
        const TomlValue& v = values[rest % values.size()];
        rest /= values.size();
        std::string shown;
        if (name == "batch_size") {
            cfg.batch_size = static_cast<std::size_t>(v.num);
            shown = std::to_string(cfg.batch_size);
        } else if (name == "learning_rate") {
            cfg.optimizer.learning_rate = v.num;
            shown = fmt_num(v.num);
        } else if (name == "optimizer") {
            cfg.optimizer.kind = parse_enum("grid.optimizer", v.str,
                                            {std::pair{"sgdm", neural::OptimizerKind::Sgdm},
                                             {"adam", neural::OptimizerKind::Adam}});
            shown = v.str;
        } else if (name == "scaling") {
            cfg.scaling = parse_enum("grid.scaling", v.str,
                                     {std::pair{"local", ScalingScope::Local},
                                      {"global", ScalingScope::Global}});
            shown = v.str;
        } else if (name == "augmentation") {
            cfg.augmentation = parse_enum(
                "grid.augmentation", v.str,
                {std::pair{"none", preprocess::AugmentationMode::None},
                 {"base", preprocess::AugmentationMode::Base},
                 {"balanced", preprocess::AugmentationMode::Balanced}});
            shown = v.str;
        } else if (name == "mixing_ratio") {
            cfg.agg.mixing_ratio = v.num;
            shown = fmt_num(v.num);
        } else if (name == "local_epochs") {
            cfg.agg.local_epochs = static_cast<std::size_t>(v.num);
            shown = std::to_string(cfg.agg.local_epochs);
        }
        label = name + "=" + shown + (label.empty() ? "" : ",") + label;
    }
    cfg.validate();
    return {cfg, label};
}

}  // namespace fedsim::config
