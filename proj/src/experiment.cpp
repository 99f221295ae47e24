#include "fedsim/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "fedsim/preprocess.hpp"
#include "fedsim/rng.hpp"
#include "json.hpp"

namespace fedsim::experiment {

namespace {

constexpr std::uint64_t kPartitionSalt = 0x5B11;
constexpr std::uint64_t kAugmentSalt = 0xA6;
constexpr std::uint64_t kHoldoutSalt = 0x401D;

preprocess::AugmentationPlan make_plan(const config::ExperimentConfig& cfg,
                                       std::size_t class_count) {
    preprocess::AugmentationPlan plan;
    plan.mode = cfg.augmentation;
    plan.noise_std = cfg.augment_noise_std;
    if (cfg.augmentation != preprocess::AugmentationMode::Base) return plan;
    if (!cfg.replication.empty()) {
        if (cfg.replication.size() != class_count) {
            throw ValidationError("augmentation.replication must list one factor per class");
        }
        plan.replication = cfg.replication;
    } else if (class_count == 6) {
        plan.replication = preprocess::default_activity_replication();
    } else {
        throw ValidationError(
            "augmentation.replication is required for base mode with non-activity classes");
    }
    return plan;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

PreparedData prepare(const config::ExperimentConfig& cfg) {
    ingest::LoadResult loaded =
        cfg.synthetic ? ingest::generate_synthetic(cfg.synthetic_cfg)
                      : ingest::load_clients(cfg.data_dir);
    loaded = ingest::select_features(loaded, cfg.missing_threshold);

    PreparedData out;
    out.schema = loaded.schema;
    out.dropped_rows = loaded.dropped_rows_total;

    std::vector<ClientDataset> clients;
    clients.reserve(loaded.tables.size());
    for (std::size_t i = 0; i < loaded.tables.size(); ++i) {
        clients.push_back(preprocess::partition_client(
            loaded.tables[i], mix_seed(cfg.seeds.data, kPartitionSalt, i)));
    }

    // Holdout clients leave the pool before any statistics are computed.
    std::vector<std::size_t> pool_indices(clients.size());
    for (std::size_t i = 0; i < clients.size(); ++i) pool_indices[i] = i;
    CentralTestSet holdout_test;
    if (cfg.test_scheme == config::TestScheme::Holdout) {
        auto res = preprocess::build_holdout_test_set(clients, cfg.holdout_k,
                                                      mix_seed(cfg.seeds.data, kHoldoutSalt));
        for (std::size_t idx : res.held_out) out.held_out_ids.push_back(clients[idx].client_id);
        holdout_test = std::move(res.test_set);
        pool_indices = std::move(res.remaining);
    }

    std::vector<ClientDataset> pool;
    pool.reserve(pool_indices.size());
    std::vector<FeatureStats> local_stats;
    for (std::size_t idx : pool_indices) {
        pool.push_back(std::move(clients[idx]));
        local_stats.push_back(preprocess::compute_local_stats(pool.back()));
    }

    if (cfg.scaling == config::ScalingScope::Global) {
        const FeatureStats global = preprocess::aggregate_global_stats(local_stats);
        for (auto& c : pool) preprocess::standardize(c, global);
        // Held-out test data gets the pool's statistics: the server scales
        // unseen clients with what it learned from the training pool.
        if (!holdout_test.samples.empty()) {
            ClientDataset shim;
            shim.test = std::move(holdout_test.samples);
            preprocess::standardize(shim, global);
            holdout_test.samples = std::move(shim.test);
        }
    } else {
        for (std::size_t i = 0; i < pool.size(); ++i) {
            preprocess::standardize(pool[i], local_stats[i]);
        }
        if (!holdout_test.samples.empty()) {
            // Under local scaling the held-out set is scaled with its own stats.
            ClientDataset shim;
            shim.train = std::move(holdout_test.samples);
            preprocess::standardize(shim, preprocess::compute_local_stats(shim));
            holdout_test.samples = std::move(shim.train);
        }
    }

    const auto plan = make_plan(cfg, out.schema.class_count());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const std::uint64_t seed = mix_seed(cfg.seeds.data, kAugmentSalt, i);
        if (cfg.augmentation == preprocess::AugmentationMode::Base) {
            pool[i].train = preprocess::augment_base(pool[i].train, plan, seed);
        } else if (cfg.augmentation == preprocess::AugmentationMode::Balanced) {
            pool[i].train = preprocess::augment_balanced(pool[i].train, plan.noise_mean,
                                                         plan.noise_std, seed);
        }
    }

    auto& prepared = out.prepared;
    prepared.clients = std::move(pool);
    prepared.central_test = cfg.test_scheme == config::TestScheme::Fair
                                ? preprocess::build_fair_test_set(prepared.clients)
                                : std::move(holdout_test);
    prepared.class_names = out.schema.class_names;
    prepared.arch.input_dim = out.schema.feature_count();
    prepared.arch.hidden = cfg.hidden;
    prepared.arch.classes = out.schema.class_count();
    prepared.arch.leaky_slope = cfg.leaky_slope;
    return out;
}

federation::RunOutput run_prepared(const config::ExperimentConfig& cfg,
                                   const federation::PreparedExperiment& prepared) {
    federation::RunOptions options;
    options.agg = cfg.agg;
    options.opt = cfg.optimizer;
    options.batch_size = cfg.batch_size;
    options.model_seed = cfg.seeds.model;
    options.selection_seed = cfg.seeds.selection;
    options.latency = cfg.latency;
    options.latency.seed = cfg.seeds.latency;
    options.delays = cfg.delays;
    options.distributed_eval = cfg.distributed_eval;
    options.persist_optimizer_state = cfg.persist_optimizer_state;
    switch (cfg.mode) {
        case config::Mode::Central:
            return federation::run_central(prepared, options);
        case config::Mode::Sync:
            return federation::run_sync(prepared, options);
        case config::Mode::Async:
            return federation::run_async(prepared, options);
    }
    throw std::runtime_error("unreachable mode");
}

federation::RunOutput run_in_memory(const config::ExperimentConfig& cfg) {
    const PreparedData data = prepare(cfg);
    return run_prepared(cfg, data.prepared);
}

federation::RunOutput run_experiment(const config::ExperimentConfig& cfg) {
    const auto wall_start = std::chrono::steady_clock::now();
    const PreparedData data = prepare(cfg);
    federation::RunOutput output = run_prepared(cfg, data.prepared);
    const double wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();

    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);

    metrics::write_trace_csv((dir / "metrics.csv").string(), output.trace,
                             data.prepared.class_names);
    neural::save_params((dir / "final_params.bin").string(), data.prepared.arch,
                        output.final_params);
    if (cfg.write_events) {
        write_text(dir / "events.tsv", simclock::format_event_trace(output.events));
    }

    nlohmann::ordered_json manifest;
    manifest["config_hash"] = hash_hex(config::config_hash(cfg));
    manifest["config"] = config::serialize_config(cfg);
    manifest["seeds"] = {{"data", cfg.seeds.data},
                         {"model", cfg.seeds.model},
                         {"selection", cfg.seeds.selection},
                         {"latency", cfg.seeds.latency}};
    manifest["modules"] = {{"ingest", 1},    {"preprocess", 1}, {"neural", 1}, {"metrics", 1},
                           {"simclock", 1},  {"federation", 1}, {"cli", 1}};
    manifest["mode"] = cfg.mode == config::Mode::Central ? "central"
                       : cfg.mode == config::Mode::Sync  ? "sync"
                                                         : "async";
    manifest["clients"] = data.prepared.clients.size();
    manifest["held_out_clients"] = data.held_out_ids;
    manifest["features"] = data.schema.feature_count();
    manifest["classes"] = data.schema.class_names;
    manifest["dropped_rows"] = data.dropped_rows;
    manifest["rounds"] = output.rounds;
    manifest["merges"] = output.merges;
    manifest["evals"] = output.evals;
    manifest["virtual_completion_s"] = output.completion_time;
    manifest["server_busy_s"] = output.busy_total;
    manifest["mean_staleness"] = output.mean_staleness;
    manifest["wall_clock_s"] = wall_seconds;
    manifest["artifacts"] = cfg.write_events
                                ? std::vector<std::string>{"metrics.csv", "final_params.bin",
                                                           "events.tsv"}
                                : std::vector<std::string>{"metrics.csv", "final_params.bin"};
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    return output;
}

metrics::MetricsRecord average_last_evals(const std::vector<metrics::MetricsRecord>& trace,
                                          std::size_t k) {
    std::vector<const metrics::MetricsRecord*> central;
    for (const auto& rec : trace) {
        if (rec.vantage == metrics::Vantage::Central && rec.split == metrics::SplitKind::Test) {
            central.push_back(&rec);
        }
    }
    if (central.empty()) throw std::runtime_error("trace holds no central test evaluations");
    const std::size_t n = std::min(k, central.size());
    metrics::MetricsRecord avg = *central.back();
    avg.loss = avg.ba = avg.macro_f1 = 0.0;
    std::fill(avg.f1.begin(), avg.f1.end(), 0.0);
    for (std::size_t i = central.size() - n; i < central.size(); ++i) {
        avg.loss += central[i]->loss;
        avg.ba += central[i]->ba;
        avg.macro_f1 += central[i]->macro_f1;
        for (std::size_t c = 0; c < avg.f1.size(); ++c) avg.f1[c] += central[i]->f1[c];
    }
    const double inv = 1.0 / static_cast<double>(n);
    avg.loss *= inv;
    avg.ba *= inv;
    avg.macro_f1 *= inv;
    for (auto& v : avg.f1) v *= inv;
    return avg;
}

std::vector<CellSummary> run_grid(const config::ExperimentConfig& base,
                                  const config::GridSpec& grid,
                                  const std::string& artifact_root,
                                  std::vector<std::string>* class_names_out) {
    // Grid axes never touch the data settings, so every cell sees the same
    // classes; scaling/augmentation axes do change the pipeline, so each cell
    // still prepares its own copy.
    std::vector<CellSummary> cells;
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
        auto [cfg, label] = config::apply_grid_cell(base, grid, i);
        federation::RunOutput output;
        if (artifact_root.empty()) {
            const PreparedData data = prepare(cfg);
            if (class_names_out) *class_names_out = data.schema.class_names;
            output = run_prepared(cfg, data.prepared);
        } else {
            cfg.output_dir =
                (std::filesystem::path(artifact_root) / ("cell" + std::to_string(i))).string();
            output = run_experiment(cfg);
        }
        cells.push_back(CellSummary{label, average_last_evals(output.trace)});
    }
    if (class_names_out && class_names_out->empty() && !artifact_root.empty()) {
        *class_names_out = prepare(base).schema.class_names;
    }
    return cells;
}

std::string format_grid_summary(const std::vector<CellSummary>& cells,
                                const std::vector<std::string>& class_names) {
    std::size_t focus = class_names.empty() ? 0 : class_names.size() - 1;
    std::string focus_name = class_names.empty() ? "last" : class_names[focus];
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        if (class_names[c] == "running") {
            focus = c;
            focus_name = "running";
            break;
        }
    }

    std::string out = "metric";
    for (const auto& cell : cells) out += "\t" + cell.label;
    out += "\n";
    char buf[32];
    const auto row = [&](const char* name, auto pick) {
        out += name;
        for (const auto& cell : cells) {
            std::snprintf(buf, sizeof buf, "\t%.2f", pick(cell.last5));
            out += buf;
        }
        out += "\n";
    };
    row("m-F1", [](const metrics::MetricsRecord& r) { return r.macro_f1; });
    row("BA", [](const metrics::MetricsRecord& r) { return r.ba; });
    const std::string f1_row = "F1-" + focus_name;
    row(f1_row.c_str(), [&](const metrics::MetricsRecord& r) {
        return focus < r.f1.size() ? r.f1[focus] : 0.0;
    });
    return out;
}

std::string skew_report_text(const config::ExperimentConfig& cfg, const std::string& class_name,
                             const std::string& sensor_name) {
    const PreparedData data = prepare(cfg);

    int class_index = -1;
    for (std::size_t c = 0; c < data.schema.class_names.size(); ++c) {
        if (data.schema.class_names[c] == class_name) class_index = static_cast<int>(c);
    }
    if (class_index < 0) throw ValidationError("unknown class: " + class_name);

    const ingest::SensorGroup* group = nullptr;
    for (const auto& g : data.schema.sensor_groups) {
        if (g.name == sensor_name) group = &g;
    }
    if (!group) {
        for (const auto& g : data.schema.sensor_groups) {
            if (g.name.rfind(sensor_name, 0) == 0) group = &g;
        }
    }
    if (!group) throw ValidationError("unknown sensor group: " + sensor_name);

    const auto report = metrics::skew_report(data.prepared.clients, class_index, group->columns,
                                             data.schema.feature_names);
    return metrics::format_skew_report(report);
}

}  // namespace fedsim::experiment
