// Experiment runner for the federated-learning simulator. Thin shell over
// the C API: every subcommand maps to one library call and the library's
// error codes become the process exit code (0 ok, 2 validation, 1 runtime).

#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "fedsim/fedsim.h"

namespace {

int report(int rc) {
    if (rc != FEDSIM_OK) std::fprintf(stderr, "error: %s\n", fedsim_last_error());
    return rc;
}

int load_config(const std::string& path, bool has_seed, std::uint64_t seed,
                const std::string& out_dir, fedsim_config** cfg) {
    int rc = fedsim_config_load(path.c_str(), cfg);
    if (rc != FEDSIM_OK) return rc;
    if (has_seed) fedsim_config_set_seed(*cfg, seed);
    if (!out_dir.empty()) fedsim_config_set_output_dir(*cfg, out_dir.c_str());
    return FEDSIM_OK;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic federated-learning experiment simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool has_seed = false;

    auto* run = app.add_subcommand("run", "Run one experiment and write its artifacts");
    run->add_option("--config", config_path, "Experiment config file")->required();
    run->add_option("--seed", seed, "Base seed overriding the config's seed block")
        ->each([&](const std::string&) { has_seed = true; });
    run->add_option("--out", out_dir, "Output directory override");

    std::string grid_path;
    auto* grid = app.add_subcommand("grid", "Sweep a hyperparameter grid over a base config");
    grid->add_option("--config", config_path, "Base experiment config file")->required();
    grid->add_option("--grid", grid_path, "Grid file listing swept values")->required();
    grid->add_option("--out", out_dir, "Root directory for per-cell artifacts");

    std::string class_name;
    std::string sensor_name;
    auto* skew = app.add_subcommand("inspect-skew",
                                    "Per-client distribution report for one class and sensor");
    skew->add_option("--config", config_path, "Experiment config file")->required();
    skew->add_option("--class", class_name, "Class name, e.g. running")->required();
    skew->add_option("--sensor", sensor_name, "Sensor group name, e.g. acc")->required();

    CLI11_PARSE(app, argc, argv);

    fedsim_config* cfg = nullptr;
    int rc = load_config(config_path, has_seed, seed, out_dir, &cfg);
    if (rc != FEDSIM_OK) return report(rc);

    if (run->parsed()) {
        rc = fedsim_run(cfg);
    } else if (grid->parsed()) {
        char* summary = nullptr;
        rc = fedsim_run_grid(cfg, grid_path.c_str(), &summary);
        if (rc == FEDSIM_OK) {
            std::fputs(summary, stdout);
            fedsim_string_free(summary);
        }
    } else {
        char* text = nullptr;
        rc = fedsim_skew_report(cfg, class_name.c_str(), sensor_name.c_str(), &text);
        if (rc == FEDSIM_OK) {
            std::fputs(text, stdout);
            fedsim_string_free(text);
        }
    }
    fedsim_config_free(cfg);
    return report(rc);
}
