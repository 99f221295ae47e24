#include "fedsim/fedsim.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "fedsim/config.hpp"
#include "fedsim/experiment.hpp"
#include "fedsim/types.hpp"

struct fedsim_config {
    fedsim::config::ExperimentConfig cfg;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& message) {
    g_last_error = message;
    return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        return FEDSIM_OK;
    } catch (const fedsim::ValidationError& e) {
        return fail(FEDSIM_ERR_VALIDATION, e.what());
    } catch (const std::exception& e) {
        return fail(FEDSIM_ERR_RUNTIME, e.what());
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::runtime_error("out of memory");
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

int require(const void* p, const char* what) {
    if (p) return FEDSIM_OK;
    return fail(FEDSIM_ERR_VALIDATION, std::string("null argument: ") + what);
}

}  // namespace

extern "C" {

int fedsim_config_parse(const char* text, fedsim_config** out) {
    if (int rc = require(text, "text")) return rc;
    if (int rc = require(out, "out")) return rc;
    return guarded([&] { *out = new fedsim_config{fedsim::config::parse_config_text(text)}; });
}

int fedsim_config_load(const char* path, fedsim_config** out) {
    if (int rc = require(path, "path")) return rc;
    if (int rc = require(out, "out")) return rc;
    return guarded([&] { *out = new fedsim_config{fedsim::config::parse_config_file(path)}; });
}

void fedsim_config_free(fedsim_config* cfg) { delete cfg; }

int fedsim_config_set_seed(fedsim_config* cfg, uint64_t seed) {
    if (int rc = require(cfg, "cfg")) return rc;
    cfg->cfg.seeds.data = seed;
    cfg->cfg.seeds.model = seed + 1;
    cfg->cfg.seeds.selection = seed + 2;
    cfg->cfg.seeds.latency = seed + 3;
    cfg->cfg.synthetic_cfg.seed = seed;
    cfg->cfg.latency.seed = seed + 3;
    return FEDSIM_OK;
}

int fedsim_config_set_output_dir(fedsim_config* cfg, const char* dir) {
    if (int rc = require(cfg, "cfg")) return rc;
    if (int rc = require(dir, "dir")) return rc;
    cfg->cfg.output_dir = dir;
    return FEDSIM_OK;
}

int fedsim_run(const fedsim_config* cfg) {
    if (int rc = require(cfg, "cfg")) return rc;
    return guarded([&] { fedsim::experiment::run_experiment(cfg->cfg); });
}

int fedsim_run_grid(const fedsim_config* cfg, const char* grid_path, char** summary_out) {
    if (int rc = require(cfg, "cfg")) return rc;
    if (int rc = require(grid_path, "grid_path")) return rc;
    if (int rc = require(summary_out, "summary_out")) return rc;
    return guarded([&] {
        const auto grid = fedsim::config::parse_grid_file(grid_path);
        std::vector<std::string> class_names;
        const auto cells = fedsim::experiment::run_grid(cfg->cfg, grid, cfg->cfg.output_dir,
                                                        &class_names);
        *summary_out = dup_string(fedsim::experiment::format_grid_summary(cells, class_names));
    });
}

int fedsim_skew_report(const fedsim_config* cfg, const char* class_name, const char* sensor,
                       char** report_out) {
    if (int rc = require(cfg, "cfg")) return rc;
    if (int rc = require(class_name, "class_name")) return rc;
    if (int rc = require(sensor, "sensor")) return rc;
    if (int rc = require(report_out, "report_out")) return rc;
    return guarded([&] {
        *report_out =
            dup_string(fedsim::experiment::skew_report_text(cfg->cfg, class_name, sensor));
    });
}

const char* fedsim_last_error(void) { return g_last_error.c_str(); }

void fedsim_string_free(char* s) { std::free(s); }

const char* fedsim_version(void) { return "1.0.0"; }

}  // extern "C"
