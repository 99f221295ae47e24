#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/metrics.hpp"
#include "fedsim/neural.hpp"
#include "fedsim/simclock.hpp"
#include "fedsim/types.hpp"

namespace fedsim::federation {

enum class RuleForm { Convex, Literal };
enum class AsyncWeightNorm { Proportional, ClientNormalized };

struct FederationState {
    ParamVector global_params;
    std::size_t version = 0;                   // t: committed aggregations
    std::size_t total_samples = 0;             // N
    std::vector<std::size_t> client_samples;   // n_i by pool index
    std::vector<std::size_t> update_counts;    // commits per client
};

struct ClientUpdate {
    std::size_t client = 0;  // pool index
    std::string client_id;
    ParamVector delta;
    std::size_t base_version = 0;
    std::size_t sample_count = 0;
    double local_loss = 0.0;
    double dispatch_time = 0.0;
    double arrival_time = 0.0;
};

struct AggregationConfig {
    std::size_t clients_per_round = 0;  // S; 0 = all
    std::size_t local_epochs = 2;
    double mixing_ratio = 0.8;  // alpha_MR
    RuleForm rule_form = RuleForm::Convex;
    AsyncWeightNorm weight_norm = AsyncWeightNorm::Proportional;
    std::size_t max_rounds = 100;
    double max_virtual_duration = 2400.0;  // 40 virtual minutes
    double target_avg_updates = 0.0;       // 0 = disabled
    std::size_t early_stop_patience = 50;
    double eval_period = 20.0;
};

// Uniform sample of S pool indices without replacement; deterministic per
// (seed, round). Returned sorted.
std::vector<std::size_t> select_clients(std::size_t pool_size, std::size_t s, std::uint64_t seed,
                                        std::size_t round);

// Synchronous rule. Convex (default): x += sum (n_i/N_S) * delta_i, the
// n_i-weighted average of client models. Literal: x += sum (n_i/N) *
// (x + delta_i), the printed form. Updates are folded in client-index order.
void aggregate_sync(FederationState& state, const std::vector<ClientUpdate>& updates,
                    const AggregationConfig& cfg);

// Effective asynchronous mixing weight for one update.
double async_weight(const FederationState& state, const ClientUpdate& update,
                    const AggregationConfig& cfg);

// Asynchronous rule. Convex: x += beta * delta. Literal: x += beta *
// (x + delta). Staleness is reported, never penalized.
// Returns the update's staleness (version - base_version).
std::size_t aggregate_async(FederationState& state, const ClientUpdate& update,
                            const AggregationConfig& cfg);

// True iff the monitored metric has not exceeded its running best for
// `patience` consecutive evaluations.
bool early_stop_check(const std::vector<double>& history, std::size_t patience);

// Inputs shared by the three orchestrators: the preprocessed training pool
// plus the centralized test set.
struct PreparedExperiment {
    neural::MlpArchitecture arch;
    std::vector<ClientDataset> clients;
    CentralTestSet central_test;
    std::vector<std::string> class_names;
};

struct RunOptions {
    AggregationConfig agg;
    neural::OptimizerConfig opt;
    std::size_t batch_size = 128;
    std::uint64_t model_seed = 2;
    std::uint64_t selection_seed = 3;
    simclock::LatencyModel latency;
    simclock::DelayProfile delays;
    bool distributed_eval = true;
    bool persist_optimizer_state = false;
    bool record_param_history = false;
};

struct RunOutput {
    std::vector<metrics::MetricsRecord> trace;
    ParamVector final_params;
    std::vector<simclock::EventLogEntry> events;
    std::vector<ParamVector> param_history;  // one entry per commit, when recorded
    std::size_t merges = 0;
    std::size_t evals = 0;
    std::size_t rounds = 0;
    double completion_time = 0.0;
    double busy_total = 0.0;
    double mean_staleness = 0.0;
};

// Centralized training: local splits merged, one model, `local_epochs` epochs
// per round. Parameters advance via the returned delta (x += delta) so the
// trajectory is arithmetically comparable with single-client sync FL.
RunOutput run_central(const PreparedExperiment& prepared, const RunOptions& options);

// Round-based FL: central evaluation before each round, distributed
// validation on the selected clients, local training, one aggregation.
RunOutput run_sync(const PreparedExperiment& prepared, const RunOptions& options);

// Event-driven FL: every client trains continuously; each arriving update is
// merged on its own and the client re-dispatched with the new global model;
// central evaluation fires on a fixed virtual-time grid. Server busy-waits
// freeze in-flight training, so injected delay adds to completion time
// exactly.
RunOutput run_async(const PreparedExperiment& prepared, const RunOptions& options);

}  // namespace fedsim::federation
