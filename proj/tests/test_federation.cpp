#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "fedsim/federation.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;
using namespace fedsim::federation;

namespace {

FederationState make_state(ParamVector params, std::vector<std::size_t> samples) {
    FederationState s;
    s.global_params = std::move(params);
    s.client_samples = std::move(samples);
    s.update_counts.assign(s.client_samples.size(), 0);
    for (auto n : s.client_samples) s.total_samples += n;
    return s;
}

ClientUpdate make_update(std::size_t client, ParamVector delta, std::size_t n,
                         std::size_t base_version = 0) {
    ClientUpdate u;
    u.client = client;
    u.client_id = "c" + std::to_string(client);
    u.delta = std::move(delta);
    u.sample_count = n;
    u.base_version = base_version;
    return u;
}

// Two linearly separable blobs split across a few clients.
PreparedExperiment make_experiment(std::size_t clients, std::size_t per_client,
                                   std::uint64_t seed) {
    PreparedExperiment prep;
    prep.arch.input_dim = 2;
    prep.arch.hidden = {8};
    prep.arch.classes = 2;
    prep.class_names = {"a", "b"};
    Rng rng(seed);
    for (std::size_t c = 0; c < clients; ++c) {
        ClientDataset d;
        d.client_id = "c" + std::to_string(c);
        for (std::size_t i = 0; i < per_client; ++i) {
            const int y = static_cast<int>(i % 2);
            const Sample s{{rng.normal(y ? 1.5 : -1.5, 1.0), rng.normal(0, 1)}, y};
            if (i % 5 == 3) {
                d.val.push_back(s);
            } else if (i % 5 == 4) {
                d.test.push_back(s);
            } else {
                d.train.push_back(s);
            }
        }
        prep.central_test.client_ids.push_back(d.client_id);
        for (const auto& s : d.test) {
            prep.central_test.samples.push_back(s);
            prep.central_test.source.push_back(static_cast<std::uint32_t>(c));
        }
        prep.clients.push_back(std::move(d));
    }
    return prep;
}

}  // namespace

TEST_CASE("select_clients basics") {
    SUBCASE("selecting the whole pool returns everyone") {
        const auto sel = select_clients(60, 60, 123, 5);
        CHECK(sel.size() == 60);
        for (std::size_t i = 0; i < 60; ++i) CHECK(sel[i] == i);
    }
    SUBCASE("deterministic per seed and round") {
        CHECK(select_clients(10, 4, 9, 2) == select_clients(10, 4, 9, 2));
        CHECK(select_clients(10, 4, 9, 2) != select_clients(10, 4, 9, 3));
    }
    SUBCASE("single-pick frequency is near uniform over many rounds") {
        std::vector<std::size_t> counts(8, 0);
        const int rounds = 10000;
        for (int r = 0; r < rounds; ++r) counts[select_clients(8, 1, 77, r)[0]]++;
        // binomial(10^4, 1/8): sigma ~= 33; allow 3 sigma around 1250
        for (auto c : counts) {
            CHECK(c > 1250 - 100);
            CHECK(c < 1250 + 100);
        }
    }
    SUBCASE("out-of-range S rejected") {
        CHECK_THROWS_AS(select_clients(5, 6, 1, 0), ValidationError);
        CHECK_THROWS_AS(select_clients(5, 0, 1, 0), ValidationError);
    }
}

TEST_CASE("sync aggregation: single client adopts the client model") {
    auto state = make_state({1.0, -2.0}, {10});
    AggregationConfig cfg;
    aggregate_sync(state, {make_update(0, {0.5, 0.5}, 10)}, cfg);
    CHECK(state.global_params[0] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(state.global_params[1] == doctest::Approx(-1.5).epsilon(1e-15));
    CHECK(state.version == 1);
}

TEST_CASE("sync aggregation: weighted average of client models") {
    // x=(0,0); client models (1,1) and (3,3) with n=(1,3) -> (2.5,2.5)
    auto state = make_state({0.0, 0.0}, {1, 3});
    AggregationConfig cfg;
    aggregate_sync(state,
                   {make_update(0, {1.0, 1.0}, 1), make_update(1, {3.0, 3.0}, 3)}, cfg);
    CHECK(state.global_params[0] == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(state.global_params[1] == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("sync literal form substitutes the printed rule") {
    // x=(1), one selected client with n/N=1, client model x^1=(2) -> (3)
    auto state = make_state({1.0}, {4});
    AggregationConfig cfg;
    cfg.rule_form = RuleForm::Literal;
    aggregate_sync(state, {make_update(0, {1.0}, 4)}, cfg);
    CHECK(state.global_params[0] == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("convex sync with equal weights is the arithmetic mean of client models") {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t k = 2 + rng.below(5);
        const std::size_t dim = 1 + rng.below(6);
        ParamVector x;
        for (std::size_t j = 0; j < dim; ++j) x.push_back(rng.normal(0, 1));
        std::vector<std::size_t> samples(k, 7);
        auto state = make_state(x, samples);
        std::vector<ClientUpdate> updates;
        std::vector<ParamVector> models;
        for (std::size_t i = 0; i < k; ++i) {
            ParamVector delta;
            for (std::size_t j = 0; j < dim; ++j) delta.push_back(rng.normal(0, 2));
            ParamVector model;
            for (std::size_t j = 0; j < dim; ++j) model.push_back(x[j] + delta[j]);
            models.push_back(model);
            updates.push_back(make_update(i, delta, 7));
        }
        AggregationConfig cfg;
        aggregate_sync(state, updates, cfg);
        for (std::size_t j = 0; j < dim; ++j) {
            double mean = 0;
            for (const auto& m : models) mean += m[j];
            mean /= static_cast<double>(k);
            CHECK(std::abs(state.global_params[j] - mean) < 1e-12);
        }
    }
}

TEST_CASE("sync aggregation is permutation invariant") {
    auto updates = std::vector<ClientUpdate>{
        make_update(2, {0.25, -1.0}, 5), make_update(0, {1.5, 2.0}, 3),
        make_update(1, {-0.5, 0.75}, 9)};
    AggregationConfig cfg;
    auto a = make_state({0.1, 0.2}, {3, 9, 5});
    aggregate_sync(a, updates, cfg);
    std::reverse(updates.begin(), updates.end());
    auto b = make_state({0.1, 0.2}, {3, 9, 5});
    aggregate_sync(b, updates, cfg);
    CHECK(a.global_params == b.global_params);  // exact: folded in client order
}

TEST_CASE("sync update norm is bounded by the largest delta norm") {
    Rng rng(44);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 1 + rng.below(6);
        auto state = make_state({0.0, 0.0, 0.0}, std::vector<std::size_t>(k, 0));
        std::vector<ClientUpdate> updates;
        double max_norm = 0;
        state.total_samples = 0;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t n = 1 + rng.below(20);
            state.client_samples[i] = n;
            state.total_samples += n;
            ParamVector delta{rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1)};
            max_norm = std::max(max_norm,
                                std::sqrt(delta[0] * delta[0] + delta[1] * delta[1] +
                                          delta[2] * delta[2]));
            updates.push_back(make_update(i, delta, n));
        }
        AggregationConfig cfg;
        aggregate_sync(state, updates, cfg);
        const double step =
            std::sqrt(state.global_params[0] * state.global_params[0] +
                      state.global_params[1] * state.global_params[1] +
                      state.global_params[2] * state.global_params[2]);
        CHECK(step <= max_norm + 1e-12);
    }
}

TEST_CASE("sync aggregation validates versions and emptiness") {
    auto state = make_state({0.0}, {5});
    AggregationConfig cfg;
    CHECK_THROWS(aggregate_sync(state, {}, cfg));
    auto stale = make_update(0, {1.0}, 5, 3);  // base_version 3 != 0
    CHECK_THROWS(aggregate_sync(state, {stale}, cfg));
}

TEST_CASE("async convex-proportional hand example") {
    // x=(1,1), delta=(2,-2), alpha=0.8, n/N=0.5 -> beta=0.4 -> (1.8, 0.2)
    auto state = make_state({1.0, 1.0}, {5, 5});
    AggregationConfig cfg;
    cfg.mixing_ratio = 0.8;
    const auto staleness = aggregate_async(state, make_update(0, {2.0, -2.0}, 5), cfg);
    CHECK(staleness == 0);
    CHECK(state.global_params[0] == doctest::Approx(1.8).epsilon(1e-12));
    CHECK(state.global_params[1] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(state.version == 1);
}

TEST_CASE("async literal form substitutes the printed rule") {
    // x=(1), delta=(1), alpha=0.8, n/N=0.5 -> x + 0.4*(x+delta) = 1.8
    auto state = make_state({1.0}, {5, 5});
    AggregationConfig cfg;
    cfg.mixing_ratio = 0.8;
    cfg.rule_form = RuleForm::Literal;
    aggregate_async(state, make_update(0, {1.0}, 5), cfg);
    CHECK(state.global_params[0] == doctest::Approx(1.8).epsilon(1e-12));
}

TEST_CASE("async beta=1 adopts the client model") {
    auto state = make_state({2.0}, {10});
    AggregationConfig cfg;
    cfg.mixing_ratio = 1.0;  // single client: n/N=1 -> beta=1
    aggregate_async(state, make_update(0, {0.5}, 10), cfg);
    CHECK(state.global_params[0] == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("async weight normalization variants") {
    auto state = make_state({0.0}, {10, 30});
    AggregationConfig cfg;
    cfg.mixing_ratio = 0.8;
    const auto u = make_update(0, {1.0}, 10);
    cfg.weight_norm = AsyncWeightNorm::Proportional;
    CHECK(async_weight(state, u, cfg) == doctest::Approx(0.8 * 0.25).epsilon(1e-15));
    cfg.weight_norm = AsyncWeightNorm::ClientNormalized;
    CHECK(async_weight(state, u, cfg) == doctest::Approx(0.8 * 0.25 * 2).epsilon(1e-15));
    // capped at 1
    auto big = make_state({0.0}, {100, 1});
    CHECK(async_weight(big, make_update(0, {1.0}, 100), cfg) == 1.0);
}

TEST_CASE("async staleness is reported and never penalized") {
    auto state = make_state({0.0}, {10, 10});
    state.version = 5;
    AggregationConfig cfg;
    cfg.mixing_ratio = 0.8;
    auto u = make_update(0, {1.0}, 10, 2);
    const auto staleness = aggregate_async(state, u, cfg);
    CHECK(staleness == 3);
    // weight identical to a fresh update of the same size
    auto fresh_state = make_state({0.0}, {10, 10});
    aggregate_async(fresh_state, make_update(0, {1.0}, 10, 0), cfg);
    CHECK(state.global_params[0] == doctest::Approx(fresh_state.global_params[0]).epsilon(1e-15));
    CHECK(state.version == 6);
}

TEST_CASE("async step norm bounded by beta times delta norm") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        auto state = make_state({rng.normal(0, 1)}, {1 + rng.below(9), 1 + rng.below(9)});
        AggregationConfig cfg;
        cfg.mixing_ratio = rng.uniform(0.1, 1.0);
        const auto u = make_update(0, {rng.normal(0, 3)}, state.client_samples[0]);
        const double before = state.global_params[0];
        const double beta = async_weight(state, u, cfg);
        aggregate_async(state, u, cfg);
        CHECK(std::abs(state.global_params[0] - before) <=
              beta * std::abs(u.delta[0]) + 1e-12);
    }
}

TEST_CASE("early stopping window bookkeeping") {
    SUBCASE("strictly increasing history never stops") {
        std::vector<double> history;
        for (int i = 0; i < 200; ++i) {
            history.push_back(i * 0.01);
            CHECK_FALSE(early_stop_check(history, 50));
        }
    }
    SUBCASE("flat history after an initial best stops exactly at patience") {
        std::vector<double> history{1.0};
        for (int i = 0; i < 49; ++i) {
            history.push_back(0.5);
            CHECK_FALSE(early_stop_check(history, 50));
        }
        history.push_back(0.5);  // 50th non-improving evaluation
        CHECK(early_stop_check(history, 50));
    }
    SUBCASE("improvement at index 49 resets the window") {
        std::vector<double> history{1.0};
        for (int i = 0; i < 48; ++i) history.push_back(0.5);
        history.push_back(1.1);  // index 49 improves
        history.push_back(0.5);
        CHECK_FALSE(early_stop_check(history, 50));
    }
}

TEST_CASE("run_sync round structure") {
    auto prep = make_experiment(3, 40, 5);
    RunOptions options;
    options.agg.max_rounds = 2;
    options.agg.local_epochs = 1;
    options.batch_size = 16;
    options.latency.jitter = simclock::JitterKind::None;

    const auto out = run_sync(prep, options);
    // per round: one central + one distributed record; plus final central
    std::size_t central = 0, distributed = 0;
    for (const auto& rec : out.trace) {
        if (rec.vantage == metrics::Vantage::Central) {
            central++;
        } else {
            distributed++;
        }
    }
    CHECK(central == 3);
    CHECK(distributed == 2);
    CHECK(out.rounds == 2);
    CHECK(out.merges == 2);

    SUBCASE("max_rounds=0 leaves only the initial evaluation") {
        options.agg.max_rounds = 0;
        const auto only = run_sync(prep, options);
        CHECK(only.rounds == 0);
        std::size_t c = 0;
        for (const auto& rec : only.trace) {
            if (rec.vantage == metrics::Vantage::Central) c++;
        }
        CHECK(c == 1);
    }
    SUBCASE("same options give an identical trace") {
        const auto again = run_sync(prep, options);
        REQUIRE(again.trace.size() == out.trace.size());
        for (std::size_t i = 0; i < out.trace.size(); ++i) {
            CHECK(again.trace[i].macro_f1 == out.trace[i].macro_f1);
            CHECK(again.trace[i].virtual_time == out.trace[i].virtual_time);
        }
        CHECK(again.final_params == out.final_params);
    }
}

TEST_CASE("single-client sync FL reproduces centralized training exactly") {
    auto prep = make_experiment(1, 80, 9);
    RunOptions options;
    options.agg.max_rounds = 6;
    options.agg.local_epochs = 1;
    options.agg.clients_per_round = 1;
    options.batch_size = 16;
    options.record_param_history = true;

    const auto fed = run_sync(prep, options);
    const auto central = run_central(prep, options);
    REQUIRE(fed.param_history.size() == central.param_history.size());
    for (std::size_t r = 0; r < fed.param_history.size(); ++r) {
        CHECK(fed.param_history[r] == central.param_history[r]);  // bitwise
    }
    CHECK(fed.final_params == central.final_params);
}

TEST_CASE("run_async merges on arrival and respects the update target") {
    auto prep = make_experiment(4, 50, 13);
    RunOptions options;
    options.agg.target_avg_updates = 5.0;
    options.agg.max_virtual_duration = 1e9;
    options.agg.eval_period = 2.0;
    options.latency.jitter = simclock::JitterKind::None;

    const auto out = run_async(prep, options);
    CHECK(out.merges >= 20);  // 5 avg updates over 4 clients
    CHECK(out.merges <= 24);
    const auto& last = out.trace.back();
    CHECK(last.avg_updates == doctest::Approx(5.0).epsilon(0.25));

    SUBCASE("deterministic event log") {
        const auto again = run_async(prep, options);
        REQUIRE(again.events.size() == out.events.size());
        for (std::size_t i = 0; i < out.events.size(); ++i) {
            CHECK(again.events[i].virtual_time == out.events[i].virtual_time);
            CHECK(again.events[i].kind == out.events[i].kind);
            CHECK(again.events[i].client_id == out.events[i].client_id);
        }
    }
}

TEST_CASE("single async client with no jitter merges on a fixed cadence") {
    auto prep = make_experiment(1, 50, 21);
    RunOptions options;
    options.agg.max_virtual_duration = 100.0;
    options.agg.eval_period = 1000.0;  // keep evals out of the way
    options.latency.jitter = simclock::JitterKind::None;
    options.latency.proportional = false;
    options.latency.base_seconds = 7.0;

    const auto out = run_async(prep, options);
    CHECK(out.merges == 14);  // floor(100/7)
    CHECK(out.completion_time == doctest::Approx(100.0));
}

TEST_CASE("virtual time is non-decreasing across every trace and event log") {
    auto prep = make_experiment(3, 40, 31);
    RunOptions options;
    options.agg.max_virtual_duration = 30.0;
    options.agg.eval_period = 5.0;
    const auto out = run_async(prep, options);
    for (std::size_t i = 1; i < out.trace.size(); ++i) {
        CHECK(out.trace[i].virtual_time >= out.trace[i - 1].virtual_time);
    }
    for (std::size_t i = 1; i < out.events.size(); ++i) {
        CHECK(out.events[i].virtual_time >= out.events[i - 1].virtual_time);
    }
    std::size_t arrivals = 0;
    for (const auto& ev : out.events) {
        if (ev.kind == "client_arrival") arrivals++;
    }
    CHECK(arrivals == out.merges);
}
