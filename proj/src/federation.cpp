#include "fedsim/federation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsim/rng.hpp"

namespace fedsim::federation {

namespace {

using metrics::MetricsRecord;
using metrics::SplitKind;
using metrics::Vantage;

FederationState make_state(const PreparedExperiment& prepared, const RunOptions& options) {
    FederationState state;
    state.global_params = neural::init_params(prepared.arch, options.model_seed);
    state.client_samples.reserve(prepared.clients.size());
    for (const auto& c : prepared.clients) {
        state.client_samples.push_back(c.sample_count());
        state.total_samples += c.sample_count();
    }
    state.update_counts.assign(prepared.clients.size(), 0);
    return state;
}

std::uint64_t train_seed(const RunOptions& options, std::size_t round, std::size_t client) {
    return mix_seed(options.model_seed, 0x7A31 + round, client);
}

MetricsRecord central_record(const PreparedExperiment& prepared, const FederationState& state,
                             double time, std::size_t round, double avg_updates) {
    MetricsRecord rec = metrics::evaluate(prepared.arch, state.global_params,
                                          prepared.central_test.samples, Vantage::Central,
                                          SplitKind::Test);
    rec.virtual_time = time;
    rec.round = round;
    rec.avg_updates = avg_updates;
    return rec;
}

MetricsRecord distributed_record(const PreparedExperiment& prepared, const FederationState& state,
                                 const std::vector<std::size_t>& clients, double time,
                                 std::size_t round, double avg_updates) {
    MetricsRecord mean;
    mean.vantage = Vantage::Distributed;
    mean.split = SplitKind::Validation;
    mean.virtual_time = time;
    mean.round = round;
    mean.avg_updates = avg_updates;
    mean.f1.assign(prepared.arch.classes, 0.0);
    for (std::size_t idx : clients) {
        const MetricsRecord r = metrics::evaluate(prepared.arch, state.global_params,
                                                  prepared.clients[idx].val, Vantage::Distributed,
                                                  SplitKind::Validation);
        mean.loss += r.loss;
        mean.ba += r.ba;
        mean.macro_f1 += r.macro_f1;
        for (std::size_t c = 0; c < mean.f1.size(); ++c) mean.f1[c] += r.f1[c];
    }
    const double n = static_cast<double>(clients.size());
    if (n > 0) {
        mean.loss /= n;
        mean.ba /= n;
        mean.macro_f1 /= n;
        for (auto& v : mean.f1) v /= n;
    }
    return mean;
}

std::vector<double> central_f1_history(const std::vector<MetricsRecord>& trace) {
    std::vector<double> h;
    for (const auto& r : trace) {
        if (r.vantage == Vantage::Central) h.push_back(r.macro_f1);
    }
    return h;
}

}  // namespace

std::vector<std::size_t> select_clients(std::size_t pool_size, std::size_t s, std::uint64_t seed,
                                        std::size_t round) {
    if (s == 0 || s > pool_size) throw ValidationError("clients_per_round out of range");
    std::vector<std::size_t> pool(pool_size);
    std::iota(pool.begin(), pool.end(), 0);
    Rng rng(mix_seed(seed, 0x5E1E, round));
    // Partial Fisher-Yates: the first s slots are a uniform sample.
    for (std::size_t i = 0; i < s; ++i) {
        std::swap(pool[i], pool[i + rng.below(pool_size - i)]);
    }
    pool.resize(s);
    std::sort(pool.begin(), pool.end());
    return pool;
}

void aggregate_sync(FederationState& state, const std::vector<ClientUpdate>& updates,
                    const AggregationConfig& cfg) {
    if (updates.empty()) throw std::runtime_error("aggregate_sync: no updates");
    for (const auto& u : updates) {
        if (u.delta.size() != state.global_params.size()) {
            throw std::runtime_error("aggregate_sync: dimension mismatch");
        }
        if (u.base_version != state.version) {
            throw std::runtime_error("aggregate_sync: stale update in synchronous round");
        }
    }
    std::vector<const ClientUpdate*> ordered;
    ordered.reserve(updates.size());
    for (const auto& u : updates) ordered.push_back(&u);
    std::sort(ordered.begin(), ordered.end(),
              [](const ClientUpdate* a, const ClientUpdate* b) { return a->client < b->client; });

    const std::size_t dim = state.global_params.size();
    if (cfg.rule_form == RuleForm::Convex) {
        double n_s = 0.0;
        for (const auto* u : ordered) n_s += static_cast<double>(u->sample_count);
        std::vector<double> acc(dim, 0.0);
        for (const auto* u : ordered) {
            const double w = static_cast<double>(u->sample_count) / n_s;
            for (std::size_t i = 0; i < dim; ++i) acc[i] += w * u->delta[i];
        }
        for (std::size_t i = 0; i < dim; ++i) state.global_params[i] += acc[i];
    } else {
        // As printed: x_{t+1} = x_t + sum (n_i/N) x^i_{t+1}, x^i = x_t + delta_i.
        const double n_total = static_cast<double>(state.total_samples);
        std::vector<double> acc(dim, 0.0);
        for (const auto* u : ordered) {
            const double w = static_cast<double>(u->sample_count) / n_total;
            for (std::size_t i = 0; i < dim; ++i) {
                acc[i] += w * (state.global_params[i] + u->delta[i]);
            }
        }
        for (std::size_t i = 0; i < dim; ++i) state.global_params[i] += acc[i];
    }
    ++state.version;
    for (const auto* u : ordered) ++state.update_counts[u->client];
}

double async_weight(const FederationState& state, const ClientUpdate& update,
                    const AggregationConfig& cfg) {
    const double fraction = static_cast<double>(update.sample_count) /
                            static_cast<double>(state.total_samples);
    if (cfg.weight_norm == AsyncWeightNorm::Proportional) {
        return cfg.mixing_ratio * fraction;
    }
    const double pool = static_cast<double>(state.client_samples.size());
    return std::min(1.0, cfg.mixing_ratio * fraction * pool);
}

std::size_t aggregate_async(FederationState& state, const ClientUpdate& update,
                            const AggregationConfig& cfg) {
    if (update.delta.size() != state.global_params.size()) {
        throw std::runtime_error("aggregate_async: dimension mismatch");
    }
    const std::size_t staleness = state.version - update.base_version;
    const double beta = async_weight(state, update, cfg);
    if (cfg.rule_form == RuleForm::Convex) {
        for (std::size_t i = 0; i < state.global_params.size(); ++i) {
            state.global_params[i] += beta * update.delta[i];
        }
    } else {
        // As printed: x_{t+1} = x_t + beta * (x_t + delta).
        for (std::size_t i = 0; i < state.global_params.size(); ++i) {
            state.global_params[i] += beta * (state.global_params[i] + update.delta[i]);
        }
    }
    ++state.version;
    ++state.update_counts[update.client];
    return staleness;
}

bool early_stop_check(const std::vector<double>& history, std::size_t patience) {
    if (patience == 0) throw ValidationError("patience must be >= 1");
    if (history.size() <= patience) return false;
    double best = history.front();
    std::size_t last_improvement = 0;
    for (std::size_t i = 1; i < history.size(); ++i) {
        if (history[i] > best) {
            best = history[i];
            last_improvement = i;
        }
    }
    return history.size() - 1 - last_improvement >= patience;
}

RunOutput run_central(const PreparedExperiment& prepared, const RunOptions& options) {
    std::vector<Sample> train, val;
    for (const auto& c : prepared.clients) {
        train.insert(train.end(), c.train.begin(), c.train.end());
        val.insert(val.end(), c.val.begin(), c.val.end());
    }
    if (train.empty()) throw std::runtime_error("run_central: no training data");

    RunOutput out;
    ParamVector params = neural::init_params(prepared.arch, options.model_seed);
    neural::OptimizerState persistent =
        neural::make_optimizer_state(options.opt, params.size());
    ClientDataset merged;
    merged.val = std::move(val);

    for (std::size_t round = 0;; ++round) {
        auto rec = metrics::evaluate(prepared.arch, params, prepared.central_test.samples,
                                     Vantage::Central, SplitKind::Test);
        rec.virtual_time = static_cast<double>(round);
        rec.round = round;
        rec.avg_updates = static_cast<double>(round);
        out.trace.push_back(rec);
        if (options.distributed_eval && !merged.val.empty()) {
            auto vrec = metrics::evaluate(prepared.arch, params, merged.val,
                                          Vantage::Central, SplitKind::Validation);
            vrec.virtual_time = static_cast<double>(round);
            vrec.round = round;
            vrec.avg_updates = static_cast<double>(round);
            out.trace.push_back(vrec);
        }

        if (round >= options.agg.max_rounds) break;
        if (early_stop_check(central_f1_history(out.trace), options.agg.early_stop_patience)) break;

        const auto result = neural::train_local(
            prepared.arch, params, train, options.agg.local_epochs, options.batch_size,
            options.opt, train_seed(options, round, 0),
            options.persist_optimizer_state ? &persistent : nullptr);
        for (std::size_t i = 0; i < params.size(); ++i) params[i] += result.delta[i];
        ++out.rounds;
        if (options.record_param_history) out.param_history.push_back(params);
    }
    out.evals = out.rounds + 1;
    out.merges = out.rounds;
    out.completion_time = static_cast<double>(out.rounds);
    out.final_params = std::move(params);
    return out;
}

RunOutput run_sync(const PreparedExperiment& prepared, const RunOptions& options) {
    RunOutput out;
    FederationState state = make_state(prepared, options);
    const std::size_t pool = prepared.clients.size();
    const std::size_t s = options.agg.clients_per_round == 0 ? pool : options.agg.clients_per_round;

    std::vector<Rng> latency_streams;
    latency_streams.reserve(pool);
    for (std::size_t c = 0; c < pool; ++c) {
        latency_streams.push_back(simclock::make_latency_stream(options.latency, c));
    }

    double clock = 0.0;
    std::uint64_t seq = 0;
    for (std::size_t round = 0;; ++round) {
        const double avg_updates =
            static_cast<double>(state.version) * static_cast<double>(s) / static_cast<double>(pool);
        out.events.push_back({clock, seq++, "central_eval", ""});
        out.trace.push_back(central_record(prepared, state, clock, round, avg_updates));
        ++out.evals;

        if (round >= options.agg.max_rounds) break;
        if (early_stop_check(central_f1_history(out.trace), options.agg.early_stop_patience)) break;

        const auto selected = select_clients(pool, s, options.selection_seed, round);
        if (options.distributed_eval) {
            out.trace.push_back(
                distributed_record(prepared, state, selected, clock, round, avg_updates));
        }

        std::vector<ClientUpdate> updates;
        updates.reserve(selected.size());
        double round_duration = 0.0;
        for (std::size_t idx : selected) {
            const auto& client = prepared.clients[idx];
            const auto result = neural::train_local(prepared.arch, state.global_params,
                                                    client.train, options.agg.local_epochs,
                                                    options.batch_size, options.opt,
                                                    train_seed(options, round, idx));
            ClientUpdate u;
            u.client = idx;
            u.client_id = client.client_id;
            u.delta = result.delta;
            u.base_version = state.version;
            u.sample_count = client.sample_count();
            u.local_loss = result.mean_loss;
            u.dispatch_time = clock;
            const double duration = simclock::sample_duration(options.latency, idx,
                                                              client.sample_count(),
                                                              latency_streams[idx]);
            u.arrival_time = clock + duration;
            round_duration = std::max(round_duration, duration);
            updates.push_back(std::move(u));
        }
        for (const auto& u : updates) {
            out.events.push_back({u.arrival_time, seq++, "client_arrival", u.client_id});
        }
        aggregate_sync(state, updates, options.agg);
        clock += round_duration;
        ++out.rounds;
        ++out.merges;
        if (options.record_param_history) out.param_history.push_back(state.global_params);
    }
    out.events.push_back({clock, seq++, "terminate", ""});
    out.completion_time = clock;
    out.final_params = std::move(state.global_params);
    return out;
}

RunOutput run_async(const PreparedExperiment& prepared, const RunOptions& options) {
    RunOutput out;
    FederationState state = make_state(prepared, options);
    const std::size_t pool = prepared.clients.size();

    std::vector<Rng> latency_streams;
    latency_streams.reserve(pool);
    for (std::size_t c = 0; c < pool; ++c) {
        latency_streams.push_back(simclock::make_latency_stream(options.latency, c));
    }
    std::vector<std::size_t> dispatch_counts(pool, 0);
    std::vector<ClientUpdate> pending(pool);

    simclock::ServerTimeline timeline;
    simclock::EventQueue arrivals;
    simclock::EventQueue control;
    std::uint64_t seq = 0;
    auto schedule = [&seq](simclock::EventQueue& q, double t, simclock::EventKind kind,
                           std::size_t client = 0) {
        q.set_next_sequence(seq);
        q.schedule(t, kind, client);
        seq = q.next_sequence();
    };

    double staleness_sum = 0.0;
    const double avg_factor = 1.0 / static_cast<double>(pool);

    // Trains the client against the current global model; the result arrives
    // after the sampled duration. Computing it eagerly is equivalent because
    // commits happen strictly in event order.
    auto dispatch = [&](std::size_t idx) {
        const auto& client = prepared.clients[idx];
        if (options.distributed_eval) {
            auto rec = metrics::evaluate(prepared.arch, state.global_params, client.val,
                                         metrics::Vantage::Distributed,
                                         metrics::SplitKind::Validation);
            rec.virtual_time = timeline.clock;
            rec.round = state.version;
            rec.avg_updates = static_cast<double>(state.version) * avg_factor;
            out.trace.push_back(rec);
        }
        const auto result = neural::train_local(prepared.arch, state.global_params, client.train,
                                                options.agg.local_epochs, options.batch_size,
                                                options.opt,
                                                train_seed(options, dispatch_counts[idx], idx));
        ++dispatch_counts[idx];
        ClientUpdate u;
        u.client = idx;
        u.client_id = client.client_id;
        u.delta = result.delta;
        u.base_version = state.version;
        u.sample_count = client.sample_count();
        u.local_loss = result.mean_loss;
        u.dispatch_time = timeline.clock;
        const double duration = simclock::sample_duration(options.latency, idx,
                                                          client.sample_count(),
                                                          latency_streams[idx]);
        u.arrival_time = timeline.clock + duration;
        pending[idx] = std::move(u);
        schedule(arrivals, timeline.clock + duration, simclock::EventKind::ClientArrival, idx);
    };

    auto central_eval = [&](double time) {
        out.trace.push_back(central_record(prepared, state, time, state.version,
                                           static_cast<double>(state.version) * avg_factor));
        ++out.evals;
    };

    schedule(control, 0.0, simclock::EventKind::CentralEval);
    if (options.agg.max_virtual_duration > 0.0) {
        schedule(control, options.agg.max_virtual_duration, simclock::EventKind::Terminate);
    }
    for (std::size_t c = 0; c < pool; ++c) dispatch(c);

    const double target_merges = options.agg.target_avg_updates * static_cast<double>(pool);
    bool done = false;
    while (!done) {
        const simclock::SimEvent* a = arrivals.peek();
        const simclock::SimEvent* c = control.peek();
        if (!a && !c) break;
        const bool take_control =
            c && (!a || c->fire_time < a->fire_time ||
                  (c->fire_time == a->fire_time && c->sequence_no < a->sequence_no));
        const simclock::SimEvent ev = take_control ? control.next_event() : arrivals.next_event();
        timeline.advance_to(ev.fire_time);

        switch (ev.kind) {
            case simclock::EventKind::CentralEval: {
                out.events.push_back({ev.fire_time, ev.sequence_no, "central_eval", ""});
                simclock::apply_delays(options.delays, simclock::DelayPoint::Eval, timeline,
                                       &arrivals);
                central_eval(timeline.clock);
                schedule(control, ev.fire_time + options.agg.eval_period,
                         simclock::EventKind::CentralEval);
                break;
            }
            case simclock::EventKind::ClientArrival: {
                const std::size_t idx = ev.client;
                out.events.push_back(
                    {ev.fire_time, ev.sequence_no, "client_arrival", pending[idx].client_id});
                simclock::apply_delays(options.delays, simclock::DelayPoint::Merge, timeline,
                                       &arrivals);
                ClientUpdate u = std::move(pending[idx]);
                u.arrival_time = ev.fire_time;
                staleness_sum += static_cast<double>(aggregate_async(state, u, options.agg));
                ++out.merges;
                if (options.record_param_history) out.param_history.push_back(state.global_params);
                if (target_merges > 0.0 &&
                    static_cast<double>(state.version) >= target_merges) {
                    done = true;
                    break;
                }
                dispatch(idx);
                break;
            }
            case simclock::EventKind::Terminate: {
                out.events.push_back({ev.fire_time, ev.sequence_no, "terminate", ""});
                done = true;
                break;
            }
        }
    }

    // Closing evaluation at the moment the run stopped.
    central_eval(timeline.clock);
    out.events.push_back({timeline.clock, seq++, "terminate", ""});
    out.rounds = state.version;
    out.completion_time = timeline.clock;
    out.busy_total = timeline.busy_total;
    out.mean_staleness = out.merges ? staleness_sum / static_cast<double>(out.merges) : 0.0;
    out.final_params = std::move(state.global_params);
    return out;
}

}  // namespace fedsim::federation
