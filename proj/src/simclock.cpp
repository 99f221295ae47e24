#include "fedsim/simclock.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace fedsim::simclock {

std::uint64_t EventQueue::schedule(double fire_time, EventKind kind, std::size_t client) {
    const std::uint64_t seq = next_seq_++;
    heap_.push_back(SimEvent{fire_time, seq, kind, client});
    std::push_heap(heap_.begin(), heap_.end(), Later{});
    return seq;
}

SimEvent EventQueue::next_event() {
    if (heap_.empty()) throw std::runtime_error("next_event on empty queue");
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    SimEvent ev = heap_.back();
    heap_.pop_back();
    return ev;
}

const SimEvent* EventQueue::peek() const {
    return heap_.empty() ? nullptr : &heap_.front();
}

void EventQueue::shift_all(double delta) {
    for (auto& ev : heap_) ev.fire_time += delta;  // uniform shift keeps heap order
}

Rng make_latency_stream(const LatencyModel& model, std::size_t client) {
    return Rng(mix_seed(model.seed, 0x1A7E, client));
}

double sample_duration(const LatencyModel& model, std::size_t client, std::size_t sample_count,
                       Rng& client_stream) {
    (void)client;
    double base = model.proportional
                      ? model.seconds_per_sample * static_cast<double>(sample_count)
                      : model.base_seconds;
    double jitter = 1.0;
    switch (model.jitter) {
        case JitterKind::None:
            break;
        case JitterKind::Uniform:
            jitter = client_stream.uniform(model.uniform_lo, model.uniform_hi);
            break;
        case JitterKind::Lognormal:
            jitter = client_stream.lognormal(0.0, model.lognormal_sigma);
            break;
    }
    const double d = base * jitter;
    if (!(d > 0.0)) throw std::runtime_error("sampled non-positive training duration");
    return d;
}

void apply_delays(const DelayProfile& profile, DelayPoint point, ServerTimeline& timeline,
                  EventQueue* arrivals_to_shift) {
    const double delay = point == DelayPoint::Eval ? profile.pre_eval_seconds
                                                   : profile.pre_merge_seconds;
    if (point == DelayPoint::Eval) {
        ++timeline.eval_count;
    } else {
        ++timeline.merge_count;
    }
    if (delay <= 0.0) return;
    timeline.clock += delay;
    timeline.busy_total += delay;
    if (arrivals_to_shift) arrivals_to_shift->shift_all(delay);
}

std::string format_event_trace(const std::vector<EventLogEntry>& entries) {
    std::string out;
    char buf[64];
    for (const auto& e : entries) {
        std::snprintf(buf, sizeof buf, "%.10g\t%llu\t", e.virtual_time,
                      static_cast<unsigned long long>(e.seq));
        out += buf;
        out += e.kind;
        out += '\t';
        out += e.client_id;
        out += '\n';
    }
    return out;
}

}  // namespace fedsim::simclock
