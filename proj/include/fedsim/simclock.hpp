#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "fedsim/rng.hpp"
#include "fedsim/types.hpp"

namespace fedsim::simclock {

enum class EventKind { ClientArrival, CentralEval, Terminate };

struct SimEvent {
    double fire_time = 0.0;
    std::uint64_t sequence_no = 0;
    EventKind kind = EventKind::ClientArrival;
    std::size_t client = 0;  // meaningful for ClientArrival
};

// Min-heap by (fire_time, sequence_no). Sequence numbers are issued by the
// queue at schedule time, so equal-time events pop in insertion order.
class EventQueue {
public:
    std::uint64_t schedule(double fire_time, EventKind kind, std::size_t client = 0);
    SimEvent next_event();
    const SimEvent* peek() const;
    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }

    // Uniformly shifts every pending event; relative order is preserved.
    // run_async uses this to freeze in-flight client training while the
    // server busy-waits.
    void shift_all(double delta);

    // Shared sequence counter across cooperating queues so that cross-queue
    // ties break deterministically.
    void set_next_sequence(std::uint64_t seq) { next_seq_ = seq; }
    std::uint64_t next_sequence() const { return next_seq_; }

private:
    struct Later {
        bool operator()(const SimEvent& a, const SimEvent& b) const {
            if (a.fire_time != b.fire_time) return a.fire_time > b.fire_time;
            return a.sequence_no > b.sequence_no;
        }
    };
    std::vector<SimEvent> heap_;
    std::uint64_t next_seq_ = 0;
};

enum class JitterKind { None, Uniform, Lognormal };

// Client training durations. Base duration is either fixed or proportional
// to the client's local sample count; jitter multiplies it.
struct LatencyModel {
    bool proportional = true;
    double base_seconds = 5.0;        // used when !proportional
    double seconds_per_sample = 0.01; // used when proportional
    JitterKind jitter = JitterKind::Lognormal;
    double lognormal_sigma = 0.1;
    double uniform_lo = 0.9, uniform_hi = 1.1;
    std::uint64_t seed = 0;
};

// Deterministic per (model seed, client, draw index); each client owns a
// substream. Strictly positive.
double sample_duration(const LatencyModel& model, std::size_t client, std::size_t sample_count,
                       Rng& client_stream);

Rng make_latency_stream(const LatencyModel& model, std::size_t client);

struct DelayProfile {
    double pre_eval_seconds = 0.0;
    double pre_merge_seconds = 0.0;
};

enum class DelayPoint { Eval, Merge };

// Virtual clock plus server busy-time accounting. Delays advance the clock;
// pending arrivals in the supplied queue are shifted so no merge commits
// while the server is busy.
struct ServerTimeline {
    double clock = 0.0;
    double busy_total = 0.0;
    std::size_t eval_count = 0;
    std::size_t merge_count = 0;

    void advance_to(double t) {
        if (t > clock) clock = t;
    }
};

void apply_delays(const DelayProfile& profile, DelayPoint point, ServerTimeline& timeline,
                  EventQueue* arrivals_to_shift);

// One line per event, tab-separated: virtual_time, seq, kind, client_id.
struct EventLogEntry {
    double virtual_time = 0.0;
    std::uint64_t seq = 0;
    std::string kind;
    std::string client_id;
};

std::string format_event_trace(const std::vector<EventLogEntry>& entries);

}  // namespace fedsim::simclock
