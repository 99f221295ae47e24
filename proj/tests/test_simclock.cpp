#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fedsim/rng.hpp"
#include "fedsim/simclock.hpp"

using namespace fedsim;
using namespace fedsim::simclock;

TEST_CASE("events pop in fire-time order") {
    EventQueue q;
    q.schedule(5.0, EventKind::CentralEval);
    q.schedule(3.0, EventKind::ClientArrival, 1);
    CHECK(q.next_event().fire_time == 3.0);
    CHECK(q.next_event().fire_time == 5.0);
    CHECK(q.empty());
    CHECK_THROWS(q.next_event());
}

TEST_CASE("equal fire times pop in insertion order") {
    EventQueue q;
    const auto s1 = q.schedule(3.0, EventKind::ClientArrival, 7);
    const auto s2 = q.schedule(3.0, EventKind::ClientArrival, 9);
    CHECK(s1 < s2);
    CHECK(q.next_event().client == 7);
    CHECK(q.next_event().client == 9);
}

TEST_CASE("ten thousand random events pop sorted by (time, seq)") {
    Rng rng(4);
    EventQueue q;
    for (int i = 0; i < 10000; ++i) {
        // coarse times force plenty of ties
        q.schedule(std::floor(rng.uniform(0, 50)), EventKind::ClientArrival, i);
    }
    double prev_time = -1.0;
    std::uint64_t prev_seq = 0;
    bool first = true;
    while (!q.empty()) {
        const auto ev = q.next_event();
        if (!first) {
            CHECK(ev.fire_time >= prev_time);
            if (ev.fire_time == prev_time) CHECK(ev.sequence_no > prev_seq);
        }
        prev_time = ev.fire_time;
        prev_seq = ev.sequence_no;
        first = false;
    }
}

TEST_CASE("shift_all moves every pending event uniformly") {
    EventQueue q;
    q.schedule(1.0, EventKind::ClientArrival, 0);
    q.schedule(4.0, EventKind::ClientArrival, 1);
    q.shift_all(10.0);
    CHECK(q.next_event().fire_time == 11.0);
    CHECK(q.next_event().fire_time == 14.0);
}

TEST_CASE("durations are deterministic, positive and respect the model") {
    LatencyModel model;
    model.seed = 9;

    SUBCASE("no jitter, proportional base") {
        model.jitter = JitterKind::None;
        auto stream = make_latency_stream(model, 0);
        CHECK(sample_duration(model, 0, 500, stream) == doctest::Approx(5.0));
    }
    SUBCASE("no jitter, fixed base") {
        model.jitter = JitterKind::None;
        model.proportional = false;
        model.base_seconds = 7.5;
        auto stream = make_latency_stream(model, 0);
        CHECK(sample_duration(model, 0, 123, stream) == doctest::Approx(7.5));
    }
    SUBCASE("same seed reproduces the sequence") {
        auto a = make_latency_stream(model, 3);
        auto b = make_latency_stream(model, 3);
        for (int i = 0; i < 20; ++i) {
            CHECK(sample_duration(model, 3, 100, a) == sample_duration(model, 3, 100, b));
        }
    }
    SUBCASE("lognormal jitter matches its analytic mean within 5%") {
        model.lognormal_sigma = 0.25;
        auto stream = make_latency_stream(model, 1);
        double sum = 0.0;
        const int n = 10000;
        for (int i = 0; i < n; ++i) {
            const double d = sample_duration(model, 1, 100, stream);
            CHECK(d > 0.0);
            sum += d;
        }
        const double analytic = 1.0 * std::exp(0.25 * 0.25 / 2.0);  // base=1s for 100 samples
        CHECK(sum / n == doctest::Approx(analytic).epsilon(0.05));
    }
}

TEST_CASE("delays advance the clock and freeze pending arrivals") {
    DelayProfile profile{10.0, 1.0};
    ServerTimeline timeline;
    EventQueue arrivals;
    arrivals.schedule(2.0, EventKind::ClientArrival, 0);
    arrivals.schedule(3.0, EventKind::ClientArrival, 1);
    arrivals.schedule(4.0, EventKind::ClientArrival, 2);

    SUBCASE("merge point adds one second") {
        apply_delays(profile, DelayPoint::Merge, timeline, &arrivals);
        CHECK(timeline.clock == 1.0);
        CHECK(timeline.busy_total == 1.0);
        CHECK(timeline.merge_count == 1);
    }
    SUBCASE("zero profile is a no-op on the clock") {
        apply_delays(DelayProfile{0.0, 0.0}, DelayPoint::Eval, timeline, &arrivals);
        CHECK(timeline.clock == 0.0);
        CHECK(timeline.busy_total == 0.0);
        CHECK(timeline.eval_count == 1);
        CHECK(arrivals.peek()->fire_time == 2.0);
    }
    SUBCASE("three arrivals pending across a 10s eval delay merge afterwards in order") {
        apply_delays(profile, DelayPoint::Eval, timeline, &arrivals);
        CHECK(timeline.clock == 10.0);
        // all three now fire after the delay completes, original order kept
        const auto e0 = arrivals.next_event();
        const auto e1 = arrivals.next_event();
        const auto e2 = arrivals.next_event();
        CHECK(e0.fire_time == 12.0);
        CHECK(e0.client == 0);
        CHECK(e1.client == 1);
        CHECK(e2.client == 2);
        CHECK(e0.fire_time >= timeline.clock);
    }
    SUBCASE("busy total is the exact count arithmetic") {
        for (int i = 0; i < 4; ++i) apply_delays(profile, DelayPoint::Eval, timeline, &arrivals);
        for (int i = 0; i < 7; ++i) apply_delays(profile, DelayPoint::Merge, timeline, &arrivals);
        CHECK(timeline.busy_total == 10.0 * 4 + 1.0 * 7);
        CHECK(timeline.eval_count == 4);
        CHECK(timeline.merge_count == 7);
    }
}

TEST_CASE("timeline clock never runs backwards") {
    ServerTimeline timeline;
    timeline.advance_to(5.0);
    CHECK(timeline.clock == 5.0);
    timeline.advance_to(2.0);
    CHECK(timeline.clock == 5.0);
}

TEST_CASE("event trace formatting") {
    std::vector<EventLogEntry> entries = {
        {0.0, 0, "central_eval", ""},
        {1.25, 1, "client_arrival", "c7"},
    };
    CHECK(format_event_trace(entries) == "0\t0\tcentral_eval\t\n1.25\t1\tclient_arrival\tc7\n");
}
