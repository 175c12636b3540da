#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "camsync/estimator.hpp"
#include "camsync/sync_sim.hpp"
#include "camsync/synth.hpp"

using namespace camsync;

namespace {

constexpr double kMs = 1e6;

SimDevice device_with(double offset_ns, double tau_ns = 33.0 * kMs, double tau0_ns = 0.0,
                      double jitter = 0.0) {
    SimDevice d;
    d.device_id = "dev";
    d.true_clock_offset_ns = offset_ns;
    d.camera = CameraParams{tau_ns, tau0_ns, jitter};
    return d;
}

} // namespace

TEST_CASE("exchange_round: zero latency reads the offset exactly") {
    NetworkModel net; // all zeros
    SplitMix64 rng(1);
    const OffsetSample s = exchange_round(device_with(5.0 * kMs), net, rng, 1.0e9);
    CHECK(s.offset_ns() == doctest::Approx(5.0 * kMs));
    CHECK(s.rtt_ns() == doctest::Approx(0.0));
}

TEST_CASE("exchange_round: symmetric latency cancels exactly") {
    NetworkModel net;
    net.base_latency_ns = 7.0 * kMs;
    SplitMix64 rng(1);
    const OffsetSample s = exchange_round(device_with(-3.0 * kMs), net, rng, 2.0e9);
    CHECK(s.offset_ns() == doctest::Approx(-3.0 * kMs));
    CHECK(s.rtt_ns() == doctest::Approx(14.0 * kMs));
}

TEST_CASE("exchange_round: asymmetry a biases the estimate by a/2") {
    NetworkModel net;
    net.base_latency_ns = 5.0 * kMs;
    net.asymmetry_ns = 2.0 * kMs; // uplink runs 2 ms longer than downlink
    SplitMix64 rng(1);
    const OffsetSample s = exchange_round(device_with(1.0 * kMs), net, rng, 3.0e9);
    CHECK(s.offset_ns() - 1.0 * kMs == doctest::Approx(1.0 * kMs)); // +a/2
    CHECK(s.rtt_ns() == doctest::Approx(10.0 * kMs));
}

TEST_CASE("exchange_round: losses raise message_lost without consuming latency draws") {
    NetworkModel net;
    net.loss_prob = 1.0;
    SplitMix64 rng(1);
    CHECK_THROWS_AS(exchange_round(device_with(0.0), net, rng, 0.0), Error);
}

TEST_CASE("min_filter_offset picks the minimum-RTT sample") {
    const auto sample_with = [](double rtt_ms, double offset_ms) {
        OffsetSample s;
        s.t1 = 0.0;
        s.t2 = offset_ms * kMs + rtt_ms * kMs / 2.0;
        s.t3 = s.t2;
        s.t4 = rtt_ms * kMs;
        // offset_ns() == offset_ms, rtt_ns() == rtt_ms by construction
        return s;
    };
    std::vector<OffsetSample> samples{sample_with(10, 3), sample_with(4, 5),
                                      sample_with(7, 1)};
    CHECK(min_filter_offset(samples) == doctest::Approx(5.0 * kMs));
    CHECK(min_filter_offset({sample_with(9, 2)}) == doctest::Approx(2.0 * kMs));
    // ties break toward the earliest sample
    CHECK(min_filter_offset({sample_with(4, 8), sample_with(4, 9)}) ==
          doctest::Approx(8.0 * kMs));
    CHECK_THROWS_AS(min_filter_offset({}), Error);
}

TEST_CASE("min-filtered offsets beat the plain mean under one-sided jitter") {
    NetworkModel net;
    net.base_latency_ns = 5.0 * kMs;
    net.latency_jitter_sigma_ns = 1.0 * kMs;
    int wins = 0;
    for (int seedv = 0; seedv < 100; ++seedv) {
        SplitMix64 rng(static_cast<std::uint64_t>(6000 + seedv));
        const double theta = rng.next_uniform(-50.0 * kMs, 50.0 * kMs);
        const SimDevice dev = device_with(theta);
        std::vector<OffsetSample> samples;
        double mean = 0.0;
        for (int e = 0; e < 100; ++e) {
            samples.push_back(exchange_round(dev, net, rng, e * 1.0e7));
            mean += samples.back().offset_ns();
        }
        mean /= 100.0;
        const double err_min = std::abs(min_filter_offset(samples) - theta);
        const double err_mean = std::abs(mean - theta);
        wins += err_min <= err_mean;
    }
    CHECK(wins >= 90);
}

TEST_CASE("plan_alignment computes modular shifts toward the target") {
    const double tau = 33.0 * kMs;
    const PhaseModel at_target{2.0 * kMs, tau, 0.0};
    const PhaseModel ahead{10.0 * kMs, tau, 0.0};
    const AlignmentPlan plan = plan_alignment({at_target, ahead}, 2.0 * kMs);
    CHECK(plan.shift_ns[0] == doctest::Approx(0.0));
    CHECK(plan.shift_ns[1] == doctest::Approx(25.0 * kMs)); // (2 - 10) mod 33
    for (double s : plan.shift_ns) {
        CHECK(s >= 0.0);
        CHECK(s < tau);
    }
}

TEST_CASE("plan_alignment rejects mismatched periods") {
    const PhaseModel a{0.0, 33.0 * kMs, 0.0};
    const PhaseModel b{0.0, 33.2 * kMs, 0.0};
    CHECK_THROWS_AS(plan_alignment({a, b}, 0.0), Error);
    try {
        plan_alignment({a, b}, 0.0);
    } catch (const Error& e) {
        CHECK(e.code() == errc::period_mismatch);
    }
}

TEST_CASE("apply_alignment shifts the capture phase by the plan entry") {
    const double tau = 33.0 * kMs;
    const SimDevice d = device_with(0.0, tau, 10.0 * kMs);
    CHECK(apply_alignment(d, 0.0).camera.tau0_local_ns == 10.0 * kMs);
    CHECK(apply_alignment(d, tau / 2.0).camera.tau0_local_ns ==
          doctest::Approx(10.0 * kMs + tau / 2.0));
    // wraps back into [0, tau)
    CHECK(apply_alignment(d, 30.0 * kMs).camera.tau0_local_ns ==
          doctest::Approx(7.0 * kMs));
    CHECK_THROWS_AS(apply_alignment(d, -1.0), Error);
    CHECK_THROWS_AS(apply_alignment(d, tau), Error);
}

TEST_CASE("alignment round-trip: the shifted stream re-estimates at the target") {
    const double tau = 33.0 * kMs;
    const double target = 21.0 * kMs;
    SimDevice d = device_with(0.0, tau, 5.0 * kMs, 0.05 * kMs);

    const auto measure_phase = [&](const SimDevice& dev, std::uint64_t seed) {
        TraceSpec spec;
        spec.tau_ns = dev.camera.tau_ns;
        spec.tau0_ns = dev.camera.tau0_local_ns;
        spec.n_frames = 200;
        spec.jitter_sigma_ns = dev.camera.jitter_sigma_ns;
        spec.seed = seed;
        return estimate(generate(spec).trace).model;
    };

    const PhaseModel before = measure_phase(d, 71);
    const AlignmentPlan plan = plan_alignment({before}, target);
    d = apply_alignment(d, plan.shift_ns[0]);
    const PhaseModel after = measure_phase(d, 72);
    const double tol = 4.0 * 0.05 * kMs / std::sqrt(200.0);
    CHECK(std::abs(wrap_half_period(after.phase_ns - target, tau)) < 2.0 * tol);

    // second pass toward the same target plans (almost) no shift
    const AlignmentPlan again = plan_alignment({after}, target);
    const double residual = std::min(again.shift_ns[0], tau - again.shift_ns[0]);
    CHECK(residual < 2.0 * tol);
}

TEST_CASE("run_session: deterministic exact sync on a clean network") {
    // integer phases/offsets and no noise anywhere: estimates are exact
    // and the post-alignment skew is exactly zero
    const double tau = 33'000'000.0;
    std::vector<SimDevice> devices;
    devices.push_back(device_with(0.0, tau, 5'000'000.0));
    devices.push_back(device_with(12'000'000.0, tau, 20'000'000.0));
    devices[0].device_id = "a";
    devices[1].device_id = "b";
    NetworkModel net;
    net.base_latency_ns = 4.0 * kMs;
    SessionConfig config;
    config.n_exchanges = 10;
    config.train_frames = 50;
    config.video_frames = 100;
    config.seed = 9;

    const SyncReport report = run_session(devices, net, config);
    CHECK(report.devices.size() == 2);
    CHECK(report.devices[0].offset_error_ns == 0.0);
    CHECK(report.devices[1].offset_error_ns == 0.0);
    CHECK(report.max_skew_ns == 0.0);
    CHECK(report.pairwise_skew_ns.size() == 1);

    // identical inputs give identical reports
    const SyncReport again = run_session(devices, net, config);
    CHECK(again.max_skew_ns == report.max_skew_ns);
    CHECK(again.devices[1].estimated_offset_ns == report.devices[1].estimated_offset_ns);
    CHECK(again.target_phase_ns == report.target_phase_ns);
}

TEST_CASE("run_session: five devices yield all ten wrapped pairwise skews") {
    const double tau = 33'333'333.0;
    std::vector<SimDevice> devices;
    SplitMix64 rng(17);
    for (int d = 0; d < 5; ++d) {
        SimDevice dev = device_with(d == 0 ? 0.0 : rng.next_uniform(-20.0 * kMs, 20.0 * kMs),
                                    tau, rng.next_unit() * tau, 0.2 * kMs);
        dev.device_id = "dev" + std::to_string(d);
        devices.push_back(dev);
    }
    NetworkModel net;
    net.base_latency_ns = 5.0 * kMs;
    net.latency_jitter_sigma_ns = 1.0 * kMs;
    SessionConfig config;
    config.seed = 21;
    const SyncReport report = run_session(devices, net, config);
    CHECK(report.pairwise_skew_ns.size() == 10);
    for (const auto& p : report.pairwise_skew_ns) {
        CHECK(p.skew_ns >= 0.0);
        CHECK(p.skew_ns <= tau / 2.0);
    }
}

TEST_CASE("run_session: total message loss fails the session") {
    std::vector<SimDevice> devices{device_with(0.0), device_with(1.0 * kMs)};
    devices[0].device_id = "a";
    devices[1].device_id = "b";
    NetworkModel net;
    net.loss_prob = 0.9999;
    SessionConfig config;
    config.n_exchanges = 2;
    config.max_retries = 1;
    config.seed = 4;
    CHECK_THROWS_AS(run_session(devices, net, config), Error);
}

TEST_CASE("run_session: exposure quantization bounds the residual skew") {
    const double tau = 33'000'000.0;
    std::vector<SimDevice> devices;
    devices.push_back(device_with(0.0, tau, 5'000'000.0));
    devices.push_back(device_with(0.0, tau, 17'250'000.0));
    devices[0].device_id = "a";
    devices[1].device_id = "b";
    NetworkModel net;
    SessionConfig config;
    config.n_exchanges = 5;
    config.exposure_quantization_ns = tau / 8.0;
    config.seed = 2;
    const SyncReport report = run_session(devices, net, config);
    // each device lands within q/2 of the target, so pairs within q
    CHECK(report.max_skew_ns <= tau / 8.0 + 1.0);
}
