#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "camsync/core.hpp"
#include "camsync/rng.hpp"
#include "camsync/synth.hpp"

using namespace camsync;

namespace {

constexpr double kMs = 1e6; // ns per ms

TimestampTrace trace_of(std::vector<std::int64_t> ts) {
    return validate_trace("t", std::move(ts));
}

} // namespace

TEST_CASE("validate_trace accepts sorted distinct timestamps") {
    const TimestampTrace t = trace_of({0, 33, 66});
    CHECK(t.size() == 3);
    CHECK(t[2] == 66);
}

TEST_CASE("validate_trace rejects duplicates and reordering with the offending index") {
    CHECK_THROWS_WITH_AS(trace_of({0, 33, 33}), doctest::Contains("index 2"), Error);
    try {
        trace_of({0, 33, 33});
    } catch (const Error& e) {
        CHECK(e.code() == errc::duplicate_timestamp);
        CHECK(e.index() == 2);
    }
    try {
        trace_of({0, 66, 33});
    } catch (const Error& e) {
        CHECK(e.code() == errc::non_monotonic);
        CHECK(e.index() == 2);
    }
    CHECK_THROWS_AS(trace_of({42}), Error);
    try {
        trace_of({});
    } catch (const Error& e) {
        CHECK(e.code() == errc::empty_trace);
    }
}

TEST_CASE("assign_frame_index rounds to the nearest period slot") {
    CHECK(assign_frame_index(25.0 * kMs, 10.0 * kMs) == 3); // floor(2.5 + 0.5)
    CHECK(assign_frame_index(0.0, 7.25) == 0);
    CHECK(assign_frame_index(3.0 * 33.0 * kMs, 33.0 * kMs) == 3);
    // exact half: t/tau + 0.5 integer resolves upward
    CHECK(assign_frame_index(2.5 * 10.0 * kMs, 10.0 * kMs) == 3);
    CHECK_THROWS_AS(assign_frame_index(1.0, 0.0), Error);
    CHECK_THROWS_AS(assign_frame_index(1.0, -5.0), Error);
}

TEST_CASE("assign_frame_index is idempotent on grid points") {
    SplitMix64 rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        const double tau = rng.next_uniform(0.5 * kMs, 50.0 * kMs);
        for (std::int64_t n : {std::int64_t{0}, std::int64_t{1}, std::int64_t{17},
                               std::int64_t{999}, std::int64_t{100000}})
            CHECK(assign_frame_index(static_cast<double>(n) * tau, tau) == n);
    }
}

TEST_CASE("assign_indices keeps gaps from dropped frames") {
    const double tau = 10.0 * kMs, tau0 = 2.0 * kMs;
    const PhaseModel model{tau0, tau, 0.0};
    std::vector<std::int64_t> ts;
    for (std::int64_t n : {0, 1, 2, 4})
        ts.push_back(static_cast<std::int64_t>(tau0 + static_cast<double>(n) * tau));
    const FrameIndexAssignment a = assign_indices(trace_of(ts), model);
    CHECK(a.indices == std::vector<std::int64_t>{0, 1, 2, 4});
    CHECK(a.tau_used_ns == tau);
}

TEST_CASE("a model at half the true period fits the sub-grid instead of colliding") {
    // Captures with true spacing tau lie exactly on the tau/2 grid at even
    // slots: no collision and (for noiseless data) zero residuals. The
    // misfit surfaces downstream through the slot-count clustering, not
    // through the residuals.
    const double tau = 33.0 * kMs;
    std::vector<std::int64_t> ts;
    for (int n = 0; n < 8; ++n)
        ts.push_back(static_cast<std::int64_t>(static_cast<double>(n) * tau));
    const PhaseModel half{0.0, tau / 2.0, 0.0};
    const FrameIndexAssignment a = assign_indices(trace_of(ts), half);
    for (std::size_t i = 0; i < a.indices.size(); ++i)
        CHECK(a.indices[i] == static_cast<std::int64_t>(2 * i));
    const Residuals r = residuals(trace_of(ts), half, a);
    CHECK(r.values_ns.cwiseAbs().maxCoeff() < 1.0);
}

TEST_CASE("a model at twice the true period raises index_collision") {
    const double tau = 33.0 * kMs;
    std::vector<std::int64_t> ts;
    for (int n = 0; n < 8; ++n)
        ts.push_back(static_cast<std::int64_t>(static_cast<double>(n) * tau));
    const PhaseModel twice{0.0, 2.0 * tau, 0.0};
    CHECK_THROWS_AS(assign_indices(trace_of(ts), twice), Error);
    try {
        assign_indices(trace_of(ts), twice);
    } catch (const Error& e) {
        CHECK(e.code() == errc::index_collision);
    }
}

TEST_CASE("residuals: zero on-model, local perturbation, wrapping rule") {
    const double tau = 33.0 * kMs, tau0 = 5.0 * kMs;
    const PhaseModel model{tau0, tau, 0.0};
    std::vector<std::int64_t> ts;
    for (int n = 0; n < 10; ++n)
        ts.push_back(static_cast<std::int64_t>(tau0 + n * tau));

    SUBCASE("noiseless on-model trace has zero residuals") {
        const TimestampTrace t = trace_of(ts);
        const Residuals r = residuals(t, model, assign_indices(t, model));
        CHECK(r.values_ns.cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("one perturbed timestamp moves only its own residual") {
        ts[4] += static_cast<std::int64_t>(0.3 * kMs);
        const TimestampTrace t = trace_of(ts);
        const Residuals r = residuals(t, model, assign_indices(t, model));
        for (int i = 0; i < r.values_ns.size(); ++i) {
            if (i == 4)
                CHECK(r.values_ns[i] == doctest::Approx(0.3 * kMs));
            else
                CHECK(r.values_ns[i] == 0.0);
        }
    }

    SUBCASE("an offset of 0.6*tau wraps to -0.4*tau") {
        CHECK(wrap_half_period(0.6 * tau, tau) == doctest::Approx(-0.4 * tau));
        // same through the residual path: the slot absorbs one period
        ts[9] += static_cast<std::int64_t>(0.6 * tau);
        const TimestampTrace t = trace_of(ts);
        const FrameIndexAssignment a = assign_indices(t, model);
        CHECK(a.indices[9] == 10); // N incremented
        const Residuals r = residuals(t, model, a);
        CHECK(r.values_ns[9] == doctest::Approx(-0.4 * tau).epsilon(1e-9));
    }

    SUBCASE("length mismatch is rejected") {
        const TimestampTrace t = trace_of(ts);
        FrameIndexAssignment a = assign_indices(t, model);
        a.indices.pop_back();
        CHECK_THROWS_AS(residuals(t, model, a), Error);
    }
}

TEST_CASE("wrapping stays in [-tau/2, tau/2) and preserves congruence") {
    SplitMix64 rng(11);
    for (int rep = 0; rep < 2000; ++rep) {
        const double tau = rng.next_uniform(1.0, 50.0 * kMs);
        const double r = rng.next_uniform(-40.0, 40.0) * tau;
        const double w = wrap_half_period(r, tau);
        CHECK(w >= -tau / 2);
        CHECK(w < tau / 2);
        const double k = (r - w) / tau;
        CHECK(k == doctest::Approx(std::round(k)).epsilon(1e-9));
    }
}

TEST_CASE("sum of squared residuals equals the least-squares objective for fitted slots") {
    SplitMix64 rng(13);
    for (int rep = 0; rep < 100; ++rep) {
        TraceSpec spec;
        spec.tau_ns = rng.next_uniform(20.0 * kMs, 40.0 * kMs);
        spec.tau0_ns = rng.next_unit() * spec.tau_ns;
        spec.n_frames = 60;
        spec.jitter_sigma_ns = rng.next_uniform(0.0, spec.tau_ns / 12.0);
        spec.drop_prob = rep % 3 == 0 ? 0.1 : 0.0;
        spec.seed = 1000 + static_cast<std::uint64_t>(rep);
        const GeneratedTrace g = generate(spec);
        const FrameIndexAssignment a = assign_indices(g.trace, g.ground_truth);
        const Residuals r = residuals(g.trace, g.ground_truth, a);
        const double ssr = r.values_ns.squaredNorm();
        const double obj = objective(g.trace, g.ground_truth, a);
        CHECK(ssr == doctest::Approx(obj).epsilon(1e-9));
    }
}

TEST_CASE("model validation enforces the phase/period invariants") {
    CHECK_THROWS_AS(validate_model(PhaseModel{0.0, 0.0, 0.0}), Error);
    CHECK_THROWS_AS(validate_model(PhaseModel{-1.0, 10.0, 0.0}), Error);
    CHECK_THROWS_AS(validate_model(PhaseModel{10.0, 10.0, 0.0}), Error);
    CHECK_THROWS_AS(validate_model(PhaseModel{0.0, 10.0, -1.0}), Error);
    CHECK_NOTHROW(validate_model(PhaseModel{9.99, 10.0, 1.0}));
}
