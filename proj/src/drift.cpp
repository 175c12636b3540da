#include "camsync/drift.hpp"

#include <algorithm>
#include <cmath>

namespace camsync {

DriftReport drift_coefficient(const TimestampTrace& trace, int train_size, int test_size,
                              const EstimateOptions& options) {
    const int n = static_cast<int>(trace.size());
    if (train_size < 2 || n < train_size + 2)
        fail(errc::too_short, "trace length " + std::to_string(n) +
                                  " too short for train size " + std::to_string(train_size));
    if (test_size < 2 || test_size > n)
        fail(errc::too_short, "test window " + std::to_string(test_size) +
                                  " does not fit a trace of length " + std::to_string(n));

    TimestampTrace train{trace.device_id,
                         {trace.timestamps.begin(), trace.timestamps.begin() + train_size},
                         trace.source};
    const PeriodEstimate fit = estimate(train, options);
    const double tau = fit.model.period_ns;
    const double phase = fit.model.phase_ns;

    DriftReport report;
    report.train_size = train_size;
    report.test_size = test_size;
    report.fit = fit.model;
    report.residual_series.reserve(static_cast<std::size_t>(test_size));

    // Wrapped residuals over the trailing window, then nearest-multiple
    // continuation so drift beyond tau/2 stays visible.
    const int first = n - test_size;
    double prev_unwrapped = 0.0;
    int big_jumps = 0;
    for (int i = first; i < n; ++i) {
        const double t = static_cast<double>(trace[static_cast<std::size_t>(i)]);
        const double wrapped = wrap_half_period(t - phase, tau);
        double r = wrapped;
        if (i > first) {
            const double k = std::floor((prev_unwrapped - wrapped) / tau + 0.5);
            r = wrapped + k * tau;
            if (std::abs(r - prev_unwrapped) > tau / 4.0)
                ++big_jumps;
        }
        prev_unwrapped = r;
        report.residual_series.emplace_back(trace[static_cast<std::size_t>(i)], r);
    }
    if (test_size > 1 && 2 * big_jumps > test_size - 1)
        fail(errc::unwrap_ambiguous,
             "residual jumps exceed tau/4 in " + std::to_string(big_jumps) + " of " +
                 std::to_string(test_size - 1) +
                 " steps; drift too fast to track at this frame rate");

    double mean_t = 0.0, mean_r = 0.0;
    for (const auto& [t, r] : report.residual_series) {
        mean_t += static_cast<double>(t);
        mean_r += r;
    }
    mean_t /= static_cast<double>(test_size);
    mean_r /= static_cast<double>(test_size);
    double num = 0.0, den = 0.0;
    for (const auto& [t, r] : report.residual_series) {
        const double dt = static_cast<double>(t) - mean_t;
        num += dt * (r - mean_r);
        den += dt * dt;
    }
    const double slope = den > 0.0 ? num / den : 0.0; // ns per ns
    report.slope_sign = slope >= 0.0 ? 1 : -1;
    report.drift_ms_per_min = std::abs(slope) * 6.0e4; // (ns/ns) -> ms/min
    return report;
}

std::vector<DriftReport> train_size_sweep(const TimestampTrace& trace,
                                          const EvalProtocol& protocol,
                                          const EstimateOptions& options) {
    if (protocol.train_sizes.empty())
        fail(errc::invalid_spec, "protocol lists no train sizes");
    const int max_train = *std::max_element(protocol.train_sizes.begin(),
                                            protocol.train_sizes.end());
    if (static_cast<int>(trace.size()) < max_train + 2 ||
        static_cast<int>(trace.size()) < protocol.test_size)
        fail(errc::too_short, "trace too short for the largest train size plus test window");

    std::vector<DriftReport> reports;
    reports.reserve(protocol.train_sizes.size());
    for (int train : protocol.train_sizes)
        reports.push_back(drift_coefficient(trace, train, protocol.test_size, options));
    return reports;
}

double mode_switch_check(const TimestampTrace& preview, const TimestampTrace& video,
                         const PhaseModel& model) {
    validate_model(model);
    (void)preview; // the model already carries everything the preview contributes
    const double video_phase = estimate_phase(video, model.period_ns);
    return wrap_half_period(video_phase - model.phase_ns, model.period_ns);
}

} // namespace camsync
