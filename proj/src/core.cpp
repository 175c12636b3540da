#include "camsync/core.hpp"

#include <cmath>

namespace camsync {

const char* errc_name(errc c) {
    switch (c) {
    case errc::empty_trace: return "empty_trace";
    case errc::non_monotonic: return "non_monotonic";
    case errc::duplicate_timestamp: return "duplicate_timestamp";
    case errc::non_positive_period: return "non_positive_period";
    case errc::index_collision: return "index_collision";
    case errc::length_mismatch: return "length_mismatch";
    case errc::degenerate_seed: return "degenerate_seed";
    case errc::no_convergence: return "no_convergence";
    case errc::infeasible_band: return "infeasible_band";
    case errc::too_short: return "too_short";
    case errc::too_few_samples: return "too_few_samples";
    case errc::invalid_spec: return "invalid_spec";
    case errc::invalid_model: return "invalid_model";
    case errc::unwrap_ambiguous: return "unwrap_ambiguous";
    case errc::message_lost: return "message_lost";
    case errc::no_samples: return "no_samples";
    case errc::period_mismatch: return "period_mismatch";
    case errc::session_failed: return "session_failed";
    case errc::parse_error: return "parse_error";
    case errc::config_error: return "config_error";
    }
    return "unknown";
}

TimestampTrace validate_trace(std::string device_id, std::vector<std::int64_t> timestamps,
                              TraceSource source) {
    if (timestamps.size() < 2)
        fail(errc::empty_trace, "trace needs at least 2 timestamps, got " +
                                    std::to_string(timestamps.size()));
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
        if (timestamps[i] == timestamps[i - 1])
            fail(errc::duplicate_timestamp,
                 "duplicate timestamp at index " + std::to_string(i),
                 static_cast<std::int64_t>(i));
        if (timestamps[i] < timestamps[i - 1])
            fail(errc::non_monotonic,
                 "timestamps not increasing at index " + std::to_string(i),
                 static_cast<std::int64_t>(i));
    }
    return TimestampTrace{std::move(device_id), std::move(timestamps), source};
}

void validate_model(const PhaseModel& model) {
    if (!(model.period_ns > 0.0))
        fail(errc::invalid_model, "period must be positive");
    if (!(model.phase_ns >= 0.0 && model.phase_ns < model.period_ns))
        fail(errc::invalid_model, "phase must lie in [0, period)");
    if (!(model.noise_sigma_ns >= 0.0))
        fail(errc::invalid_model, "noise sigma must be nonnegative");
}

std::int64_t assign_frame_index(double t_ns, double tau_ns) {
    if (!(tau_ns > 0.0))
        fail(errc::non_positive_period, "period must be positive");
    return static_cast<std::int64_t>(std::floor(t_ns / tau_ns + 0.5));
}

double wrap_half_period(double r_ns, double tau_ns) {
    return r_ns - tau_ns * std::floor(r_ns / tau_ns + 0.5);
}

FrameIndexAssignment assign_indices(const TimestampTrace& trace, const PhaseModel& model) {
    validate_model(model);
    FrameIndexAssignment out;
    out.tau_used_ns = model.period_ns;
    out.indices.reserve(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double shifted = static_cast<double>(trace[i]) - model.phase_ns;
        const std::int64_t n = assign_frame_index(shifted, model.period_ns);
        if (!out.indices.empty() && n <= out.indices.back())
            fail(errc::index_collision,
                 "timestamps " + std::to_string(i - 1) + " and " + std::to_string(i) +
                     " map to the same period slot (period grossly wrong?)",
                 static_cast<std::int64_t>(i));
        if (n < 0)
            fail(errc::invalid_model,
                 "model phase is not anchored to this trace (negative slot at index " +
                     std::to_string(i) + ")",
                 static_cast<std::int64_t>(i));
        out.indices.push_back(n);
    }
    return out;
}

Residuals residuals(const TimestampTrace& trace, const PhaseModel& model,
                    const FrameIndexAssignment& assignment) {
    validate_model(model);
    if (assignment.indices.size() != trace.size())
        fail(errc::length_mismatch, "assignment length " +
                                        std::to_string(assignment.indices.size()) +
                                        " vs trace length " + std::to_string(trace.size()));
    Residuals out;
    out.values_ns.resize(static_cast<Eigen::Index>(trace.size()));
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double raw = static_cast<double>(trace[i]) -
                           (model.phase_ns + static_cast<double>(assignment.indices[i]) * model.period_ns);
        out.values_ns[static_cast<Eigen::Index>(i)] = wrap_half_period(raw, model.period_ns);
    }
    return out;
}

double objective(const TimestampTrace& trace, const PhaseModel& model,
                 const FrameIndexAssignment& assignment) {
    validate_model(model);
    if (assignment.indices.size() != trace.size())
        fail(errc::length_mismatch, "assignment length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double r = model.phase_ns +
                         static_cast<double>(assignment.indices[i]) * model.period_ns -
                         static_cast<double>(trace[i]);
        acc += r * r;
    }
    return acc;
}

} // namespace camsync
