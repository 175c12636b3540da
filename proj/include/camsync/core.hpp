#pragma once

// Periodic timestamping model shared by every other module.
//
// A camera in continuous streaming mode captures at
//     t_i = tau0 + N_i * tau + eta_i
// where tau is the frame period, tau0 the phase of the capture grid and
// N_i the integer grid slot of capture i (gaps in N mark dropped frames).
// Timestamps enter as integer nanoseconds in one monotonic clock domain;
// model parameters are real-valued nanoseconds.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "camsync/errors.hpp"

namespace camsync {

enum class TraceSource { recorded, synthetic };

/// Ordered capture timestamps of one device. Construct through
/// validate_trace so the invariants (strictly increasing, length >= 2)
/// always hold. Immutable after construction by convention.
struct TimestampTrace {
    std::string device_id;
    std::vector<std::int64_t> timestamps;
    TraceSource source = TraceSource::recorded;

    std::size_t size() const { return timestamps.size(); }
    std::int64_t operator[](std::size_t i) const { return timestamps[i]; }
};

/// Fitted timestamping model. phase_ns is normalized into [0, period_ns):
/// the phase is only meaningful modulo the period.
struct PhaseModel {
    double phase_ns = 0.0;
    double period_ns = 0.0;
    double noise_sigma_ns = 0.0;
};

/// Grid slots N_i for each timestamp of a trace, strictly increasing;
/// gaps are dropped frames. tau_used_ns is the period they were computed
/// against.
struct FrameIndexAssignment {
    std::vector<std::int64_t> indices;
    double tau_used_ns = 0.0;
};

/// Signed model misfits r_i = t_i - (tau0 + N_i*tau), wrapped into
/// [-tau/2, +tau/2).
struct Residuals {
    Eigen::VectorXd values_ns;
};

/// Checks raw timestamps and wraps them into a TimestampTrace.
/// Throws: empty_trace (length < 2), duplicate_timestamp, non_monotonic
/// (both report the first offending index).
TimestampTrace validate_trace(std::string device_id,
                              std::vector<std::int64_t> timestamps,
                              TraceSource source = TraceSource::recorded);

/// Throws invalid_model unless period > 0, 0 <= phase < period and
/// noise_sigma >= 0.
void validate_model(const PhaseModel& model);

/// Grid slot of a capture instant: floor(t/tau + 0.5). Ties (t/tau + 0.5
/// exactly integer) resolve upward. Throws non_positive_period.
std::int64_t assign_frame_index(double t_ns, double tau_ns);

/// Wraps r into [-tau/2, +tau/2); wrap(r) == r (mod tau).
double wrap_half_period(double r_ns, double tau_ns);

/// Slots for a whole trace relative to the model phase. Indices are
/// strictly increasing; two timestamps mapping to one slot means the
/// period is grossly wrong and raises index_collision. A negative first
/// slot (model phase not anchored to this trace) raises invalid_model.
FrameIndexAssignment assign_indices(const TimestampTrace& trace, const PhaseModel& model);

/// Wrapped residuals of a trace under (model, assignment). When the
/// assignment was produced by assign_indices against the same model the
/// raw residuals already lie in [-tau/2, tau/2) and wrapping is the
/// identity, so the sum of squares equals the unwrapped least-squares
/// objective. Throws length_mismatch.
Residuals residuals(const TimestampTrace& trace, const PhaseModel& model,
                    const FrameIndexAssignment& assignment);

/// Unwrapped least-squares objective sum_i (tau0 + N_i*tau - t_i)^2.
double objective(const TimestampTrace& trace, const PhaseModel& model,
                 const FrameIndexAssignment& assignment);

} // namespace camsync
