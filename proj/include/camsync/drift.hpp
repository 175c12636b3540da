#pragma once

// Drift evaluation: fit the phase model on a training prefix, track the
// wrapped residuals over a trailing test window, and report how fast the
// phase prediction degrades.
//
// The drift coefficient is |OLS slope of the unwrapped residual series vs
// wall time|, converted to milliseconds per minute. Unwrapping uses
// nearest-multiple-of-tau continuation between consecutive test samples;
// without it any drift beyond tau/2 over the window would alias to zero.

#include <cstdint>
#include <utility>
#include <vector>

#include "camsync/estimator.hpp"

namespace camsync {

struct DriftReport {
    int train_size = 0;
    int test_size = 0;
    double drift_ms_per_min = 0.0;
    int slope_sign = 1; ///< sign of the raw slope, +1 or -1
    /// (timestamp ns, unwrapped residual ns) over the test window only.
    std::vector<std::pair<std::int64_t, double>> residual_series;
    PhaseModel fit;
};

struct EvalProtocol {
    std::vector<int> train_sizes = {25, 50, 200};
    int test_size = 1000;
};

/// Fits on the first train_size samples, evaluates on the last test_size
/// samples (contiguous trailing window; may overlap the train prefix on
/// short traces). Throws too_short, unwrap_ambiguous (more than half of
/// the consecutive wrapped jumps exceed tau/4: drift too fast to track at
/// this frame rate).
DriftReport drift_coefficient(const TimestampTrace& trace, int train_size, int test_size,
                              const EstimateOptions& options = {});

/// One report per train size, all sharing the same trailing test window.
std::vector<DriftReport> train_size_sweep(const TimestampTrace& trace,
                                          const EvalProtocol& protocol = {},
                                          const EstimateOptions& options = {});

/// Phase jump across a mode switch: wrapped difference between the
/// circular-mean phase of the video trace (under model.period) and
/// model.phase, in [-tau/2, tau/2). The model should be fitted on the
/// preview trace; both traces must share one clock domain.
double mode_switch_check(const TimestampTrace& preview, const TimestampTrace& video,
                         const PhaseModel& model);

} // namespace camsync
