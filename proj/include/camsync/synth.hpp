#pragma once

// Deterministic synthetic trace generator: the timestamping model run
// forward with configurable jitter, frame drops, clock skew and
// mode-switch segments. Ground truth is returned alongside, which makes
// it the oracle for every Monte-Carlo property in the test suite.
//
// Determinism contract: identical spec (including seed) produces
// byte-identical traces. All randomness comes from SplitMix64 with the
// documented draw order: for each grid slot, one uniform for the drop
// decision, then (if kept and jitter_sigma > 0) one Gaussian per attempt
// for the jitter; a draw that would break monotonicity after rounding is
// rejected and redrawn, and the rejection is counted in the metadata.

#include <cstdint>
#include <string>
#include <vector>

#include "camsync/core.hpp"

namespace camsync {

struct Segment {
    int n_frames = 0;
    /// Added to the capture phase within this segment (mode-switch shift).
    double phase_offset_ns = 0.0;
};

struct TraceSpec {
    double tau_ns = 0.0;
    double tau0_ns = 0.0;
    int n_frames = 0;
    double jitter_sigma_ns = 0.0;
    /// Per-frame independent drop probability in [0, 1).
    double drop_prob = 0.0;
    /// Linear clock skew: (skew/60e9) * max(0, t_nom - skew_onset_ns) is
    /// added to each nominal capture instant. With onset 0 the whole
    /// trace is skewed (an affine change a free-period fit absorbs);
    /// a positive onset leaves the prefix clean so the injected rate is
    /// what drift measurement recovers.
    double skew_ns_per_min = 0.0;
    double skew_onset_ns = 0.0;
    /// Optional mode-switch segments; when nonempty their frame counts
    /// must sum to n_frames (or n_frames may be 0 to derive it).
    std::vector<Segment> segments;
    std::uint64_t seed = 0;
    std::string device_id = "synth0";
};

struct GenMeta {
    int jitter_redraws = 0;
    int dropped_frames = 0;
};

struct GeneratedTrace {
    TimestampTrace trace;
    PhaseModel ground_truth; ///< phase normalized into [0, tau)
    FrameIndexAssignment true_indices;
    GenMeta meta;
};

/// Validates the spec invariants (tau > 0, jitter_sigma < tau/4,
/// 0 <= drop_prob < 1, n_frames consistent with segments, >= 1 frame)
/// and throws invalid_spec with a field-level message.
void validate_spec(const TraceSpec& spec);

/// Runs the model forward. Throws invalid_spec; also invalid_spec when
/// fewer than 2 frames survive dropping.
GeneratedTrace generate(const TraceSpec& spec);

/// Two-segment 30 fps spec matching one minute of continuous operation:
/// 450 preview frames then 1350 video frames (1800 total), zero
/// inter-segment phase offset. Skew, when nonzero, starts at the segment
/// boundary so the preview-fitted model sees an unskewed grid.
TraceSpec preview_video_spec(double jitter_sigma_ns, double drop_prob = 0.0,
                             double skew_ns_per_min = 0.0);

} // namespace camsync
