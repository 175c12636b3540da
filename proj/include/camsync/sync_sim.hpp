#pragma once

// Multi-device synchronization simulator: min-filter NTP clock-offset
// estimation over a simulated network, phase-alignment planning via one
// extended frame, and end-to-end inter-device capture-skew measurement.
//
// Topology is leader-based: device 0 is the time reference. Simulation
// time is virtual and event-free (no wall-clock sleeping); a session is a
// pure function of (devices, network, config), so identical seeds give
// identical reports.
//
// Clock convention: a device's true_clock_offset_ns is the value added to
// its local clock to obtain leader time. The four-timestamp exchange
// estimates exactly that quantity; mean uplink-minus-downlink asymmetry a
// biases the estimate by +a/2.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "camsync/core.hpp"
#include "camsync/rng.hpp"

namespace camsync {

struct CameraParams {
    double tau_ns = 0.0;       ///< equal across devices in a session
    double tau0_local_ns = 0.0; ///< capture phase in the device-local clock
    double jitter_sigma_ns = 0.0;
};

struct SimDevice {
    std::string device_id;
    double true_clock_offset_ns = 0.0; ///< local + offset = leader
    double true_skew_ns_per_min = 0.0; ///< local clock rate error vs leader
    CameraParams camera;
    std::optional<double> estimated_offset_ns;

    /// Leader time of an event at device-local time t.
    double to_leader(double local_ns) const {
        return local_ns + true_clock_offset_ns + true_skew_ns_per_min / 60e9 * local_ns;
    }
    /// Device-local time of an event at leader time t.
    double to_local(double leader_ns) const {
        return (leader_ns - true_clock_offset_ns) / (1.0 + true_skew_ns_per_min / 60e9);
    }
};

/// One-way leg latency = base (+-asymmetry/2 for uplink/downlink) plus a
/// one-sided queueing delay max(0, gauss * sigma). The one-sided law is
/// what makes min-RTT filtering effective: the fastest exchange has both
/// legs at the deterministic floor.
struct NetworkModel {
    double base_latency_ns = 0.0;
    double latency_jitter_sigma_ns = 0.0;
    double asymmetry_ns = 0.0; ///< mean uplink minus downlink
    double loss_prob = 0.0;
    std::uint64_t seed = 0;
};

/// Classic NTP four-timestamp sample. t1/t4 are device-local clock
/// readings, t2/t3 leader clock readings.
struct OffsetSample {
    double t1 = 0, t2 = 0, t3 = 0, t4 = 0;

    double offset_ns() const { return ((t2 - t1) + (t3 - t4)) / 2.0; }
    double rtt_ns() const { return (t4 - t1) - (t3 - t2); }
};

/// Per-device phase shift toward a common target, realized by one frame
/// with extended duration. All shifts in [0, tau).
struct AlignmentPlan {
    std::vector<double> shift_ns;
    double target_phase_ns = 0.0;
    double period_ns = 0.0;
};

struct DeviceSyncResult {
    std::string device_id;
    double true_offset_ns = 0.0;
    double estimated_offset_ns = 0.0;
    double offset_error_ns = 0.0; ///< estimated - true
    int rounds_used = 0;          ///< exchange attempts including retries
};

struct PairwiseSkew {
    std::string device_a;
    std::string device_b;
    double skew_ns = 0.0; ///< wrapped into [0, tau/2]
};

struct SyncReport {
    std::vector<DeviceSyncResult> devices;
    std::vector<PairwiseSkew> pairwise_skew_ns;
    double max_skew_ns = 0.0;
    double period_ns = 0.0;
    double target_phase_ns = 0.0;
    std::uint64_t seed = 0;
};

struct SessionConfig {
    int n_exchanges = 100;
    int max_retries = 3;
    int train_frames = 50; ///< preview frames used for phase estimation
    int video_frames = 300;
    /// Optional exposure-step quantization of the applied shift; 0 = off.
    double exposure_quantization_ns = 0.0;
    std::uint64_t seed = 0;
};

/// One four-timestamp exchange with the leader, whose clock is read
/// through leader_clock(leader_send_local_time...) — in the virtual
/// timeline the leader clock IS the global axis. Latencies and the loss
/// decision come from rng. Throws message_lost when the loss draw fires;
/// the caller retries.
OffsetSample exchange_round(const SimDevice& device, const NetworkModel& net,
                            SplitMix64& rng, double send_local_ns);

/// Offset of the minimum-RTT sample; ties break toward the earliest
/// sample. Throws no_samples.
double min_filter_offset(const std::vector<OffsetSample>& samples);

/// shift_d = (target_phase - phase_d) mod tau for each fitted device
/// model. Models must agree on the period to 1e-4 relative
/// (period_mismatch otherwise).
AlignmentPlan plan_alignment(const std::vector<PhaseModel>& device_models,
                             double target_phase_ns);

/// Applies one plan entry: the device's true capture phase advances by
/// shift (mod tau), i.e. exactly one simulated frame runs long.
SimDevice apply_alignment(const SimDevice& device, double shift_ns);

/// Full pipeline: NTP exchanges -> min-filter offsets -> per-device phase
/// estimation on simulated preview traces -> alignment toward device 0's
/// leader-domain phase -> simulated video segment -> pairwise capture
/// skew on leader-clock capture instants (true clock conversion, so both
/// phase- and offset-estimation errors propagate, as a physical rig would
/// see). Throws session_failed when a device gets no successful exchange.
SyncReport run_session(std::vector<SimDevice> devices, const NetworkModel& net,
                       const SessionConfig& config);

} // namespace camsync
