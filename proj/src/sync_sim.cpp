#include "camsync/sync_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "camsync/estimator.hpp"
#include "camsync/synth.hpp"

namespace camsync {

namespace {

double positive_mod(double x, double m) {
    double r = std::fmod(x, m);
    if (r < 0.0)
        r += m;
    return r;
}

// Circular mean of capture instants mod tau, in [0, tau).
double circular_phase(const std::vector<double>& instants, double tau) {
    double s = 0.0, c = 0.0;
    for (double t : instants) {
        const double a = 2.0 * std::numbers::pi * positive_mod(t, tau) / tau;
        s += std::sin(a);
        c += std::cos(a);
    }
    const double ang = std::atan2(s, c);
    return positive_mod(ang / (2.0 * std::numbers::pi) * tau, tau);
}

// Phase of a trace under a shared period: slots anchored by a fitted
// phase, then the mean residual. Linear, so exact on integer grids.
double phase_under_period(const TimestampTrace& trace, double anchor_phase, double tau) {
    double acc = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double t = static_cast<double>(trace[i]);
        const double slot = std::floor((t - anchor_phase) / tau + 0.5);
        acc += t - slot * tau;
    }
    return positive_mod(acc / static_cast<double>(trace.size()), tau);
}

} // namespace

OffsetSample exchange_round(const SimDevice& device, const NetworkModel& net,
                            SplitMix64& rng, double send_local_ns) {
    // Draw order: loss decision first (a lost exchange consumes no
    // latency draws), then uplink and downlink queueing delays.
    if (net.loss_prob > 0.0 && rng.next_unit() < net.loss_prob)
        fail(errc::message_lost, "exchange lost");

    const double jitter_up =
        net.latency_jitter_sigma_ns > 0.0
            ? std::max(0.0, net.latency_jitter_sigma_ns * rng.next_gaussian())
            : 0.0;
    const double jitter_down =
        net.latency_jitter_sigma_ns > 0.0
            ? std::max(0.0, net.latency_jitter_sigma_ns * rng.next_gaussian())
            : 0.0;
    const double up = std::max(0.0, net.base_latency_ns + net.asymmetry_ns / 2.0 + jitter_up);
    const double down = std::max(0.0, net.base_latency_ns - net.asymmetry_ns / 2.0 + jitter_down);

    OffsetSample s;
    s.t1 = send_local_ns;
    s.t2 = device.to_leader(send_local_ns) + up; // leader clock at server receive
    s.t3 = s.t2;                                 // zero server hold time
    s.t4 = device.to_local(s.t3 + down);
    return s;
}

double min_filter_offset(const std::vector<OffsetSample>& samples) {
    if (samples.empty())
        fail(errc::no_samples, "no offset samples");
    std::size_t best = 0;
    for (std::size_t i = 1; i < samples.size(); ++i)
        if (samples[i].rtt_ns() < samples[best].rtt_ns())
            best = i;
    return samples[best].offset_ns();
}

AlignmentPlan plan_alignment(const std::vector<PhaseModel>& device_models,
                             double target_phase_ns) {
    if (device_models.empty())
        fail(errc::no_samples, "no device models to align");
    const double tau_ref = device_models.front().period_ns;
    AlignmentPlan plan;
    plan.period_ns = tau_ref;
    plan.target_phase_ns = positive_mod(target_phase_ns, tau_ref);
    for (const auto& model : device_models) {
        validate_model(model);
        if (std::abs(model.period_ns - tau_ref) > 1e-4 * tau_ref)
            fail(errc::period_mismatch,
                 "device periods disagree beyond 1e-4 relative tolerance");
        plan.shift_ns.push_back(positive_mod(target_phase_ns - model.phase_ns, model.period_ns));
    }
    return plan;
}

SimDevice apply_alignment(const SimDevice& device, double shift_ns) {
    const double tau = device.camera.tau_ns;
    if (!(shift_ns >= 0.0 && shift_ns < tau))
        fail(errc::invalid_spec, "shift must lie in [0, tau)");
    // One simulated frame runs long by shift_ns; all subsequent captures
    // land on the shifted grid.
    SimDevice shifted = device;
    shifted.camera.tau0_local_ns = positive_mod(device.camera.tau0_local_ns + shift_ns, tau);
    return shifted;
}

SyncReport run_session(std::vector<SimDevice> devices, const NetworkModel& net,
                       const SessionConfig& config) {
    if (devices.size() < 2)
        fail(errc::invalid_spec, "a session needs at least 2 devices");
    const double tau = devices.front().camera.tau_ns;
    for (const auto& d : devices)
        if (d.camera.tau_ns != tau)
            fail(errc::invalid_spec, "camera period must be equal across devices");

    SyncReport report;
    report.period_ns = tau;
    report.seed = config.seed;

    // --- clock sync: min-filtered NTP against the leader (device 0) ---
    SplitMix64 net_rng(substream(config.seed ^ net.seed, 0x7E1));
    std::vector<int> rounds(devices.size(), 0);
    for (std::size_t d = 0; d < devices.size(); ++d) {
        if (d == 0) {
            devices[d].estimated_offset_ns = 0.0; // leader defines time
            continue;
        }
        std::vector<OffsetSample> samples;
        samples.reserve(static_cast<std::size_t>(config.n_exchanges));
        for (int e = 0; e < config.n_exchanges; ++e) {
            for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
                const double send_local =
                    (static_cast<double>(e) * (config.max_retries + 1) + attempt) * 1.0e7 +
                    static_cast<double>(d) * 1.0e9;
                ++rounds[d];
                try {
                    samples.push_back(exchange_round(devices[d], net, net_rng, send_local));
                    break;
                } catch (const Error& err) {
                    if (err.code() != errc::message_lost)
                        throw;
                }
            }
        }
        if (samples.empty())
            fail(errc::session_failed, "device " + devices[d].device_id +
                                           " completed no exchange after retries");
        devices[d].estimated_offset_ns = min_filter_offset(samples);
    }

    // --- per-device phase estimation on simulated preview traces ---
    std::vector<GeneratedTrace> previews;
    std::vector<PeriodEstimate> fits;
    for (std::size_t d = 0; d < devices.size(); ++d) {
        TraceSpec spec;
        spec.device_id = devices[d].device_id;
        spec.tau_ns = devices[d].camera.tau_ns;
        spec.tau0_ns = devices[d].camera.tau0_local_ns;
        spec.n_frames = config.train_frames;
        spec.jitter_sigma_ns = devices[d].camera.jitter_sigma_ns;
        spec.seed = substream(config.seed, 0x100 + d);
        previews.push_back(generate(spec));
        fits.push_back(estimate(previews.back().trace));
    }

    // The camera rate is shared across the session, so pool the period
    // estimates and re-anchor each phase under the pooled value. Short
    // train windows otherwise leave per-device period noise large enough
    // to trip the alignment tolerance, and a pooled period makes that
    // noise common mode in the pairwise skew.
    double pooled_tau = 0.0;
    for (const auto& fit : fits)
        pooled_tau += fit.model.period_ns;
    pooled_tau /= static_cast<double>(fits.size());

    std::vector<PhaseModel> leader_models; // phases mapped into the leader domain
    for (std::size_t d = 0; d < devices.size(); ++d) {
        const double local_phase =
            phase_under_period(previews[d].trace, fits[d].model.phase_ns, pooled_tau);
        PhaseModel in_leader;
        in_leader.period_ns = pooled_tau;
        in_leader.noise_sigma_ns = fits[d].model.noise_sigma_ns;
        in_leader.phase_ns =
            positive_mod(local_phase + *devices[d].estimated_offset_ns, pooled_tau);
        leader_models.push_back(in_leader);
    }

    // --- alignment toward the leader's estimated phase ---
    AlignmentPlan plan = plan_alignment(leader_models, leader_models.front().phase_ns);
    report.target_phase_ns = plan.target_phase_ns;
    if (config.exposure_quantization_ns > 0.0)
        for (double& s : plan.shift_ns)
            s = positive_mod(std::round(s / config.exposure_quantization_ns) *
                                 config.exposure_quantization_ns,
                             tau);
    // Shifts were planned in the leader domain; a phase shift is the same
    // displacement in any clock domain (rates equal up to skew).
    for (std::size_t d = 0; d < devices.size(); ++d)
        devices[d] = apply_alignment(devices[d], plan.shift_ns[d]);

    // --- simulated video segment; skew measured on physical capture
    // instants (true clock conversion), so both phase- and
    // offset-estimation errors show up, as on a real rig ---
    std::vector<double> video_phase(devices.size());
    for (std::size_t d = 0; d < devices.size(); ++d) {
        SplitMix64 cam_rng(substream(config.seed, 0x200 + d));
        std::vector<double> instants;
        instants.reserve(static_cast<std::size_t>(config.video_frames));
        const double sigma = devices[d].camera.jitter_sigma_ns;
        for (int k = 0; k < config.video_frames; ++k) {
            const double local = devices[d].camera.tau0_local_ns +
                                 static_cast<double>(k) * tau +
                                 (sigma > 0.0 ? sigma * cam_rng.next_gaussian() : 0.0);
            instants.push_back(devices[d].to_leader(local));
        }
        video_phase[d] = circular_phase(instants, tau);
    }

    for (std::size_t d = 0; d < devices.size(); ++d) {
        DeviceSyncResult r;
        r.device_id = devices[d].device_id;
        r.true_offset_ns = devices[d].true_clock_offset_ns;
        r.estimated_offset_ns = *devices[d].estimated_offset_ns;
        r.offset_error_ns = r.estimated_offset_ns - r.true_offset_ns;
        r.rounds_used = rounds[d];
        report.devices.push_back(std::move(r));
    }
    for (std::size_t a = 0; a < devices.size(); ++a) {
        for (std::size_t b = a + 1; b < devices.size(); ++b) {
            const double diff = wrap_half_period(video_phase[a] - video_phase[b], tau);
            PairwiseSkew s;
            s.device_a = devices[a].device_id;
            s.device_b = devices[b].device_id;
            s.skew_ns = std::abs(diff); // in [0, tau/2]
            report.max_skew_ns = std::max(report.max_skew_ns, s.skew_ns);
            report.pairwise_skew_ns.push_back(std::move(s));
        }
    }
    return report;
}

} // namespace camsync
