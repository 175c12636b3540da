#include "camsync/synth.hpp"

#include <cmath>

#include "camsync/rng.hpp"

namespace camsync {

namespace {

double normalize_phase(double phase, double tau) {
    const double k = std::floor(phase / tau);
    double p = phase - k * tau;
    if (p >= tau)
        p -= tau;
    if (p < 0.0)
        p += tau;
    return p;
}

} // namespace

void validate_spec(const TraceSpec& spec) {
    if (!(spec.tau_ns > 0.0))
        fail(errc::invalid_spec, "tau_ns must be positive");
    if (!(spec.jitter_sigma_ns >= 0.0) || spec.jitter_sigma_ns >= spec.tau_ns / 4.0)
        fail(errc::invalid_spec,
             "jitter_sigma_ns must lie in [0, tau_ns/4); slot assignment is ill-posed beyond");
    if (!(spec.drop_prob >= 0.0 && spec.drop_prob < 1.0))
        fail(errc::invalid_spec, "drop_prob must lie in [0, 1)");
    if (!(spec.skew_onset_ns >= 0.0))
        fail(errc::invalid_spec, "skew_onset_ns must be nonnegative");
    int total = 0;
    for (const auto& seg : spec.segments) {
        if (seg.n_frames < 1)
            fail(errc::invalid_spec, "segments need n_frames >= 1");
        total += seg.n_frames;
    }
    if (!spec.segments.empty()) {
        if (spec.n_frames != 0 && spec.n_frames != total)
            fail(errc::invalid_spec, "n_frames disagrees with the segment sum");
    } else if (spec.n_frames < 1) {
        fail(errc::invalid_spec, "n_frames must be >= 1");
    }
}

GeneratedTrace generate(const TraceSpec& spec) {
    validate_spec(spec);
    const int n = spec.segments.empty()
                      ? spec.n_frames
                      : [&] {
                            int total = 0;
                            for (const auto& seg : spec.segments)
                                total += seg.n_frames;
                            return total;
                        }();

    SplitMix64 rng(spec.seed);
    GeneratedTrace out;
    out.trace.device_id = spec.device_id;
    out.trace.source = TraceSource::synthetic;
    out.true_indices.tau_used_ns = spec.tau_ns;

    const double skew_rate = spec.skew_ns_per_min / 60.0e9;
    std::int64_t prev = 0;
    bool have_prev = false;
    int seg_idx = 0, seg_used = 0;
    for (int i = 0; i < n; ++i) {
        double seg_offset = 0.0;
        if (!spec.segments.empty()) {
            if (seg_used >= spec.segments[static_cast<std::size_t>(seg_idx)].n_frames) {
                ++seg_idx;
                seg_used = 0;
            }
            seg_offset = spec.segments[static_cast<std::size_t>(seg_idx)].phase_offset_ns;
            ++seg_used;
        }

        const double drop_draw = rng.next_unit();
        if (drop_draw < spec.drop_prob) {
            ++out.meta.dropped_frames;
            continue;
        }

        const double t_nom = spec.tau0_ns + static_cast<double>(i) * spec.tau_ns + seg_offset;
        const double skewed = t_nom + skew_rate * std::max(0.0, t_nom - spec.skew_onset_ns);

        std::int64_t ti = 0;
        for (int attempt = 0;; ++attempt) {
            const double jitter =
                spec.jitter_sigma_ns > 0.0 ? spec.jitter_sigma_ns * rng.next_gaussian() : 0.0;
            ti = std::llround(skewed + jitter);
            if (!have_prev || ti > prev)
                break;
            if (spec.jitter_sigma_ns == 0.0 || attempt >= 1000)
                fail(errc::invalid_spec,
                     "cannot produce a strictly increasing trace at frame " +
                         std::to_string(i));
            ++out.meta.jitter_redraws;
        }
        prev = ti;
        have_prev = true;
        out.trace.timestamps.push_back(ti);
        out.true_indices.indices.push_back(i);
    }

    if (out.trace.timestamps.size() < 2)
        fail(errc::invalid_spec, "fewer than 2 frames survived dropping");

    out.ground_truth.period_ns = spec.tau_ns;
    out.ground_truth.phase_ns = normalize_phase(spec.tau0_ns, spec.tau_ns);
    out.ground_truth.noise_sigma_ns = spec.jitter_sigma_ns;
    return out;
}

TraceSpec preview_video_spec(double jitter_sigma_ns, double drop_prob, double skew_ns_per_min) {
    TraceSpec spec;
    spec.tau_ns = 1.0e9 / 30.0;
    spec.n_frames = 1800;
    spec.segments = {{450, 0.0}, {1350, 0.0}};
    spec.jitter_sigma_ns = jitter_sigma_ns;
    spec.drop_prob = drop_prob;
    spec.skew_ns_per_min = skew_ns_per_min;
    spec.skew_onset_ns = 450.0 * spec.tau_ns;
    return spec;
}

} // namespace camsync
