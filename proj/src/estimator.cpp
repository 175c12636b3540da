#include "camsync/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace camsync {

namespace {

// 2-parameter least squares t ~ phase + slot*tau in the raw-sum form
// (n*S_nt - S_n*S_t) / (n*S_nn - S_n^2). For integer-valued on-grid data
// with intermediates below 2^53 every step is exact, which is what makes
// drop-robustness bit-stable; decompositions (QR etc.) are not.
struct LinearFit {
    double tau = 0.0;
    double phase = 0.0; // unnormalized
};

LinearFit ols_fit(const TimestampTrace& trace, const std::vector<std::int64_t>& slots) {
    const double n = static_cast<double>(trace.size());
    double s_n = 0.0, s_nn = 0.0, s_t = 0.0, s_nt = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double k = static_cast<double>(slots[i]);
        const double t = static_cast<double>(trace[i]);
        s_n += k;
        s_nn += k * k;
        s_t += t;
        s_nt += k * t;
    }
    const double den = n * s_nn - s_n * s_n;
    if (den == 0.0)
        fail(errc::invalid_model, "degenerate slot assignment (all slots equal)");
    LinearFit fit;
    fit.tau = (n * s_nt - s_n * s_t) / den;
    fit.phase = (s_t - fit.tau * s_n) / n;
    return fit;
}

// Slots relative to the phase; no invariant checks (internal use).
std::vector<std::int64_t> raw_slots(const TimestampTrace& trace, double phase, double tau) {
    std::vector<std::int64_t> slots(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i)
        slots[i] = static_cast<std::int64_t>(
            std::floor((static_cast<double>(trace[i]) - phase) / tau + 0.5));
    return slots;
}

bool strictly_increasing(const std::vector<std::int64_t>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] <= v[i - 1])
            return false;
    return true;
}

double slots_objective(const TimestampTrace& trace, double phase, double tau,
                       const std::vector<std::int64_t>& slots) {
    double acc = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double r = phase + static_cast<double>(slots[i]) * tau -
                         static_cast<double>(trace[i]);
        acc += r * r;
    }
    return acc;
}

// phase -> [0, tau); exact when phase and tau are exactly representable
// integers (floor + multiply + subtract, no fmod rounding surprises).
double normalize_phase(double phase, double tau) {
    const double k = std::floor(phase / tau);
    double p = phase - k * tau;
    if (p >= tau)
        p -= tau;
    if (p < 0.0)
        p += tau;
    return p;
}

double sample_std(const Eigen::VectorXd& v) {
    if (v.size() < 2)
        return 0.0;
    const double m = v.mean();
    return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

} // namespace

double tau_init(const TimestampTrace& trace, bool robust) {
    if (trace.size() < 2)
        fail(errc::empty_trace, "need at least 2 timestamps for a period seed");
    std::vector<double> diffs(trace.size() - 1);
    for (std::size_t i = 1; i < trace.size(); ++i)
        diffs[i - 1] = static_cast<double>(trace[i] - trace[i - 1]);
    if (!robust)
        return *std::min_element(diffs.begin(), diffs.end());
    // 5th-percentile (nearest rank) seed: one corrupted near-zero diff
    // cannot poison it.
    std::sort(diffs.begin(), diffs.end());
    const std::size_t rank =
        static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(diffs.size())));
    return diffs[rank == 0 ? 0 : rank - 1];
}

DiffSeries build_diff_series(const TimestampTrace& trace, double tau_seed_ns) {
    if (!(tau_seed_ns > 0.0))
        fail(errc::non_positive_period, "seed period must be positive");
    DiffSeries out;
    const std::size_t m = trace.size() - 1;
    out.diffs_ns.resize(static_cast<Eigen::Index>(m));
    out.delta_n.reserve(m);
    for (std::size_t i = 1; i < trace.size(); ++i) {
        const double dt = static_cast<double>(trace[i] - trace[i - 1]);
        const std::int64_t dn = assign_frame_index(dt, tau_seed_ns);
        if (dn == 0)
            fail(errc::degenerate_seed,
                 "difference " + std::to_string(i - 1) +
                     " maps to zero periods (seed too large for the data)",
                 static_cast<std::int64_t>(i - 1));
        out.diffs_ns[static_cast<Eigen::Index>(i - 1)] = dt;
        out.delta_n.push_back(dn);
    }
    return out;
}

ClusteredSolution solve_clustered_lsq(const DiffSeries& series, WeightMode weights) {
    if (series.size() == 0)
        fail(errc::empty_trace, "empty difference series");

    std::map<std::int64_t, std::vector<double>> groups;
    for (std::size_t i = 0; i < series.size(); ++i)
        groups[series.delta_n[i]].push_back(series.diffs_ns[static_cast<Eigen::Index>(i)]);

    ClusteredSolution sol;
    for (const auto& [k, dts] : groups) {
        ClusterStats c;
        c.k = k;
        c.count = static_cast<std::int64_t>(dts.size());
        double sum = 0.0;
        for (double dt : dts)
            sum += dt;
        c.tau_hat_ns = sum / (static_cast<double>(c.count) * static_cast<double>(k));
        if (c.count > 1) {
            double ss = 0.0;
            for (double dt : dts) {
                const double d = dt / static_cast<double>(k) - c.tau_hat_ns;
                ss += d * d;
            }
            c.sigma_hat_ns = std::sqrt(ss / static_cast<double>(c.count - 1));
        }
        sol.clusters.push_back(c);
    }

    // Pooled per-cluster variance of dt/k, the fallback weight for small
    // or zero-variance clusters in inverse-variance mode.
    double pooled_ss = 0.0;
    std::int64_t pooled_dof = 0;
    for (const auto& c : sol.clusters) {
        if (c.count > 1) {
            pooled_ss += c.sigma_hat_ns * c.sigma_hat_ns * static_cast<double>(c.count - 1);
            pooled_dof += c.count - 1;
        }
    }
    const double pooled_var = pooled_dof > 0 ? pooled_ss / static_cast<double>(pooled_dof) : 0.0;

    double num = 0.0, den = 0.0;
    for (const auto& c : sol.clusters) {
        const double kk = static_cast<double>(c.k);
        double w = static_cast<double>(c.count) * kk * kk;
        if (weights == WeightMode::inverse_variance && pooled_var > 0.0) {
            const double var = (c.count >= 5 && c.sigma_hat_ns > 0.0)
                                   ? c.sigma_hat_ns * c.sigma_hat_ns
                                   : pooled_var;
            w /= var;
        }
        num += w * c.tau_hat_ns;
        den += w;
    }
    sol.tau_ns = num / den;
    return sol;
}

double estimate_phase(const TimestampTrace& trace, double tau_ns) {
    if (!(tau_ns > 0.0))
        fail(errc::non_positive_period, "period must be positive");
    double s = 0.0, c = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        double m = std::fmod(static_cast<double>(trace[i]), tau_ns);
        if (m < 0.0)
            m += tau_ns;
        const double a = 2.0 * std::numbers::pi * m / tau_ns;
        s += std::sin(a);
        c += std::cos(a);
    }
    const double ang = std::atan2(s, c);
    double phase = ang / (2.0 * std::numbers::pi) * tau_ns;
    return normalize_phase(phase, tau_ns);
}

PeriodEstimate estimate(const TimestampTrace& trace, const EstimateOptions& options) {
    if (static_cast<int>(trace.size()) < options.min_samples)
        fail(errc::too_short, "trace has " + std::to_string(trace.size()) +
                                  " samples, need " + std::to_string(options.min_samples));

    PeriodEstimate out;
    out.tau_init_ns = tau_init(trace, options.robust_seed);
    const DiffSeries series = build_diff_series(trace, out.tau_init_ns);
    ClusteredSolution sol = solve_clustered_lsq(series, options.weights);
    out.clusters = std::move(sol.clusters);

    double tau = sol.tau_ns;
    double phase = estimate_phase(trace, tau);

    std::vector<std::int64_t> slots = raw_slots(trace, phase, tau);
    out.refine_objectives.push_back(slots_objective(trace, phase, tau, slots));

    if (options.refine) {
        bool stable = false;
        for (int it = 0; it < options.max_refine_iterations && !stable; ++it) {
            const LinearFit fit = ols_fit(trace, slots);
            if (!(fit.tau > 0.0))
                fail(errc::no_convergence, "refinement drove the period nonpositive");
            tau = fit.tau;
            phase = normalize_phase(fit.phase, fit.tau);
            std::vector<std::int64_t> next = raw_slots(trace, phase, tau);
            out.refine_objectives.push_back(slots_objective(trace, phase, tau, next));
            stable = (next == slots);
            slots = std::move(next);
        }
        if (!stable)
            fail(errc::no_convergence, "slot assignment still changing after " +
                                           std::to_string(options.max_refine_iterations) +
                                           " refine iterations");
        out.refined = true;
    }

    if (!(tau > 0.5 * out.tau_init_ns && tau < 2.0 * out.tau_init_ns))
        fail(errc::invalid_model,
             "fitted period " + std::to_string(tau) + " outside the sanity band of seed " +
                 std::to_string(out.tau_init_ns));

    out.model.period_ns = tau;
    out.model.phase_ns = normalize_phase(phase, tau);
    out.objective = slots_objective(trace, phase, tau, slots);

    Eigen::VectorXd res(static_cast<Eigen::Index>(trace.size()));
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double raw = static_cast<double>(trace[i]) -
                           (phase + static_cast<double>(slots[i]) * tau);
        res[static_cast<Eigen::Index>(i)] = wrap_half_period(raw, tau);
    }
    out.model.noise_sigma_ns = sample_std(res);
    return out;
}

PeriodEstimate exact_solve(const TimestampTrace& trace, double tau_lo_ns, double tau_hi_ns,
                           int grid_steps) {
    if (trace.size() > 64)
        fail(errc::invalid_spec, "exact_solve is a desk-scale oracle; trace length " +
                                     std::to_string(trace.size()) + " > 64");
    if (!(tau_lo_ns > 0.0) || !(tau_lo_ns < tau_hi_ns))
        fail(errc::invalid_spec, "need 0 < tau_lo < tau_hi");
    if (grid_steps < 2)
        fail(errc::invalid_spec, "grid_steps must be >= 2");

    // Slot assignment with no phase term; strictly increasing slots are
    // the feasibility condition (one capture per period slot).
    const auto slots_at = [&](double tau) {
        std::vector<std::int64_t> s(trace.size());
        for (std::size_t i = 0; i < trace.size(); ++i)
            s[i] = static_cast<std::int64_t>(
                std::floor(static_cast<double>(trace[i]) / tau + 0.5));
        return s;
    };

    struct Candidate {
        double obj = std::numeric_limits<double>::infinity();
        LinearFit fit;
        std::vector<std::int64_t> slots;
    };
    Candidate best;

    const auto consider = [&](const std::vector<std::int64_t>& slots) {
        if (!strictly_increasing(slots))
            return;
        const LinearFit fit = ols_fit(trace, slots);
        if (!(fit.tau > 0.0))
            return;
        const double obj = slots_objective(trace, fit.phase, fit.tau, slots);
        if (obj < best.obj) {
            best = Candidate{obj, fit, slots};
        }
    };

    const double step = (tau_hi_ns - tau_lo_ns) / static_cast<double>(grid_steps);
    int best_g = -1;
    std::vector<std::int64_t> prev;
    for (int g = 0; g <= grid_steps; ++g) {
        const double tau = tau_lo_ns + step * static_cast<double>(g);
        std::vector<std::int64_t> s = slots_at(tau);
        if (s == prev)
            continue; // same assignment, same candidate
        const double before = best.obj;
        consider(s);
        if (best.obj < before)
            best_g = g;
        prev = std::move(s);
    }
    if (!std::isfinite(best.obj))
        fail(errc::infeasible_band, "no period in the given bounds yields a feasible slot assignment");

    // Golden-section polish over the best grid cell on the phase-only
    // objective h(tau) = min_phase sum((phase + N_i(tau)*tau - t_i)^2),
    // which is continuous in tau across assignment boundaries.
    const auto h = [&](double tau) {
        const std::vector<std::int64_t> s = slots_at(tau);
        double mean = 0.0;
        for (std::size_t i = 0; i < trace.size(); ++i)
            mean += static_cast<double>(trace[i]) - static_cast<double>(s[i]) * tau;
        mean /= static_cast<double>(trace.size());
        return slots_objective(trace, mean, tau, s);
    };
    double a = tau_lo_ns + step * static_cast<double>(std::max(0, best_g - 1));
    double b = tau_lo_ns + step * static_cast<double>(std::min(grid_steps, best_g + 1));
    constexpr double kInvPhi = 0.6180339887498949;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = h(x1), f2 = h(x2);
    for (int it = 0; it < 120; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = h(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = h(x2);
        }
    }
    consider(slots_at(0.5 * (a + b)));

    // Self-consistency: at the optimum the slots must equal the
    // phase-aware assignment of the optimum itself (the band constraint).
    for (int it = 0; it < 10; ++it) {
        std::vector<std::int64_t> s = raw_slots(trace, best.fit.phase, best.fit.tau);
        if (s == best.slots)
            break;
        const double before = best.obj;
        consider(s);
        if (best.obj >= before)
            break;
    }

    PeriodEstimate out;
    out.model.period_ns = best.fit.tau;
    out.model.phase_ns = normalize_phase(best.fit.phase, best.fit.tau);
    out.objective = best.obj;
    out.refined = true;
    out.tau_init_ns = best.fit.tau;
    out.refine_objectives.push_back(best.obj);

    Eigen::VectorXd res(static_cast<Eigen::Index>(trace.size()));
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double raw = static_cast<double>(trace[i]) -
                           (best.fit.phase + static_cast<double>(best.slots[i]) * best.fit.tau);
        res[static_cast<Eigen::Index>(i)] = wrap_half_period(raw, best.fit.tau);
    }
    out.model.noise_sigma_ns = sample_std(res);

    // Cluster stats of the solution's slot-count differences.
    if (trace.size() >= 2) {
        DiffSeries series;
        const std::size_t m = trace.size() - 1;
        series.diffs_ns.resize(static_cast<Eigen::Index>(m));
        series.delta_n.reserve(m);
        for (std::size_t i = 1; i < trace.size(); ++i) {
            series.diffs_ns[static_cast<Eigen::Index>(i - 1)] =
                static_cast<double>(trace[i] - trace[i - 1]);
            series.delta_n.push_back(best.slots[i] - best.slots[i - 1]);
        }
        out.clusters = solve_clustered_lsq(series).clusters;
    }
    return out;
}

} // namespace camsync
