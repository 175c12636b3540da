#pragma once

// Phase/period estimation.
//
// The production path approximates the mixed-integer least-squares fit:
// seed the period with the minimum consecutive difference, assign an
// integer slot count to every difference, solve one least-squares
// subproblem per slot-count cluster and combine them, recover the phase
// as a circular mean, then (by default) refine by re-assigning slots and
// re-solving the now-linear problem until the assignment is stable.
//
// exact_solve is the brute-force oracle for the original constrained
// problem: a dense period grid with an exact linear solve per induced
// assignment. Desk-scale only (trace length <= 64); used by tests to
// bound the production estimator.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "camsync/core.hpp"

namespace camsync {

/// Consecutive differences dt_i = t_i - t_{i-1} and their integer slot
/// counts dn_i >= 1 (dn_i > 1 marks dropped frames between captures).
struct DiffSeries {
    Eigen::VectorXd diffs_ns;
    std::vector<std::int64_t> delta_n;

    std::size_t size() const { return delta_n.size(); }
};

/// Per-cluster statistics for the slot count k: member count, the
/// cluster's own period estimate sum(dt)/(count*k), and the sample
/// standard deviation of dt/k.
struct ClusterStats {
    std::int64_t k = 0;
    std::int64_t count = 0;
    double tau_hat_ns = 0.0;
    double sigma_hat_ns = 0.0;
};

enum class WeightMode {
    /// w_k = n_k * k^2; identical to the joint closed form
    /// sum(dn*dt)/sum(dn^2).
    homoscedastic,
    /// w_k = n_k * k^2 / sigma_k^2 for clusters with >= 5 members;
    /// smaller clusters fall back to the pooled variance.
    inverse_variance,
};

struct EstimateOptions {
    int min_samples = 10;
    bool refine = true;
    int max_refine_iterations = 10;
    /// Seed with the 5th-percentile difference instead of the strict
    /// minimum (guards against a single corrupted near-zero diff).
    bool robust_seed = false;
    WeightMode weights = WeightMode::homoscedastic;
};

struct PeriodEstimate {
    PhaseModel model;
    std::vector<ClusterStats> clusters;
    double tau_init_ns = 0.0;
    double objective = 0.0;
    bool refined = false;
    /// Objective after the initial fit and after each refine iteration;
    /// nonincreasing.
    std::vector<double> refine_objectives;
};

/// Period seed: the minimum consecutive difference (or the 5th-percentile
/// difference in robust mode). Throws empty_trace.
double tau_init(const TimestampTrace& trace, bool robust = false);

/// Differences plus per-difference slot counts
/// delta_n[i] = assign_frame_index(dt_i, tau_seed). Throws degenerate_seed
/// when any delta_n is zero (seed too large relative to the data).
DiffSeries build_diff_series(const TimestampTrace& trace, double tau_seed_ns);

struct ClusteredSolution {
    double tau_ns = 0.0;
    std::vector<ClusterStats> clusters;
};

/// Per-cluster least squares combined as a weighted sum. With the default
/// weights the result equals sum(dn*dt)/sum(dn^2) exactly.
ClusteredSolution solve_clustered_lsq(const DiffSeries& series,
                                      WeightMode weights = WeightMode::homoscedastic);

/// Phase recovery: circular mean of (t_i mod tau) on a circle of
/// circumference tau, normalized into [0, tau). Robust at the wrap point
/// where a plain mean of residues fails.
double estimate_phase(const TimestampTrace& trace, double tau_ns);

/// Full pipeline; see file comment. Throws degenerate_seed (propagated),
/// too_short (fewer than options.min_samples), no_convergence (slot
/// assignment still changing after max_refine_iterations).
PeriodEstimate estimate(const TimestampTrace& trace, const EstimateOptions& options = {});

/// Brute-force oracle: for each tau on a dense grid over [tau_lo, tau_hi],
/// assign slots via floor(t/tau + 0.5), solve the linear problem exactly
/// for that assignment, keep the global best, then polish the best grid
/// cell by golden section. Result is independent of evaluation order.
/// Throws too_short (>64 samples guard is invalid_spec), infeasible_band
/// when no grid point yields strictly increasing slots.
PeriodEstimate exact_solve(const TimestampTrace& trace, double tau_lo_ns, double tau_hi_ns,
                           int grid_steps = 100000);

} // namespace camsync
