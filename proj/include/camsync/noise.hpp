#pragma once

// Timestamping-noise regime classification. Devices fall into two classes:
// consecutive differences unimodal Gaussian, or multi-cluster when frames
// are occasionally dropped (clusters at ~k*tau). Clustering is by the
// integer slot count dn, never by density estimation on the dt values.

#include <span>
#include <vector>

#include "camsync/estimator.hpp"

namespace camsync {

struct NormalityResult {
    double statistic = 0.0; ///< size-adjusted Anderson-Darling A^2
    bool pass = false;
    bool tested = false; ///< false when the cluster is too small (< 8)
    bool degenerate_variance = false;
};

struct ClusterNormality {
    ClusterStats stats;
    NormalityResult normality;
};

enum class NoiseRegime { unimodal, multi_cluster };

struct NoiseClassification {
    NoiseRegime regime = NoiseRegime::unimodal;
    std::vector<ClusterNormality> clusters;
    /// Fraction of consecutive pairs with dn > 1.
    double drop_rate = 0.0;
    double significance = 0.0;
};

/// Anderson-Darling test against the Gaussian family with estimated mean
/// and variance. statistic = A^2 * (1 + 0.75/n + 2.25/n^2), compared
/// against Stephens' case-3 critical values at significance levels
/// {0.15, 0.10, 0.05, 0.025, 0.01} -> {0.576, 0.656, 0.787, 0.918, 1.092}
/// (log-interpolated in between). Deterministic for fixed input. Constant
/// samples return pass=false with degenerate_variance set. Throws
/// too_few_samples (< 8).
NormalityResult normality_check(std::span<const double> samples, double significance);

/// Regime classification of a trace: clusters from build_diff_series with
/// the tau_init seed, regime = unimodal iff exactly one cluster with
/// k == 1, per-cluster normality on the dt/k samples (clusters smaller
/// than 8 reported untested). Throws too_short (< 20 samples).
NoiseClassification classify(const TimestampTrace& trace, double significance = 0.01);

} // namespace camsync
