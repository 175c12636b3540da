#include "camsync/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace camsync {

namespace {

// Stephens' case-3 critical values (normal family, mean and variance
// estimated) for the size-adjusted statistic A^2 * (1 + 0.75/n + 2.25/n^2).
constexpr double kLevels[] = {0.15, 0.10, 0.05, 0.025, 0.01};
constexpr double kCritical[] = {0.576, 0.656, 0.787, 0.918, 1.092};

double critical_value(double significance) {
    if (significance >= kLevels[0])
        return kCritical[0];
    if (significance <= kLevels[4])
        return kCritical[4];
    for (int i = 0; i < 4; ++i) {
        if (significance <= kLevels[i] && significance >= kLevels[i + 1]) {
            // interpolate linearly in log(alpha)
            const double x0 = std::log(kLevels[i]), x1 = std::log(kLevels[i + 1]);
            const double w = (std::log(significance) - x0) / (x1 - x0);
            return kCritical[i] + w * (kCritical[i + 1] - kCritical[i]);
        }
    }
    return kCritical[4];
}

double log_normal_cdf(double z) {
    if (z > -37.0)
        return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
    // deep lower tail: ln Phi(z) ~ -z^2/2 - ln(-z) - ln sqrt(2*pi)
    return -0.5 * z * z - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) +
           std::log1p(-1.0 / (z * z));
}

} // namespace

NormalityResult normality_check(std::span<const double> samples, double significance) {
    const std::size_t n = samples.size();
    if (n < 8)
        fail(errc::too_few_samples,
             "normality check needs >= 8 samples, got " + std::to_string(n));

    double mean = 0.0;
    for (double x : samples)
        mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : samples)
        ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    NormalityResult out;
    out.tested = true;
    if (!(sd > 0.0)) {
        out.degenerate_variance = true;
        out.pass = false;
        out.statistic = std::numeric_limits<double>::infinity();
        return out;
    }

    std::vector<double> z(samples.begin(), samples.end());
    std::sort(z.begin(), z.end());
    for (double& x : z)
        x = (x - mean) / sd;

    double a2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = static_cast<double>(2 * i + 1);
        a2 += w * (log_normal_cdf(z[i]) + log_normal_cdf(-z[n - 1 - i]));
    }
    a2 = -static_cast<double>(n) - a2 / static_cast<double>(n);

    const double nn = static_cast<double>(n);
    out.statistic = a2 * (1.0 + 0.75 / nn + 2.25 / (nn * nn));
    out.pass = out.statistic < critical_value(significance);
    return out;
}

NoiseClassification classify(const TimestampTrace& trace, double significance) {
    if (trace.size() < 20)
        fail(errc::too_short, "classification needs >= 20 samples, got " +
                                  std::to_string(trace.size()));

    const double seed = tau_init(trace);
    const DiffSeries series = build_diff_series(trace, seed);
    const ClusteredSolution sol = solve_clustered_lsq(series);

    NoiseClassification out;
    out.significance = significance;

    std::size_t dropped_pairs = 0;
    for (std::int64_t dn : series.delta_n)
        if (dn > 1)
            ++dropped_pairs;
    out.drop_rate = static_cast<double>(dropped_pairs) / static_cast<double>(series.size());

    out.regime = (sol.clusters.size() == 1 && sol.clusters.front().k == 1)
                     ? NoiseRegime::unimodal
                     : NoiseRegime::multi_cluster;

    for (const auto& c : sol.clusters) {
        ClusterNormality entry;
        entry.stats = c;
        if (c.count >= 8) {
            std::vector<double> per_period;
            per_period.reserve(static_cast<std::size_t>(c.count));
            for (std::size_t i = 0; i < series.size(); ++i)
                if (series.delta_n[i] == c.k)
                    per_period.push_back(series.diffs_ns[static_cast<Eigen::Index>(i)] /
                                         static_cast<double>(c.k));
            entry.normality = normality_check(per_period, significance);
        }
        out.clusters.push_back(std::move(entry));
    }
    return out;
}

} // namespace camsync
