#pragma once

#include <algorithm>
#include <vector>

#include "autosde/autosde.hpp"
#include "autosde/manifold.hpp"
#include "autosde/sde.hpp"

namespace autosde {

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b| via a merged
/// sweep over the pooled sorted samples (ties advance both counters first).
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    require(!a.empty() && !b.empty(), "ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

/// Counts over [edges[k], edges[k+1]) bins, last bin right-closed.
struct Histogram {
    VectorXd edges;
    std::vector<long> counts;
    long n_total = 0;
};

inline Histogram make_histogram(const Eigen::Ref<const VectorXd>& samples, const VectorXd& edges) {
    require(edges.size() >= 2, "histogram: need at least two edges");
    for (Eigen::Index k = 1; k < edges.size(); ++k)
        require(edges[k] > edges[k - 1], "histogram: edges must be strictly increasing");
    Histogram h;
    h.edges = edges;
    h.counts.assign(static_cast<std::size_t>(edges.size() - 1), 0);
    h.n_total = samples.size();
    for (Eigen::Index i = 0; i < samples.size(); ++i) {
        const double v = samples[i];
        if (v < edges[0] || v > edges[edges.size() - 1]) continue;
        auto it = std::upper_bound(edges.data(), edges.data() + edges.size(), v);
        std::size_t bin = static_cast<std::size_t>(it - edges.data());
        bin = bin == 0 ? 0 : bin - 1;
        if (bin >= h.counts.size()) bin = h.counts.size() - 1;  // right edge of last bin
        ++h.counts[bin];
    }
    return h;
}

/// Freedman-Diaconis edges over pooled data (shared between the two sides of
/// a comparison); falls back to a single bin for degenerate samples.
inline VectorXd freedman_diaconis_edges(std::vector<double> pooled) {
    require(!pooled.empty(), "histogram edges: empty sample");
    std::sort(pooled.begin(), pooled.end());
    const double lo = pooled.front(), hi = pooled.back();
    if (lo == hi) {
        VectorXd edges(2);
        edges << lo - 0.5, hi + 0.5;
        return edges;
    }
    const auto q = [&](double p) {
        const double idx = p * static_cast<double>(pooled.size() - 1);
        const auto k = static_cast<std::size_t>(idx);
        const double frac = idx - static_cast<double>(k);
        return k + 1 < pooled.size() ? pooled[k] * (1.0 - frac) + pooled[k + 1] * frac : pooled[k];
    };
    double width = 2.0 * (q(0.75) - q(0.25)) / std::cbrt(static_cast<double>(pooled.size()));
    if (width <= 0.0) width = (hi - lo) / std::sqrt(static_cast<double>(pooled.size()));
    long n_bins = std::clamp<long>(static_cast<long>(std::ceil((hi - lo) / width)), 1, 200);
    VectorXd edges(n_bins + 1);
    for (long k = 0; k <= n_bins; ++k) edges[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n_bins);
    edges[0] = lo;        // pin endpoints exactly so extreme samples are never
    edges[n_bins] = hi;   // dropped by representation roundoff
    return edges;
}

/// Metrics of one reduced-vs-original cross-section.
struct DistributionComparison {
    long time_index = 0;
    VectorXd ks;  // per slow coordinate
    double energy_distance = 0.0;
    VectorXd mean_reduced, std_reduced, mean_original, std_original;
    std::vector<Histogram> hist_reduced, hist_original;  // per slow coordinate, shared edges
};

struct TrackResult {
    MatrixXd reduced_path;    // (n_steps+1) x n_slow
    MatrixXd original_path;   // (n_steps+1) x n_slow (slow block of the full system)
    VectorXd per_step_error;  // Euclidean slow-coordinate error per step
    double rmse = 0.0;
};

struct ComparisonReport {
    std::vector<DistributionComparison> at_times;
    TrackResult track;
};

namespace detail {

inline VectorXd column_std(const MatrixXd& points) {
    VectorXd out(points.cols());
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
        const double mean = points.col(c).mean();
        out[c] = points.rows() > 1
                     ? std::sqrt((points.col(c).array() - mean).square().sum() / (points.rows() - 1))
                     : 0.0;
    }
    return out;
}

inline std::vector<double> to_vector(const Eigen::Ref<const VectorXd>& v) {
    return {v.data(), v.data() + v.size()};
}

}  // namespace detail

/// Per-time-index distribution agreement between a reduced-system ensemble
/// and the slow block of an original-system ensemble (KS per coordinate,
/// multivariate energy distance, moments, histograms on shared edges).
inline std::vector<DistributionComparison> compare_distributions(const Ensemble& reduced, const Ensemble& original,
                                                                 const std::vector<int>& slow_dims,
                                                                 const std::vector<long>& time_indices) {
    require(reduced.dim() == static_cast<int>(slow_dims.size()), "compare: reduced ensemble must be slow-only");
    require(std::abs(reduced.dt() - original.dt()) < 1e-15, "compare: ensembles must share dt");

    std::vector<DistributionComparison> out;
    for (long idx : time_indices) {
        const Snapshot red = snapshot_at(reduced, idx);
        const Snapshot full = snapshot_at(original, idx);
        MatrixXd orig(full.points.rows(), slow_dims.size());
        for (std::size_t j = 0; j < slow_dims.size(); ++j)
            orig.col(static_cast<Eigen::Index>(j)) = full.points.col(slow_dims[j]);

        DistributionComparison cmp;
        cmp.time_index = idx;
        cmp.ks.resize(static_cast<Eigen::Index>(slow_dims.size()));
        for (std::size_t j = 0; j < slow_dims.size(); ++j) {
            const auto c = static_cast<Eigen::Index>(j);
            cmp.ks[c] = ks_statistic(detail::to_vector(red.points.col(c)), detail::to_vector(orig.col(c)));
            std::vector<double> pooled = detail::to_vector(red.points.col(c));
            const std::vector<double> ov = detail::to_vector(orig.col(c));
            pooled.insert(pooled.end(), ov.begin(), ov.end());
            const VectorXd edges = freedman_diaconis_edges(std::move(pooled));
            cmp.hist_reduced.push_back(make_histogram(red.points.col(c), edges));
            cmp.hist_original.push_back(make_histogram(orig.col(c), edges));
        }
        cmp.energy_distance = energy_distance(red.points, orig);
        cmp.mean_reduced = red.points.colwise().mean();
        cmp.mean_original = orig.colwise().mean();
        cmp.std_reduced = detail::column_std(red.points);
        cmp.std_original = detail::column_std(orig);
        out.push_back(std::move(cmp));
    }
    return out;
}

/// Tracks one reduced path against the original system's slow block under
/// common random numbers: the original runs `substeps` fine steps per
/// recorded step, and the reduced path consumes the aggregated slow Brownian
/// increment of the same fine noise, so both see the identical slow noise
/// path. Fast noise comes from an independent sub-stream.
inline TrackResult track_trajectory(const ReducedSystem& reduced, const SlowFastSystem& original,
                                    const VectorXd& x0_slow, const VectorXd& y0_fast, double dt, long n_steps,
                                    std::uint64_t shared_seed, int substeps = 1) {
    require(x0_slow.size() == original.slow_dim() && x0_slow.size() == reduced.slow_dim(),
            "track: slow dimension mismatch");
    require(y0_fast.size() == original.fast_dim(), "track: fast dimension mismatch");
    const int n_slow = original.slow_dim();
    const int n_fast = original.fast_dim();

    RngStream slow_stream = RngStream::substream(shared_seed, 0);
    RngStream fast_stream = RngStream::substream(shared_seed, 1);

    TrackResult result;
    result.reduced_path.resize(n_steps + 1, n_slow);
    result.original_path.resize(n_steps + 1, n_slow);
    result.per_step_error = VectorXd::Zero(n_steps + 1);
    result.reduced_path.row(0) = x0_slow.transpose();
    result.original_path.row(0) = x0_slow.transpose();

    VectorXd z_orig(n_slow + n_fast);
    z_orig << x0_slow, y0_fast;
    VectorXd x_red = x0_slow;
    const double h = dt / substeps;
    const double agg = 1.0 / std::sqrt(static_cast<double>(substeps));

    for (long k = 0; k < n_steps; ++k) {
        VectorXd slow_sum = VectorXd::Zero(n_slow);
        VectorXd noise(n_slow + n_fast);
        for (int s = 0; s < substeps; ++s) {
            for (int c = 0; c < n_slow; ++c) {
                noise[c] = slow_stream.next_normal();
                slow_sum[c] += noise[c];
            }
            for (int c = 0; c < n_fast; ++c) noise[n_slow + c] = fast_stream.next_normal();
            z_orig = euler_maruyama_step(original, z_orig, h, noise, k);
        }
        // same slow Brownian increment, one coarse step
        VectorXd red_noise = slow_sum * agg;
        x_red = euler_maruyama_step(reduced.as_system(), x_red, dt, red_noise, k);

        result.original_path.row(k + 1) = z_orig.head(n_slow).transpose();
        result.reduced_path.row(k + 1) = x_red.transpose();
        result.per_step_error[k + 1] = (x_red - z_orig.head(n_slow)).norm();
    }
    result.rmse = std::sqrt(result.per_step_error.squaredNorm() / static_cast<double>(n_steps + 1));
    return result;
}

/// One row of a noise-intensity sweep: per-coordinate sample std of the
/// reduced and original slow states at a fixed time index, plus histograms
/// on shared edges.
struct SweepRow {
    VectorXd sigma_slow;
    VectorXd std_reduced;
    VectorXd std_original;
    std::vector<Histogram> hist_reduced, hist_original;
};

inline SweepRow sweep_row(const ReducedSystem& reduced, const SlowFastSystem& original, const VectorXd& x0_slow,
                          const VectorXd& y0_fast, double dt, long time_index, long n_samples, std::uint64_t seed,
                          int substeps = 1) {
    require(time_index >= 1, "sweep: time_index must be >= 1");
    VectorXd z0(original.dim());
    z0 << x0_slow, y0_fast;
    const Ensemble red = simulate_ensemble(reduced.as_system(), InitSampler::fixed(x0_slow), n_samples, dt,
                                           time_index, seed);
    const Ensemble orig = simulate_ensemble(original, InitSampler::fixed(z0), n_samples, dt, time_index,
                                            seed + 1, substeps);
    const Snapshot red_snap = snapshot_at(red, time_index);
    const Snapshot orig_snap = snapshot_at(orig, time_index);

    SweepRow row;
    row.sigma_slow = reduced.sigma_slow();
    row.std_reduced = detail::column_std(red_snap.points);
    VectorXd std_full = detail::column_std(orig_snap.points);
    row.std_original = std_full.head(original.slow_dim());
    for (int c = 0; c < original.slow_dim(); ++c) {
        std::vector<double> pooled = detail::to_vector(red_snap.points.col(c));
        const std::vector<double> ov = detail::to_vector(orig_snap.points.col(c));
        pooled.insert(pooled.end(), ov.begin(), ov.end());
        const VectorXd edges = freedman_diaconis_edges(std::move(pooled));
        row.hist_reduced.push_back(make_histogram(red_snap.points.col(c), edges));
        row.hist_original.push_back(make_histogram(orig_snap.points.col(c), edges));
    }
    return row;
}

}  // namespace autosde
