#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

#include "autosde/kramers_moyal.hpp"
#include "autosde/neural.hpp"
#include "autosde/sde.hpp"

namespace autosde {

/// One window per trajectory; generation counts how many times the model has
/// been applied recursively, so window row j of generation k carries the
/// nominal step index j + k*(l-1) of the original time grid.
struct WindowDataset {
    std::vector<MatrixXd> windows;  // each m x D
    double dt = 0.0;
    long generation = 0;

    long size() const { return static_cast<long>(windows.size()); }
    long m() const { return windows.empty() ? 0 : windows.front().rows(); }
    int dim() const { return windows.empty() ? 0 : static_cast<int>(windows.front().cols()); }
};

/// Per-coordinate affine standardization of window data. The model trains
/// and predicts in normalized space; snapshots and extension physics stay in
/// original units.
struct Normalization {
    VectorXd mean;
    VectorXd scale;

    static Normalization identity(int dim) {
        return {VectorXd::Zero(dim), VectorXd::Ones(dim)};
    }

    static Normalization fit(const std::vector<MatrixXd>& windows) {
        require(!windows.empty(), "normalization: empty dataset");
        const Eigen::Index dim = windows.front().cols();
        VectorXd mean = VectorXd::Zero(dim), sq = VectorXd::Zero(dim);
        long rows = 0;
        for (const MatrixXd& w : windows) {
            mean += w.colwise().sum().transpose();
            sq += w.array().square().colwise().sum().matrix().transpose();
            rows += w.rows();
        }
        mean /= static_cast<double>(rows);
        VectorXd var = sq / static_cast<double>(rows) - mean.cwiseProduct(mean);
        VectorXd scale = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(1e-12);
        return {std::move(mean), std::move(scale)};
    }

    MatrixXd apply(const MatrixXd& w) const {
        return (w.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
    }

    MatrixXd invert(const MatrixXd& w) const {
        return (w.array().rowwise() * scale.transpose().array()).matrix().rowwise() + mean.transpose();
    }
};

struct TrainConfig {
    int l = 2;                       // prediction shift, 1 < l <= m
    int epochs = 30;                 // per generation
    int epochs_initial = -1;         // first generation override; -1 means epochs
    int batch_size = 128;
    long max_generations = 30;
    double tau_dist = 0.05;
    double lr = 1e-3;
    std::uint64_t seed = 0;          // parameter init and batch shuffling
    long train_subset = 0;           // 0 = keep all windows; else run on this many (deterministic draw)
    long distance_subsample = 5000;  // 0 = exact energy distance
    int extension_substeps = 0;      // 0 = auto from dt/epsilon
    long convergence_lag = 1;        // compare against the snapshot this many generations back
    bool normalize = true;           // standardize coordinates for the network

    void validate(long m) const {
        require(l > 1 && l <= m, "train: require 1 < l <= m");
        require(epochs >= 0 && batch_size >= 1 && max_generations >= 1, "train: counts must be >= 1");
        require(tau_dist > 0.0, "train: tau_dist must be positive");
        require(lr > 0.0, "train: learning rate must be positive");
        require(convergence_lag >= 1, "train: convergence_lag must be >= 1");
    }
};

inline WindowDataset make_windows(const Ensemble& ensemble) {
    require(!ensemble.trajectories.empty(), "make_windows: empty ensemble");
    WindowDataset ds;
    ds.dt = ensemble.dt();
    ds.generation = 0;
    const long rows = ensemble.n_steps() + 1;
    for (const Trajectory& traj : ensemble.trajectories) {
        require(traj.states.rows() == rows, "make_windows: inconsistent trajectory lengths");
        ds.windows.push_back(traj.states);
    }
    return ds;
}

/// Drift-only Euler continuation of a window: slow coordinates advance with
/// the identified drift, fast coordinates with the known fast drift (1/eps)g.
/// Substeps keep the stiff fast block stable when dt >> eps; 0 picks the
/// smallest stable count automatically.
inline MatrixXd sde_extension(const EstimatedSde& esde, const SlowFastSystem& system, const MatrixXd& window, int l,
                              double dt, int substeps = 0) {
    const int n_slow = system.slow_dim();
    const int n_fast = system.fast_dim();
    require(window.cols() == n_slow + n_fast, "sde_extension: window dimension mismatch");
    require(l >= 2, "sde_extension: l must be >= 2");
    require(static_cast<int>(esde.identified_dims.size()) == n_slow, "sde_extension: esde must cover the slow block");
    if (substeps <= 0)
        substeps = n_fast > 0 ? std::max(1, static_cast<int>(std::ceil(4.0 * dt / system.epsilon()))) : 1;

    MatrixXd ext(l - 1, window.cols());
    VectorXd z = window.row(window.rows() - 1).transpose();
    const double h = dt / substeps;
    for (int r = 0; r < l - 1; ++r) {
        for (int s = 0; s < substeps; ++s) {
            const VectorXd slow_drift = esde.drift_at(z);
            VectorXd next = z;
            next.head(n_slow) += slow_drift * h;
            if (n_fast > 0)
                next.tail(n_fast) += system.g(z.head(n_slow), z.tail(n_fast)) * (h / system.epsilon());
            if (!all_finite(next) || next.cwiseAbs().maxCoeff() > kBlowupLimit)
                throw blowup_error("sde_extension: state exceeded blow-up guard", r, next);
            z = next;
        }
        ext.row(r) = z.transpose();
    }
    return ext;
}

/// One generation of minibatch ADAM on the windowed loss. Overlap targets are
/// the observed rows l-1..m-1 of each window; the SDE targets are recomputed
/// from the current windows once per generation. When a normalization is
/// given, the dataset is expected in normalized space and the extension step
/// runs in physical units. Returns the per-epoch mean training loss.
inline std::vector<double> train_generation(AutoSdeModel& model, const WindowDataset& dataset,
                                            const EstimatedSde& esde, const SlowFastSystem& system,
                                            const TrainConfig& cfg, int epochs, std::uint64_t shuffle_seed,
                                            const Normalization* norm = nullptr) {
    cfg.validate(dataset.m());
    require(dataset.size() >= 1, "train: empty dataset");
    const long m = dataset.m();
    const int l = cfg.l;

    // Targets are fixed for the whole generation. Windows whose drift-only
    // extension leaves the finite range carry no usable SDE target (the
    // underlying slow dynamics escapes in finite time there) and sit out this
    // generation's updates.
    std::vector<MatrixXd> overlaps, extensions;
    std::vector<long> pool;
    overlaps.reserve(static_cast<std::size_t>(dataset.size()));
    extensions.reserve(static_cast<std::size_t>(dataset.size()));
    for (long i = 0; i < dataset.size(); ++i) {
        const MatrixXd& w = dataset.windows[static_cast<std::size_t>(i)];
        overlaps.push_back(w.bottomRows(m - l + 1));
        try {
            const MatrixXd physical = norm ? norm->invert(w) : w;
            MatrixXd ext = sde_extension(esde, system, physical, l, dataset.dt, cfg.extension_substeps);
            extensions.push_back(norm ? norm->apply(ext) : std::move(ext));
            pool.push_back(i);
        } catch (const blowup_error&) {
            extensions.emplace_back();
        }
    }
    if (pool.empty())
        throw blowup_error("train: every window's SDE extension left the finite range", 0,
                           VectorXd::Zero(dataset.dim()));
    RngStream shuffle_stream(detail::mix64(shuffle_seed + 0x7a51eULL));
    auto shuffle = [&](std::vector<long>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[shuffle_stream.next_u64() % i]);
    };

    AdamState adam(model.n_params(), cfg.lr);
    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(epochs));
    for (int epoch = 0; epoch < epochs; ++epoch) {
        shuffle(pool);
        double epoch_loss = 0.0;
        long n_batches = 0;
        for (std::size_t start = 0; start < pool.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(pool.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<const MatrixXd*> wp, op, sp;
            for (std::size_t i = start; i < end; ++i) {
                const auto idx = static_cast<std::size_t>(pool[i]);
                wp.push_back(&dataset.windows[idx]);
                op.push_back(&overlaps[idx]);
                sp.push_back(&extensions[idx]);
            }
            BatchLossResult r = loss_and_grad_batch(model, wp, op, sp, l);
            adam_step(model.params(), r.grad, adam);
            epoch_loss += r.loss;
            ++n_batches;
        }
        trace.push_back(n_batches > 0 ? epoch_loss / n_batches : 0.0);
    }
    return trace;
}

/// Replaces every window by the model's m-row prediction (time shift l-1)
/// and increments the generation counter.
inline WindowDataset recursive_predict(const AutoSdeModel& model, const WindowDataset& dataset) {
    WindowDataset out;
    out.dt = dataset.dt;
    out.generation = dataset.generation + 1;
    out.windows.resize(dataset.windows.size());

    const long chunk = 1024;
    for (long start = 0; start < dataset.size(); start += chunk) {
        const long end = std::min(dataset.size(), start + chunk);
        std::vector<const MatrixXd*> batch;
        for (long i = start; i < end; ++i) batch.push_back(&dataset.windows[static_cast<std::size_t>(i)]);
        const ForwardTape tape = model.forward_batch(batch);
        for (long i = start; i < end; ++i) {
            MatrixXd w(dataset.m(), dataset.dim());
            for (long s = 0; s < dataset.m(); ++s)
                w.row(s) = tape.out[static_cast<std::size_t>(s)].row(i - start);
            out.windows[static_cast<std::size_t>(i)] = std::move(w);
        }
    }
    return out;
}

namespace detail {

/// Sum of |a_i - b_j| over all pairs of two sorted vectors in O(n+m).
inline double abs_diff_double_sum_sorted(const std::vector<double>& a, const std::vector<double>& b) {
    // For each b_j: sum_i |a_i - b_j| = b_j*k - prefix_a(k) + (suffix_a(k) - b_j*(n-k))
    const long n = static_cast<long>(a.size());
    std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 0.0);
    for (long i = 0; i < n; ++i) prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] + a[static_cast<std::size_t>(i)];
    const double total = prefix[static_cast<std::size_t>(n)];
    double sum = 0.0;
    long k = 0;
    for (const double bj : b) {
        while (k < n && a[static_cast<std::size_t>(k)] <= bj) ++k;
        sum += bj * k - prefix[static_cast<std::size_t>(k)] + (total - prefix[static_cast<std::size_t>(k)]) - bj * (n - k);
    }
    return sum;
}

}  // namespace detail

/// Energy distance 2 E|A-B| - E|A-A'| - E|B-B'| between two point clouds
/// (V-statistic over all ordered pairs). Nonnegative, symmetric, zero on
/// identical clouds. One-column clouds use a sort-based O(n log n) path;
/// higher dimensions the direct double sum.
inline double energy_distance(const Eigen::Ref<const MatrixXd>& a, const Eigen::Ref<const MatrixXd>& b) {
    require(a.rows() >= 1 && b.rows() >= 1, "energy_distance: empty point cloud");
    require(a.cols() == b.cols(), "energy_distance: column count mismatch");
    const long na = a.rows(), nb = b.rows();

    if (a.cols() == 1) {
        std::vector<double> sa(a.col(0).data(), a.col(0).data() + na);
        std::vector<double> sb(b.col(0).data(), b.col(0).data() + nb);
        std::sort(sa.begin(), sa.end());
        std::sort(sb.begin(), sb.end());
        const double ab = detail::abs_diff_double_sum_sorted(sa, sb) / (static_cast<double>(na) * nb);
        const double aa = detail::abs_diff_double_sum_sorted(sa, sa) / (static_cast<double>(na) * na);
        const double bb = detail::abs_diff_double_sum_sorted(sb, sb) / (static_cast<double>(nb) * nb);
        return 2.0 * ab - aa - bb;
    }

    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (long i = 0; i < na; ++i)
        for (long j = 0; j < nb; ++j) ab += (a.row(i) - b.row(j)).norm();
    for (long i = 0; i < na; ++i)
        for (long j = i + 1; j < na; ++j) aa += (a.row(i) - a.row(j)).norm();
    for (long i = 0; i < nb; ++i)
        for (long j = i + 1; j < nb; ++j) bb += (b.row(i) - b.row(j)).norm();
    return 2.0 * ab / (static_cast<double>(na) * nb) - 2.0 * aa / (static_cast<double>(na) * na) -
           2.0 * bb / (static_cast<double>(nb) * nb);
}

/// Energy distance between two snapshots; max_points > 0 caps the cost by a
/// deterministic stride subsample of each cloud (rows are i.i.d. trajectories,
/// so a stride subsample is an unbiased draw).
inline double ensemble_distance(const Snapshot& a, const Snapshot& b, long max_points = 0) {
    require(a.points.rows() >= 1 && b.points.rows() >= 1, "ensemble_distance: empty snapshot");
    require(a.points.cols() == b.points.cols(), "ensemble_distance: column count mismatch");
    auto subsample = [max_points](const MatrixXd& pts) {
        if (max_points <= 0 || pts.rows() <= max_points) return pts;
        const long stride = (pts.rows() + max_points - 1) / max_points;
        MatrixXd out((pts.rows() + stride - 1) / stride, pts.cols());
        for (long i = 0, r = 0; i < pts.rows(); i += stride, ++r) out.row(r) = pts.row(i);
        return out;
    };
    return energy_distance(subsample(a.points), subsample(b.points));
}

/// Cross-section of the dataset at one window row; time_index reports the
/// nominal step index on the original grid.
inline Snapshot dataset_snapshot(const WindowDataset& dataset, long row, int l) {
    require(row >= 0 && row < dataset.m(), "dataset_snapshot: row out of range");
    Snapshot snap;
    snap.time_index = row + dataset.generation * (l - 1);
    snap.points.resize(dataset.size(), dataset.dim());
    for (long i = 0; i < dataset.size(); ++i) snap.points.row(i) = dataset.windows[static_cast<std::size_t>(i)].row(row);
    return snap;
}

enum class ConvergenceStatus { converged, max_generations_reached };

struct Algorithm1Result {
    std::vector<Snapshot> snapshots;          // last-row snapshot per generation (0 = input data)
    std::vector<double> distances;            // distance to the snapshot convergence_lag generations back
    std::vector<std::vector<double>> losses;  // per-generation training traces
    ConvergenceStatus status = ConvergenceStatus::max_generations_reached;
    long generations_run = 0;
    WindowDataset final_dataset;
};

/// The recursive train-predict loop: train for one generation, feed the
/// model's predictions back as the next dataset, and stop once the last-row
/// snapshot distribution stops moving: energy distance to the snapshot
/// convergence_lag generations earlier below tau_dist. (A lag of one step is
/// nearly vacuous when l-1 steps move the cloud by a fraction of dt, so the
/// example recipes compare ten generations apart, NT 40 vs NT 30.)
inline Algorithm1Result run_algorithm1(AutoSdeModel& model, const Ensemble& ensemble, const EstimatedSde& esde,
                                       const SlowFastSystem& system, const TrainConfig& cfg) {
    WindowDataset dataset = make_windows(ensemble);
    cfg.validate(dataset.m());
    if (cfg.train_subset > 0 && cfg.train_subset < dataset.size()) {
        // deterministic stride draw; trajectories are i.i.d. so this is unbiased
        const long stride = (dataset.size() + cfg.train_subset - 1) / cfg.train_subset;
        WindowDataset sub;
        sub.dt = dataset.dt;
        sub.generation = dataset.generation;
        for (long i = 0; i < dataset.size(); i += stride)
            sub.windows.push_back(std::move(dataset.windows[static_cast<std::size_t>(i)]));
        dataset = std::move(sub);
    }

    const Normalization norm =
        cfg.normalize ? Normalization::fit(dataset.windows) : Normalization::identity(dataset.dim());
    for (MatrixXd& w : dataset.windows) w = norm.apply(w);
    auto physical_snapshot = [&](const WindowDataset& ds) {
        Snapshot snap = dataset_snapshot(ds, ds.m() - 1, cfg.l);
        snap.points = norm.invert(snap.points);
        return snap;
    };

    Algorithm1Result result;
    result.snapshots.push_back(physical_snapshot(dataset));

    for (long gen = 1; gen <= cfg.max_generations; ++gen) {
        const int epochs = (gen == 1 && cfg.epochs_initial >= 0) ? cfg.epochs_initial : cfg.epochs;
        result.losses.push_back(train_generation(model, dataset, esde, system, cfg, epochs,
                                                 cfg.seed + static_cast<std::uint64_t>(gen), &norm));
        dataset = recursive_predict(model, dataset);
        result.generations_run = gen;

        const Snapshot snap = physical_snapshot(dataset);
        result.snapshots.push_back(snap);
        if (gen >= cfg.convergence_lag) {
            const Snapshot& earlier = result.snapshots[static_cast<std::size_t>(gen - cfg.convergence_lag)];
            const double dist = ensemble_distance(snap, earlier, cfg.distance_subsample);
            result.distances.push_back(dist);
            if (dist < cfg.tau_dist) {
                result.status = ConvergenceStatus::converged;
                break;
            }
        }
    }
    for (MatrixXd& w : dataset.windows) w = norm.invert(w);
    result.final_dataset = std::move(dataset);
    return result;
}

}  // namespace autosde
