#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "autosde/common.hpp"
#include "autosde/rng.hpp"

namespace autosde {

using DriftFn = std::function<VectorXd(const VectorXd& slow, const VectorXd& fast)>;

/// Slow-fast SDE
///   dx = f(x,y) dt + sigma_slow dW1
///   dy = (1/eps) g(x,y) dt + (sigma_fast/sqrt(eps)) dW2
/// with additive diagonal noise. drift_fast supplies g WITHOUT the 1/eps
/// factor; the integrator applies the scale separation. fast_dim = 0 is the
/// slow-only path used by reduced systems (epsilon then plays no role).
class SlowFastSystem {
public:
    SlowFastSystem(int slow_dim, int fast_dim, double epsilon, DriftFn drift_slow, DriftFn drift_fast,
                   VectorXd sigma_slow, VectorXd sigma_fast)
        : slow_dim_(slow_dim),
          fast_dim_(fast_dim),
          epsilon_(epsilon),
          drift_slow_(std::move(drift_slow)),
          drift_fast_(std::move(drift_fast)),
          sigma_slow_(std::move(sigma_slow)),
          sigma_fast_(std::move(sigma_fast)) {
        require(slow_dim_ >= 1, "system: slow_dim must be >= 1");
        require(fast_dim_ >= 0, "system: fast_dim must be >= 0");
        require(epsilon_ > 0.0, "system: epsilon must be positive");
        require(sigma_slow_.size() == slow_dim_, "system: sigma_slow length must equal slow_dim");
        require(sigma_fast_.size() == fast_dim_, "system: sigma_fast length must equal fast_dim");
        require(sigma_slow_.minCoeff() >= 0.0, "system: sigma_slow entries must be >= 0");
        require(fast_dim_ == 0 || sigma_fast_.minCoeff() >= 0.0, "system: sigma_fast entries must be >= 0");
        // probe evaluation at the origin catches mis-sized drift functions early
        const VectorXd x0 = VectorXd::Zero(slow_dim_);
        const VectorXd y0 = VectorXd::Zero(fast_dim_);
        require(drift_slow_(x0, y0).size() == slow_dim_, "system: drift_slow output dimension mismatch");
        if (fast_dim_ > 0)
            require(drift_fast_(x0, y0).size() == fast_dim_, "system: drift_fast output dimension mismatch");
    }

    int slow_dim() const { return slow_dim_; }
    int fast_dim() const { return fast_dim_; }
    int dim() const { return slow_dim_ + fast_dim_; }
    double epsilon() const { return epsilon_; }
    const VectorXd& sigma_slow() const { return sigma_slow_; }
    const VectorXd& sigma_fast() const { return sigma_fast_; }

    VectorXd f(const VectorXd& x, const VectorXd& y) const { return drift_slow_(x, y); }
    VectorXd g(const VectorXd& x, const VectorXd& y) const { return drift_fast_(x, y); }

    /// Full-state drift including the 1/eps factor on the fast block.
    VectorXd drift(const Eigen::Ref<const VectorXd>& z) const {
        const VectorXd x = z.head(slow_dim_);
        const VectorXd y = z.tail(fast_dim_);
        VectorXd out(dim());
        out.head(slow_dim_) = drift_slow_(x, y);
        if (fast_dim_ > 0) out.tail(fast_dim_) = drift_fast_(x, y) / epsilon_;
        return out;
    }

    /// Per-coordinate noise amplitude including the 1/sqrt(eps) factor.
    VectorXd noise_scale() const {
        VectorXd s(dim());
        s.head(slow_dim_) = sigma_slow_;
        if (fast_dim_ > 0) s.tail(fast_dim_) = sigma_fast_ / std::sqrt(epsilon_);
        return s;
    }

private:
    int slow_dim_;
    int fast_dim_;
    double epsilon_;
    DriftFn drift_slow_;
    DriftFn drift_fast_;
    VectorXd sigma_slow_;
    VectorXd sigma_fast_;
};

/// Uniform-grid sample path. Row k of states is the state at t0 + k*dt.
struct Trajectory {
    double t0 = 0.0;
    double dt = 0.0;
    MatrixXd states;  // (n_steps+1) x N

    long n_steps() const { return states.rows() - 1; }
    int dim() const { return static_cast<int>(states.cols()); }
};

/// Shape-identical trajectories from a common (seed, settings) draw.
struct Ensemble {
    std::vector<Trajectory> trajectories;
    std::uint64_t seed = 0;

    long size() const { return static_cast<long>(trajectories.size()); }
    long n_steps() const { return trajectories.empty() ? 0 : trajectories.front().n_steps(); }
    double dt() const { return trajectories.empty() ? 0.0 : trajectories.front().dt; }
    int dim() const { return trajectories.empty() ? 0 : trajectories.front().dim(); }
};

/// Cross-section of an ensemble at one time index.
struct Snapshot {
    long time_index = 0;
    MatrixXd points;  // n_samples x N
};

/// Product of per-coordinate uniform ranges; lo == hi pins the coordinate.
struct InitSampler {
    std::vector<std::pair<double, double>> ranges;

    static InitSampler fixed(const VectorXd& z0) {
        InitSampler s;
        for (Eigen::Index i = 0; i < z0.size(); ++i) s.ranges.emplace_back(z0[i], z0[i]);
        return s;
    }

    VectorXd sample(RngStream& stream) const {
        VectorXd z(static_cast<Eigen::Index>(ranges.size()));
        for (std::size_t i = 0; i < ranges.size(); ++i) {
            const auto [lo, hi] = ranges[i];
            z[static_cast<Eigen::Index>(i)] = lo == hi ? lo : stream.next_uniform(lo, hi);
        }
        return z;
    }
};

/// One explicit Euler-Maruyama step:
///   x' = x + f dt + sigma_slow .* sqrt(dt) noise_x
///   y' = y + (1/eps) g dt + (sigma_fast/sqrt(eps)) .* sqrt(dt) noise_y
inline VectorXd euler_maruyama_step(const SlowFastSystem& system, const Eigen::Ref<const VectorXd>& z, double dt,
                                    const Eigen::Ref<const VectorXd>& noise, long step_index = 0) {
    require(dt > 0.0, "euler_maruyama_step: dt must be positive");
    require(z.size() == system.dim(), "euler_maruyama_step: state dimension mismatch");
    require(noise.size() == system.dim(), "euler_maruyama_step: noise dimension mismatch");
    require(all_finite(z), "euler_maruyama_step: state must be finite");

    const VectorXd drift = system.drift(z);
    if (!all_finite(drift))
        throw blowup_error("euler_maruyama_step: non-finite drift evaluation", step_index, z);
    VectorXd next = z + drift * dt + (system.noise_scale().array() * noise.array()).matrix() * std::sqrt(dt);
    if (!all_finite(next) || next.cwiseAbs().maxCoeff() > kBlowupLimit)
        throw blowup_error("euler_maruyama_step: state exceeded blow-up guard", step_index, next);
    return next;
}

/// Simulates n_steps recorded steps from z0. `substeps` internal EM steps of
/// size dt/substeps are taken per recorded step; substeps = 1 is the plain
/// scheme, larger values keep stiff fast blocks (dt >> eps) stable while the
/// recorded path remains a statistically exact EM path at the fine step.
inline Trajectory simulate_trajectory(const SlowFastSystem& system, const VectorXd& z0, double dt, long n_steps,
                                      RngStream& stream, int substeps = 1, double t0 = 0.0) {
    require(n_steps >= 1, "simulate_trajectory: n_steps must be >= 1");
    require(substeps >= 1, "simulate_trajectory: substeps must be >= 1");
    require(z0.size() == system.dim(), "simulate_trajectory: z0 dimension mismatch");

    Trajectory traj;
    traj.t0 = t0;
    traj.dt = dt;
    traj.states.resize(n_steps + 1, system.dim());
    traj.states.row(0) = z0.transpose();

    const double h = dt / substeps;
    VectorXd z = z0;
    VectorXd noise(system.dim());
    for (long k = 0; k < n_steps; ++k) {
        for (int s = 0; s < substeps; ++s) {
            for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = stream.next_normal();
            z = euler_maruyama_step(system, z, h, noise, k);
        }
        traj.states.row(k + 1) = z.transpose();
    }
    return traj;
}

/// Ensemble of independent trajectories; trajectory i is driven by the
/// sub-stream (seed, i), so the result is reproducible and order-independent.
inline Ensemble simulate_ensemble(const SlowFastSystem& system, const InitSampler& init, long n_traj, double dt,
                                  long n_steps, std::uint64_t seed, int substeps = 1) {
    require(n_traj >= 1, "simulate_ensemble: n_traj must be >= 1");
    require(static_cast<int>(init.ranges.size()) == system.dim(), "simulate_ensemble: init sampler dimension mismatch");

    Ensemble ens;
    ens.seed = seed;
    ens.trajectories.reserve(static_cast<std::size_t>(n_traj));
    for (long i = 0; i < n_traj; ++i) {
        RngStream stream = RngStream::substream(seed, static_cast<std::uint64_t>(i));
        const VectorXd z0 = init.sample(stream);
        try {
            ens.trajectories.push_back(simulate_trajectory(system, z0, dt, n_steps, stream, substeps));
        } catch (const blowup_error& e) {
            throw blowup_error(std::string(e.what()) + " (trajectory " + std::to_string(i) + ")", e.step_index,
                               e.state, i);
        }
    }
    return ens;
}

/// Keeps every stride-th recorded row; dt scales by stride.
inline Ensemble coarse_grain(const Ensemble& ensemble, long stride) {
    require(stride >= 1, "coarse_grain: stride must be >= 1");
    require(!ensemble.trajectories.empty(), "coarse_grain: empty ensemble");
    const long n_steps = ensemble.n_steps();
    require(n_steps % stride == 0,
            "coarse_grain: stride " + std::to_string(stride) + " does not divide n_steps " + std::to_string(n_steps));
    if (stride == 1) return ensemble;

    Ensemble out;
    out.seed = ensemble.seed;
    out.trajectories.reserve(ensemble.trajectories.size());
    for (const Trajectory& traj : ensemble.trajectories) {
        Trajectory c;
        c.t0 = traj.t0;
        c.dt = traj.dt * stride;
        const long rows = n_steps / stride + 1;
        c.states.resize(rows, traj.states.cols());
        for (long r = 0; r < rows; ++r) c.states.row(r) = traj.states.row(r * stride);
        out.trajectories.push_back(std::move(c));
    }
    return out;
}

/// Trajectory states at one time index, trajectory order preserved.
inline Snapshot snapshot_at(const Ensemble& ensemble, long time_index) {
    require(!ensemble.trajectories.empty(), "snapshot_at: empty ensemble");
    require(time_index >= 0 && time_index <= ensemble.n_steps(), "snapshot_at: time index out of range");
    Snapshot snap;
    snap.time_index = time_index;
    snap.points.resize(ensemble.size(), ensemble.dim());
    for (long i = 0; i < ensemble.size(); ++i)
        snap.points.row(i) = ensemble.trajectories[static_cast<std::size_t>(i)].states.row(time_index);
    return snap;
}

}  // namespace autosde
