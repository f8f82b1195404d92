#pragma once

#include <memory>
#include <variant>
#include <vector>

#include "autosde/kramers_moyal.hpp"
#include "autosde/sde.hpp"

namespace autosde {

/// Polynomial graph y = h(x) fitted over the slow variables: one coefficient
/// column per fast coordinate over a monomial dictionary in the slow block.
struct ManifoldFit {
    std::vector<int> slow_dims;
    std::vector<int> fast_dims;
    std::shared_ptr<BasisDictionary> dict;  // over the slow variables only
    MatrixXd coeffs;                        // n_terms x n_fast
    double residual_rms = 0.0;

    VectorXd evaluate(const Eigen::Ref<const VectorXd>& x_slow) const {
        return coeffs.transpose() * dict->evaluate(x_slow);
    }
};

/// Least-squares regression of each fast coordinate onto the slow-variable
/// dictionary, with the same small-coefficient zeroing sweep used for SDE
/// identification (threshold 0.01 by default so that small genuine constants
/// survive).
inline ManifoldFit fit_manifold(const Snapshot& snapshot, const std::vector<int>& slow_dims, int degree,
                                double threshold = 0.01, int max_sweeps = 10) {
    const int dim = static_cast<int>(snapshot.points.cols());
    require(!slow_dims.empty(), "fit_manifold: slow_dims must be nonempty");
    for (int d : slow_dims) require(d >= 0 && d < dim, "fit_manifold: slow dim out of range");

    ManifoldFit fit;
    fit.slow_dims = slow_dims;
    for (int d = 0; d < dim; ++d)
        if (std::find(slow_dims.begin(), slow_dims.end(), d) == slow_dims.end()) fit.fast_dims.push_back(d);
    require(!fit.fast_dims.empty(), "fit_manifold: no fast coordinates to fit");
    fit.dict = std::make_shared<BasisDictionary>(static_cast<int>(slow_dims.size()), degree, BasisKind::monomial);
    require(snapshot.points.rows() >= fit.dict->n_terms(), "fit_manifold: need at least as many points as terms");

    MatrixXd slow(snapshot.points.rows(), slow_dims.size());
    for (std::size_t j = 0; j < slow_dims.size(); ++j)
        slow.col(static_cast<Eigen::Index>(j)) = snapshot.points.col(slow_dims[j]);
    const MatrixXd features = fit.dict->evaluate_rows(slow);

    fit.coeffs.resize(fit.dict->n_terms(), static_cast<Eigen::Index>(fit.fast_dims.size()));
    double sq_sum = 0.0;
    for (std::size_t j = 0; j < fit.fast_dims.size(); ++j) {
        const VectorXd target = snapshot.points.col(fit.fast_dims[j]);
        fit.coeffs.col(static_cast<Eigen::Index>(j)) =
            detail::thresholded_least_squares(features, target, *fit.dict, threshold, max_sweeps);
        sq_sum += (target - features * fit.coeffs.col(static_cast<Eigen::Index>(j))).squaredNorm();
    }
    fit.residual_rms = std::sqrt(sq_sum / (static_cast<double>(snapshot.points.rows()) * fit.fast_dims.size()));
    return fit;
}

/// Slow-variable SDE restricted to the fitted manifold:
///   dx = f(x, h(x)) dt + sigma_slow dW.
/// The drift source is either the known slow drift or the identified one.
class ReducedSystem {
public:
    ReducedSystem(DriftFn slow_drift_on_manifold, VectorXd sigma_slow, int slow_dim)
        : system_(slow_dim, 0, 1.0, std::move(slow_drift_on_manifold),
                  [](const VectorXd&, const VectorXd&) { return VectorXd(0); }, std::move(sigma_slow), VectorXd(0)) {}

    int slow_dim() const { return system_.slow_dim(); }
    const VectorXd& sigma_slow() const { return system_.sigma_slow(); }
    VectorXd drift(const VectorXd& x) const { return system_.f(x, VectorXd(0)); }

    /// Slow-only system usable with the sde-core integrator path.
    const SlowFastSystem& as_system() const { return system_; }

private:
    SlowFastSystem system_;
};

/// Composition with the known slow drift f(x, h(x)).
inline ReducedSystem build_reduced(const SlowFastSystem& source, const ManifoldFit& manifold, VectorXd sigma_slow) {
    require(static_cast<int>(manifold.fast_dims.size()) == source.fast_dim(),
            "build_reduced: manifold must cover every fast coordinate");
    require(static_cast<int>(manifold.slow_dims.size()) == source.slow_dim(),
            "build_reduced: manifold slow block mismatch");
    auto drift = [source, manifold](const VectorXd& x, const VectorXd&) { return source.f(x, manifold.evaluate(x)); };
    return ReducedSystem(drift, std::move(sigma_slow), source.slow_dim());
}

/// Composition with the identified slow drift evaluated at (x, h(x)).
inline ReducedSystem build_reduced(const EstimatedSde& esde, const ManifoldFit& manifold, VectorXd sigma_slow) {
    const int n_slow = static_cast<int>(manifold.slow_dims.size());
    const int n_fast = static_cast<int>(manifold.fast_dims.size());
    require(esde.dict->dim() == n_slow + n_fast, "build_reduced: esde dictionary must span the full state");
    require(static_cast<int>(esde.identified_dims.size()) == n_slow, "build_reduced: esde must cover the slow block");
    auto drift = [esde, manifold, n_slow, n_fast](const VectorXd& x, const VectorXd&) {
        VectorXd z(n_slow + n_fast);
        z.head(n_slow) = x;
        z.tail(n_fast) = manifold.evaluate(x);
        return esde.drift_at(z);
    };
    return ReducedSystem(drift, std::move(sigma_slow), n_slow);
}

inline Trajectory simulate_reduced(const ReducedSystem& reduced, const VectorXd& x0, double dt, long n_steps,
                                   RngStream& stream) {
    return simulate_trajectory(reduced.as_system(), x0, dt, n_steps, stream);
}

/// Top-d left singular vectors of a D x m snapshot matrix plus all singular
/// values. The projection is optimal in the Frobenius sense: the squared
/// reconstruction error equals the sum of the discarded squared singular
/// values.
inline std::pair<MatrixXd, VectorXd> pod_basis(const Eigen::Ref<const MatrixXd>& snapshots, int d) {
    require(d >= 1 && d <= std::min(snapshots.rows(), snapshots.cols()), "pod_basis: d out of range");
    Eigen::BDCSVD<MatrixXd> svd(snapshots, Eigen::ComputeThinU);
    return {svd.matrixU().leftCols(d), svd.singularValues()};
}

}  // namespace autosde
