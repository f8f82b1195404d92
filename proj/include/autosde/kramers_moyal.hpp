#pragma once

#include <memory>
#include <vector>

#include "autosde/basis.hpp"
#include "autosde/sde.hpp"

namespace autosde {

/// Regression targets from the Kramers-Moyal difference quotients, pooled
/// over all consecutive pairs of all trajectories:
///   drift  target row = (Z_{t+dt} - Z_t) / dt
///   diff   target row = (Z_{t+dt} - Z_t)^2 / dt   (per coordinate)
/// restricted to the identified coordinates; features are the dictionary
/// evaluated at the pair's left endpoint (full state).
struct KmTargets {
    MatrixXd features;       // n_pairs x n_terms
    MatrixXd drift_targets;  // n_pairs x n_identified
    MatrixXd diff_targets;   // n_pairs x n_identified
    double dt = 0.0;
};

/// Identified SDE for the selected coordinates: drift theta1' Theta(z) and
/// squared diffusion theta2' Theta(z), with sigma = sqrt(max(theta2' Theta, 0)).
struct EstimatedSde {
    std::shared_ptr<BasisDictionary> dict;
    MatrixXd theta_drift;            // n_terms x n_identified
    MatrixXd theta_diff2;            // n_terms x n_identified
    std::vector<int> identified_dims;
    double threshold = 0.0;

    struct Diagnostics {
        double loss_drift = 0.0;
        double loss_diffusion = 0.0;
        long n_pairs = 0;
    } diagnostics;

    VectorXd drift_at(const Eigen::Ref<const VectorXd>& z) const {
        return theta_drift.transpose() * dict->evaluate(z);
    }

    VectorXd sigma_at(const Eigen::Ref<const VectorXd>& z) const {
        return (theta_diff2.transpose() * dict->evaluate(z)).cwiseMax(0.0).cwiseSqrt();
    }
};

inline KmTargets build_km_targets(const Ensemble& ensemble, const std::shared_ptr<BasisDictionary>& dict,
                                  const std::vector<int>& identified_dims) {
    require(!ensemble.trajectories.empty(), "build_km_targets: empty ensemble");
    require(ensemble.n_steps() >= 1, "build_km_targets: ensemble needs at least 2 time rows");
    require(dict->dim() == ensemble.dim(), "build_km_targets: dictionary dim must equal the state dim");
    for (int d : identified_dims)
        require(d >= 0 && d < ensemble.dim(), "build_km_targets: identified dim out of range");

    const long pairs_per_traj = ensemble.n_steps();
    const long n_pairs = pairs_per_traj * ensemble.size();
    const int n_id = static_cast<int>(identified_dims.size());

    KmTargets targets;
    targets.dt = ensemble.dt();
    targets.features.resize(n_pairs, dict->n_terms());
    targets.drift_targets.resize(n_pairs, n_id);
    targets.diff_targets.resize(n_pairs, n_id);

    long row = 0;
    for (const Trajectory& traj : ensemble.trajectories) {
        for (long k = 0; k < pairs_per_traj; ++k, ++row) {
            targets.features.row(row) = dict->evaluate(traj.states.row(k).transpose()).transpose();
            for (int j = 0; j < n_id; ++j) {
                const int d = identified_dims[static_cast<std::size_t>(j)];
                const double dz = traj.states(k + 1, d) - traj.states(k, d);
                targets.drift_targets(row, j) = dz / traj.dt;
                targets.diff_targets(row, j) = dz * dz / traj.dt;
            }
        }
    }
    require(all_finite(targets.features) && all_finite(targets.drift_targets) && all_finite(targets.diff_targets),
            "build_km_targets: non-finite targets");
    return targets;
}

namespace detail {

/// Least squares with iterated hard thresholding: coefficients below the
/// threshold are zeroed and the fit repeated on the surviving terms until the
/// support is stable (or max_sweeps is hit). Zeroed entries are exact zeros.
inline VectorXd thresholded_least_squares(const MatrixXd& features, const VectorXd& target,
                                          const BasisDictionary& dict, double threshold, int max_sweeps) {
    const int n_terms = static_cast<int>(features.cols());
    std::vector<int> active(static_cast<std::size_t>(n_terms));
    for (int t = 0; t < n_terms; ++t) active[static_cast<std::size_t>(t)] = t;

    VectorXd coeffs = VectorXd::Zero(n_terms);
    for (int sweep = 0; sweep <= max_sweeps; ++sweep) {
        MatrixXd sub(features.rows(), static_cast<Eigen::Index>(active.size()));
        for (std::size_t j = 0; j < active.size(); ++j)
            sub.col(static_cast<Eigen::Index>(j)) = features.col(active[j]);

        Eigen::ColPivHouseholderQR<MatrixXd> qr(sub);
        if (qr.rank() < sub.cols()) {
            std::string names;
            for (int t : active) names += (names.empty() ? "" : ", ") + dict.term_label(t);
            throw singular_fit_error("fit: rank-deficient feature matrix on surviving terms {" + names + "}");
        }
        const VectorXd sol = qr.solve(target);

        coeffs.setZero();
        std::vector<int> surviving;
        for (std::size_t j = 0; j < active.size(); ++j)
            if (std::abs(sol[static_cast<Eigen::Index>(j)]) >= threshold) {
                coeffs[active[j]] = sol[static_cast<Eigen::Index>(j)];
                surviving.push_back(active[j]);
            }
        if (surviving.empty() || surviving == active) {
            if (surviving.empty()) coeffs.setZero();
            break;
        }
        active = std::move(surviving);
    }
    return coeffs;
}

}  // namespace detail

/// Fits drift and squared diffusion coefficients by sparsity-thresholded
/// least squares on the Kramers-Moyal targets.
inline EstimatedSde fit_sde(const KmTargets& targets, const std::shared_ptr<BasisDictionary>& dict,
                            const std::vector<int>& identified_dims, double threshold, int max_sweeps = 10) {
    require(threshold >= 0.0, "fit_sde: threshold must be >= 0");
    require(max_sweeps >= 1, "fit_sde: max_sweeps must be >= 1");
    require(targets.features.rows() > targets.features.cols(), "fit_sde: need more pairs than basis terms");

    const int n_id = static_cast<int>(targets.drift_targets.cols());
    EstimatedSde esde;
    esde.dict = dict;
    esde.identified_dims = identified_dims;
    esde.threshold = threshold;
    esde.theta_drift.resize(dict->n_terms(), n_id);
    esde.theta_diff2.resize(dict->n_terms(), n_id);
    for (int j = 0; j < n_id; ++j) {
        esde.theta_drift.col(j) =
            detail::thresholded_least_squares(targets.features, targets.drift_targets.col(j), *dict, threshold,
                                              max_sweeps);
        esde.theta_diff2.col(j) =
            detail::thresholded_least_squares(targets.features, targets.diff_targets.col(j), *dict, threshold,
                                              max_sweeps);
    }

    const long n_pairs = targets.features.rows();
    esde.diagnostics.n_pairs = n_pairs;
    esde.diagnostics.loss_drift =
        (targets.drift_targets - targets.features * esde.theta_drift).squaredNorm() / (n_pairs * n_id);
    esde.diagnostics.loss_diffusion =
        (targets.diff_targets - targets.features * esde.theta_diff2).squaredNorm() / (n_pairs * n_id);
    return esde;
}

/// Drift and noise amplitude of the identified equations at a full-state point.
inline std::pair<VectorXd, VectorXd> eval_estimated(const EstimatedSde& esde, const Eigen::Ref<const VectorXd>& z) {
    require(z.size() == esde.dict->dim(), "eval_estimated: state dimension mismatch");
    return {esde.drift_at(z), esde.sigma_at(z)};
}

}  // namespace autosde
