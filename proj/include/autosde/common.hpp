#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace autosde {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Any state entry beyond this magnitude is treated as a numerical blow-up.
inline constexpr double kBlowupLimit = 1e12;

/// Thrown when a simulated state leaves the finite range (stiff dynamics,
/// oversized time step, or a drift evaluation returning non-finite values).
class blowup_error : public std::runtime_error {
public:
    blowup_error(std::string what, long step_index, VectorXd state, long trajectory_index = -1)
        : std::runtime_error(std::move(what)),
          step_index(step_index),
          trajectory_index(trajectory_index),
          state(std::move(state)) {}

    long step_index;
    long trajectory_index;  // -1 when not simulating an ensemble
    VectorXd state;
};

/// Thrown when a least-squares fit becomes rank deficient on the surviving terms.
class singular_fit_error : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown on malformed artifacts or configs (bad schema, unknown keys, ...).
class format_error : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Eigen::Ref<const MatrixXd>& m) {
    return m.allFinite();
}

inline void require(bool cond, const std::string& message) {
    if (!cond) throw std::invalid_argument(message);
}

}  // namespace autosde
