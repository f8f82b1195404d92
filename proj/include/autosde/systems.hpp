#pragma once

#include <memory>
#include <string>

#include "autosde/basis.hpp"
#include "autosde/sde.hpp"

namespace autosde {

/// Drift bundle whose components are polynomials over the full state, given
/// as a coefficient matrix (n_terms x n_outputs) over a monomial dictionary.
/// Both benchmark systems and inline config-specified systems use this form.
struct PolynomialDrift {
    std::shared_ptr<BasisDictionary> dict;  // over the full state z = (x, y)
    MatrixXd coeffs;                        // n_terms x n_outputs

    VectorXd operator()(const VectorXd& z) const { return coeffs.transpose() * dict->evaluate(z); }
};

/// Builds a SlowFastSystem from polynomial slow/fast drifts over z = (x,y).
inline SlowFastSystem make_polynomial_system(int slow_dim, int fast_dim, double epsilon,
                                             const PolynomialDrift& drift_slow, const PolynomialDrift& drift_fast,
                                             VectorXd sigma_slow, VectorXd sigma_fast) {
    require(drift_slow.dict->dim() == slow_dim + fast_dim, "polynomial system: slow drift dictionary dim mismatch");
    require(drift_slow.coeffs.cols() == slow_dim, "polynomial system: slow drift output count mismatch");
    if (fast_dim > 0) {
        require(drift_fast.dict->dim() == slow_dim + fast_dim,
                "polynomial system: fast drift dictionary dim mismatch");
        require(drift_fast.coeffs.cols() == fast_dim, "polynomial system: fast drift output count mismatch");
    }
    auto f = [drift_slow](const VectorXd& x, const VectorXd& y) {
        VectorXd z(x.size() + y.size());
        z << x, y;
        return drift_slow(z);
    };
    auto g = [drift_fast, fast_dim](const VectorXd& x, const VectorXd& y) {
        if (fast_dim == 0) return VectorXd(0);
        VectorXd z(x.size() + y.size());
        z << x, y;
        return drift_fast(z);
    };
    return SlowFastSystem(slow_dim, fast_dim, epsilon, f, g, std::move(sigma_slow), std::move(sigma_fast));
}

namespace detail {

inline int term_index(const BasisDictionary& dict, const std::vector<int>& alpha) {
    const auto& terms = dict.terms();
    for (int t = 0; t < dict.n_terms(); ++t)
        if (terms[static_cast<std::size_t>(t)] == alpha) return t;
    throw std::invalid_argument("term_index: multi-index not in dictionary");
}

}  // namespace detail

/// Benchmark system
///   dx = (x - x y) dt + sigma1 dW1
///   dy = -(1/eps)(y - x^2/4) dt + (sigma2/sqrt(eps)) dW2
/// with sigma1 = 1, sigma2 = 0.1, eps = 0.01 unless overridden.
inline SlowFastSystem make_example1(double sigma1 = 1.0, double sigma2 = 0.1, double epsilon = 0.01) {
    auto dict = std::make_shared<BasisDictionary>(2, 2, BasisKind::monomial);
    PolynomialDrift slow{dict, MatrixXd::Zero(dict->n_terms(), 1)};
    slow.coeffs(detail::term_index(*dict, {1, 0}), 0) = 1.0;   // x
    slow.coeffs(detail::term_index(*dict, {1, 1}), 0) = -1.0;  // -xy
    PolynomialDrift fast{dict, MatrixXd::Zero(dict->n_terms(), 1)};
    fast.coeffs(detail::term_index(*dict, {0, 1}), 0) = -1.0;   // -y
    fast.coeffs(detail::term_index(*dict, {2, 0}), 0) = 0.25;   // +x^2/4
    VectorXd s1(1), s2(1);
    s1 << sigma1;
    s2 << sigma2;
    return make_polynomial_system(1, 1, epsilon, slow, fast, s1, s2);
}

/// Benchmark system
///   dx1 = (x1 + y - x1 x2 / 2) dt + sigma1 dW1
///   dx2 = (x2 + y^2 - x1^2) dt + sigma2 dW2
///   dy  = -(1/eps)(y + x1 x2 / 8) dt + (sigma3/sqrt(eps)) dW3
/// with sigma1 = 1, sigma2 = 2, sigma3 = 0.1, eps = 0.001 unless overridden.
inline SlowFastSystem make_example2(double sigma1 = 1.0, double sigma2 = 2.0, double sigma3 = 0.1,
                                    double epsilon = 0.001) {
    auto dict = std::make_shared<BasisDictionary>(3, 2, BasisKind::monomial);
    PolynomialDrift slow{dict, MatrixXd::Zero(dict->n_terms(), 2)};
    slow.coeffs(detail::term_index(*dict, {1, 0, 0}), 0) = 1.0;   // x1
    slow.coeffs(detail::term_index(*dict, {0, 0, 1}), 0) = 1.0;   // y
    slow.coeffs(detail::term_index(*dict, {1, 1, 0}), 0) = -0.5;  // -x1 x2 / 2
    slow.coeffs(detail::term_index(*dict, {0, 1, 0}), 1) = 1.0;   // x2
    slow.coeffs(detail::term_index(*dict, {0, 0, 2}), 1) = 1.0;   // y^2
    slow.coeffs(detail::term_index(*dict, {2, 0, 0}), 1) = -1.0;  // -x1^2
    PolynomialDrift fast{dict, MatrixXd::Zero(dict->n_terms(), 1)};
    fast.coeffs(detail::term_index(*dict, {0, 0, 1}), 0) = -1.0;    // -y
    fast.coeffs(detail::term_index(*dict, {1, 1, 0}), 0) = -0.125;  // -x1 x2 / 8
    VectorXd s_slow(2), s_fast(1);
    s_slow << sigma1, sigma2;
    s_fast << sigma3;
    return make_polynomial_system(2, 1, epsilon, slow, fast, s_slow, s_fast);
}

}  // namespace autosde
