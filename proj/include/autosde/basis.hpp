#pragma once

#include <string>
#include <vector>

#include "autosde/common.hpp"

namespace autosde {

enum class BasisKind { monomial, hermite };

inline std::string to_string(BasisKind k) {
    return k == BasisKind::monomial ? "monomial" : "hermite";
}

inline BasisKind basis_kind_from_string(const std::string& s) {
    if (s == "monomial") return BasisKind::monomial;
    if (s == "hermite") return BasisKind::hermite;
    throw format_error("unknown basis kind '" + s + "' (expected monomial|hermite)");
}

/// Multivariate polynomial dictionary: all multi-indices of total degree <= d
/// in graded order, ties broken lexicographically with the leading variable
/// dominant. For dim=2, degree=2 this yields [1, x, y, x^2, xy, y^2].
class BasisDictionary {
public:
    BasisDictionary(int dim, int degree, BasisKind kind)
        : dim_(dim), degree_(degree), kind_(kind) {
        require(dim >= 1, "basis: dim must be >= 1");
        require(degree >= 0, "basis: degree must be >= 0");
        std::vector<int> alpha(static_cast<std::size_t>(dim), 0);
        for (int total = 0; total <= degree; ++total) emit_terms(alpha, 0, total);
    }

    int dim() const { return dim_; }
    int degree() const { return degree_; }
    BasisKind kind() const { return kind_; }
    int n_terms() const { return static_cast<int>(terms_.size()); }
    const std::vector<std::vector<int>>& terms() const { return terms_; }

    /// Value of every term at a point, in dictionary order.
    VectorXd evaluate(const Eigen::Ref<const VectorXd>& point) const {
        require(point.size() == dim_, "basis: point dimension mismatch");
        VectorXd out(n_terms());
        for (int t = 0; t < n_terms(); ++t) {
            double v = 1.0;
            for (int i = 0; i < dim_; ++i) v *= univariate(terms_[t][static_cast<std::size_t>(i)], point[i]);
            out[t] = v;
        }
        return out;
    }

    /// Rows = points, columns = terms.
    MatrixXd evaluate_rows(const Eigen::Ref<const MatrixXd>& points) const {
        MatrixXd out(points.rows(), n_terms());
        for (Eigen::Index r = 0; r < points.rows(); ++r) out.row(r) = evaluate(points.row(r).transpose()).transpose();
        return out;
    }

    /// Human-readable term label, e.g. "1", "x1", "x1*x2^2". Variable names
    /// may be overridden (the reporting CSV uses x, y or x1, x2, y).
    std::string term_label(int t, const std::vector<std::string>& names = {}) const {
        const auto& alpha = terms_[static_cast<std::size_t>(t)];
        std::string s;
        for (int i = 0; i < dim_; ++i) {
            if (alpha[static_cast<std::size_t>(i)] == 0) continue;
            if (!s.empty()) s += "*";
            s += i < static_cast<int>(names.size()) ? names[static_cast<std::size_t>(i)] : "z" + std::to_string(i + 1);
            if (alpha[static_cast<std::size_t>(i)] > 1) s += "^" + std::to_string(alpha[static_cast<std::size_t>(i)]);
        }
        return s.empty() ? "1" : s;
    }

    /// Index of the constant term (always 0 by construction).
    static constexpr int constant_index() { return 0; }

private:
    void emit_terms(std::vector<int>& alpha, int pos, int remaining) {
        if (pos == dim_ - 1) {
            alpha[static_cast<std::size_t>(pos)] = remaining;
            terms_.push_back(alpha);
            return;
        }
        for (int k = remaining; k >= 0; --k) {
            alpha[static_cast<std::size_t>(pos)] = k;
            emit_terms(alpha, pos + 1, remaining - k);
        }
    }

    double univariate(int n, double x) const {
        if (kind_ == BasisKind::monomial) {
            double v = 1.0;
            for (int k = 0; k < n; ++k) v *= x;
            return v;
        }
        // probabilists' Hermite: He_{n+1} = x He_n - n He_{n-1}
        double hm1 = 0.0, h = 1.0;
        for (int k = 0; k < n; ++k) {
            const double next = x * h - k * hm1;
            hm1 = h;
            h = next;
        }
        return h;
    }

    int dim_;
    int degree_;
    BasisKind kind_;
    std::vector<std::vector<int>> terms_;
};

namespace detail {

/// Triangular coefficient tables between the monomial and probabilists'
/// Hermite bases, one row per polynomial order.
/// hermite_in_monomial[n][k] = coefficient of x^k in He_n(x);
/// monomial_in_hermite[n][k] = coefficient of He_k(x) in x^n.
inline std::vector<std::vector<double>> hermite_in_monomial(int degree) {
    std::vector<std::vector<double>> h(static_cast<std::size_t>(degree) + 1,
                                       std::vector<double>(static_cast<std::size_t>(degree) + 1, 0.0));
    h[0][0] = 1.0;
    if (degree >= 1) h[1][1] = 1.0;
    for (int n = 1; n < degree; ++n)
        for (int k = 0; k <= degree; ++k) {
            double v = k > 0 ? h[static_cast<std::size_t>(n)][static_cast<std::size_t>(k) - 1] : 0.0;
            v -= n * h[static_cast<std::size_t>(n) - 1][static_cast<std::size_t>(k)];
            h[static_cast<std::size_t>(n) + 1][static_cast<std::size_t>(k)] = v;
        }
    return h;
}

inline std::vector<std::vector<double>> monomial_in_hermite(int degree) {
    std::vector<std::vector<double>> m(static_cast<std::size_t>(degree) + 1,
                                       std::vector<double>(static_cast<std::size_t>(degree) + 1, 0.0));
    m[0][0] = 1.0;
    if (degree >= 1) m[1][1] = 1.0;
    // x * He_k = He_{k+1} + k He_{k-1}
    for (int n = 1; n < degree; ++n)
        for (int k = 0; k <= degree; ++k) {
            double v = k > 0 ? m[static_cast<std::size_t>(n)][static_cast<std::size_t>(k) - 1] : 0.0;
            if (k + 1 <= degree) v += (k + 1) * m[static_cast<std::size_t>(n)][static_cast<std::size_t>(k) + 1];
            m[static_cast<std::size_t>(n) + 1][static_cast<std::size_t>(k)] = v;
        }
    return m;
}

}  // namespace detail

/// Re-expresses a polynomial given by `coeffs` over `from` in the basis of
/// `to`. The two dictionaries must share dim and degree; the result evaluates
/// identically (up to roundoff) at every point.
inline VectorXd convert_coefficients(const BasisDictionary& from, const BasisDictionary& to,
                                     const Eigen::Ref<const VectorXd>& coeffs) {
    require(from.dim() == to.dim() && from.degree() == to.degree(),
            "convert_coefficients: dictionaries must share dim and degree");
    require(coeffs.size() == from.n_terms(), "convert_coefficients: coefficient length mismatch");
    if (from.kind() == to.kind()) return coeffs;

    const auto table = from.kind() == BasisKind::hermite ? detail::hermite_in_monomial(from.degree())
                                                         : detail::monomial_in_hermite(from.degree());
    // Map each source term through the univariate tables; products of
    // univariate expansions give the target multi-index weights.
    const auto& src_terms = from.terms();
    const auto& dst_terms = to.terms();
    VectorXd out = VectorXd::Zero(to.n_terms());
    for (int s = 0; s < from.n_terms(); ++s) {
        if (coeffs[s] == 0.0) continue;
        for (int d = 0; d < to.n_terms(); ++d) {
            double w = 1.0;
            for (int i = 0; i < from.dim(); ++i) {
                const int a = src_terms[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)];
                const int b = dst_terms[static_cast<std::size_t>(d)][static_cast<std::size_t>(i)];
                w *= table[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
                if (w == 0.0) break;
            }
            out[d] += w * coeffs[s];
        }
    }
    return out;
}

}  // namespace autosde
