#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "emtp2/numeric_kernel.hpp"

namespace emtp2 {

/// Symmetric, zero-diagonal matrix of pairwise variogram values, d >= 2.
///
/// Construction does not require strict conditional negative definiteness;
/// empirical variograms frequently violate it. Use check_variogram() or
/// is_strictly_cnd() to test validity.
class Variogram {
public:
    Variogram() = default;

    /// Rejects non-square input, d < 2, non-finite entries, nonzero diagonal and
    /// asymmetry beyond 1e-12 relative to the largest entry.
    explicit Variogram(const Eigen::MatrixXd& gamma);
    explicit Variogram(const SymMatrix& gamma);

    std::size_t dim() const noexcept { return gamma_.dim(); }
    double operator()(std::size_t i, std::size_t j) const { return gamma_(i, j); }
    const SymMatrix& sym() const noexcept { return gamma_; }
    const Eigen::MatrixXd& matrix() const noexcept { return gamma_.matrix(); }

private:
    SymMatrix gamma_;
};

/// Covariance of the extremal function rooted at `root` (zero-based). The
/// matrix is (d-1)x(d-1) with row/column `root` removed.
struct RootedCovariance {
    std::size_t root = 0;
    SymMatrix sigma;
};

/// Husler-Reiss precision matrix: rank d-1 with zero row sums. The negated
/// off-diagonal part is the edge-weight matrix Q.
class Precision {
public:
    Precision() = default;

    /// Requires |Theta 1| <= 1e-9 * max|Theta| componentwise.
    explicit Precision(const SymMatrix& theta);

    /// Laplacian of the weighted graph with zero-diagonal weight matrix q.
    static Precision from_weights(const SymMatrix& q);

    std::size_t dim() const noexcept { return theta_.dim(); }
    const SymMatrix& theta() const noexcept { return theta_; }

    /// Zero-diagonal matrix with q(i, j) = -theta(i, j) for i != j.
    SymMatrix q() const;

private:
    SymMatrix theta_;
};

struct Edge {
    std::size_t i = 0;  // zero-based, i < j
    std::size_t j = 0;
    double weight = 0.0;

    friend bool operator==(const Edge& a, const Edge& b) { return a.i == b.i && a.j == b.j; }
};

struct VariogramReport {
    bool strictly_cnd = false;
    bool positive_offdiag = false;
    bool is_metric = false;
};

/// Centering projector I - 11^T / d.
Eigen::MatrixXd centering_projector(std::size_t d);

RootedCovariance gamma_to_sigma_k(const Variogram& g, std::size_t k);
Variogram sigma_k_to_gamma(const RootedCovariance& s);

/// P (-Gamma / 2) P. Positive semidefinite of rank d-1 for valid variograms.
SymMatrix centered_covariance(const Variogram& g);

/// Strict conditional negative definiteness, tested through Cholesky of the
/// covariance rooted at the first coordinate.
bool is_strictly_cnd(const Variogram& g);

/// Theta = (P (-Gamma / 2) P)^+. Throws InvalidInput("not strictly conditionally
/// negative definite") for invalid g.
Precision gamma_to_theta(const Variogram& g);

/// Theta assembled from the inverse of the covariance rooted at k; row and
/// column k are filled in from the zero-row-sum property.
Precision gamma_to_theta_rooted(const Variogram& g, std::size_t k);

/// Gamma_ij = Sigma_ii + Sigma_jj - 2 Sigma_ij with Sigma = Theta^+. Throws
/// NumericError("precision rank defect") if rank(Theta) != d - 1.
Variogram theta_to_gamma(const Precision& t);

/// Product of the nonzero eigenvalues of Theta.
double pseudo_det(const Precision& t);

/// Sum over labeled spanning trees of the complete graph of the product of
/// edge weights, by Pruefer-sequence enumeration. Oracle for d <= 8.
double spanning_tree_sum(const SymMatrix& q);

/// log det [[0, -1^T], [1, -Gamma/2]], which equals log det Sigma^(k) for all k.
double cayley_menger_logdet(const Variogram& g);

/// Triangle inequalities are tested with slack kMetricSlack * max|Gamma| so
/// that additive (tree-like) triples survive rounding.
inline constexpr double kMetricSlack = 1e-10;

VariogramReport check_variogram(const Variogram& g);

/// Theta_ij <= zero_tol * s for all i != j and the graph {q_ij > zero_tol * s}
/// is connected, where s = max_{i != j} |theta_ij|.
bool is_emtp2(const Precision& t, double zero_tol = 1e-9);

/// Max-abs elementwise residual of Fiedler's bordered inverse identity
/// relating Gamma and Theta.
double fiedler_identity_residual(const Variogram& g);

/// Union-find connectivity of an edge list on d nodes.
bool is_connected(std::size_t d, const std::vector<Edge>& edges);

}  // namespace emtp2
