#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace emtp2 {

/// Relative cutoff (against the spectral radius) below which an eigenvalue
/// counts as zero.
inline constexpr double kDefaultRankTol = 1e-10;

/// Dense real symmetric matrix.
///
/// Construction symmetrizes the input as (M + M^T) / 2 and rejects NaN or
/// infinite entries, so every instance is finite and exactly symmetric.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(const Eigen::MatrixXd& m);

    static SymMatrix zero(std::size_t dim);
    static SymMatrix identity(std::size_t dim);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }
    double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
    const Eigen::MatrixXd& matrix() const noexcept { return m_; }

    /// Sets entries (i, j) and (j, i) together.
    void set(std::size_t i, std::size_t j, double value);

private:
    Eigen::MatrixXd m_;
};

struct SymEigen {
    Eigen::VectorXd values;   // descending
    Eigen::MatrixXd vectors;  // column j pairs with values(j)
};

SymEigen sym_eig(const SymMatrix& m);

/// Moore-Penrose pseudo-inverse through the eigendecomposition. Eigenvalues
/// with |lambda| <= rank_tol * max|lambda| are treated as zero.
SymMatrix pseudo_inverse(const SymMatrix& m, double rank_tol = kDefaultRankTol);

/// log det of a positive definite matrix via Cholesky. Throws NumericError
/// ("matrix not positive definite") when the factorization breaks down.
double logdet_pd(const SymMatrix& m);

/// True when a Cholesky factorization of m succeeds.
bool is_positive_definite(const Eigen::MatrixXd& m);

/// Number of eigenvalues with |lambda| > rank_tol * max|lambda|.
std::size_t numerical_rank(const SymEigen& eig, double rank_tol = kDefaultRankTol);

/// Inverse of a positive definite matrix through Cholesky; throws NumericError
/// on failure. Agrees with pseudo_inverse on PD inputs.
Eigen::MatrixXd inverse_pd(const Eigen::MatrixXd& m);

}  // namespace emtp2
