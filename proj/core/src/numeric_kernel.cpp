#include "emtp2/numeric_kernel.hpp"

#include <cmath>
#include <string>

#include "emtp2/errors.hpp"

namespace emtp2 {

ExistenceError::ExistenceError(std::size_t i, std::size_t j, double value)
    : InvalidInput("estimator does not exist: variogram entry (" + std::to_string(i + 1) + ", " +
                   std::to_string(j + 1) + ") = " + std::to_string(value) + " is not positive"),
      i_(i),
      j_(j),
      value_(value) {}

SymMatrix::SymMatrix(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) {
        throw InvalidInput("symmetric matrix must be square, got " + std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()));
    }
    if (m.rows() < 1) {
        throw InvalidInput("symmetric matrix must have dimension >= 1");
    }
    if (!m.allFinite()) {
        throw InvalidInput("symmetric matrix has non-finite entries");
    }
    m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::zero(std::size_t dim) {
    const auto n = static_cast<Eigen::Index>(dim);
    return SymMatrix(Eigen::MatrixXd::Zero(n, n));
}

SymMatrix SymMatrix::identity(std::size_t dim) {
    const auto n = static_cast<Eigen::Index>(dim);
    return SymMatrix(Eigen::MatrixXd::Identity(n, n));
}

void SymMatrix::set(std::size_t i, std::size_t j, double value) {
    if (!std::isfinite(value)) {
        throw InvalidInput("symmetric matrix entry must be finite");
    }
    m_(i, j) = value;
    m_(j, i) = value;
}

SymEigen sym_eig(const SymMatrix& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m.matrix());
    if (solver.info() != Eigen::Success) {
        throw NumericError("symmetric eigendecomposition did not converge within " +
                           std::to_string(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>::m_maxIterations) +
                           " QR iterations per eigenvalue (dim " + std::to_string(m.dim()) + ")");
    }
    // Eigen returns ascending order.
    SymEigen out;
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    return out;
}

std::size_t numerical_rank(const SymEigen& eig, double rank_tol) {
    const double radius = eig.values.cwiseAbs().maxCoeff();
    if (radius == 0.0) {
        return 0;
    }
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        if (std::abs(eig.values(i)) > rank_tol * radius) {
            ++rank;
        }
    }
    return rank;
}

SymMatrix pseudo_inverse(const SymMatrix& m, double rank_tol) {
    const SymEigen eig = sym_eig(m);
    const double radius = eig.values.cwiseAbs().maxCoeff();
    if (radius == 0.0) {
        throw NumericError("pseudo-inverse of a rank zero matrix");
    }
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(eig.values.size());
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        if (std::abs(eig.values(i)) > rank_tol * radius) {
            inv(i) = 1.0 / eig.values(i);
        }
    }
    return SymMatrix(eig.vectors * inv.asDiagonal() * eig.vectors.transpose());
}

double logdet_pd(const SymMatrix& m) {
    Eigen::LLT<Eigen::MatrixXd> llt(m.matrix());
    if (llt.info() != Eigen::Success) {
        throw NumericError("matrix not positive definite");
    }
    const auto& l = llt.matrixLLT();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
        const double pivot = l(i, i);
        if (!(pivot > 0.0)) {
            throw NumericError("matrix not positive definite");
        }
        sum += std::log(pivot);
    }
    return 2.0 * sum;
}

bool is_positive_definite(const Eigen::MatrixXd& m) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
        return false;
    }
    return (llt.matrixLLT().diagonal().array() > 0.0).all();
}

Eigen::MatrixXd inverse_pd(const Eigen::MatrixXd& m) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
        throw NumericError("matrix not positive definite");
    }
    return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

}  // namespace emtp2
