#pragma once

#include <optional>

#include <Eigen/Dense>

#include "emtp2/errors.hpp"
#include "emtp2/numeric_kernel.hpp"

namespace emtp2 {

/// minimize y^T M y - 2 c^T y  subject to  y >= lower.
///
/// M is positive semidefinite and may be singular (the row-update problems of
/// the estimator have the all-ones vector in its kernel). Entries of `lower`
/// may be -infinity.
struct LowerBoundedQP {
    SymMatrix quad;
    Eigen::VectorXd lin;
    Eigen::VectorXd lower;
};

struct KktResiduals {
    double stationarity = 0.0;     // |2My - 2c - lambda|_inf
    double primal = 0.0;           // max(lower - y, 0)
    double complementarity = 0.0;  // max |lambda_j (y_j - lower_j)|
};

struct QpSolution {
    Eigen::VectorXd y;
    double objective = 0.0;
    KktResiduals kkt;
    int iterations = 0;
};

struct QpOptions {
    double tol = 1e-10;
    int max_iter = 100000;
    std::optional<Eigen::VectorXd> warm_start;
    /// Verifies that M is PSD (one eigendecomposition). Callers that build M
    /// PSD by construction may switch it off.
    bool check_psd = true;
};

/// Raised when the iteration budget is exhausted; carries the best iterate.
class QpNotConverged : public ConvergenceError {
public:
    explicit QpNotConverged(QpSolution best);
    const QpSolution& best() const noexcept { return best_; }

private:
    QpSolution best_;
};

/// y^T M y - 2 c^T y.
double qp_objective(const LowerBoundedQP& p, const Eigen::VectorXd& y);

/// Residuals with multipliers lambda_j = max(0, (2My - 2c)_j).
KktResiduals qp_kkt_residuals(const LowerBoundedQP& p, const Eigen::VectorXd& y);

/// Operator splitting (ADMM with over-relaxation) on the bound-constrained QP,
/// followed by an active-set polish that solves the reduced equality-constrained
/// system exactly. Residuals are accepted relative to the gradient scale
/// max(|2c|_inf, |2My|_inf).
QpSolution solve_lb_qp(const LowerBoundedQP& p, const QpOptions& options);
QpSolution solve_lb_qp(const LowerBoundedQP& p, double tol, int max_iter);

}  // namespace emtp2
