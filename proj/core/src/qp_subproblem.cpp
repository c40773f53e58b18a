#include "emtp2/qp_subproblem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace emtp2 {
namespace {

constexpr double kUnboundedObjective = -1e30;
constexpr double kOverRelaxation = 1.6;
constexpr int kCheckEvery = 25;
constexpr int kMaxActiveSetPasses = 50;

using Mask = std::vector<bool>;

double gradient_scale(const LowerBoundedQP& p, const Eigen::VectorXd& y) {
    const double grad = (2.0 * (p.quad.matrix() * y)).cwiseAbs().maxCoeff();
    const double lin = 2.0 * p.lin.cwiseAbs().maxCoeff();
    return std::max({grad, lin, std::numeric_limits<double>::min()});
}

bool acceptable(const LowerBoundedQP& p, const Eigen::VectorXd& y, const KktResiduals& r, double tol) {
    const double g = gradient_scale(p, y);
    double ymax = 0.0;
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        ymax = std::max(ymax, std::abs(y(j)));
        if (std::isfinite(p.lower(j))) {
            ymax = std::max(ymax, std::abs(p.lower(j)));
        }
    }
    return r.stationarity <= tol * g && r.primal == 0.0 &&
           r.complementarity <= tol * g * std::max(ymax, 1.0);
}

QpSolution make_solution(const LowerBoundedQP& p, Eigen::VectorXd y, int iterations) {
    y = y.cwiseMax(p.lower);
    QpSolution s;
    s.objective = qp_objective(p, y);
    s.kkt = qp_kkt_residuals(p, y);
    s.y = std::move(y);
    s.iterations = iterations;
    return s;
}

/// Primal-dual active-set iteration starting from `active`. Solves
/// M_FF y_F = c_F - M_FA l_A on the free set and swaps indices that violate
/// primal or dual feasibility. Returns nullopt if the reduced system is not
/// positive definite or the iteration cycles.
std::optional<Eigen::VectorXd> active_set_polish(const LowerBoundedQP& p, Mask active, double tol) {
    const Eigen::Index n = p.lin.size();
    const auto& m = p.quad.matrix();
    for (int pass = 0; pass < kMaxActiveSetPasses; ++pass) {
        std::vector<Eigen::Index> free_idx;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (active[static_cast<std::size_t>(j)] && !std::isfinite(p.lower(j))) {
                active[static_cast<std::size_t>(j)] = false;
            }
            if (!active[static_cast<std::size_t>(j)]) {
                free_idx.push_back(j);
            }
        }
        Eigen::VectorXd y(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            y(j) = active[static_cast<std::size_t>(j)] ? p.lower(j) : 0.0;
        }
        const auto nf = static_cast<Eigen::Index>(free_idx.size());
        if (nf > 0) {
            Eigen::MatrixXd mff(nf, nf);
            Eigen::VectorXd rhs(nf);
            for (Eigen::Index a = 0; a < nf; ++a) {
                const Eigen::Index i = free_idx[static_cast<std::size_t>(a)];
                rhs(a) = p.lin(i);
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (active[static_cast<std::size_t>(j)]) {
                        rhs(a) -= m(i, j) * p.lower(j);
                    }
                }
                for (Eigen::Index b = 0; b < nf; ++b) {
                    mff(a, b) = m(i, free_idx[static_cast<std::size_t>(b)]);
                }
            }
            const Eigen::LDLT<Eigen::MatrixXd> ldlt(mff);
            const Eigen::VectorXd piv = ldlt.vectorD();
            const double big = std::max(piv.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
            if (ldlt.info() != Eigen::Success || piv.minCoeff() <= 1e-13 * big) {
                return std::nullopt;
            }
            const Eigen::VectorXd yf = ldlt.solve(rhs);
            for (Eigen::Index a = 0; a < nf; ++a) {
                y(free_idx[static_cast<std::size_t>(a)]) = yf(a);
            }
        }
        const Eigen::VectorXd grad = 2.0 * (m * y - p.lin);
        const double gscale = gradient_scale(p, y);
        bool changed = false;
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto sj = static_cast<std::size_t>(j);
            if (!active[sj] && y(j) < p.lower(j)) {
                active[sj] = true;
                changed = true;
            } else if (active[sj] && grad(j) < -tol * gscale) {
                active[sj] = false;
                changed = true;
            }
        }
        if (!changed) {
            return y;
        }
    }
    return std::nullopt;
}

Mask guess_active(const LowerBoundedQP& p, const Eigen::VectorXd& y) {
    Mask active(static_cast<std::size_t>(y.size()), false);
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        const double l = p.lower(j);
        active[static_cast<std::size_t>(j)] =
            std::isfinite(l) && y(j) <= l + 1e-12 * std::max(1.0, std::abs(l));
    }
    return active;
}

std::optional<SymEigen> validate(const LowerBoundedQP& p, const QpOptions& options) {
    const Eigen::Index n = static_cast<Eigen::Index>(p.quad.dim());
    if (p.lin.size() != n || p.lower.size() != n) {
        throw InvalidInput("QP dimension mismatch: quad " + std::to_string(n) + ", lin " +
                           std::to_string(p.lin.size()) + ", lower " + std::to_string(p.lower.size()));
    }
    if (!p.lin.allFinite()) {
        throw InvalidInput("QP linear term must be finite");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        if (std::isnan(p.lower(j)) || p.lower(j) == std::numeric_limits<double>::infinity()) {
            throw InvalidInput("QP lower bounds must be finite or -infinity");
        }
    }
    if (!(options.tol > 0.0)) {
        throw InvalidInput("QP tolerance must be positive");
    }
    if (options.warm_start && options.warm_start->size() != n) {
        throw InvalidInput("QP warm start has wrong dimension");
    }
    if (!options.check_psd) {
        return std::nullopt;
    }
    SymEigen eig = sym_eig(p.quad);
    const double radius = eig.values.cwiseAbs().maxCoeff();
    if (eig.values.minCoeff() < -1e-8 * radius) {
        throw InvalidInput("QP quadratic form is not positive semidefinite");
    }
    return eig;
}

/// Projects c onto ker M. A feasible projection with c^T d > 0 is a ray along
/// which the objective decreases without bound; exact when dim ker M = 1.
bool kernel_ray(const LowerBoundedQP& p, const SymEigen& eig) {
    const double radius = eig.values.cwiseAbs().maxCoeff();
    const double cutoff = kDefaultRankTol * std::max(radius, std::numeric_limits<double>::min());
    Eigen::VectorXd d = Eigen::VectorXd::Zero(p.lin.size());
    for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
        if (std::abs(eig.values(k)) <= cutoff) {
            d += eig.vectors.col(k).dot(p.lin) * eig.vectors.col(k);
        }
    }
    const double dn = d.cwiseAbs().maxCoeff();
    if (!(p.lin.dot(d) > 1e-12 * p.lin.squaredNorm()) || dn == 0.0) {
        return false;
    }
    for (Eigen::Index j = 0; j < d.size(); ++j) {
        if (std::isfinite(p.lower(j)) && d(j) < -1e-12 * dn) {
            return false;
        }
    }
    return true;
}

}  // namespace

QpNotConverged::QpNotConverged(QpSolution best)
    : ConvergenceError("QP iteration limit reached (stationarity " + std::to_string(best.kkt.stationarity) +
                       ", complementarity " + std::to_string(best.kkt.complementarity) + ")"),
      best_(std::move(best)) {}

double qp_objective(const LowerBoundedQP& p, const Eigen::VectorXd& y) {
    return y.dot(p.quad.matrix() * y) - 2.0 * p.lin.dot(y);
}

KktResiduals qp_kkt_residuals(const LowerBoundedQP& p, const Eigen::VectorXd& y) {
    const Eigen::VectorXd grad = 2.0 * (p.quad.matrix() * y - p.lin);
    KktResiduals r;
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        const double lambda = std::isfinite(p.lower(j)) ? std::max(grad(j), 0.0) : 0.0;
        r.stationarity = std::max(r.stationarity, std::abs(grad(j) - lambda));
        r.primal = std::max(r.primal, p.lower(j) - y(j));
        if (std::isfinite(p.lower(j))) {
            r.complementarity = std::max(r.complementarity, std::abs(lambda * (y(j) - p.lower(j))));
        }
    }
    return r;
}

QpSolution solve_lb_qp(const LowerBoundedQP& p, double tol, int max_iter) {
    QpOptions options;
    options.tol = tol;
    options.max_iter = max_iter;
    return solve_lb_qp(p, options);
}

QpSolution solve_lb_qp(const LowerBoundedQP& p, const QpOptions& options) {
    const std::optional<SymEigen> eig = validate(p, options);
    if (eig && kernel_ray(p, *eig)) {
        throw NumericError("subproblem unbounded");
    }
    const Eigen::Index n = p.lin.size();
    const Eigen::MatrixXd hess = 2.0 * p.quad.matrix();
    const Eigen::VectorXd q = -2.0 * p.lin;

    Eigen::VectorXd x0 = options.warm_start ? *options.warm_start : Eigen::VectorXd::Zero(n);
    x0 = x0.cwiseMax(p.lower);

    QpSolution best = make_solution(p, x0, 0);
    bool have_best_ok = false;
    auto consider = [&](const Eigen::VectorXd& y, int iter) -> bool {
        QpSolution cand = make_solution(p, y, iter);
        const bool ok = acceptable(p, cand.y, cand.kkt, options.tol);
        const bool better = ok ? (!have_best_ok || cand.objective < best.objective)
                               : (!have_best_ok && cand.kkt.stationarity < best.kkt.stationarity);
        if (better) {
            best = std::move(cand);
            have_best_ok = have_best_ok || ok;
        }
        return ok;
    };

    if (consider(x0, 0)) {
        return best;
    }
    if (auto y = active_set_polish(p, guess_active(p, x0), options.tol)) {
        if (consider(*y, 0)) {
            return best;
        }
    }

    // Over-relaxed ADMM on  min 1/2 x^T H x + q^T x,  x = z,  z >= lower.
    const double row_sum = hess.cwiseAbs().rowwise().sum().maxCoeff();
    const double radius = row_sum > 0.0 ? row_sum : 1.0;
    const double shift = 1e-9 * radius;
    double rho = std::max(hess.diagonal().mean(), 1e-6 * radius);
    if (!(rho > 0.0)) {
        rho = 1.0;
    }
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    Eigen::LLT<Eigen::MatrixXd> llt(hess + (shift + rho) * eye);

    Eigen::VectorXd x = x0;
    Eigen::VectorXd z = x0;
    Eigen::VectorXd dual = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd x_prev_check = x;

    for (int iter = 1; iter <= options.max_iter; ++iter) {
        if (llt.info() != Eigen::Success) {
            throw NumericError("QP linear system is not positive definite");
        }
        const Eigen::VectorXd xt = llt.solve(shift * x - q + rho * z - dual);
        const Eigen::VectorXd xr = kOverRelaxation * xt + (1.0 - kOverRelaxation) * z;
        x = kOverRelaxation * xt + (1.0 - kOverRelaxation) * x;
        const Eigen::VectorXd z_new = (xr + dual / rho).cwiseMax(p.lower);
        dual += rho * (xr - z_new);
        z = z_new;

        if (iter % kCheckEvery != 0 && iter != options.max_iter) {
            continue;
        }

        if (qp_objective(p, z) < kUnboundedObjective) {
            throw NumericError("subproblem unbounded");
        }
        // Certificate of a recession direction: H dx ~ 0, q^T dx < 0, dx feasible.
        const Eigen::VectorXd dx = x - x_prev_check;
        x_prev_check = x;
        const double dx_norm = dx.cwiseAbs().maxCoeff();
        if (dx_norm > 0.0) {
            const double q_norm = std::max(q.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
            bool feasible_dir = true;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (std::isfinite(p.lower(j)) && dx(j) < -1e-6 * dx_norm) {
                    feasible_dir = false;
                }
            }
            if (feasible_dir && (hess * dx).cwiseAbs().maxCoeff() <= 1e-9 * radius * dx_norm &&
                q.dot(dx) < -1e-6 * q_norm * dx_norm && dx_norm > 1e3 * (1.0 + x0.cwiseAbs().maxCoeff())) {
                throw NumericError("subproblem unbounded");
            }
        }

        if (consider(z, iter)) {
            return best;
        }
        Mask active(static_cast<std::size_t>(n), false);
        for (Eigen::Index j = 0; j < n; ++j) {
            active[static_cast<std::size_t>(j)] =
                std::isfinite(p.lower(j)) && rho * (z(j) - p.lower(j)) < -dual(j);
        }
        if (auto y = active_set_polish(p, active, options.tol)) {
            if (consider(*y, iter)) {
                return best;
            }
        }

        // Residual balancing of the penalty.
        const double r_prim = (x - z).cwiseAbs().maxCoeff() /
                              std::max({x.cwiseAbs().maxCoeff(), z.cwiseAbs().maxCoeff(), 1e-300});
        const double r_dual = (hess * x + q + dual).cwiseAbs().maxCoeff() /
                              std::max({(hess * x).cwiseAbs().maxCoeff(), q.cwiseAbs().maxCoeff(),
                                        dual.cwiseAbs().maxCoeff(), 1e-300});
        if (r_prim > 0.0 && r_dual > 0.0) {
            const double factor = std::sqrt(r_prim / r_dual);
            if (factor > 5.0 || factor < 0.2) {
                rho = std::clamp(rho * factor, 1e-8 * radius, 1e8 * radius);
                llt.compute(hess + (shift + rho) * eye);
            }
        }
    }
    if (have_best_ok) {
        return best;
    }
    best.iterations = options.max_iter;
    throw QpNotConverged(best);
}

}  // namespace emtp2
