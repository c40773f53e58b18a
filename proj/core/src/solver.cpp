#include "emtp2/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include "emtp2/errors.hpp"
#include "emtp2/qp_subproblem.hpp"

namespace emtp2 {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_existence(const Variogram& gbar) {
    const std::size_t d = gbar.dim();
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            if (!(gbar(i, j) > 0.0)) {
                throw ExistenceError(i, j, gbar(i, j));
            }
        }
    }
}

std::vector<Eigen::Index> all_but(Eigen::Index d, Eigen::Index k) {
    std::vector<Eigen::Index> idx;
    idx.reserve(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) {
        if (i != k) {
            idx.push_back(i);
        }
    }
    return idx;
}

double max_offdiag(const Eigen::MatrixXd& m) {
    double out = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
            out = std::max(out, m(i, j));
        }
    }
    return out;
}

bool dually_feasible(const Variogram& g, const Variogram& gbar) {
    if (!is_strictly_cnd(g)) {
        return false;
    }
    return ((g.matrix() - gbar.matrix()).array() <= 0.0).all();
}

// In-place row update on a raw matrix. Returns the max-abs change of the row.
double update_row(Eigen::MatrixXd& g, const Eigen::MatrixXd& gbar, Eigen::Index i, const FitConfig& cfg) {
    const Eigen::Index d = g.rows();
    const auto idx = all_but(d, i);
    const Eigen::MatrixXd a_sub = -0.5 * g(idx, idx);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a_sub);
    if (!(lu.rcond() > 1e-14)) {
        throw NumericError("inner block singular while updating row " + std::to_string(i + 1));
    }
    Eigen::MatrixXd b = lu.inverse();
    b = 0.5 * (b + b.transpose()).eval();
    const Eigen::VectorXd c = b.rowwise().sum();
    const double total = c.sum();

    LowerBoundedQP qp;
    qp.quad = SymMatrix(c * c.transpose() - total * b);
    qp.lin = c;
    qp.lower = -0.5 * gbar(idx, i);

    const Eigen::VectorXd warm = -0.5 * g(idx, i);
    QpOptions options;
    options.tol = cfg.qp_tol;
    options.max_iter = cfg.qp_max_iter;
    options.warm_start = warm;
    options.check_psd = false;
    QpSolution sol = solve_lb_qp(qp, options);

    Eigen::VectorXd y = std::move(sol.y);
    // The warm start is feasible; never step to a worse point.
    if (qp_objective(qp, y) > qp_objective(qp, warm)) {
        y = warm;
    }
    double change = 0.0;
    for (std::size_t a = 0; a < idx.size(); ++a) {
        const Eigen::Index j = idx[a];
        const double v = -2.0 * y(static_cast<Eigen::Index>(a));
        change = std::max(change, std::abs(v - g(i, j)));
        g(i, j) = v;
        g(j, i) = v;
    }
    return change;
}

bool kkt_acceptable(const KktReport& k, const Precision& theta, const Variogram& gbar, double tol) {
    const double q_scale = std::max(max_offdiag(theta.q().matrix()), std::numeric_limits<double>::min());
    const double g_scale = max_offdiag(gbar.matrix());
    return k.min_q >= -tol * q_scale && k.max_gamma_violation <= tol * g_scale && k.max_comp_slack <= tol;
}

KktReport kkt_from(const Variogram& ghat, const Precision& theta, const Variogram& gbar) {
    const Eigen::MatrixXd q = theta.q().matrix();
    const Eigen::MatrixXd& gb = gbar.matrix();
    const Eigen::MatrixXd& gh = ghat.matrix();
    const auto d = q.rows();
    KktReport k;
    k.min_q = std::numeric_limits<double>::infinity();
    k.max_gamma_violation = -std::numeric_limits<double>::infinity();
    double pairing = 0.0;
    double pairing_plus = 0.0;
    Eigen::MatrixXd lap_plus = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) {
            const double slack = gb(i, j) - gh(i, j);
            k.min_q = std::min(k.min_q, q(i, j));
            k.max_gamma_violation = std::max(k.max_gamma_violation, -slack);
            k.max_comp_slack = std::max(k.max_comp_slack, std::abs(slack * q(i, j)));
            pairing += gb(i, j) * q(i, j);
            const double qp = std::max(q(i, j), 0.0);
            pairing_plus += gb(i, j) * qp;
            lap_plus(i, j) = lap_plus(j, i) = -qp;
            lap_plus(i, i) += qp;
            lap_plus(j, j) += qp;
        }
    }
    k.gap = pairing - static_cast<double>(d - 1);

    // f(Q+) = -log tau(Q+) + <<Gbar, Q+>>,  h(Gamma) = log det Sigma^(1) + d - 1.
    const Eigen::MatrixXd reduced = lap_plus.bottomRightCorner(d - 1, d - 1);
    Eigen::LLT<Eigen::MatrixXd> llt(reduced);
    if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
        k.certified_gap = std::numeric_limits<double>::infinity();
    } else {
        const double log_tau = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        const double dual = logdet_pd(gamma_to_sigma_k(ghat, 0).sigma) + static_cast<double>(d - 1);
        k.certified_gap = -log_tau + pairing_plus - dual;
    }
    return k;
}

struct GapEvaluation {
    Precision theta;
    KktReport kkt;
};

GapEvaluation evaluate(const Variogram& g, const Variogram& gbar) {
    Precision theta = gamma_to_theta(g);
    KktReport kkt = kkt_from(g, theta, gbar);
    return {std::move(theta), kkt};
}

}  // namespace

void FitConfig::validate() const {
    if (!(gap_tol > 0.0) || !(sweep_tol > 0.0) || !(zero_tol > 0.0) || !(qp_tol > 0.0)) {
        throw InvalidInput("fit tolerances must be positive");
    }
    if (max_sweeps <= 0 || qp_max_iter <= 0 || gap_check_every <= 0) {
        throw InvalidInput("fit iteration counts must be positive");
    }
}

bool existence_check(const Variogram& gbar) {
    const std::size_t d = gbar.dim();
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            if (!(gbar(i, j) > 0.0)) {
                return false;
            }
        }
    }
    return true;
}

Variogram ultrametric_start(const Variogram& gbar) {
    const Eigen::MatrixXd s = centered_covariance(gbar).matrix();
    const auto d = s.rows();
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!(s(i, i) > 0.0)) {
            throw InvalidInput("degenerate second-moment structure");
        }
        for (Eigen::Index j = i + 1; j < d; ++j) {
            if (!(s(i, j) < std::sqrt(s(i, i) * s(j, j)))) {
                throw InvalidInput("degenerate second-moment structure");
            }
        }
    }
    const Eigen::VectorXd sd = s.diagonal().cwiseSqrt();
    const Eigen::MatrixXd r = sd.cwiseInverse().asDiagonal() * s * sd.cwiseInverse().asDiagonal();

    // Maximum spanning tree (Prim) on the correlations.
    std::vector<Eigen::Index> parent(static_cast<std::size_t>(d), -1);
    std::vector<bool> in_tree(static_cast<std::size_t>(d), false);
    Eigen::VectorXd best = Eigen::VectorXd::Constant(d, -std::numeric_limits<double>::infinity());
    best(0) = 0.0;
    std::vector<std::vector<Eigen::Index>> adj(static_cast<std::size_t>(d));
    for (Eigen::Index step = 0; step < d; ++step) {
        Eigen::Index v = -1;
        for (Eigen::Index u = 0; u < d; ++u) {
            if (!in_tree[static_cast<std::size_t>(u)] && (v < 0 || best(u) > best(v))) {
                v = u;
            }
        }
        in_tree[static_cast<std::size_t>(v)] = true;
        const Eigen::Index pv = parent[static_cast<std::size_t>(v)];
        if (pv >= 0) {
            adj[static_cast<std::size_t>(v)].push_back(pv);
            adj[static_cast<std::size_t>(pv)].push_back(v);
        }
        for (Eigen::Index u = 0; u < d; ++u) {
            if (!in_tree[static_cast<std::size_t>(u)] && r(v, u) > best(u)) {
                best(u) = r(v, u);
                parent[static_cast<std::size_t>(u)] = v;
            }
        }
    }

    // Single-linkage ultrametric: bottleneck (max-min) value along tree paths.
    Eigen::MatrixXd u = Eigen::MatrixXd::Identity(d, d);
    std::vector<Eigen::Index> stack;
    std::vector<double> bottleneck(static_cast<std::size_t>(d));
    std::vector<bool> seen(static_cast<std::size_t>(d));
    for (Eigen::Index src = 0; src < d; ++src) {
        std::fill(seen.begin(), seen.end(), false);
        seen[static_cast<std::size_t>(src)] = true;
        bottleneck[static_cast<std::size_t>(src)] = std::numeric_limits<double>::infinity();
        stack.assign(1, src);
        while (!stack.empty()) {
            const Eigen::Index v = stack.back();
            stack.pop_back();
            for (Eigen::Index w : adj[static_cast<std::size_t>(v)]) {
                if (!seen[static_cast<std::size_t>(w)]) {
                    seen[static_cast<std::size_t>(w)] = true;
                    bottleneck[static_cast<std::size_t>(w)] =
                        std::min(bottleneck[static_cast<std::size_t>(v)], r(v, w));
                    u(src, w) = std::max(bottleneck[static_cast<std::size_t>(w)], 0.0);
                    stack.push_back(w);
                }
            }
        }
    }
    u = 0.5 * (u + u.transpose()).eval();
    const Eigen::MatrixXd z = sd.asDiagonal() * u * sd.asDiagonal();

    Eigen::MatrixXd g0 = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) {
            // min() absorbs rounding in Z_ij >= S_ij.
            g0(i, j) = g0(j, i) = std::min(z(i, i) + z(j, j) - 2.0 * z(i, j), gbar(i, j));
        }
    }
    Variogram start(g0);
    if (!is_positive_definite(z) || !dually_feasible(start, gbar)) {
        throw NumericError("ultrametric starting point is not dually feasible");
    }
    return start;
}

Variogram initial_point(const Variogram& gbar) {
    require_existence(gbar);
    if (is_strictly_cnd(gbar)) {
        return gbar;
    }
    try {
        return ultrametric_start(gbar);
    } catch (const Error&) {
        // fall through to the equilateral point
    }
    const auto d = static_cast<Eigen::Index>(gbar.dim());
    double smallest = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) {
            smallest = std::min(smallest, gbar(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
        }
    }
    Eigen::MatrixXd g0 = Eigen::MatrixXd::Constant(d, d, smallest);
    g0.diagonal().setZero();
    return Variogram(g0);
}

Variogram row_update(const Variogram& g, const Variogram& gbar, std::size_t i, const FitConfig& cfg) {
    if (g.dim() != gbar.dim()) {
        throw InvalidInput("variogram dimensions differ");
    }
    if (i >= g.dim()) {
        throw InvalidInput("row index out of range");
    }
    if (g.dim() < 3) {
        throw InvalidInput("row updates require d >= 3");
    }
    Eigen::MatrixXd m = g.matrix();
    update_row(m, gbar.matrix(), static_cast<Eigen::Index>(i), cfg);
    return Variogram(m);
}

double duality_gap(const Variogram& g, const Variogram& gbar) {
    if (g.dim() != gbar.dim()) {
        throw InvalidInput("variogram dimensions differ");
    }
    const Eigen::MatrixXd q = gamma_to_theta(g).q().matrix();
    // The diagonal of q is zero, so the full product counts each pair twice.
    return 0.5 * gbar.matrix().cwiseProduct(q).sum() - static_cast<double>(g.dim() - 1);
}

KktReport kkt_report(const Variogram& ghat, const Variogram& gbar) {
    if (ghat.dim() != gbar.dim()) {
        throw InvalidInput("variogram dimensions differ");
    }
    return kkt_from(ghat, gamma_to_theta(ghat), gbar);
}

std::vector<Edge> extract_graph(const Precision& t, double zero_tol) {
    const Eigen::MatrixXd q = t.q().matrix();
    const double scale = max_offdiag(q);
    std::vector<Edge> edges;
    if (!(scale > 0.0)) {
        return edges;
    }
    const auto d = static_cast<std::size_t>(q.rows());
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            const double w = q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (w > zero_tol * scale) {
                edges.push_back({i, j, w});
            }
        }
    }
    return edges;
}

FitResult fit(const Variogram& gbar, const FitConfig& cfg, const RowObserver& observer) {
    cfg.validate();
    const auto start = Clock::now();
    const Variogram g0 = initial_point(gbar);
    const std::size_t d = gbar.dim();

    FitResult result;
    Eigen::MatrixXd g = g0.matrix();
    const double tol = 10.0 * cfg.gap_tol;

    auto check = [&](int sweep) -> bool {
        const Variogram current(g);
        GapEvaluation ev = evaluate(current, gbar);
        result.gap_trace.push_back({sweep, ev.kkt.gap, ev.kkt.certified_gap, seconds_since(start)});
        const bool done = ev.kkt.gap <= cfg.gap_tol && ev.kkt.certified_gap <= cfg.gap_tol &&
                          kkt_acceptable(ev.kkt, ev.theta, gbar, tol);
        result.gamma_hat = current;
        result.theta_hat = std::move(ev.theta);
        result.kkt = ev.kkt;
        return done;
    };

    // A constructed start is only a heuristic point: polish it with at least one sweep.
    const bool exact_start = g0.matrix() == gbar.matrix();
    bool converged = check(0) && (exact_start || d < 3);
    int sweep = 0;
    if (d >= 3) {
        while (!converged && sweep < cfg.max_sweeps) {
            ++sweep;
            double change = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                change = std::max(change, update_row(g, gbar.matrix(), static_cast<Eigen::Index>(i), cfg));
                if (observer) {
                    const Variogram snapshot(g);
                    observer(RowUpdateEvent{sweep, i, snapshot});
                }
            }
            const bool last = sweep == cfg.max_sweeps;
            if (change <= cfg.sweep_tol || sweep % cfg.gap_check_every == 0 || last) {
                converged = check(sweep);
                if (!converged && change == 0.0) {
                    break;  // stalled: another sweep would reproduce this iterate
                }
            }
        }
    }
    // d == 2: the only dually feasible optimum is gbar itself, already the start.

    result.converged = converged;
    result.sweeps = sweep;
    result.graph = extract_graph(result.theta_hat, cfg.zero_tol);
    result.seconds = seconds_since(start);
    return result;
}

namespace {

struct GraphState {
    double loglik = 0.0;
    Eigen::MatrixXd gamma;
};

std::optional<GraphState> evaluate_on_graph(const std::vector<Edge>& edges, const Eigen::VectorXd& w,
                                            const Eigen::MatrixXd& gbar) {
    const Eigen::Index d = gbar.rows();
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(d, d);
    double pairing = 0.0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto i = static_cast<Eigen::Index>(edges[e].i);
        const auto j = static_cast<Eigen::Index>(edges[e].j);
        const double v = w(static_cast<Eigen::Index>(e));
        lap(i, j) -= v;
        lap(j, i) -= v;
        lap(i, i) += v;
        lap(j, j) += v;
        pairing += gbar(i, j) * v;
    }
    // Rooted at the first coordinate: det of the reduced Laplacian is the
    // spanning-tree sum and its inverse is the rooted covariance.
    const Eigen::MatrixXd reduced = lap.bottomRightCorner(d - 1, d - 1);
    Eigen::LLT<Eigen::MatrixXd> llt(reduced);
    if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
        return std::nullopt;
    }
    GraphState st;
    st.loglik = 2.0 * llt.matrixLLT().diagonal().array().log().sum() - pairing;
    const Eigen::MatrixXd sigma = llt.solve(Eigen::MatrixXd::Identity(d - 1, d - 1));
    st.gamma = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index a = 0; a < d - 1; ++a) {
        st.gamma(a + 1, 0) = st.gamma(0, a + 1) = sigma(a, a);
        for (Eigen::Index b = a + 1; b < d - 1; ++b) {
            st.gamma(a + 1, b + 1) = st.gamma(b + 1, a + 1) = sigma(a, a) + sigma(b, b) - 2.0 * sigma(a, b);
        }
    }
    return st;
}

/// d loglik / d w_e = Gamma(Q)_e - gbar_e.
Eigen::VectorXd edge_gradient(const std::vector<Edge>& edges, const Eigen::MatrixXd& gamma,
                              const Eigen::MatrixXd& gbar) {
    Eigen::VectorXd grad(static_cast<Eigen::Index>(edges.size()));
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto i = static_cast<Eigen::Index>(edges[e].i);
        const auto j = static_cast<Eigen::Index>(edges[e].j);
        grad(static_cast<Eigen::Index>(e)) = gamma(i, j) - gbar(i, j);
    }
    return grad;
}

}  // namespace

FitResult fit_on_graph(const Variogram& gbar, const std::vector<Edge>& edges_in, const FitConfig& cfg) {
    cfg.validate();
    const auto start = Clock::now();
    require_existence(gbar);
    const std::size_t d = gbar.dim();

    std::vector<Edge> edges;
    for (Edge e : edges_in) {
        if (e.i == e.j || e.i >= d || e.j >= d) {
            throw InvalidInput("invalid edge in graph");
        }
        if (e.i > e.j) {
            std::swap(e.i, e.j);
        }
        if (std::find(edges.begin(), edges.end(), e) == edges.end()) {
            edges.push_back(e);
        }
    }
    if (!is_connected(d, edges)) {
        throw InvalidInput("graph must be connected");
    }

    const Eigen::MatrixXd& gb = gbar.matrix();
    const auto m = static_cast<Eigen::Index>(edges.size());
    Eigen::VectorXd w(m);
    for (Eigen::Index e = 0; e < m; ++e) {
        w(e) = 1.0 / gb(static_cast<Eigen::Index>(edges[static_cast<std::size_t>(e)].i),
                        static_cast<Eigen::Index>(edges[static_cast<std::size_t>(e)].j));
    }
    std::optional<GraphState> state = evaluate_on_graph(edges, w, gb);
    if (!state) {
        throw NumericError("initial graph weights are not admissible");
    }

    const double g_scale = max_offdiag(gb);
    bool converged = false;
    int iter = 0;
    constexpr int kMaxNewton = 200;
    // Gamma(Q) comes out of a Cholesky solve; a few hundred ulps is the floor.
    constexpr double kGraphGradTol = 1e-11;
    for (; iter < kMaxNewton; ++iter) {
        const Eigen::VectorXd grad = edge_gradient(edges, state->gamma, gb);
        if (grad.cwiseAbs().maxCoeff() <= kGraphGradTol * g_scale) {
            converged = true;
            break;
        }
        if (iter + 1 == kMaxNewton) {
            converged = grad.cwiseAbs().maxCoeff() <= cfg.gap_tol * g_scale;
            break;
        }
        // Negative Hessian: (b_e^T L^+ b_f)^2, with the bilinear form recovered
        // from Gamma by polarization.
        Eigen::MatrixXd h(m, m);
        for (Eigen::Index e = 0; e < m; ++e) {
            const auto a = static_cast<Eigen::Index>(edges[static_cast<std::size_t>(e)].i);
            const auto b = static_cast<Eigen::Index>(edges[static_cast<std::size_t>(e)].j);
            for (Eigen::Index f = e; f < m; ++f) {
                const auto c = static_cast<Eigen::Index>(edges[static_cast<std::size_t>(f)].i);
                const auto dd = static_cast<Eigen::Index>(edges[static_cast<std::size_t>(f)].j);
                const auto& gm = state->gamma;
                const double k = 0.5 * (gm(a, dd) + gm(b, c) - gm(a, c) - gm(b, dd));
                h(e, f) = h(f, e) = k * k;
            }
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
        Eigen::VectorXd step = ldlt.solve(grad);
        double decrement = grad.dot(step);
        if (ldlt.info() != Eigen::Success || !step.allFinite() || !(decrement > 0.0)) {
            step = grad;
            decrement = grad.squaredNorm();
        }
        if (decrement < 1e-30) {
            converged = grad.cwiseAbs().maxCoeff() <= cfg.gap_tol * g_scale;
            break;
        }
        double t = 1.0;
        std::optional<GraphState> next;
        const double grad_norm = grad.cwiseAbs().maxCoeff();
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            next = evaluate_on_graph(edges, w + t * step, gb);
            if (next && next->loglik >= state->loglik + 1e-4 * t * decrement) {
                break;
            }
            // Near the optimum the likelihood change drowns in rounding; a
            // smaller gradient is then the only usable progress signal.
            if (next && edge_gradient(edges, next->gamma, gb).cwiseAbs().maxCoeff() < 0.5 * grad_norm) {
                break;
            }
            next.reset();
        }
        if (!next) {
            converged = grad.cwiseAbs().maxCoeff() <= cfg.gap_tol * g_scale;
            break;
        }
        w += t * step;
        state = std::move(next);
    }

    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (Eigen::Index e = 0; e < m; ++e) {
        const auto i = static_cast<Eigen::Index>(edges[static_cast<std::size_t>(e)].i);
        const auto j = static_cast<Eigen::Index>(edges[static_cast<std::size_t>(e)].j);
        q(i, j) = q(j, i) = w(e);
    }

    FitResult result;
    result.gamma_hat = Variogram(state->gamma);
    result.theta_hat = Precision::from_weights(SymMatrix(q));
    result.kkt = kkt_from(result.gamma_hat, result.theta_hat, gbar);
    result.gap_trace.push_back({iter, result.kkt.gap, result.kkt.certified_gap, seconds_since(start)});
    result.graph = extract_graph(result.theta_hat, cfg.zero_tol);
    result.converged = converged;
    result.sweeps = iter;
    result.seconds = seconds_since(start);
    return result;
}

}  // namespace emtp2
