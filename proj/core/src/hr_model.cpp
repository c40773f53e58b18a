#include "emtp2/hr_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "emtp2/errors.hpp"

namespace emtp2 {
namespace {

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag)};
    return std::mt19937_64(seq);
}

// Draws Y^k rows for one root.
class RootSampler {
public:
    RootSampler(const Variogram& gamma, std::size_t k) : root_(k), d_(gamma.dim()) {
        const RootedCovariance rc = gamma_to_sigma_k(gamma, k);
        Eigen::LLT<Eigen::MatrixXd> llt(rc.sigma.matrix());
        if (llt.info() != Eigen::Success) {
            throw InvalidInput("variogram is not strictly conditionally negative definite");
        }
        chol_ = llt.matrixL();
        mean_ = -0.5 * rc.sigma.matrix().diagonal();
        z_.resize(static_cast<Eigen::Index>(d_ - 1));
    }

    template <class Rng>
    void draw(Rng& rng, Eigen::RowVectorXd& out) {
        const double e = exponential_(rng);
        for (Eigen::Index i = 0; i < z_.size(); ++i) {
            z_(i) = normal_(rng);
        }
        const Eigen::VectorXd w = mean_ + chol_ * z_;
        Eigen::Index a = 0;
        for (std::size_t j = 0; j < d_; ++j) {
            out(static_cast<Eigen::Index>(j)) = e + (j == root_ ? 0.0 : w(a++));
        }
    }

private:
    std::size_t root_;
    std::size_t d_;
    Eigen::MatrixXd chol_;
    Eigen::VectorXd mean_;
    Eigen::VectorXd z_;
    std::exponential_distribution<double> exponential_{1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace

HRModel::HRModel(Variogram gamma) : gamma_(std::move(gamma)), theta_(gamma_to_theta(gamma_)) {}

SimBatch simulate_root_conditioned(const HRModel& model, std::size_t k, std::size_t n, std::uint64_t seed) {
    if (k >= model.dim()) {
        throw InvalidInput("root index out of range");
    }
    if (n < 1) {
        throw InvalidInput("sample size must be positive");
    }
    RootSampler sampler(model.gamma(), k);
    auto rng = make_stream(seed, k);
    SimBatch batch;
    batch.root = k;
    batch.seed = seed;
    batch.samples.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(model.dim()));
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(model.dim()));
    for (Eigen::Index i = 0; i < batch.samples.rows(); ++i) {
        sampler.draw(rng, row);
        batch.samples.row(i) = row;
    }
    return batch;
}

SimBatch simulate_pareto(const HRModel& model, std::size_t n, std::uint64_t seed) {
    if (n < 1) {
        throw InvalidInput("sample size must be positive");
    }
    const std::size_t d = model.dim();
    std::vector<RootSampler> samplers;
    samplers.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
        samplers.emplace_back(model.gamma(), k);
    }
    auto rng = make_stream(seed, d);
    std::uniform_int_distribution<std::size_t> pick_root(0, d - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    SimBatch batch;
    batch.seed = seed;
    batch.samples.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    Eigen::RowVectorXd candidate(static_cast<Eigen::Index>(d));
    constexpr std::size_t kWindow = 100000;
    std::size_t accepted = 0;
    std::size_t window_draws = 0;
    std::size_t window_accepts = 0;
    while (accepted < n) {
        samplers[pick_root(rng)].draw(rng, candidate);
        const auto positive = (candidate.array() > 0.0).count();
        ++window_draws;
        if (unif(rng) * static_cast<double>(positive) < 1.0) {
            batch.samples.row(static_cast<Eigen::Index>(accepted++)) = candidate;
            ++window_accepts;
        }
        if (window_draws == kWindow) {
            if (static_cast<double>(window_accepts) < 1e-4 * static_cast<double>(kWindow)) {
                throw ConvergenceError("rejection stalled");
            }
            window_draws = 0;
            window_accepts = 0;
        }
    }
    return batch;
}

double surrogate_loglik(const Precision& t, const Variogram& gbar) {
    if (t.dim() != gbar.dim()) {
        throw InvalidInput("dimension mismatch");
    }
    const double pdet = pseudo_det(t);
    if (!(pdet > 0.0)) {
        throw NumericError("precision pseudo-determinant is not positive");
    }
    const Eigen::MatrixXd q = t.q().matrix();
    const double pairing = 0.5 * gbar.matrix().cwiseProduct(q).sum();
    return std::log(pdet) - pairing - std::log(static_cast<double>(t.dim()));
}

double surrogate_loglik_rooted(const Precision& t, const Variogram& gbar, std::size_t k) {
    if (t.dim() != gbar.dim()) {
        throw InvalidInput("dimension mismatch");
    }
    const auto d = static_cast<Eigen::Index>(t.dim());
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < d; ++i) {
        if (i != static_cast<Eigen::Index>(k)) {
            idx.push_back(i);
        }
    }
    const Eigen::MatrixXd theta_k = t.theta().matrix()(idx, idx);
    const SymMatrix s_k = gamma_to_sigma_k(gbar, k).sigma;
    return logdet_pd(SymMatrix(theta_k)) - (s_k.matrix().cwiseProduct(theta_k)).sum();
}

InformationCriteria information_criteria(double loglik2neg, std::size_t n_edges, std::size_t n_obs) {
    const auto p = static_cast<double>(n_edges);
    InformationCriteria ic;
    ic.aic = loglik2neg + 2.0 * p;
    ic.bic = n_obs > 0 ? loglik2neg + std::log(static_cast<double>(n_obs)) * p : loglik2neg;
    return ic;
}

Variogram tree_metric_variogram(std::size_t d, const std::vector<Edge>& tree) {
    if (d < 2) {
        throw InvalidInput("tree needs at least two nodes");
    }
    if (tree.size() != d - 1 || !is_connected(d, tree)) {
        throw InvalidInput("edge list is not a spanning tree on " + std::to_string(d) + " nodes");
    }
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(d);
    for (const Edge& e : tree) {
        if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
            throw InvalidInput("tree edge weights must be positive");
        }
        adj[e.i].emplace_back(e.j, e.weight);
        adj[e.j].emplace_back(e.i, e.weight);
    }
    const auto n = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    std::vector<std::size_t> stack;
    std::vector<bool> seen(d);
    for (std::size_t src = 0; src < d; ++src) {
        std::fill(seen.begin(), seen.end(), false);
        seen[src] = true;
        stack.assign(1, src);
        while (!stack.empty()) {
            const std::size_t v = stack.back();
            stack.pop_back();
            for (const auto& [w, len] : adj[v]) {
                if (!seen[w]) {
                    seen[w] = true;
                    g(static_cast<Eigen::Index>(src), static_cast<Eigen::Index>(w)) =
                        g(static_cast<Eigen::Index>(src), static_cast<Eigen::Index>(v)) + len;
                    stack.push_back(w);
                }
            }
        }
    }
    return Variogram(SymMatrix(g));
}

OneFactor one_factor_variogram(const Eigen::VectorXd& a) {
    if (a.size() < 2) {
        throw InvalidInput("one-factor model needs at least two loadings");
    }
    if (!(a.array() > 0.0).all() || !a.allFinite()) {
        throw InvalidInput("one-factor loadings must be positive");
    }
    const Eigen::Index d = a.size();
    Eigen::MatrixXd g(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            g(i, j) = i == j ? 0.0 : a(i) + a(j);
        }
    }
    const Eigen::VectorXd inv = a.cwiseInverse();
    const double total = inv.sum();
    Eigen::MatrixXd q = (inv * inv.transpose()) / total;
    q.diagonal().setZero();
    return {Variogram(g), Precision::from_weights(SymMatrix(q))};
}

LogConcavityReport grid_log_concavity(std::span<const double> density, double h, double tol) {
    if (density.size() < 3) {
        throw InvalidInput("log-concavity check needs at least three grid points");
    }
    if (!(h > 0.0)) {
        throw InvalidInput("grid step must be positive");
    }
    std::vector<double> logf(density.size());
    for (std::size_t i = 0; i < density.size(); ++i) {
        if (!(density[i] > 0.0)) {
            throw InvalidInput("density must be positive at grid index " + std::to_string(i));
        }
        logf[i] = std::log(density[i]);
    }
    LogConcavityReport report;
    for (std::size_t i = 1; i + 1 < logf.size(); ++i) {
        if (logf[i + 1] - 2.0 * logf[i] + logf[i - 1] > tol * h * h) {
            report.violations.push_back(i);
        }
    }
    report.is_log_concave = report.violations.empty();
    return report;
}

Variogram random_sphere_variogram(std::size_t d, std::mt19937_64& rng) {
    if (d < 2) {
        throw InvalidInput("sphere variogram needs d >= 2");
    }
    const auto n = static_cast<Eigen::Index>(d);
    const Eigen::Index dim = n;  // S^(d-1) embedded in R^d
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd pts(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < dim; ++c) {
            pts(i, c) = normal(rng);
        }
        pts.row(i).normalize();
    }
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            g(i, j) = g(j, i) = (pts.row(i) - pts.row(j)).squaredNorm();
        }
    }
    return Variogram(g);
}

std::vector<Edge> random_tree(std::size_t d, std::mt19937_64& rng, double lo, double hi) {
    std::vector<std::size_t> label(d);
    std::iota(label.begin(), label.end(), 0);
    std::shuffle(label.begin(), label.end(), rng);
    std::uniform_real_distribution<double> weight(lo, hi);
    std::vector<Edge> edges;
    for (std::size_t v = 1; v < d; ++v) {
        std::uniform_int_distribution<std::size_t> pick(0, v - 1);
        std::size_t a = label[pick(rng)];
        std::size_t b = label[v];
        if (a > b) {
            std::swap(a, b);
        }
        edges.push_back({a, b, weight(rng)});
    }
    return edges;
}

}  // namespace emtp2
