#include "emtp2/variogram.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "emtp2/errors.hpp"

namespace emtp2 {
namespace {

void validate_variogram(const Eigen::MatrixXd& g) {
    if (g.rows() != g.cols()) {
        throw InvalidInput("variogram must be square");
    }
    if (g.rows() < 2) {
        throw InvalidInput("variogram dimension must be at least 2");
    }
    if (!g.allFinite()) {
        throw InvalidInput("variogram has non-finite entries");
    }
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        if (g(i, i) != 0.0) {
            throw InvalidInput("variogram diagonal must be zero (entry " + std::to_string(i + 1) + ")");
        }
    }
    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw InvalidInput("variogram is not symmetric");
    }
}

std::vector<Eigen::Index> all_but(Eigen::Index d, Eigen::Index k) {
    std::vector<Eigen::Index> idx;
    idx.reserve(static_cast<std::size_t>(d - 1));
    for (Eigen::Index i = 0; i < d; ++i) {
        if (i != k) {
            idx.push_back(i);
        }
    }
    return idx;
}

struct DisjointSets {
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }

    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) {
            return false;
        }
        parent[b] = a;
        return true;
    }

    std::vector<std::size_t> parent;
};

}  // namespace

Variogram::Variogram(const Eigen::MatrixXd& gamma) {
    validate_variogram(gamma);
    gamma_ = SymMatrix(gamma);
}

Variogram::Variogram(const SymMatrix& gamma) : Variogram(gamma.matrix()) {}

Precision::Precision(const SymMatrix& theta) : theta_(theta) {
    const double scale = theta.matrix().cwiseAbs().maxCoeff();
    const double worst = theta.matrix().rowwise().sum().cwiseAbs().maxCoeff();
    if (worst > 1e-9 * std::max(scale, 1e-300)) {
        throw InvalidInput("precision matrix rows must sum to zero (max |row sum| = " + std::to_string(worst) +
                           ")");
    }
}

Precision Precision::from_weights(const SymMatrix& q) {
    Eigen::MatrixXd l = -q.matrix();
    l.diagonal().setZero();
    l.diagonal() = -l.rowwise().sum();
    return Precision(SymMatrix(l));
}

SymMatrix Precision::q() const {
    Eigen::MatrixXd q = -theta_.matrix();
    q.diagonal().setZero();
    return SymMatrix(q);
}

Eigen::MatrixXd centering_projector(std::size_t d) {
    const auto n = static_cast<Eigen::Index>(d);
    return Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(d));
}

RootedCovariance gamma_to_sigma_k(const Variogram& g, std::size_t k) {
    const auto d = static_cast<Eigen::Index>(g.dim());
    const auto root = static_cast<Eigen::Index>(k);
    if (root < 0 || root >= d) {
        throw InvalidInput("root index out of range");
    }
    const auto idx = all_but(d, root);
    const auto n = static_cast<Eigen::Index>(idx.size());
    const auto& gm = g.matrix();
    Eigen::MatrixXd s(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) {
            const auto i = idx[static_cast<std::size_t>(a)];
            const auto j = idx[static_cast<std::size_t>(b)];
            s(a, b) = 0.5 * (gm(i, root) + gm(j, root) - gm(i, j));
        }
    }
    return {k, SymMatrix(s)};
}

Variogram sigma_k_to_gamma(const RootedCovariance& s) {
    const auto n = static_cast<Eigen::Index>(s.sigma.dim());
    const auto d = n + 1;
    const auto root = static_cast<Eigen::Index>(s.root);
    if (root < 0 || root >= d) {
        throw InvalidInput("root index out of range");
    }
    const auto idx = all_but(d, root);
    const auto& sm = s.sigma.matrix();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index a = 0; a < n; ++a) {
        const auto i = idx[static_cast<std::size_t>(a)];
        g(i, root) = g(root, i) = sm(a, a);
        for (Eigen::Index b = a + 1; b < n; ++b) {
            const auto j = idx[static_cast<std::size_t>(b)];
            g(i, j) = g(j, i) = sm(a, a) + sm(b, b) - 2.0 * sm(a, b);
        }
    }
    return Variogram(g);
}

SymMatrix centered_covariance(const Variogram& g) {
    const Eigen::MatrixXd p = centering_projector(g.dim());
    return SymMatrix(p * (-0.5 * g.matrix()) * p);
}

bool is_strictly_cnd(const Variogram& g) {
    return is_positive_definite(gamma_to_sigma_k(g, 0).sigma.matrix());
}

Precision gamma_to_theta(const Variogram& g) {
    if (!is_strictly_cnd(g)) {
        throw InvalidInput("variogram is not strictly conditionally negative definite");
    }
    const SymMatrix sigma = centered_covariance(g);
    Eigen::MatrixXd theta = pseudo_inverse(sigma).matrix();
    // Remove the O(eps) drift off the zero-row-sum subspace.
    const Eigen::MatrixXd p = centering_projector(g.dim());
    theta = p * theta * p;
    return Precision(SymMatrix(theta));
}

Precision gamma_to_theta_rooted(const Variogram& g, std::size_t k) {
    const RootedCovariance rc = gamma_to_sigma_k(g, k);
    if (!is_positive_definite(rc.sigma.matrix())) {
        throw InvalidInput("variogram is not strictly conditionally negative definite");
    }
    const Eigen::MatrixXd inv = inverse_pd(rc.sigma.matrix());
    const auto d = static_cast<Eigen::Index>(g.dim());
    const auto root = static_cast<Eigen::Index>(k);
    const auto idx = all_but(d, root);
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t a = 0; a < idx.size(); ++a) {
        for (std::size_t b = 0; b < idx.size(); ++b) {
            theta(idx[a], idx[b]) = inv(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
    }
    for (Eigen::Index i : idx) {
        double row = 0.0;
        for (Eigen::Index j : idx) {
            row += theta(i, j);
        }
        theta(i, root) = theta(root, i) = -row;
    }
    theta(root, root) = -theta.row(root).sum();
    return Precision(SymMatrix(theta));
}

Variogram theta_to_gamma(const Precision& t) {
    const SymEigen eig = sym_eig(t.theta());
    const std::size_t d = t.dim();
    if (numerical_rank(eig) != d - 1 || eig.values(static_cast<Eigen::Index>(d) - 2) <= 0.0) {
        throw NumericError("precision rank defect: expected rank " + std::to_string(d - 1) +
                           " with positive spectrum");
    }
    const SymMatrix sigma = pseudo_inverse(t.theta());
    const auto& s = sigma.matrix();
    const auto n = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            g(i, j) = g(j, i) = s(i, i) + s(j, j) - 2.0 * s(i, j);
        }
    }
    return Variogram(g);
}

double pseudo_det(const Precision& t) {
    const SymEigen eig = sym_eig(t.theta());
    const std::size_t d = t.dim();
    if (numerical_rank(eig) != d - 1) {
        throw NumericError("precision rank defect: expected rank " + std::to_string(d - 1));
    }
    const double cut = kDefaultRankTol * eig.values.cwiseAbs().maxCoeff();
    double prod = 1.0;
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        if (std::abs(eig.values(i)) > cut) {
            prod *= eig.values(i);
        }
    }
    return prod;
}

double spanning_tree_sum(const SymMatrix& q) {
    const std::size_t d = q.dim();
    if (d > 8) {
        throw InvalidInput("spanning tree enumeration oracle restricted to small d (d <= 8)");
    }
    if (d < 2) {
        throw InvalidInput("spanning tree enumeration requires d >= 2");
    }
    if (d == 2) {
        return q(0, 1);
    }
    const std::size_t len = d - 2;
    std::vector<std::size_t> seq(len, 0);
    std::vector<std::size_t> degree(d);
    double total = 0.0;
    while (true) {
        // Decode the Pruefer sequence.
        std::fill(degree.begin(), degree.end(), 1);
        for (std::size_t v : seq) {
            ++degree[v];
        }
        double prod = 1.0;
        for (std::size_t v : seq) {
            std::size_t leaf = 0;
            while (degree[leaf] != 1) {
                ++leaf;
            }
            prod *= q(leaf, v);
            --degree[leaf];
            --degree[v];
        }
        std::size_t u = d;
        std::size_t w = d;
        for (std::size_t v = 0; v < d; ++v) {
            if (degree[v] == 1) {
                (u == d ? u : w) = v;
            }
        }
        prod *= q(u, w);
        total += prod;

        std::size_t pos = 0;
        while (pos < len && ++seq[pos] == d) {
            seq[pos] = 0;
            ++pos;
        }
        if (pos == len) {
            break;
        }
    }
    return total;
}

double cayley_menger_logdet(const Variogram& g) {
    if (!is_strictly_cnd(g)) {
        throw InvalidInput("variogram is not strictly conditionally negative definite");
    }
    const auto d = static_cast<Eigen::Index>(g.dim());
    Eigen::MatrixXd bordered(d + 1, d + 1);
    bordered(0, 0) = 0.0;
    bordered.block(0, 1, 1, d).setConstant(-1.0);
    bordered.block(1, 0, d, 1).setConstant(1.0);
    bordered.block(1, 1, d, d) = -0.5 * g.matrix();

    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(bordered);
    const auto& u = lu.matrixLU();
    double logabs = 0.0;
    int sign = lu.permutationP().determinant();
    for (Eigen::Index i = 0; i <= d; ++i) {
        const double pivot = u(i, i);
        if (pivot == 0.0) {
            throw NumericError("Cayley-Menger matrix is singular");
        }
        if (pivot < 0.0) {
            sign = -sign;
        }
        logabs += std::log(std::abs(pivot));
    }
    if (sign <= 0) {
        throw NumericError("Cayley-Menger determinant is not positive");
    }
    return logabs;
}

VariogramReport check_variogram(const Variogram& g) {
    VariogramReport report;
    report.strictly_cnd = is_strictly_cnd(g);
    const std::size_t d = g.dim();
    report.positive_offdiag = true;
    report.is_metric = true;
    const double slack = kMetricSlack * g.matrix().cwiseAbs().maxCoeff();
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            if (i == j) {
                continue;
            }
            if (!(g(i, j) > 0.0)) {
                report.positive_offdiag = false;
            }
            for (std::size_t k = 0; k < d; ++k) {
                if (k != i && k != j && g(i, j) > g(i, k) + g(k, j) + slack) {
                    report.is_metric = false;
                }
            }
        }
    }
    return report;
}

bool is_connected(std::size_t d, const std::vector<Edge>& edges) {
    if (d == 0) {
        return false;
    }
    DisjointSets sets(d);
    std::size_t components = d;
    for (const Edge& e : edges) {
        if (e.i >= d || e.j >= d) {
            throw InvalidInput("edge endpoint out of range");
        }
        if (sets.unite(e.i, e.j)) {
            --components;
        }
    }
    return components == 1;
}

bool is_emtp2(const Precision& t, double zero_tol) {
    const auto& th = t.theta().matrix();
    const std::size_t d = t.dim();
    double scale = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            scale = std::max(scale, std::abs(th(i, j)));
        }
    }
    if (scale == 0.0) {
        return false;
    }
    const double cut = zero_tol * scale;
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            if (th(i, j) > cut) {
                return false;
            }
            if (-th(i, j) > cut) {
                edges.push_back({i, j, -th(i, j)});
            }
        }
    }
    return is_connected(d, edges);
}

double fiedler_identity_residual(const Variogram& g) {
    const auto d = static_cast<Eigen::Index>(g.dim());
    const Precision prec = gamma_to_theta(g);
    const Eigen::MatrixXd& theta = prec.theta().matrix();
    const Eigen::VectorXd xi = centered_covariance(g).matrix().diagonal();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d);
    const double inv_d = 1.0 / static_cast<double>(d);
    const Eigen::VectorXd r = 0.5 * theta * xi + inv_d * ones;
    const double r_sq = 0.5 * xi.dot(r + inv_d * ones);

    Eigen::MatrixXd lhs(d + 1, d + 1);
    lhs(0, 0) = 0.0;
    lhs.block(0, 1, 1, d).setConstant(1.0);
    lhs.block(1, 0, d, 1).setConstant(1.0);
    lhs.block(1, 1, d, d) = g.matrix();
    lhs *= -0.5;

    Eigen::MatrixXd bordered(d + 1, d + 1);
    bordered(0, 0) = 4.0 * r_sq;
    bordered.block(0, 1, 1, d) = -2.0 * r.transpose();
    bordered.block(1, 0, d, 1) = -2.0 * r;
    bordered.block(1, 1, d, d) = theta;
    const Eigen::MatrixXd rhs = bordered.partialPivLu().inverse();
    return (lhs - rhs).cwiseAbs().maxCoeff();
}

}  // namespace emtp2
