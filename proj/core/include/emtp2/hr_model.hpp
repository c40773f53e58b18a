#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "emtp2/variogram.hpp"

namespace emtp2 {

/// Husler-Reiss model with a valid (strictly CND) variogram and its precision.
class HRModel {
public:
    explicit HRModel(Variogram gamma);

    std::size_t dim() const noexcept { return gamma_.dim(); }
    const Variogram& gamma() const noexcept { return gamma_; }
    const Precision& theta() const noexcept { return theta_; }

private:
    Variogram gamma_;
    Precision theta_;
};

struct SimBatch {
    std::optional<std::size_t> root;  // nullopt for the full Pareto law
    Eigen::MatrixXd samples;          // n x d
    std::uint64_t seed = 0;
};

/// n draws of Y^k = E 1 + W^k with E ~ Exp(1), W^k_k = 0 and
/// W^k_{-k} ~ N(-diag(Sigma^(k))/2, Sigma^(k)).
///
/// Streams: a std::mt19937_64 seeded with std::seed_seq{seed lo, seed hi, k}.
/// The exponential draw of a sample precedes its d-1 standard normals.
SimBatch simulate_root_conditioned(const HRModel& model, std::size_t k, std::size_t n, std::uint64_t seed);

/// n draws from the multivariate Pareto law supported on {max_j y_j > 0}.
///
/// Rejection from the mixture of the root-conditioned laws: draw K uniformly,
/// V ~ Y^K, accept with probability 1 / #{j : V_j > 0}. The mixture has density
/// proportional to f_Y(v) #{j : v_j > 0} because every margin has the same
/// exceedance probability, so accepted draws follow f_Y. The acceptance rate is
/// at least 1/d. Streams: std::mt19937_64 seeded with
/// std::seed_seq{seed lo, seed hi, d}.
SimBatch simulate_pareto(const HRModel& model, std::size_t n, std::uint64_t seed);

/// log Det(Theta) - <<Gbar, Q>> - log d.
double surrogate_loglik(const Precision& t, const Variogram& gbar);

/// log det Theta^(k) - tr(S^(k) Theta^(k)) with S^(k) the covariance of gbar
/// rooted at k. Equals surrogate_loglik for every k.
double surrogate_loglik_rooted(const Precision& t, const Variogram& gbar, std::size_t k);

struct InformationCriteria {
    double aic = 0.0;
    double bic = 0.0;
};

/// AIC = L + 2 p, BIC = L + log(n_obs) p with L twice the negative
/// log-likelihood and p the number of graph edges.
InformationCriteria information_criteria(double loglik2neg, std::size_t n_edges, std::size_t n_obs);

/// Path-sum metric of a weighted tree on d nodes.
Variogram tree_metric_variogram(std::size_t d, const std::vector<Edge>& tree);

struct OneFactor {
    Variogram gamma;
    Precision theta_closed_form;
};

/// Gamma_ij = a_i + a_j, with the closed-form precision
/// Theta_ij = -(1 / (a_i a_j)) / sum_k (1 / a_k).
OneFactor one_factor_variogram(const Eigen::VectorXd& a);

struct LogConcavityReport {
    bool is_log_concave = true;
    std::vector<std::size_t> violations;  // interior grid indices
};

/// Second central differences of log f on a uniform grid with step h; index i
/// is a violation when log f[i+1] - 2 log f[i] + log f[i-1] > tol h^2.
LogConcavityReport grid_log_concavity(std::span<const double> density, double h, double tol = 1e-8);

/// Squared Euclidean distances of d points drawn uniformly on the
/// (d-1)-dimensional unit sphere S^(d-1) in R^d.
Variogram random_sphere_variogram(std::size_t d, std::mt19937_64& rng);

/// Random labeled tree on d nodes with weights uniform on [lo, hi].
std::vector<Edge> random_tree(std::size_t d, std::mt19937_64& rng, double lo = 0.5, double hi = 2.0);

}  // namespace emtp2
