#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include <doctest.h>

#include "emtp2/errors.hpp"
#include "emtp2/hr_model.hpp"
#include "oracles.hpp"

using namespace emtp2;
using emtp2::testing::all_ones_gamma;
using emtp2::testing::centering;
using emtp2::testing::max_abs_diff;

namespace {

Eigen::MatrixXd bivariate(double gamma) {
    Eigen::MatrixXd g(2, 2);
    g << 0, gamma, gamma, 0;
    return g;
}

double mean(const Eigen::VectorXd& v) { return v.mean(); }

double variance(const Eigen::VectorXd& v) {
    const double m = v.mean();
    return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::vector<double> folded_laplace_log_scale(double mu, double sigma, double y0, double y1, double h) {
    std::vector<double> f;
    for (double y = y0; y <= y1 + 1e-12; y += h) {
        const double x = std::exp(y);
        const double fx = (std::exp(-std::abs(x - mu) / sigma) + std::exp(-std::abs(x + mu) / sigma)) / (2.0 * sigma);
        f.push_back(x * fx);
    }
    return f;
}

}  // namespace

TEST_CASE("HRModel requires a valid variogram") {
    Eigen::MatrixXd invalid(3, 3);
    invalid << 0, 5, 1, 5, 0, 1, 1, 1, 0;
    CHECK_THROWS_AS(HRModel(Variogram(invalid)), InvalidInput);
    const HRModel m(Variogram(all_ones_gamma(3)));
    CHECK(max_abs_diff(m.theta().theta().matrix(), 2.0 * centering(3)) < 1e-12);
}

TEST_CASE("root-conditioned moments at n = 100000") {
    auto rng = emtp2::testing::seeded(61);
    const Variogram gamma = random_sphere_variogram(4, rng);
    const HRModel model(gamma);
    const std::size_t n = 100000;
    const double sn = std::sqrt(static_cast<double>(n));
    for (std::size_t k = 0; k < 4; ++k) {
        const SimBatch b = simulate_root_conditioned(model, k, n, 99);
        REQUIRE(b.samples.rows() == static_cast<Eigen::Index>(n));
        const Eigen::Index kk = static_cast<Eigen::Index>(k);
        CHECK((b.samples.col(kk).array() > 0.0).all());
        CHECK(std::abs(mean(b.samples.col(kk)) - 1.0) <= 4.0 / sn);
        for (Eigen::Index j = 0; j < 4; ++j) {
            if (j == kk) {
                continue;
            }
            const Eigen::VectorXd w = b.samples.col(j) - b.samples.col(kk);
            const double g = gamma.matrix()(j, kk);
            CHECK(std::abs(mean(w.array().exp().matrix()) - 1.0) <= 4.0 * std::sqrt(std::expm1(g)) / sn);
            for (Eigen::Index i = j + 1; i < 4; ++i) {
                const Eigen::VectorXd diff = b.samples.col(i) - b.samples.col(j);
                const double gij = gamma.matrix()(i, j);
                CHECK(std::abs(variance(diff) - gij) <= 4.0 * gij * std::sqrt(2.0) / sn);
            }
        }
    }
}

TEST_CASE("simulation is deterministic per seed") {
    const HRModel model(Variogram(all_ones_gamma(4)));
    CHECK(simulate_root_conditioned(model, 1, 50, 5).samples == simulate_root_conditioned(model, 1, 50, 5).samples);
    CHECK(simulate_root_conditioned(model, 1, 50, 5).samples != simulate_root_conditioned(model, 1, 50, 6).samples);
    CHECK(simulate_pareto(model, 50, 5).samples == simulate_pareto(model, 50, 5).samples);
    CHECK_THROWS_AS(simulate_root_conditioned(model, 4, 10, 1), InvalidInput);
    CHECK_THROWS_AS(simulate_root_conditioned(model, 0, 0, 1), InvalidInput);
}

TEST_CASE("Pareto samples live on the exceedance region") {
    auto rng = emtp2::testing::seeded(62);
    const HRModel model(random_sphere_variogram(6, rng));
    const SimBatch b = simulate_pareto(model, 5000, 3);
    CHECK_FALSE(b.root.has_value());
    for (Eigen::Index i = 0; i < b.samples.rows(); ++i) {
        CHECK(b.samples.row(i).maxCoeff() > 0.0);
    }
}

TEST_CASE("Pareto conditioned on a positive coordinate matches the root-conditioned law") {
    auto rng = emtp2::testing::seeded(63);
    const HRModel model(random_sphere_variogram(4, rng));
    const Eigen::MatrixXd y = simulate_pareto(model, 40000, 11).samples;
    for (Eigen::Index k = 0; k < 4; ++k) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            if (y(i, k) > 0.0) {
                rows.push_back(i);
            }
        }
        const Eigen::MatrixXd yk = y(rows, Eigen::placeholders::all);
        const Eigen::MatrixXd ref = simulate_root_conditioned(model, static_cast<std::size_t>(k), 20000, 12).samples;
        for (Eigen::Index i = 0; i < 4; ++i) {
            const std::vector<double> a = to_vector(i == k ? yk.col(k) : Eigen::VectorXd(yk.col(i) - yk.col(k)));
            const std::vector<double> b = to_vector(i == k ? ref.col(k) : Eigen::VectorXd(ref.col(i) - ref.col(k)));
            CHECK(emtp2::testing::ks_statistic(a, b) <= emtp2::testing::ks_critical(a.size(), b.size(), 0.01));
        }
    }
}

TEST_CASE("bivariate joint exceedance fraction shrinks as the variogram grows") {
    auto both_positive = [](double gamma) {
        const Eigen::MatrixXd y = simulate_pareto(HRModel(Variogram(bivariate(gamma))), 20000, 4).samples;
        return ((y.col(0).array() > 0.0) && (y.col(1).array() > 0.0)).cast<double>().mean();
    };
    const double near_dep = both_positive(0.1);
    const double near_indep = both_positive(30.0);
    CHECK(near_dep > 0.7);
    CHECK(near_indep < 0.05);
}

TEST_CASE("surrogate_loglik examples") {
    const Precision t(SymMatrix(2.0 * centering(3)));
    const Variogram ones(all_ones_gamma(3));
    CHECK(surrogate_loglik(t, ones) == doctest::Approx(std::log(4.0 / 3.0) - 2.0).epsilon(1e-12));
    CHECK(surrogate_loglik(t, ones) == doctest::Approx(-1.712318).epsilon(1e-6));

    const double gamma = 2.3;
    Eigen::MatrixXd b(2, 2);
    b << 1, -1, -1, 1;
    CHECK(surrogate_loglik(Precision(SymMatrix(b / gamma)), Variogram(bivariate(gamma))) ==
          doctest::Approx(-std::log(gamma) - 1.0).epsilon(1e-12));
}

TEST_CASE("surrogate likelihood: rooted form, scaling") {
    auto rng = emtp2::testing::seeded(64);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t d = 3 + static_cast<std::size_t>(rep % 6);
        const Variogram gbar = random_sphere_variogram(d, rng);
        const Precision t = Precision::from_weights(
            SymMatrix(emtp2::testing::random_laplacian_weights(static_cast<int>(d), 0.5, rng)));
        const double ell = surrogate_loglik(t, gbar);
        for (std::size_t k = 0; k < d; ++k) {
            CHECK(std::abs(surrogate_loglik_rooted(t, gbar, k) - ell) <= 1e-9 * std::max(1.0, std::abs(ell)));
        }
        const double c = 2.5;
        const Precision tc(SymMatrix(Eigen::MatrixXd(t.theta().matrix() / c)));
        const Variogram gc(Eigen::MatrixXd(c * gbar.matrix()));
        CHECK(surrogate_loglik(tc, gc) ==
              doctest::Approx(ell - static_cast<double>(d - 1) * std::log(c)).epsilon(1e-10));
    }
}

TEST_CASE("information_criteria examples") {
    CHECK(information_criteria(1017.00, 67, 117).aic == doctest::Approx(1151.00).epsilon(1e-14));
    CHECK(information_criteria(253.17, 465, 117).aic == doctest::Approx(1183.17).epsilon(1e-14));
    CHECK(information_criteria(0.0, 0, 117).aic == 0.0);
    CHECK(information_criteria(10.0, 3, 100).bic == doctest::Approx(10.0 + 3.0 * std::log(100.0)));
}

TEST_CASE("tree_metric_variogram examples") {
    Eigen::MatrixXd path(3, 3);
    path << 0, 1, 2, 1, 0, 1, 2, 1, 0;
    CHECK(tree_metric_variogram(3, {{0, 1, 1.0}, {1, 2, 1.0}}).matrix() == path);

    const Eigen::Vector3d a(0.7, 1.3, 2.1);
    const Variogram star = tree_metric_variogram(4, {{3, 0, a(0)}, {3, 1, a(1)}, {3, 2, a(2)}});
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (i != j) {
                CHECK(star.matrix()(i, j) == doctest::Approx(a(i) + a(j)));
            }
        }
    }
    CHECK(tree_metric_variogram(2, {{0, 1, 1.7}}).matrix()(0, 1) == 1.7);

    CHECK_THROWS_AS(tree_metric_variogram(3, {{0, 1, 1.0}}), InvalidInput);
    CHECK_THROWS_AS(tree_metric_variogram(3, {{0, 1, 1.0}, {0, 1, 1.0}}), InvalidInput);
    CHECK_THROWS_AS(tree_metric_variogram(3, {{0, 1, 1.0}, {1, 2, -1.0}}), InvalidInput);
}

TEST_CASE("tree metrics have tree-supported Laplacian precision") {
    auto rng = emtp2::testing::seeded(65);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t d = 3 + static_cast<std::size_t>(rep % 8);
        const auto tree = random_tree(d, rng);
        const Variogram g = tree_metric_variogram(d, tree);
        REQUIRE(is_strictly_cnd(g));
        const Eigen::MatrixXd theta = gamma_to_theta(g).theta().matrix();
        const double scale = theta.cwiseAbs().maxCoeff();
        std::set<std::pair<std::size_t, std::size_t>> on_tree;
        for (const Edge& e : tree) {
            on_tree.insert({std::min(e.i, e.j), std::max(e.i, e.j)});
        }
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = i + 1; j < d; ++j) {
                const double v = theta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                if (on_tree.count({i, j}) != 0) {
                    CHECK(v < 0.0);
                } else {
                    CHECK(std::abs(v) <= 1e-8 * scale);
                }
            }
        }
    }
}

TEST_CASE("one_factor_variogram examples") {
    const OneFactor ones = one_factor_variogram(Eigen::Vector3d(1, 1, 1));
    CHECK(max_abs_diff(ones.theta_closed_form.theta().matrix(), centering(3)) < 1e-14);
    const OneFactor f = one_factor_variogram(Eigen::Vector3d(1, 2, 3));
    CHECK(f.theta_closed_form.theta().matrix()(0, 1) == doctest::Approx(-3.0 / 11.0).epsilon(1e-14));
    CHECK(one_factor_variogram(Eigen::Vector2d(0.4, 1.1)).gamma.matrix()(0, 1) == doctest::Approx(1.5));
    CHECK_THROWS_AS(one_factor_variogram(Eigen::Vector3d(1, 0, 3)), InvalidInput);
}

TEST_CASE("one-factor closed form agrees with the pseudo-inverse") {
    auto rng = emtp2::testing::seeded(66);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    for (int rep = 0; rep < 40; ++rep) {
        const int d = 2 + rep % 9;
        Eigen::VectorXd a(d);
        for (int i = 0; i < d; ++i) {
            a(i) = u(rng);
        }
        const OneFactor f = one_factor_variogram(a);
        const Eigen::MatrixXd t = gamma_to_theta(f.gamma).theta().matrix();
        CHECK(max_abs_diff(f.theta_closed_form.theta().matrix(), t) <= 1e-8 * t.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("grid_log_concavity") {
    const double h = 0.01;
    SUBCASE("Gaussian") {
        std::vector<double> f;
        for (double x = -3.0; x <= 3.0 + 1e-12; x += h) {
            f.push_back(std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi));
        }
        CHECK(grid_log_concavity(f, h).is_log_concave);
    }
    SUBCASE("Gumbel") {
        std::vector<double> f;
        for (double x = -2.0; x <= 6.0 + 1e-12; x += h) {
            f.push_back(std::exp(-(x + std::exp(-x))));
        }
        CHECK(grid_log_concavity(f, h).is_log_concave);
    }
    SUBCASE("folded Laplace counterexample") {
        const double mu = 1.0;
        const double sigma = 0.5;
        const double y0 = -3.0;
        const auto f = folded_laplace_log_scale(mu, sigma, y0, -0.1, h);
        const LogConcavityReport r = grid_log_concavity(f, h);
        CHECK_FALSE(r.is_log_concave);
        CHECK(r.violations.size() == f.size() - 2);

        const auto wide = folded_laplace_log_scale(mu, sigma, y0, 1.5, h);
        const LogConcavityReport w = grid_log_concavity(wide, h);
        CHECK_FALSE(w.violations.empty());
        for (std::size_t i : w.violations) {
            CHECK(std::exp(y0 + h * static_cast<double>(i)) < mu + h);
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(grid_log_concavity(std::vector<double>{1.0, 0.0, 1.0}, h), InvalidInput);
        CHECK_THROWS_AS(grid_log_concavity(std::vector<double>{1.0, 1.0}, h), InvalidInput);
    }
}

TEST_CASE("random generators") {
    auto rng = emtp2::testing::seeded(67);
    for (std::size_t d : {2, 5, 20}) {
        const Variogram g = random_sphere_variogram(d, rng);
        CHECK(is_strictly_cnd(g));
        CHECK(g.matrix().maxCoeff() <= 4.0 + 1e-12);
        const auto tree = random_tree(d, rng);
        CHECK(tree.size() == d - 1);
        CHECK(is_connected(d, tree));
    }
}
