#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <doctest.h>

#include "emtp2/errors.hpp"
#include "emtp2/hr_model.hpp"
#include "emtp2/tail_pipeline.hpp"
#include "oracles.hpp"

using namespace emtp2;
using emtp2::testing::max_abs_diff;

TEST_CASE("RawDataset validation") {
    CHECK_THROWS_AS(RawDataset(Eigen::MatrixXd::Zero(1, 3)), InvalidInput);
    CHECK_THROWS_AS(RawDataset(Eigen::MatrixXd::Zero(3, 0)), InvalidInput);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 2);
    x(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(RawDataset{x}, InvalidInput);
}

TEST_CASE("normalize_margins examples") {
    SUBCASE("hand ranks") {
        Eigen::MatrixXd x(3, 1);
        x << 3.2, 1.1, 5.0;
        const Eigen::MatrixXd z = normalize_margins(RawDataset(x));
        CHECK(z(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
        CHECK(z(1, 0) == doctest::Approx(-std::log(0.75)).epsilon(1e-12));
        CHECK(z(2, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
        CHECK(z(0, 0) == doctest::Approx(0.693147).epsilon(1e-6));
        CHECK(z(1, 0) == doctest::Approx(0.287682).epsilon(1e-6));
        CHECK(z(2, 0) == doctest::Approx(1.386294).epsilon(1e-6));
    }
    SUBCASE("sorted column") {
        const int m = 9;
        Eigen::MatrixXd x(m, 1);
        for (int i = 0; i < m; ++i) {
            x(i, 0) = 0.5 * i - 1.0;
        }
        const Eigen::MatrixXd z = normalize_margins(RawDataset(x));
        for (int i = 0; i < m; ++i) {
            CHECK(z(i, 0) == doctest::Approx(-std::log(1.0 - (i + 1.0) / (m + 1.0))).epsilon(1e-12));
        }
    }
    SUBCASE("ties share the average rank") {
        Eigen::MatrixXd x(3, 1);
        x << 1, 1, 2;
        const Eigen::MatrixXd z = normalize_margins(RawDataset(x));
        CHECK(z(0, 0) == z(1, 0));
        CHECK(z(0, 0) == doctest::Approx(-std::log(1.0 - 1.5 / 4.0)).epsilon(1e-12));
        CHECK(z(2, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    }
    SUBCASE("degenerate margin") {
        Eigen::MatrixXd x(3, 2);
        x << 1, 2, 2, 2, 3, 2;
        CHECK_THROWS_WITH_AS(normalize_margins(RawDataset(x)), doctest::Contains("degenerate margin"), InvalidInput);
    }
    SUBCASE("denominator knob") {
        Eigen::MatrixXd x(3, 1);
        x << 3.2, 1.1, 5.0;
        MarginOptions opt;
        opt.denominator_offset = 0.5;
        const Eigen::MatrixXd z = normalize_margins(RawDataset(x), opt);
        CHECK(z(2, 0) == doctest::Approx(-std::log(1.0 - 3.0 / 3.5)).epsilon(1e-12));
        opt.denominator_offset = 0.0;
        CHECK_THROWS_AS(normalize_margins(RawDataset(x), opt), InvalidInput);
    }
}

TEST_CASE("normalize_margins: positive, finite and invariant under increasing maps") {
    auto rng = emtp2::testing::seeded(51);
    std::normal_distribution<double> z;
    Eigen::MatrixXd x(200, 4);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            x(i, j) = std::round(10.0 * z(rng)) / 10.0;  // forces ties
        }
    }
    const Eigen::MatrixXd a = normalize_margins(RawDataset(x));
    CHECK((a.array() > 0.0).all());
    CHECK(a.allFinite());
    Eigen::MatrixXd y = x;
    y.col(0) = x.col(0).array().exp();
    y.col(1) = x.col(1).array().pow(3) + 7.0;
    y.col(2) = x.col(2).array().sinh();
    const Eigen::MatrixXd b = normalize_margins(RawDataset(y));
    CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("select_exceedances examples") {
    Eigen::MatrixXd x(3, 2);
    x << 0.1, 0.2, 3.0, 0.5, 0.4, 2.5;
    const ExceedanceSet e = select_exceedances(x, 0.9);
    CHECK(e.threshold == doctest::Approx(-std::log(0.1)).epsilon(1e-15));
    CHECK(e.threshold == doctest::Approx(2.302585).epsilon(1e-6));
    CHECK(e.size() == 2);
    CHECK(e.roots[0] == std::vector<std::size_t>{0});
    CHECK(e.roots[1] == std::vector<std::size_t>{1});
    for (Eigen::Index i = 0; i < e.observations.rows(); ++i) {
        CHECK(e.observations.row(i).maxCoeff() > 0.0);
    }

    const ExceedanceSet all = select_exceedances(x, 1e-12);
    CHECK(all.size() == 3);

    Eigen::MatrixXd one(3, 2);
    one << 0.1, 0.2, 5.0, 0.5, 0.4, 0.3;
    const ExceedanceSet single = select_exceedances(one, 0.9);
    CHECK(single.size() == 1);
    for (const auto& r : single.roots) {
        CHECK(r.size() <= 1);
    }
    CHECK(variogram_combined(single).gbar.matrix().isZero());

    CHECK_THROWS_WITH_AS(select_exceedances(x, 0.999), doctest::Contains("threshold too high"), InvalidInput);
    CHECK_THROWS_AS(select_exceedances(x, 0.0), InvalidInput);
    CHECK_THROWS_AS(select_exceedances(x, 1.0), InvalidInput);
}

TEST_CASE("variogram_rooted examples") {
    Eigen::MatrixXd y(2, 2);
    y << 1, 1, 1, 3;
    const ExceedanceSet e = select_exceedances_above(y, 0.0);
    CHECK(variogram_rooted(e, 0).matrix()(0, 1) == doctest::Approx(1.0).epsilon(1e-15));

    Eigen::MatrixXd single(2, 2);
    single << 1, -1, -2, 1;
    const ExceedanceSet s = select_exceedances_above(single, 0.0);
    CHECK(variogram_rooted(s, 0).matrix().isZero());

    Eigen::MatrixXd dup(3, 3);
    dup << 1, 2, 3, 1, 2, 3, 1, 2, 3;
    CHECK(variogram_rooted(select_exceedances_above(dup, 0.0), 0).matrix().isZero());

    CHECK_THROWS_AS(variogram_rooted(e, 2), InvalidInput);
}

TEST_CASE("variogram_combined examples") {
    SUBCASE("arithmetic mean of the roots") {
        const double a = 2.0 * std::sqrt(3.0);
        Eigen::MatrixXd y(4, 2);
        y << 1, -5, 1, -3, -5, 1, -5 + a, 1;
        const EmpiricalVariogram v = variogram_combined(select_exceedances_above(y, 0.0));
        CHECK(v.per_root[0].matrix()(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(v.per_root[1].matrix()(0, 1) == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(v.gbar.matrix()(0, 1) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(v.counts == std::vector<std::size_t>{2, 2});
        CHECK(v.degenerate_roots.empty());
        CHECK(v.zero_pairs.empty());
    }
    SUBCASE("all roots degenerate") {
        Eigen::MatrixXd y(1, 3);
        y << 1, 1, 1;
        const EmpiricalVariogram v = variogram_combined(select_exceedances_above(y, 0.0));
        CHECK(v.gbar.matrix().isZero());
        CHECK(v.degenerate_roots.size() == 3);
        CHECK(v.zero_pairs.size() == 3);
    }
}

TEST_CASE("empirical variogram: symmetry, nonnegativity, permutation equivariance") {
    auto rng = emtp2::testing::seeded(52);
    const HRModel model(random_sphere_variogram(5, rng));
    const Eigen::MatrixXd y = simulate_pareto(model, 2000, 52).samples;
    const EmpiricalVariogram v = variogram_combined(select_exceedances_above(y, 0.0));
    const Eigen::MatrixXd& g = v.gbar.matrix();
    CHECK(g == g.transpose());
    CHECK(g.diagonal().isZero(0.0));
    CHECK((g.array() >= 0.0).all());

    Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
    perm.indices() << 3, 0, 4, 1, 2;
    const Eigen::MatrixXd yp = y * perm.transpose();
    const EmpiricalVariogram vp = variogram_combined(select_exceedances_above(yp, 0.0));
    const Eigen::MatrixXd expected = perm * g * perm.transpose();
    CHECK(max_abs_diff(vp.gbar.matrix(), expected) <= 1e-12);
}

TEST_CASE("rooted estimator recovers the generating variogram") {
    auto rng = emtp2::testing::seeded(53);
    const Variogram gamma = tree_metric_variogram(5, random_tree(5, rng));
    const HRModel model(gamma);
    double err_small = 0.0;
    double err_large = 0.0;
    for (std::size_t k = 0; k < 5; ++k) {
        const ExceedanceSet small = select_exceedances_above(simulate_root_conditioned(model, k, 2000, 7).samples, 0.0);
        const ExceedanceSet large = select_exceedances_above(simulate_root_conditioned(model, k, 20000, 7).samples, 0.0);
        CHECK(large.roots[k].size() == 20000);
        err_small = std::max(err_small, max_abs_diff(variogram_rooted(small, k).matrix(), gamma.matrix()));
        err_large = std::max(err_large, max_abs_diff(variogram_rooted(large, k).matrix(), gamma.matrix()));
    }
    CHECK(err_large < 0.1 * gamma.matrix().maxCoeff());
    CHECK(err_large < err_small);
}
