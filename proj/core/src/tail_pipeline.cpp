#include "emtp2/tail_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "emtp2/errors.hpp"

namespace emtp2 {

RawDataset::RawDataset(Eigen::MatrixXd values) : values_(std::move(values)) {
    if (values_.rows() < 2) {
        throw InvalidInput("raw dataset needs at least two rows");
    }
    if (values_.cols() < 1) {
        throw InvalidInput("raw dataset needs at least one column");
    }
    if (values_.hasNaN()) {
        throw InvalidInput("raw dataset contains NaN");
    }
}

Eigen::MatrixXd normalize_margins(const RawDataset& raw, const MarginOptions& options) {
    if (!(options.denominator_offset > 0.0)) {
        throw InvalidInput("empirical CDF denominator offset must be positive");
    }
    const auto& v = raw.values();
    const Eigen::Index m = v.rows();
    const double denom = static_cast<double>(m) + options.denominator_offset;
    Eigen::MatrixXd out(m, v.cols());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    for (Eigen::Index col = 0; col < v.cols(); ++col) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return v(a, col) < v(b, col); });
        if (v(order.front(), col) == v(order.back(), col)) {
            throw InvalidInput("degenerate margin in column " + std::to_string(col + 1));
        }
        std::size_t pos = 0;
        while (pos < order.size()) {
            std::size_t end = pos + 1;
            while (end < order.size() && v(order[end], col) == v(order[pos], col)) {
                ++end;
            }
            // Ranks pos+1 .. end share their average.
            const double rank = 0.5 * static_cast<double>(pos + 1 + end);
            const double value = -std::log1p(-rank / denom);
            for (std::size_t t = pos; t < end; ++t) {
                out(order[t], col) = value;
            }
            pos = end;
        }
    }
    return out;
}

ExceedanceSet select_exceedances(const Eigen::MatrixXd& x, double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidInput("quantile must lie in (0, 1)");
    }
    return select_exceedances_above(x, -std::log1p(-p));
}

ExceedanceSet select_exceedances_above(const Eigen::MatrixXd& x, double u) {
    if (!std::isfinite(u)) {
        throw InvalidInput("threshold must be finite");
    }
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (x.row(i).maxCoeff() > u) {
            keep.push_back(i);
        }
    }
    if (keep.empty()) {
        throw InvalidInput("threshold too high: no exceedances");
    }
    ExceedanceSet e;
    e.threshold = u;
    e.observations = x(keep, Eigen::all).array() - u;
    e.roots.assign(static_cast<std::size_t>(x.cols()), {});
    for (Eigen::Index i = 0; i < e.observations.rows(); ++i) {
        for (Eigen::Index k = 0; k < x.cols(); ++k) {
            if (e.observations(i, k) > 0.0) {
                e.roots[static_cast<std::size_t>(k)].push_back(static_cast<std::size_t>(i));
            }
        }
    }
    return e;
}

Variogram variogram_rooted(const ExceedanceSet& e, std::size_t k) {
    const auto d = static_cast<Eigen::Index>(e.dim());
    if (k >= e.dim()) {
        throw InvalidInput("root index out of range");
    }
    const auto& rows = e.roots[k];
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
    if (rows.size() < 2) {
        return Variogram(g);
    }
    const auto root = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd w(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto i = static_cast<Eigen::Index>(rows[r]);
        w.row(static_cast<Eigen::Index>(r)) = e.observations.row(i).array() - e.observations(i, root);
    }
    const Eigen::RowVectorXd mean = w.colwise().mean();
    w.rowwise() -= mean;
    const Eigen::MatrixXd omega = (w.transpose() * w) / static_cast<double>(rows.size());
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) {
            // Clamp rounding below zero; the exact value is a variance.
            g(i, j) = g(j, i) = std::max(0.0, omega(i, i) + omega(j, j) - 2.0 * omega(i, j));
        }
    }
    return Variogram(g);
}

EmpiricalVariogram variogram_combined(const ExceedanceSet& e) {
    const std::size_t d = e.dim();
    const auto n = static_cast<Eigen::Index>(d);
    EmpiricalVariogram out;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < d; ++k) {
        out.per_root.push_back(variogram_rooted(e, k));
        out.counts.push_back(e.roots[k].size());
        if (e.roots[k].size() < 2) {
            out.degenerate_roots.push_back(k);
        }
        sum += out.per_root.back().matrix();
    }
    sum /= static_cast<double>(d);
    out.gbar = Variogram(sum);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            if (!(out.gbar(i, j) > 0.0)) {
                out.zero_pairs.emplace_back(i, j);
            }
        }
    }
    return out;
}

}  // namespace emtp2
