#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "emtp2/variogram.hpp"

namespace emtp2 {

/// m x d matrix of raw observations; m >= 2, no NaN.
class RawDataset {
public:
    explicit RawDataset(Eigen::MatrixXd values);

    std::size_t rows() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(values_.cols()); }
    const Eigen::MatrixXd& values() const noexcept { return values_; }

private:
    Eigen::MatrixXd values_;
};

struct MarginOptions {
    /// The empirical CDF is rank / (m + denominator_offset). The default keeps
    /// the sample maximum finite on the exponential scale.
    double denominator_offset = 1.0;
};

/// Column-wise X = -log(1 - F(x)) with average ranks for ties. Throws
/// InvalidInput("degenerate margin") for a column with fewer than two
/// distinct values.
Eigen::MatrixXd normalize_margins(const RawDataset& raw, const MarginOptions& options = {});

struct ExceedanceSet {
    double threshold = 0.0;
    Eigen::MatrixXd observations;                // n x d, rows x_i - u 1
    std::vector<std::vector<std::size_t>> roots;  // I_k = {i : y_ik > 0}

    std::size_t dim() const noexcept { return static_cast<std::size_t>(observations.cols()); }
    std::size_t size() const noexcept { return static_cast<std::size_t>(observations.rows()); }
};

/// Threshold u = -log(1 - p) on the exponential scale.
ExceedanceSet select_exceedances(const Eigen::MatrixXd& x, double p);

/// Keeps rows with max coordinate > u, shifted by -u. Throws
/// InvalidInput("threshold too high") when no row exceeds.
ExceedanceSet select_exceedances_above(const Eigen::MatrixXd& x, double u);

/// Rooted empirical variogram. Zero matrix when |I_k| < 2.
Variogram variogram_rooted(const ExceedanceSet& e, std::size_t k);

struct EmpiricalVariogram {
    Variogram gbar;
    std::vector<Variogram> per_root;
    std::vector<std::size_t> counts;                              // |I_k|
    std::vector<std::size_t> degenerate_roots;                    // |I_k| < 2
    std::vector<std::pair<std::size_t, std::size_t>> zero_pairs;  // gbar_ij == 0, i < j
};

/// Average of the rooted variograms over all roots, degenerate roots included.
EmpiricalVariogram variogram_combined(const ExceedanceSet& e);

}  // namespace emtp2
