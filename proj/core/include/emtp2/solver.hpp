#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "emtp2/variogram.hpp"

namespace emtp2 {

struct FitConfig {
    double gap_tol = 1e-8;     // stop once the duality gap falls below this
    double sweep_tol = 1e-10;  // max |change of Gamma| per sweep that triggers a gap check
    int max_sweeps = 10000;
    double zero_tol = 1e-6;    // edge detection, relative to max Q
    double qp_tol = 1e-10;
    int qp_max_iter = 100000;
    int gap_check_every = 1;

    /// Throws InvalidInput if any tolerance or count is not positive.
    void validate() const;
};

struct KktReport {
    double min_q = 0.0;                // min_{i<j} Q_ij
    double max_gamma_violation = 0.0;  // max_{i<j} Gamma_ij - Gbar_ij
    double max_comp_slack = 0.0;       // max_{i<j} |(Gbar_ij - Gamma_ij) Q_ij|
    double gap = 0.0;                  // <<Gbar, Q>> - (d - 1)
    /// Weak-duality bound f(Q+) - h(Gamma) with the primal point Q+ = max(Q, 0).
    /// Nonnegative for every dually feasible Gamma; +inf when the support of Q+
    /// is disconnected. Equals `gap` whenever Q >= 0.
    double certified_gap = 0.0;
};

struct GapRecord {
    int sweep = 0;
    double gap = 0.0;
    double certified_gap = 0.0;
    double seconds = 0.0;
};

struct FitResult {
    Variogram gamma_hat;
    Precision theta_hat;
    std::vector<Edge> graph;
    std::vector<GapRecord> gap_trace;
    KktReport kkt;
    bool converged = false;
    int sweeps = 0;
    double seconds = 0.0;
};

/// Called after every row update with the current iterate.
struct RowUpdateEvent {
    int sweep;
    std::size_t row;
    const Variogram& gamma;
};
using RowObserver = std::function<void(const RowUpdateEvent&)>;

/// True iff every off-diagonal entry of gbar is strictly positive.
bool existence_check(const Variogram& gbar);

/// Single-linkage ultrametric construction of a dually feasible point from
/// S = P(-Gbar/2)P. Throws InvalidInput("degenerate second-moment structure")
/// when S_ii <= 0 or S_ij >= sqrt(S_ii S_jj) for some pair.
Variogram ultrametric_start(const Variogram& gbar);

/// Dually feasible starting point: gbar itself when it is strictly CND,
/// otherwise the ultrametric construction, otherwise the equilateral matrix
/// min_{i != j}(gbar_ij) (11^T - I).
Variogram initial_point(const Variogram& gbar);

/// Replaces row/column i of a dually feasible g by the solution of the
/// bound-constrained row quadratic program.
Variogram row_update(const Variogram& g, const Variogram& gbar, std::size_t i, const FitConfig& cfg);

/// <<Gbar, Q(g)>> - (d - 1).
double duality_gap(const Variogram& g, const Variogram& gbar);

KktReport kkt_report(const Variogram& ghat, const Variogram& gbar);

/// Edges {i < j : q_ij > zero_tol * max_{k<l} q_kl}.
std::vector<Edge> extract_graph(const Precision& t, double zero_tol);

/// Block coordinate ascent on the Cayley-Menger dual. Throws ExistenceError
/// when some gbar_ij <= 0; returns converged = false with the best iterate if
/// max_sweeps is exhausted.
FitResult fit(const Variogram& gbar, const FitConfig& cfg = {}, const RowObserver& observer = {});

/// Surrogate maximum likelihood with Q supported on `edges` (sign free on the
/// edges), by damped Newton on the edge weights.
FitResult fit_on_graph(const Variogram& gbar, const std::vector<Edge>& edges, const FitConfig& cfg = {});

}  // namespace emtp2
