#pragma once

#include "weakinfo/complete_solver.hpp"
#include "weakinfo/market.hpp"
#include "weakinfo/rational.hpp"
#include "weakinfo/utility.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace weakinfo {

/// The two boundary martingale laws of one trinomial period over (up, middle, down).
/// p0 drops the up branch when b >= 1+r and the down branch otherwise; p1 drops the middle.
template <class T>
struct ExtremalPair {
    std::array<T, 3> p0;
    std::array<T, 3> p1;
};

template <class T>
ExtremalPair<T> extremal_measures(const T& a, const T& b, const T& c, const T& r) {
    const T rho = T(1) + r;
    if (!(a > rho && rho > c)) throw InvalidParameter("extremal measures need a > 1+r > c");
    if (!(a > b && b > c)) throw InvalidParameter("extremal measures need a > b > c");
    ExtremalPair<T> out;
    if (b >= rho) {
        out.p0 = {T(0), (rho - c) / (b - c), (b - rho) / (b - c)};
    } else {
        out.p0 = {(rho - b) / (a - b), (a - rho) / (a - b), T(0)};
    }
    out.p1 = {(rho - c) / (a - c), T(0), (a - rho) / (a - c)};
    return out;
}

ExtremalPair<double> extremal_measures(const TrinomialParams& p);

/// t P₀ + (1-t) P₁.
template <class T>
std::array<T, 3> mix(const ExtremalPair<T>& pair, const T& t) {
    return {t * pair.p0[0] + (T(1) - t) * pair.p1[0], t * pair.p0[1] + (T(1) - t) * pair.p1[1],
            t * pair.p0[2] + (T(1) - t) * pair.p1[2]};
}

/// The 2^N product measures P^j. Bit t of j picks the law of period t (0: P₀, 1: P₁), so
/// j = 0 is P₀ in every period.
struct ProductMeasureSet {
    ExtremalPair<double> pair;
    int periods = 0;
    /// prob(b, j) = P^j(path b); rows are the 3^N paths, columns the 2^N measures.
    Eigen::SparseMatrix<double, Eigen::RowMajor> prob;

    std::int64_t measure_count() const { return std::int64_t{1} << periods; }
    std::int64_t path_count() const { return prob.rows(); }
    double probability(std::int64_t j, std::int64_t path) const;
};

ProductMeasureSet product_measures(const ExtremalPair<double>& pair, int periods);

/// Path law of the martingale measure with per-period mixing weights t_n.
std::vector<double> interior_path_measure(const ExtremalPair<double>& pair, const std::vector<double>& t);

/// Weights w_j = Π_n (t_n or 1 - t_n) with Σ_j w_j P^j = the interior measure for t.
std::vector<double> convex_weights(const std::vector<double>& t);

/// Spreads a terminal-node anticipation over paths in proportion to the interior measure `t`
/// conditioned on each terminal node.
std::vector<double> lift_terminal_anticipation(const TrinomialLattice& lattice, const ExtremalPair<double>& pair,
                                               const std::vector<double>& t, const std::vector<double>& nu_terminal);

struct TrinomialSolverOptions {
    double tolerance = 1e-10;  ///< budget residual ∞-norm relative to v
    int max_newton = 200;
    int max_sweeps = 20000;    ///< coordinate-descent fallback
};

struct LambdaSystemSolution {
    std::vector<double> lambda;         ///< λ_j, j indexes the product measures
    std::vector<double> residuals;      ///< v - (1+r)^{-N} E^{P^j}[V̂_N] per j
    double residual_norm = 0.0;         ///< ∞-norm divided by v
    std::vector<double> history;        ///< residual_norm per iteration
    int iterations = 0;
    std::string method;                 ///< "newton" or "coordinate-descent"
};

/// Thrown when the λ system does not converge; carries the residual history.
class LambdaSystemError : public SolverError {
public:
    LambdaSystemError(const std::string& what, std::vector<double> history)
        : SolverError(what), history_(std::move(history)) {}
    const std::vector<double>& history() const { return history_; }

private:
    std::vector<double> history_;
};

/// Solves Σ_b P^i(b) V̂_N(b) = v(1+r)^N for every i, where
/// V̂_N(b) = I(Σ_j λ_j (1+r)^{-N} P^j(b)/ν(b)); ν is a path-level anticipation.
/// Damped Newton on the convex dual, with coordinate descent as fallback.
LambdaSystemSolution solve_lambda_system(const ProductMeasureSet& set, const Utility& u, const std::vector<double>& nu,
                                         double wealth, double r, bool pruning = false,
                                         const TrinomialSolverOptions& opts = {});

std::vector<double> optimal_terminal_wealth_trinomial(const std::vector<double>& lambda, const ProductMeasureSet& set,
                                                      const Utility& u, const std::vector<double>& nu, double r);

/// Discounted E^{P^j}[V] for every j.
std::vector<double> product_budgets(const ProductMeasureSet& set, const std::vector<double>& wealth, double r);

struct ReplicabilityReport {
    bool ok = true;
    double worst_mismatch = 0.0;  ///< relative difference between pairwise quotients
    int worst_period = -1;
    std::string worst_node;       ///< prefix label of the worst node
};

/// Wealth and holdings over path prefixes: values[n][prefix], prefix in [0, 3^n), digits as
/// in TrinomialLattice.
struct TrinomialTree {
    std::vector<std::vector<double>> wealth;
    std::vector<std::vector<double>> delta;  ///< from the (up, middle) quotient
    std::vector<std::vector<double>> bank;
    ReplicabilityReport replicability;
};

/// Backward induction of V̂_N under the interior measure with weights t (default 1/2 per
/// period), holdings from the (up, middle) pair, and a check that all three pairwise
/// quotients agree to `tolerance`.
TrinomialTree trinomial_wealth_and_delta(const std::vector<double>& terminal_wealth, const TrinomialLattice& lattice,
                                         const ExtremalPair<double>& pair, double r, std::vector<double> t = {},
                                         double tolerance = 1e-7);

/// Terminal wealth per path of the self-financing strategy in `tree` started from `wealth0`.
std::vector<double> simulate_trinomial(const TrinomialTree& tree, const TrinomialLattice& lattice, double r,
                                       double wealth0);

struct TrinomialSolution {
    ExtremalPair<double> pair;
    LambdaSystemSolution lambda;
    std::vector<double> nu;               ///< path-level anticipation used
    std::vector<double> terminal_wealth;  ///< per path
    double u = 0.0;
    double riskfree_utility = 0.0;
    TrinomialTree tree;
};

TrinomialSolution solve_trinomial(const TrinomialParams& p, const Utility& u, const std::vector<double>& nu_paths,
                                  bool pruning = false, std::vector<double> t = {},
                                  const TrinomialSolverOptions& opts = {});

}  // namespace weakinfo
