#pragma once

// Independent reference computations used by the unit and acceptance suites. Nothing here
// calls into the solver code paths it is used to check.

#include "weakinfo/market.hpp"
#include "weakinfo/rational.hpp"
#include "weakinfo/utility.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using weakinfo::Rational;

inline double binom(int n, int k) {
    double c = 1.0;
    for (int t = 1; t <= k; ++t) c = c * (n - k + t) / t;
    return c;
}

inline int downs_of(std::int64_t path, int upto) {
    int d = 0;
    for (int t = 0; t < upto; ++t) d += static_cast<int>((path >> t) & 1);
    return d;
}

/// P̃(S_N = i down-moves) with p̃ solved from p(1+h) + (1-p)(1-k) = 1+r.
inline std::vector<double> risk_neutral_terminal(double h, double k, double r, int N) {
    double p = ((1 + r) - (1 - k)) / ((1 + h) - (1 - k));
    std::vector<double> out;
    for (int i = 0; i <= N; ++i) out.push_back(binom(N, i) * std::pow(p, N - i) * std::pow(1 - p, i));
    return out;
}

/// Path law of the minimal measure straight from its definition:
/// P^ν(ω) = P̃(ω) ν(x) / P̃(S_N = x) on {S_N = x}.
template <class T>
std::vector<T> minimal_path_law(const T& p_up, const std::vector<T>& nu, int N) {
    std::vector<T> terminal(static_cast<std::size_t>(N + 1), T(0));
    std::vector<T> path(std::size_t{1} << N);
    for (std::int64_t b = 0; b < (std::int64_t{1} << N); ++b) {
        T pr(1);
        for (int t = 0; t < N; ++t) pr *= ((b >> t) & 1) ? T(1) - p_up : p_up;
        path[static_cast<std::size_t>(b)] = pr;
        terminal[static_cast<std::size_t>(downs_of(b, N))] += pr;
    }
    for (std::int64_t b = 0; b < (std::int64_t{1} << N); ++b) {
        auto x = static_cast<std::size_t>(downs_of(b, N));
        path[static_cast<std::size_t>(b)] = path[static_cast<std::size_t>(b)] * nu[x] / terminal[x];
    }
    return path;
}

/// Up-transition of a path law at node (n, i): mass of prefixes reaching the node and then
/// moving up, over mass reaching the node. Any prefix reaching the node gives the same answer
/// for Markov laws; the first one found is used.
template <class T>
T node_up_probability(const std::vector<T>& path, int N, int n, int i) {
    T reach(0), up(0);
    std::int64_t width = std::int64_t{1} << n;
    for (std::int64_t prefix = 0; prefix < width; ++prefix) {
        if (downs_of(prefix, n) != i) continue;
        T reach_p(0), up_p(0);
        for (std::int64_t b = 0; b < (std::int64_t{1} << N); ++b) {
            if ((b & (width - 1)) != prefix) continue;
            reach_p += path[static_cast<std::size_t>(b)];
            if (!((b >> n) & 1)) up_p += path[static_cast<std::size_t>(b)];
        }
        reach = reach_p;
        up = up_p;
        break;
    }
    return up / reach;
}

/// Self-financing forward recursion on the binomial lattice with holdings delta[n][i].
inline std::vector<double> forward_wealth(const std::vector<std::vector<double>>& delta, double s, double h, double k,
                                          double r, int N, double v0) {
    std::vector<double> out;
    for (std::int64_t b = 0; b < (std::int64_t{1} << N); ++b) {
        double w = v0;
        double price = s;
        int d = 0;
        for (int t = 0; t < N; ++t) {
            double hold = delta[static_cast<std::size_t>(t)][static_cast<std::size_t>(d)];
            double cash = w - hold * price;
            bool down = (b >> t) & 1;
            price *= down ? 1 - k : 1 + h;
            d += down;
            w = hold * price + cash * (1 + r);
        }
        out.push_back(w);
    }
    return out;
}

/// Largest |V̂_n| met along a path (at least 1): the magnitude the self-financing recursion
/// actually carries, used as the denominator of relative replication errors.
inline double path_wealth_scale(const std::vector<std::vector<double>>& wealth, std::int64_t path, int N) {
    double scale = 1.0;
    for (int n = 0; n <= N; ++n)
        scale = std::max(scale, std::abs(wealth[static_cast<std::size_t>(n)][static_cast<std::size_t>(downs_of(path, n))]));
    return scale;
}

/// Concave maximization of Σ ν_b U(V_b) over V with Aᵀ V = c·1 (A: paths × constraints),
/// by Newton's method on the null space of Aᵀ starting from the constant claim V ≡ c.
/// Primal counterpart to the dual multiplier solver.
inline double constrained_max(const Eigen::MatrixXd& a, const std::vector<double>& nu, const weakinfo::Utility& u,
                              double c, std::vector<double>* argmax = nullptr) {
    const Eigen::Index n = a.rows();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a.transpose());
    Eigen::MatrixXd kernel = lu.kernel();
    if (lu.dimensionOfKernel() == 0) kernel = Eigen::MatrixXd::Zero(n, 0);
    Eigen::VectorXd v0 = Eigen::VectorXd::Constant(n, c);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(kernel.cols());
    auto objective = [&](const Eigen::VectorXd& v) {
        double acc = 0.0;
        for (Eigen::Index b = 0; b < n; ++b) {
            if (u.requires_positive_wealth() && !(v(b) > 0)) return -std::numeric_limits<double>::infinity();
            acc += nu[static_cast<std::size_t>(b)] * u.evaluate(v(b));
        }
        return acc;
    };
    Eigen::VectorXd v = v0;
    double f = objective(v);
    for (int it = 0; it < 200 && kernel.cols() > 0; ++it) {
        Eigen::VectorXd g(n), w(n);
        for (Eigen::Index b = 0; b < n; ++b) {
            double nb = nu[static_cast<std::size_t>(b)];
            g(b) = nb * u.marginal(v(b));
            // U'' by family
            double second = 0.0;
            switch (u.kind()) {
                case weakinfo::UtilityKind::log: second = -1.0 / (v(b) * v(b)); break;
                case weakinfo::UtilityKind::power: second = (u.gamma() - 1.0) * std::pow(v(b), u.gamma() - 2.0); break;
                case weakinfo::UtilityKind::exponential: second = -u.alpha() * u.alpha() * std::exp(-u.alpha() * v(b)); break;
            }
            w(b) = nb * second;
        }
        Eigen::VectorXd grad = kernel.transpose() * g;
        if (grad.norm() < 1e-14 * std::max(1.0, std::abs(f))) break;
        Eigen::MatrixXd hess = kernel.transpose() * w.asDiagonal() * kernel;
        Eigen::VectorXd step = hess.ldlt().solve(-grad);
        double t = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 80; ++ls, t *= 0.5) {
            Eigen::VectorXd zt = z + t * step;
            Eigen::VectorXd vt = v0 + kernel * zt;
            double ft = objective(vt);
            if (ft >= f) {
                z = zt;
                v = vt;
                moved = ft > f;
                f = ft;
                break;
            }
        }
        if (!moved) break;
    }
    if (argmax) argmax->assign(v.data(), v.data() + v.size());
    return f;
}

/// Deterministic generator helpers.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

    /// Strictly positive probability vector, each entry at least `floor`.
    std::vector<double> simplex(std::size_t n, double floor = 0.01) {
        std::gamma_distribution<double> g(1.0, 1.0);
        std::vector<double> w(n);
        double total = 0.0;
        for (auto& x : w) total += (x = g(rng_));
        for (auto& x : w) x = floor + (1.0 - floor * static_cast<double>(n)) * x / total;
        double s = 0.0;
        for (double x : w) s += x;
        for (auto& x : w) x /= s;
        return w;
    }

    weakinfo::BinomialParams binomial(int max_periods) {
        weakinfo::BinomialParams p;
        p.r = uniform(0.0, 0.05);
        p.h = p.r + uniform(0.01, 0.15);
        p.k = -p.r + uniform(0.01, 0.2);
        p.s = uniform(5.0, 50.0);
        p.periods = integer(1, max_periods);
        p.wealth = uniform(10.0, 1000.0);
        return p;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

}  // namespace oracle
