#pragma once

#include "weakinfo/errors.hpp"
#include "weakinfo/market.hpp"
#include "weakinfo/rational.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace weakinfo {

/// Anticipated law ν of the terminal price, one weight per terminal node (binomial: index =
/// number of down-moves). Zero weights are only accepted in pruning mode.
struct Anticipation {
    std::vector<double> weights;
    bool pruning = false;

    static Anticipation validated(std::vector<double> weights, bool pruning = false);
    std::size_t size() const { return weights.size(); }
    double operator[](std::size_t i) const { return weights[i]; }
};

/// Checks ν against a terminal set of `terminal_count` nodes; throws InvalidParameter.
void require_anticipation(const std::vector<double>& nu, std::size_t terminal_count, bool pruning);

/// Label of a path on a lattice with the given branching ("UUD", "UMD", or "0.2.1").
std::string path_label(int branching, int periods, std::int64_t path);

/// Probability measure on paths of a tree with fixed branching; `terminal[b]` maps each path
/// to its terminal node.
template <class T>
struct PathMeasure {
    int branching = 2;
    int periods = 0;
    std::vector<T> prob;
    std::vector<int> terminal;
    std::size_t terminal_count = 0;

    std::vector<T> terminal_distribution() const {
        std::vector<T> out(terminal_count, T(0));
        for (std::size_t b = 0; b < prob.size(); ++b) out[static_cast<std::size_t>(terminal[b])] += prob[b];
        return out;
    }
};

/// Markov measure on the binomial lattice: up(n, i) is the probability of moving up from the
/// node with i down-moves at time n.
template <class T>
class BinomialMeasure {
public:
    BinomialMeasure() = default;
    BinomialMeasure(int periods, std::vector<std::vector<T>> up) : periods_(periods), up_(std::move(up)) {
        if (static_cast<int>(up_.size()) != periods_) throw InvalidParameter("measure tree needs one layer per period");
        for (int n = 0; n < periods_; ++n)
            if (static_cast<int>(up_[static_cast<std::size_t>(n)].size()) != n + 1)
                throw InvalidParameter("measure tree layer " + std::to_string(n) + " must have n+1 nodes");
    }

    static BinomialMeasure constant(int periods, const T& p) {
        std::vector<std::vector<T>> up;
        for (int n = 0; n < periods; ++n) up.emplace_back(static_cast<std::size_t>(n + 1), p);
        return BinomialMeasure(periods, std::move(up));
    }

    int periods() const { return periods_; }
    const T& up(int n, int i) const { return up_[static_cast<std::size_t>(n)][static_cast<std::size_t>(i)]; }
    T down(int n, int i) const { return T(1) - up(n, i); }

    /// Probability of reaching each node (n, 0..n).
    std::vector<T> node_probabilities(int n) const {
        std::vector<T> cur{T(1)};
        for (int t = 0; t < n; ++t) {
            std::vector<T> next(static_cast<std::size_t>(t + 2), T(0));
            for (int i = 0; i <= t; ++i) {
                next[static_cast<std::size_t>(i)] += cur[static_cast<std::size_t>(i)] * up(t, i);
                next[static_cast<std::size_t>(i + 1)] += cur[static_cast<std::size_t>(i)] * down(t, i);
            }
            cur = std::move(next);
        }
        return cur;
    }

    std::vector<T> terminal_distribution() const { return node_probabilities(periods_); }

    T path_probability(std::int64_t path) const {
        T p(1);
        int downs = 0;
        for (int t = 0; t < periods_; ++t) {
            bool is_down = (path >> t) & 1;
            p *= is_down ? down(t, downs) : up(t, downs);
            downs += is_down;
        }
        return p;
    }

    PathMeasure<T> path_measure() const {
        PathMeasure<T> m;
        m.branching = 2;
        m.periods = periods_;
        m.terminal_count = static_cast<std::size_t>(periods_ + 1);
        std::int64_t count = std::int64_t{1} << periods_;
        m.prob.reserve(static_cast<std::size_t>(count));
        m.terminal.reserve(static_cast<std::size_t>(count));
        for (std::int64_t b = 0; b < count; ++b) {
            m.prob.push_back(path_probability(b));
            int downs = 0;
            for (int t = 0; t < periods_; ++t) downs += static_cast<int>((b >> t) & 1);
            m.terminal.push_back(downs);
        }
        return m;
    }

private:
    int periods_ = 0;
    std::vector<std::vector<T>> up_;
};

/// Unique martingale measure of the binomial market: p̃ = (r+k)/(h+k) at every node.
template <class T>
BinomialMeasure<T> risk_neutral_binomial(const T& h, const T& k, const T& r, int periods) {
    if (!(h > r) || !(r > -k)) throw InvalidParameter("no-arbitrage requires h > r > -k");
    return BinomialMeasure<T>::constant(periods, T((r + k) / (h + k)));
}

inline BinomialMeasure<double> risk_neutral_binomial(const BinomialParams& p) {
    require_valid(p);
    return risk_neutral_binomial<double>(p.h, p.k, p.r, p.periods);
}

/// Minimal measure P^ν(ω) = Σ_x P̃(ω | S_N = x) ν(x), as Markov transitions on the lattice.
/// Computed as an h-transform of P̃ with terminal weights ν(x)/P̃(S_N = x). Nodes that P^ν
/// cannot reach (pruning mode) keep P̃'s transition.
template <class T>
BinomialMeasure<T> minimal_measure(const BinomialMeasure<T>& base, const std::vector<T>& nu) {
    const int N = base.periods();
    if (nu.size() != static_cast<std::size_t>(N + 1))
        throw InvalidParameter("anticipation has " + std::to_string(nu.size()) + " entries, lattice has " +
                               std::to_string(N + 1) + " terminal nodes");
    std::vector<T> terminal = base.terminal_distribution();
    std::vector<T> h(static_cast<std::size_t>(N + 1));
    for (int x = 0; x <= N; ++x) {
        if (!(terminal[static_cast<std::size_t>(x)] > T(0)))
            throw InvalidParameter("base measure gives terminal node " + std::to_string(x) + " zero probability");
        h[static_cast<std::size_t>(x)] = nu[static_cast<std::size_t>(x)] / terminal[static_cast<std::size_t>(x)];
    }
    std::vector<std::vector<T>> up(static_cast<std::size_t>(N));
    for (int n = N - 1; n >= 0; --n) {
        std::vector<T> hn(static_cast<std::size_t>(n + 1));
        auto& layer = up[static_cast<std::size_t>(n)];
        layer.resize(static_cast<std::size_t>(n + 1));
        for (int i = 0; i <= n; ++i) {
            T pu = base.up(n, i);
            T via_up = pu * h[static_cast<std::size_t>(i)];
            T total = via_up + (T(1) - pu) * h[static_cast<std::size_t>(i + 1)];
            hn[static_cast<std::size_t>(i)] = total;
            layer[static_cast<std::size_t>(i)] = total > T(0) ? T(via_up / total) : pu;
        }
        h = std::move(hn);
    }
    return BinomialMeasure<T>(N, std::move(up));
}

/// Path-level minimal measure for any tree: P^ν(b) = P̃(b) ν(x) / P̃(S_N = x).
template <class T>
PathMeasure<T> minimal_measure(const PathMeasure<T>& base, const std::vector<T>& nu) {
    if (nu.size() != base.terminal_count) throw InvalidParameter("anticipation size does not match the terminal set");
    std::vector<T> terminal = base.terminal_distribution();
    PathMeasure<T> out = base;
    for (std::size_t b = 0; b < base.prob.size(); ++b) {
        auto x = static_cast<std::size_t>(base.terminal[b]);
        out.prob[b] = base.prob[b] * nu[x] / terminal[x];
    }
    return out;
}

/// Closed-form P^ν transitions of the N-period binomial model when P̃ has constant p̃.
/// `remaining` = l is the number of periods left (the node sits at time N - l) and `downs` = i.
/// Returns {up, down}.
template <class T>
std::pair<T, T> binomial_transition_formula(int periods, int remaining, int downs, const std::vector<T>& nu) {
    const int N = periods;
    const int l = remaining;
    const int i = downs;
    if (l < 1 || l > N) throw InvalidParameter("remaining periods l must lie in [1, N]");
    if (i < 0 || i > N - l) throw InvalidParameter("down count i must lie in [0, N-l]");
    if (nu.size() != static_cast<std::size_t>(N + 1)) throw InvalidParameter("anticipation must have N+1 entries");

    auto binom = [](int n, int k) {
        T c(1);
        for (int t = 1; t <= k; ++t) c = c * T(n - k + t) / T(t);
        return c;
    };
    // (from)(from-1)...(to), empty product = 1
    auto falling = [](int from, int to) {
        T p(1);
        for (int f = from; f >= to; --f) p *= T(f);
        return p;
    };
    auto rising = [](int first, int last) {
        T p(1);
        for (int f = first; f <= last; ++f) p *= T(f);
        return p;
    };

    T denominator(0);
    for (int j = 0; j <= l; ++j)
        denominator += binom(l, j) * falling(N - i - j, N - i - (l - 1)) * rising(i + 1, i + j) *
                       nu[static_cast<std::size_t>(i + j)];
    T up_num(0);
    T down_num(0);
    for (int j = 0; j <= l - 1; ++j) {
        up_num += binom(l - 1, j) * falling(N - i - j, N - i - (l - 1)) * rising(i + 1, i + j) *
                  nu[static_cast<std::size_t>(i + j)];
        down_num += binom(l - 1, j) * falling(N - i - j - 1, N - i - (l - 1)) * rising(i + 1, i + j + 1) *
                    nu[static_cast<std::size_t>(i + j + 1)];
    }
    if (!(denominator > T(0))) throw InvalidParameter("node is unreachable under the anticipation");
    return {T(up_num / denominator), T(down_num / denominator)};
}

template <class T>
struct RadonNikodym {
    std::vector<T> ratio;        ///< dP/dQ per path
    bool terminal_measurable = false;
    std::vector<T> terminal_ratio;  ///< per terminal node, filled when terminal_measurable
};

/// Per-path density dP/dQ. Flags terminal-measurability (exact for Rational, 1e-12 relative
/// for double).
template <class T>
RadonNikodym<T> radon_nikodym(const PathMeasure<T>& p, const PathMeasure<T>& q) {
    if (p.prob.size() != q.prob.size()) throw InvalidParameter("measures live on different path sets");
    RadonNikodym<T> out;
    out.ratio.resize(p.prob.size());
    for (std::size_t b = 0; b < p.prob.size(); ++b) {
        if (!(q.prob[b] > T(0)))
            throw InvalidParameter("division by zero: reference measure vanishes on path " +
                                   path_label(q.branching, q.periods, static_cast<std::int64_t>(b)));
        out.ratio[b] = p.prob[b] / q.prob[b];
    }
    std::vector<T> seen(q.terminal_count, T(0));
    std::vector<bool> has(q.terminal_count, false);
    out.terminal_measurable = true;
    for (std::size_t b = 0; b < p.prob.size(); ++b) {
        auto x = static_cast<std::size_t>(q.terminal[b]);
        if (!has[x]) {
            has[x] = true;
            seen[x] = out.ratio[b];
        } else if (!near_equal(seen[x], out.ratio[b])) {
            out.terminal_measurable = false;
        }
    }
    if (out.terminal_measurable) out.terminal_ratio = std::move(seen);
    return out;
}

/// Brute-force check that P^ν minimizes E^{P̃}[φ(dQ/dP̃)] over Q with terminal law ν.
struct MinimalityCheck {
    std::string phi;
    double minimal_value = 0.0;  ///< E^{P̃}[φ(dP^ν/dP̃)]
    double best_sampled = 0.0;   ///< smallest E^{P̃}[φ(dQ/dP̃)] over the samples
    double margin = 0.0;         ///< best_sampled - minimal_value
    int violations = 0;
};

struct MinimalityReport {
    int samples = 0;
    std::vector<MinimalityCheck> checks;
    bool ok(double tol = 1e-9) const {
        for (const auto& c : checks)
            if (c.margin < -tol) return false;
        return true;
    }
};

struct MinimalityOptions {
    int samples = 10000;
    std::uint64_t seed = 7;
    double tolerance = 1e-9;
};

MinimalityReport verify_minimality(const BinomialMeasure<double>& risk_neutral, const std::vector<double>& nu,
                                   const MinimalityOptions& opts = {});

/// Martingale test: E[S_{n+1} | node] = (1+r) S_node at every node, within `tol` relative.
bool is_martingale(const BinomialMeasure<double>& m, const BinomialLattice& lattice, double r, double tol = 1e-10);

}  // namespace weakinfo
