#include "weakinfo/trinomial.hpp"

#include "weakinfo/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace weakinfo {

namespace {

std::int64_t pow3(int n) {
    std::int64_t out = 1;
    for (int i = 0; i < n; ++i) out *= 3;
    return out;
}

std::vector<double> default_weights(std::vector<double> t, int periods) {
    if (t.empty()) t.assign(static_cast<std::size_t>(periods), 0.5);
    if (static_cast<int>(t.size()) != periods)
        throw InvalidParameter("mixing vector t needs one entry per period");
    for (double x : t)
        if (!(x > 0.0 && x < 1.0)) throw InvalidParameter("mixing weights t_n must lie strictly inside (0, 1)");
    return t;
}

double inverse_marginal_slope(const Utility& u, double y) {
    // -I'(y) > 0
    return -u.inverse_marginal_derivative(y);
}

}  // namespace

ExtremalPair<double> extremal_measures(const TrinomialParams& p) {
    require_valid(p);
    return extremal_measures(p.a, p.b, p.c, p.r);
}

double ProductMeasureSet::probability(std::int64_t j, std::int64_t path) const {
    return prob.coeff(static_cast<Eigen::Index>(path), static_cast<Eigen::Index>(j));
}

ProductMeasureSet product_measures(const ExtremalPair<double>& pair, int periods) {
    if (periods < 1 || periods > kMaxTrinomialPeriods)
        throw InvalidParameter("product measures need 1 <= N <= " + std::to_string(kMaxTrinomialPeriods));
    ProductMeasureSet set;
    set.pair = pair;
    set.periods = periods;
    const std::int64_t paths = pow3(periods);
    std::vector<Eigen::Triplet<double>> entries;
    std::vector<std::pair<std::int64_t, double>> cur, next;
    for (std::int64_t b = 0; b < paths; ++b) {
        cur.assign(1, {0, 1.0});
        std::int64_t rest = b;
        for (int t = 0; t < periods; ++t, rest /= 3) {
            auto d = static_cast<std::size_t>(rest % 3);
            next.clear();
            for (const auto& [j, pr] : cur) {
                if (pair.p0[d] > 0) next.emplace_back(j, pr * pair.p0[d]);
                if (pair.p1[d] > 0) next.emplace_back(j | (std::int64_t{1} << t), pr * pair.p1[d]);
            }
            std::swap(cur, next);
        }
        for (const auto& [j, pr] : cur) entries.emplace_back(static_cast<int>(b), static_cast<int>(j), pr);
    }
    set.prob.resize(static_cast<Eigen::Index>(paths), static_cast<Eigen::Index>(set.measure_count()));
    set.prob.setFromTriplets(entries.begin(), entries.end());
    return set;
}

std::vector<double> interior_path_measure(const ExtremalPair<double>& pair, const std::vector<double>& t) {
    const int N = static_cast<int>(t.size());
    std::vector<std::array<double, 3>> q;
    for (double x : t) q.push_back(mix(pair, x));
    std::vector<double> out(static_cast<std::size_t>(pow3(N)));
    for (std::size_t b = 0; b < out.size(); ++b) {
        double pr = 1.0;
        std::size_t rest = b;
        for (int n = 0; n < N; ++n, rest /= 3) pr *= q[static_cast<std::size_t>(n)][rest % 3];
        out[b] = pr;
    }
    return out;
}

std::vector<double> convex_weights(const std::vector<double>& t) {
    const std::size_t count = std::size_t{1} << t.size();
    std::vector<double> w(count, 1.0);
    for (std::size_t j = 0; j < count; ++j)
        for (std::size_t n = 0; n < t.size(); ++n) w[j] *= ((j >> n) & 1) ? 1.0 - t[n] : t[n];
    return w;
}

std::vector<double> lift_terminal_anticipation(const TrinomialLattice& lattice, const ExtremalPair<double>& pair,
                                               const std::vector<double>& t, const std::vector<double>& nu_terminal) {
    std::vector<double> tt = default_weights(t, lattice.periods());
    if (nu_terminal.size() != lattice.terminal_count())
        throw InvalidParameter("terminal anticipation has " + std::to_string(nu_terminal.size()) + " entries, expected " +
                               std::to_string(lattice.terminal_count()));
    std::vector<double> q = interior_path_measure(pair, tt);
    std::vector<double> q_terminal(lattice.terminal_count(), 0.0);
    for (std::size_t b = 0; b < q.size(); ++b)
        q_terminal[static_cast<std::size_t>(lattice.path_terminal(static_cast<std::int64_t>(b)))] += q[b];
    std::vector<double> out(q.size());
    for (std::size_t b = 0; b < q.size(); ++b) {
        auto x = static_cast<std::size_t>(lattice.path_terminal(static_cast<std::int64_t>(b)));
        out[b] = nu_terminal[x] * q[b] / q_terminal[x];
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

/// The dual g(μ) = v(1+r)^N Σ μ_j + Σ_b ν_b Ũ((Pμ)_b / ν_b) restricted to paths with ν_b > 0.
class Dual {
public:
    Dual(const ProductMeasureSet& set, const Utility& u, const std::vector<double>& nu, double target)
        : u_(u), target_(target), cols_(set.prob) {
        for (std::size_t b = 0; b < nu.size(); ++b)
            if (nu[b] > 0) active_.push_back(static_cast<Eigen::Index>(b));
        a_.resize(static_cast<Eigen::Index>(active_.size()), set.prob.cols());
        std::vector<Eigen::Triplet<double>> entries;
        for (std::size_t k = 0; k < active_.size(); ++k)
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(set.prob, active_[k]); it; ++it)
                entries.emplace_back(static_cast<int>(k), static_cast<int>(it.col()), it.value());
        a_.setFromTriplets(entries.begin(), entries.end());
        nu_.resize(static_cast<Eigen::Index>(active_.size()));
        for (std::size_t k = 0; k < active_.size(); ++k) nu_(static_cast<Eigen::Index>(k)) = nu[static_cast<std::size_t>(active_[k])];
        cols_ = a_;
    }

    Eigen::Index dim() const { return a_.cols(); }

    /// y_b for every active path; false when some y_b <= 0.
    bool state_prices(const Eigen::VectorXd& mu, Eigen::VectorXd& y) const {
        y = (a_ * mu).cwiseQuotient(nu_);
        for (Eigen::Index k = 0; k < y.size(); ++k)
            if (!(y(k) > 0) || !std::isfinite(y(k))) return false;
        return true;
    }

    double value(const Eigen::VectorXd& mu, const Eigen::VectorXd& y) const {
        double acc = target_ * mu.sum();
        for (Eigen::Index k = 0; k < y.size(); ++k) acc += nu_(k) * u_.conjugate(y(k));
        return acc;
    }

    Eigen::VectorXd wealth(const Eigen::VectorXd& y) const {
        Eigen::VectorXd w(y.size());
        for (Eigen::Index k = 0; k < y.size(); ++k) w(k) = u_.inverse_marginal(y(k));
        return w;
    }

    /// ∇g = target - Pᵀ V.
    Eigen::VectorXd gradient(const Eigen::VectorXd& y) const {
        return Eigen::VectorXd::Constant(dim(), target_) - a_.transpose() * wealth(y);
    }

    Eigen::MatrixXd hessian(const Eigen::VectorXd& y) const {
        Eigen::VectorXd w(y.size());
        for (Eigen::Index k = 0; k < y.size(); ++k) w(k) = inverse_marginal_slope(u_, y(k)) / nu_(k);
        Eigen::SparseMatrix<double> h = a_.transpose() * w.asDiagonal() * a_;
        return Eigen::MatrixXd(h);
    }

    /// Partial derivative along coordinate j at μ + s e_j, given z = Pμ.
    double partial(const Eigen::VectorXd& z, Eigen::Index j, double s) const {
        double acc = target_;
        for (Eigen::SparseMatrix<double>::InnerIterator it(cols_, j); it; ++it) {
            double y = (z(it.row()) + s * it.value()) / nu_(it.row());
            acc -= it.value() * u_.inverse_marginal(y);
        }
        return acc;
    }

    /// Smallest s keeping every y positive along coordinate j.
    double lower_step(const Eigen::VectorXd& z, Eigen::Index j) const {
        double lo = -std::numeric_limits<double>::infinity();
        for (Eigen::SparseMatrix<double>::InnerIterator it(cols_, j); it; ++it) lo = std::max(lo, -z(it.row()) / it.value());
        return lo;
    }

    const Eigen::SparseMatrix<double>& matrix() const { return cols_; }

private:
    const Utility& u_;
    double target_;
    std::vector<Eigen::Index> active_;
    Eigen::SparseMatrix<double, Eigen::RowMajor> a_;
    Eigen::SparseMatrix<double> cols_;
    Eigen::VectorXd nu_;
};

Eigen::VectorXd initial_multipliers(const ProductMeasureSet& set, const Utility& u, const std::vector<double>& nu,
                                    double wealth, double r, bool pruning) {
    // Collapse to the complete market under t = 1/2: Σ_j 2^{-N} P^j is that interior measure.
    std::vector<double> half(static_cast<std::size_t>(set.periods), 0.5);
    TerminalProblem prob;
    prob.risk_neutral = interior_path_measure(set.pair, half);
    prob.nu = nu;
    prob.pruning = pruning;
    prob.growth = std::pow(1.0 + r, set.periods);
    prob.wealth = wealth;
    prob.periods = set.periods;
    prob.rate = r;
    SolverOptions o;
    o.tolerance = 1e-6;
    LambdaSolution lam = solve_lambda(prob, u, LambdaMethod::numeric, o);
    double mu = std::exp(lam.log_lambda - std::log(prob.growth) - set.periods * std::log(2.0));
    return Eigen::VectorXd::Constant(set.prob.cols(), mu);
}

bool newton(const Dual& dual, Eigen::VectorXd& mu, double target, const TrinomialSolverOptions& opts,
            LambdaSystemSolution& sol) {
    Eigen::VectorXd y;
    if (!dual.state_prices(mu, y)) return false;
    double g = dual.value(mu, y);
    for (int it = 0; it < opts.max_newton; ++it) {
        Eigen::VectorXd grad = dual.gradient(y);
        double res = grad.cwiseAbs().maxCoeff() / target;
        sol.history.push_back(res);
        if (res <= opts.tolerance) return true;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(dual.hessian(y));
        if (ldlt.info() != Eigen::Success) return false;
        Eigen::VectorXd step = ldlt.solve(-grad);
        if (!step.allFinite()) return false;
        double slope = grad.dot(step);
        double s = 1.0;
        bool moved = false;
        for (int k = 0; k < 60; ++k, s *= 0.5) {
            Eigen::VectorXd trial = mu + s * step;
            Eigen::VectorXd ty;
            if (!dual.state_prices(trial, ty)) continue;
            double tg = dual.value(trial, ty);
            double tres = dual.gradient(ty).cwiseAbs().maxCoeff() / target;
            // Near the optimum g is flat to rounding; a falling residual also counts as progress.
            if (tg <= g + 1e-4 * s * slope || tres < res) {
                mu = trial;
                y = ty;
                g = tg;
                moved = true;
                break;
            }
        }
        ++sol.iterations;
        if (!moved) return false;
    }
    return false;
}

bool coordinate_descent(const Dual& dual, Eigen::VectorXd& mu, double target, const TrinomialSolverOptions& opts,
                        LambdaSystemSolution& sol) {
    Eigen::VectorXd z = dual.matrix() * mu;
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        for (Eigen::Index j = 0; j < dual.dim(); ++j) {
            // ∂g/∂μ_j is increasing in the step s; bracket its root then bisect.
            double lo = dual.lower_step(z, j);
            double hi = 1.0;
            double scale = std::max(std::abs(mu(j)), 1e-300);
            hi = scale;
            int guard = 0;
            while (dual.partial(z, j, hi) < 0 && ++guard < 2000) hi *= 2;
            if (!std::isfinite(lo)) {
                lo = -scale;
                guard = 0;
                while (dual.partial(z, j, lo) > 0 && ++guard < 2000) lo *= 2;
            }
            for (int k = 0; k < 200; ++k) {
                double mid = 0.5 * (lo + hi);
                if (mid == lo || mid == hi) break;
                (dual.partial(z, j, mid) > 0 ? hi : lo) = mid;
            }
            double s = 0.5 * (lo + hi);
            mu(j) += s;
            for (Eigen::SparseMatrix<double>::InnerIterator it(dual.matrix(), j); it; ++it) z(it.row()) += s * it.value();
        }
        ++sol.iterations;
        Eigen::VectorXd y;
        if (!dual.state_prices(mu, y)) continue;
        double res = dual.gradient(y).cwiseAbs().maxCoeff() / target;
        sol.history.push_back(res);
        if (res <= opts.tolerance) return true;
    }
    return false;
}

}  // namespace

LambdaSystemSolution solve_lambda_system(const ProductMeasureSet& set, const Utility& u, const std::vector<double>& nu,
                                         double wealth, double r, bool pruning, const TrinomialSolverOptions& opts) {
    require_anticipation(nu, static_cast<std::size_t>(set.path_count()), pruning);
    if (pruning && u.kind() == UtilityKind::exponential)
        for (double w : nu)
            if (w == 0.0) throw DomainError("exponential utility cannot prune paths: I(+inf) = -inf");
    if (!(wealth > 0) && u.requires_positive_wealth())
        throw DomainError("initial wealth must be positive for " + u.name() + " utility");

    const double growth = std::pow(1.0 + r, set.periods);
    const double target = wealth * growth;
    Dual dual(set, u, nu, target);
    LambdaSystemSolution sol;
    Eigen::VectorXd mu = initial_multipliers(set, u, nu, wealth, r, pruning);
    Eigen::VectorXd start = mu;
    bool ok = newton(dual, mu, target, opts, sol);
    sol.method = "newton";
    if (!ok) {
        mu = start;
        sol.method = "coordinate-descent";
        ok = coordinate_descent(dual, mu, target, opts, sol);
    }
    Eigen::VectorXd y;
    if (!dual.state_prices(mu, y))
        throw LambdaSystemError("lambda system left the domain: some I argument is nonpositive", sol.history);
    Eigen::VectorXd grad = dual.gradient(y);
    sol.residuals.resize(static_cast<std::size_t>(grad.size()));
    for (Eigen::Index j = 0; j < grad.size(); ++j) sol.residuals[static_cast<std::size_t>(j)] = grad(j) / growth;
    sol.residual_norm = grad.cwiseAbs().maxCoeff() / target;
    sol.lambda.resize(static_cast<std::size_t>(mu.size()));
    for (Eigen::Index j = 0; j < mu.size(); ++j) sol.lambda[static_cast<std::size_t>(j)] = mu(j) * growth;
    if (!ok) {
        std::ostringstream os;
        os.precision(3);
        os << "lambda system did not converge: residual " << sol.residual_norm << " after " << sol.iterations
           << " iterations (tolerance " << opts.tolerance << ")";
        throw LambdaSystemError(os.str(), sol.history);
    }
    return sol;
}

std::vector<double> optimal_terminal_wealth_trinomial(const std::vector<double>& lambda, const ProductMeasureSet& set,
                                                      const Utility& u, const std::vector<double>& nu, double r) {
    if (static_cast<std::int64_t>(lambda.size()) != set.measure_count())
        throw InvalidParameter("lambda needs one entry per product measure");
    const double growth = std::pow(1.0 + r, set.periods);
    Eigen::Map<const Eigen::VectorXd> lam(lambda.data(), static_cast<Eigen::Index>(lambda.size()));
    Eigen::VectorXd z = set.prob * lam / growth;
    std::vector<double> out(nu.size(), 0.0);
    for (std::size_t b = 0; b < nu.size(); ++b) {
        if (nu[b] == 0.0) {
            if (u.kind() == UtilityKind::exponential) throw DomainError("exponential utility needs nu > 0 on every path");
            continue;
        }
        double y = z(static_cast<Eigen::Index>(b)) / nu[b];
        if (!(y > 0)) throw DomainError("I argument is nonpositive on path " + path_label(3, set.periods, static_cast<std::int64_t>(b)));
        out[b] = u.inverse_marginal(y);
    }
    return out;
}

std::vector<double> product_budgets(const ProductMeasureSet& set, const std::vector<double>& wealth, double r) {
    Eigen::Map<const Eigen::VectorXd> w(wealth.data(), static_cast<Eigen::Index>(wealth.size()));
    Eigen::VectorXd e = set.prob.transpose() * w / std::pow(1.0 + r, set.periods);
    return {e.data(), e.data() + e.size()};
}

// ---------------------------------------------------------------------------

TrinomialTree trinomial_wealth_and_delta(const std::vector<double>& terminal_wealth, const TrinomialLattice& lattice,
                                         const ExtremalPair<double>& pair, double r, std::vector<double> t,
                                         double tolerance) {
    const int N = lattice.periods();
    t = default_weights(std::move(t), N);
    if (static_cast<std::int64_t>(terminal_wealth.size()) != lattice.path_count())
        throw InvalidParameter("terminal wealth needs one entry per path");
    const double rho = 1.0 + r;
    TrinomialTree tree;
    tree.wealth.resize(static_cast<std::size_t>(N + 1));
    tree.delta.resize(static_cast<std::size_t>(N));
    tree.bank.resize(static_cast<std::size_t>(N));
    tree.wealth[static_cast<std::size_t>(N)] = terminal_wealth;

    std::int64_t width = lattice.path_count();
    for (int n = N - 1; n >= 0; --n) {
        width /= 3;
        const auto q = mix(pair, t[static_cast<std::size_t>(n)]);
        const auto& next = tree.wealth[static_cast<std::size_t>(n + 1)];
        auto& layer = tree.wealth[static_cast<std::size_t>(n)];
        auto& delta = tree.delta[static_cast<std::size_t>(n)];
        auto& bank = tree.bank[static_cast<std::size_t>(n)];
        layer.resize(static_cast<std::size_t>(width));
        delta.resize(static_cast<std::size_t>(width));
        bank.resize(static_cast<std::size_t>(width));
        for (std::int64_t prefix = 0; prefix < width; ++prefix) {
            double vu = next[static_cast<std::size_t>(prefix)];
            double vm = next[static_cast<std::size_t>(prefix + width)];
            double vd = next[static_cast<std::size_t>(prefix + 2 * width)];
            double v = (q[0] * vu + q[1] * vm + q[2] * vd) / rho;
            auto node = lattice.path_node(prefix, n);
            double s = lattice.price(n, node.ups, node.mids);
            double su = s * lattice.factor(0), sm = s * lattice.factor(1), sd = s * lattice.factor(2);
            double d_um = (vu - vm) / (su - sm);
            double d_md = (vm - vd) / (sm - sd);
            double d_ud = (vu - vd) / (su - sd);
            double scale = std::max({std::abs(d_um), std::abs(v) / s, 1e-300});
            double mismatch = std::max(std::abs(d_md - d_um), std::abs(d_ud - d_um)) / scale;
            if (mismatch > tree.replicability.worst_mismatch) {
                tree.replicability.worst_mismatch = mismatch;
                tree.replicability.worst_period = n;
                tree.replicability.worst_node = n == 0 ? "root" : path_label(3, n, prefix);
            }
            layer[static_cast<std::size_t>(prefix)] = v;
            delta[static_cast<std::size_t>(prefix)] = d_um;
            bank[static_cast<std::size_t>(prefix)] = v - d_um * s;
        }
    }
    tree.replicability.ok = tree.replicability.worst_mismatch <= tolerance;
    return tree;
}

std::vector<double> simulate_trinomial(const TrinomialTree& tree, const TrinomialLattice& lattice, double r,
                                       double wealth0) {
    const int N = lattice.periods();
    std::vector<double> out(static_cast<std::size_t>(lattice.path_count()));
    for (std::int64_t b = 0; b < lattice.path_count(); ++b) {
        double w = wealth0;
        std::int64_t width = 1;
        for (int n = 0; n < N; ++n) {
            std::int64_t prefix = b % width;
            auto node = lattice.path_node(b, n);
            double s = lattice.price(n, node.ups, node.mids);
            double delta = tree.delta[static_cast<std::size_t>(n)][static_cast<std::size_t>(prefix)];
            double cash = w - delta * s;
            w = delta * s * lattice.factor(lattice.path_outcome(b, n)) + cash * (1.0 + r);
            width *= 3;
        }
        out[static_cast<std::size_t>(b)] = w;
    }
    return out;
}

TrinomialSolution solve_trinomial(const TrinomialParams& p, const Utility& u, const std::vector<double>& nu_paths,
                                  bool pruning, std::vector<double> t, const TrinomialSolverOptions& opts) {
    TrinomialLattice lattice(p);
    TrinomialSolution sol;
    sol.pair = extremal_measures(p);
    ProductMeasureSet set = product_measures(sol.pair, p.periods);
    sol.nu = nu_paths;
    sol.lambda = solve_lambda_system(set, u, nu_paths, p.wealth, p.r, pruning, opts);
    sol.terminal_wealth = optimal_terminal_wealth_trinomial(sol.lambda.lambda, set, u, nu_paths, p.r);
    for (std::size_t b = 0; b < nu_paths.size(); ++b)
        if (nu_paths[b] > 0) sol.u += nu_paths[b] * u.evaluate(sol.terminal_wealth[b]);
    sol.riskfree_utility = u.evaluate(p.wealth * std::pow(1.0 + p.r, p.periods));
    sol.tree = trinomial_wealth_and_delta(sol.terminal_wealth, lattice, sol.pair, p.r, std::move(t));
    return sol;
}

}  // namespace weakinfo
