#include "weakinfo/complete_solver.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <sstream>
#include <thread>

namespace weakinfo {

namespace {

constexpr double kLn10 = 2.302585092994045684;

double binomial_coefficient(int n, int k) {
    double c = 1.0;
    for (int t = 1; t <= k; ++t) c = c * (n - k + t) / t;
    return c;
}

void require_exponential_support(const TerminalProblem& prob, const Utility& u) {
    if (u.kind() != UtilityKind::exponential) return;
    for (double w : prob.nu)
        if (w == 0.0) throw DomainError("exponential utility cannot prune terminal nodes: I(+inf) = -inf");
}

/// log of λ(1+r)^{-N} dP̃/dP^ν at terminal x.
double log_state_price(const TerminalProblem& prob, std::size_t x, double log_lambda) {
    return log_lambda - std::log(prob.growth) + std::log(prob.risk_neutral[x]) - std::log(prob.nu[x]);
}

}  // namespace

TerminalProblem make_terminal_problem(const BinomialParams& p, const Anticipation& nu) {
    require_valid(p);
    require_anticipation(nu.weights, static_cast<std::size_t>(p.periods + 1), nu.pruning);
    TerminalProblem prob;
    double pt = (p.r + p.k) / (p.h + p.k);
    for (int i = 0; i <= p.periods; ++i)
        prob.risk_neutral.push_back(binomial_coefficient(p.periods, i) * std::pow(pt, p.periods - i) * std::pow(1.0 - pt, i));
    prob.nu = nu.weights;
    prob.pruning = nu.pruning;
    prob.growth = std::pow(1.0 + p.r, p.periods);
    prob.wealth = p.wealth;
    prob.periods = p.periods;
    prob.rate = p.r;
    return prob;
}

TerminalProblem make_terminal_problem(const CompleteMarket& m, const Anticipation& nu) {
    require_anticipation(nu.weights, m.terminal_count(), nu.pruning);
    TerminalProblem prob;
    prob.risk_neutral.assign(m.terminal_count(), 0.0);
    for (std::int64_t b = 0; b < m.path_count(); ++b) {
        double pr = 1.0;
        for (int t = 0; t < m.periods(); ++t) pr *= m.martingale_weights(t)(m.path_state(b, t));
        prob.risk_neutral[static_cast<std::size_t>(m.path_terminal(b))] += pr;
    }
    prob.nu = nu.weights;
    prob.pruning = nu.pruning;
    prob.growth = std::pow(1.0 + m.spec().r, m.periods());
    prob.wealth = m.spec().wealth;
    prob.periods = m.periods();
    prob.rate = m.spec().r;
    return prob;
}

double budget(const TerminalProblem& prob, const Utility& u, double log_lambda) {
    double acc = 0.0;
    for (std::size_t x = 0; x < prob.nu.size(); ++x) {
        if (prob.nu[x] == 0.0) continue;
        acc += prob.risk_neutral[x] * u.inverse_marginal_log(log_state_price(prob, x, log_lambda));
    }
    return acc / prob.growth;
}

namespace {

double budget_slope(const TerminalProblem& prob, const Utility& u, double log_lambda) {
    double acc = 0.0;
    for (std::size_t x = 0; x < prob.nu.size(); ++x) {
        if (prob.nu[x] == 0.0) continue;
        acc += prob.risk_neutral[x] * u.inverse_marginal_log_slope(log_state_price(prob, x, log_lambda));
    }
    return acc / prob.growth;
}

/// E1 = Ẽ[Z^{1/(γ-1)}], Z = dP̃/dP^ν.
double power_moment(const TerminalProblem& prob, double gamma) {
    double e1 = 0.0;
    for (std::size_t x = 0; x < prob.nu.size(); ++x) {
        if (prob.nu[x] == 0.0) continue;
        double log_z = std::log(prob.risk_neutral[x]) - std::log(prob.nu[x]);
        e1 += prob.risk_neutral[x] * std::exp(log_z / (gamma - 1.0));
    }
    return e1;
}

/// Ẽ[ln Z].
double log_density_mean(const TerminalProblem& prob) {
    double acc = 0.0;
    for (std::size_t x = 0; x < prob.nu.size(); ++x)
        acc += prob.risk_neutral[x] * (std::log(prob.risk_neutral[x]) - std::log(prob.nu[x]));
    return acc;
}

double closed_form_log_lambda(const TerminalProblem& prob, const Utility& u) {
    const double v = prob.wealth;
    switch (u.kind()) {
        case UtilityKind::log: return -std::log(v);
        case UtilityKind::power: {
            double g = u.gamma();
            return (g - 1.0) * (std::log(v) - std::log(power_moment(prob, g))) + g * std::log(prob.growth);
        }
        case UtilityKind::exponential: {
            double a = u.alpha();
            return std::log(a) + std::log(prob.growth) - v * a * prob.growth - log_density_mean(prob);
        }
    }
    return 0.0;
}

LambdaSolution numeric_lambda(const TerminalProblem& prob, const Utility& u, const SolverOptions& opts) {
    const double v = prob.wealth;
    auto excess = [&](double l) { return budget(prob, u, l) - v; };
    LambdaSolution sol;

    // The budget map is strictly decreasing in λ; scan by factors of 10 from λ = 1.
    double lo = 0.0, hi = 0.0;
    double f0 = excess(0.0);
    int steps = 0;
    if (f0 > 0) {
        hi = kLn10;
        while (excess(hi) > 0) {
            lo = hi;
            hi += kLn10;
            if (++steps > opts.max_bracket_steps) {
                std::ostringstream os;
                os << "could not bracket lambda: budget exceeds v on lambda in [1, 1e" << steps << "]";
                throw SolverError(os.str());
            }
        }
    } else if (f0 < 0) {
        lo = -kLn10;
        while (excess(lo) < 0) {
            hi = lo;
            lo -= kLn10;
            if (++steps > opts.max_bracket_steps) {
                std::ostringstream os;
                os << "could not bracket lambda: budget below v on lambda in [1e-" << steps << ", 1]";
                throw SolverError(os.str());
            }
        }
    }
    sol.iterations = steps;
    if (f0 != 0) {
        for (int it = 0; it < opts.max_bisections && hi - lo > 1e-12 * std::max(1.0, std::abs(lo)); ++it) {
            double mid = 0.5 * (lo + hi);
            (excess(mid) > 0 ? lo : hi) = mid;
            ++sol.iterations;
        }
    }
    double l = f0 == 0 ? 0.0 : 0.5 * (lo + hi);
    double slope = budget_slope(prob, u, l);
    if (slope != 0.0 && std::isfinite(slope)) {
        double polished = l - excess(l) / slope;
        if (std::isfinite(polished) && std::abs(excess(polished)) <= std::abs(excess(l))) l = polished;
    }
    sol.log_lambda = l;
    return sol;
}

}  // namespace

LambdaSolution solve_lambda(const TerminalProblem& prob, const Utility& u, LambdaMethod method, const SolverOptions& opts) {
    if (!(prob.wealth > 0) && u.requires_positive_wealth())
        throw DomainError("initial wealth must be positive for " + u.name() + " utility");
    require_exponential_support(prob, u);
    LambdaSolution sol;
    if (method == LambdaMethod::numeric) {
        sol = numeric_lambda(prob, u, opts);
    } else {
        sol.log_lambda = closed_form_log_lambda(prob, u);
        sol.closed_form = true;
    }
    sol.lambda = std::exp(sol.log_lambda);
    sol.residual = std::abs(budget(prob, u, sol.log_lambda) - prob.wealth) / std::abs(prob.wealth);
    if (!(sol.residual <= opts.tolerance)) {
        std::ostringstream os;
        os.precision(3);
        os << "lambda budget residual " << sol.residual << " exceeds tolerance " << opts.tolerance;
        throw SolverError(os.str());
    }
    return sol;
}

std::vector<double> optimal_terminal_wealth(const TerminalProblem& prob, const Utility& u, double log_lambda) {
    require_exponential_support(prob, u);
    std::vector<double> out(prob.nu.size(), 0.0);
    for (std::size_t x = 0; x < prob.nu.size(); ++x)
        if (prob.nu[x] > 0.0) out[x] = u.inverse_marginal_log(log_state_price(prob, x, log_lambda));
    return out;
}

std::optional<double> proportion(double u, double riskfree_utility) {
    if (u == 0.0 || !std::isfinite(u) || !std::isfinite(riskfree_utility)) return std::nullopt;
    if ((u > 0 && riskfree_utility < 0) || (u < 0 && riskfree_utility > 0)) return std::nullopt;
    return 1.0 - riskfree_utility / u;
}

ValueOfInformation value_of_information(const TerminalProblem& prob, const Utility& u, LambdaMethod method,
                                        const SolverOptions& opts) {
    LambdaSolution lam = solve_lambda(prob, u, method, opts);
    std::vector<double> wealth = optimal_terminal_wealth(prob, u, lam.log_lambda);
    ValueOfInformation val;
    for (std::size_t x = 0; x < wealth.size(); ++x)
        if (prob.nu[x] > 0.0) val.u += prob.nu[x] * u.evaluate(wealth[x]);
    val.riskfree_utility = u.evaluate(prob.wealth * prob.growth);
    val.F = val.u - val.riskfree_utility;
    val.pi = proportion(val.u, val.riskfree_utility);
    return val;
}

double relative_entropy(const std::vector<double>& nu, const std::vector<double>& reference) {
    double acc = 0.0;
    for (std::size_t x = 0; x < nu.size(); ++x)
        if (nu[x] > 0.0) acc += nu[x] * (std::log(nu[x]) - std::log(reference[x]));
    return acc;
}

ValueOfInformation closed_form_value(const TerminalProblem& prob, const Utility& u) {
    require_exponential_support(prob, u);
    const double v = prob.wealth;
    const double g_n = prob.growth;
    ValueOfInformation val;
    switch (u.kind()) {
        case UtilityKind::log:
            val.u = std::log(v * g_n) + relative_entropy(prob.nu, prob.risk_neutral);
            break;
        case UtilityKind::power: {
            double g = u.gamma();
            double e1 = power_moment(prob, g);
            double e2 = 0.0;  // E^ν[Z^{γ/(γ-1)}]
            for (std::size_t x = 0; x < prob.nu.size(); ++x) {
                if (prob.nu[x] == 0.0) continue;
                double log_z = std::log(prob.risk_neutral[x]) - std::log(prob.nu[x]);
                e2 += prob.nu[x] * std::exp(g * log_z / (g - 1.0));
            }
            val.u = std::pow(v, g) * std::pow(g_n, g) * e2 / (g * std::pow(e1, g));
            break;
        }
        case UtilityKind::exponential:
            val.u = -std::exp(-v * u.alpha() * g_n - log_density_mean(prob));
            break;
    }
    val.riskfree_utility = u.evaluate(v * g_n);
    val.F = val.u - val.riskfree_utility;
    val.pi = proportion(val.u, val.riskfree_utility);
    return val;
}

// ---------------------------------------------------------------------------

LatticeValues optimal_wealth_process(const BinomialMeasure<double>& risk_neutral, const std::vector<double>& terminal_wealth,
                                     double r) {
    const int N = risk_neutral.periods();
    if (terminal_wealth.size() != static_cast<std::size_t>(N + 1))
        throw InvalidParameter("terminal wealth must have N+1 entries");
    LatticeValues w(static_cast<std::size_t>(N + 1));
    w[static_cast<std::size_t>(N)] = terminal_wealth;
    for (int n = N - 1; n >= 0; --n) {
        auto& layer = w[static_cast<std::size_t>(n)];
        const auto& next = w[static_cast<std::size_t>(n + 1)];
        layer.resize(static_cast<std::size_t>(n + 1));
        for (int i = 0; i <= n; ++i) {
            auto iu = static_cast<std::size_t>(i);
            layer[iu] = (risk_neutral.up(n, i) * next[iu] + risk_neutral.down(n, i) * next[iu + 1]) / (1.0 + r);
        }
    }
    return w;
}

BinomialPortfolio replicate_portfolio(const LatticeValues& wealth, const BinomialLattice& lattice) {
    const int N = lattice.periods();
    BinomialPortfolio out;
    out.stock.resize(static_cast<std::size_t>(N));
    out.bank.resize(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
        for (int i = 0; i <= n; ++i) {
            auto iu = static_cast<std::size_t>(i);
            const auto& next = wealth[static_cast<std::size_t>(n + 1)];
            double delta = (next[iu] - next[iu + 1]) / (lattice.price(n + 1, i) - lattice.price(n + 1, i + 1));
            out.stock[static_cast<std::size_t>(n)].push_back(delta);
            out.bank[static_cast<std::size_t>(n)].push_back(wealth[static_cast<std::size_t>(n)][iu] - delta * lattice.price(n, i));
        }
    }
    return out;
}

std::vector<double> simulate_strategy(const BinomialPortfolio& portfolio, const BinomialLattice& lattice, double r,
                                      double wealth0) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(lattice.path_count()));
    for (std::int64_t b = 0; b < lattice.path_count(); ++b) {
        double w = wealth0;
        int downs = 0;
        for (int t = 0; t < lattice.periods(); ++t) {
            double delta = portfolio.stock[static_cast<std::size_t>(t)][static_cast<std::size_t>(downs)];
            double cash = w - delta * lattice.price(t, downs);
            downs += static_cast<int>((b >> t) & 1);
            w = delta * lattice.price(t + 1, downs) + cash * (1.0 + r);
        }
        out.push_back(w);
    }
    return out;
}

BinomialSolution solve_binomial(const BinomialParams& p, const Utility& u, const Anticipation& nu, LambdaMethod method,
                                const SolverOptions& opts) {
    BinomialLattice lattice(p);
    TerminalProblem prob = make_terminal_problem(p, nu);
    BinomialSolution sol;
    sol.risk_neutral = risk_neutral_binomial(p);
    sol.minimal = minimal_measure(sol.risk_neutral, nu.weights);
    sol.lambda = solve_lambda(prob, u, method, opts);
    sol.terminal_wealth = optimal_terminal_wealth(prob, u, sol.lambda.log_lambda);
    sol.value.riskfree_utility = u.evaluate(p.wealth * prob.growth);
    for (std::size_t x = 0; x < sol.terminal_wealth.size(); ++x)
        if (prob.nu[x] > 0.0) sol.value.u += prob.nu[x] * u.evaluate(sol.terminal_wealth[x]);
    sol.value.F = sol.value.u - sol.value.riskfree_utility;
    sol.value.pi = proportion(sol.value.u, sol.value.riskfree_utility);
    sol.wealth = optimal_wealth_process(sol.risk_neutral, sol.terminal_wealth, p.r);
    sol.portfolio = replicate_portfolio(sol.wealth, lattice);
    return sol;
}

double single_period_closed_form(const Utility& u, const BinomialParams& p, const std::vector<double>& nu) {
    if (p.periods != 1) throw InvalidParameter("the single-period formulas need N = 1");
    require_valid(p);
    if (nu.size() != 2) throw InvalidParameter("single-period anticipation needs (nu_up, nu_down)");
    const double up_excess = p.h - p.r;      // h - r > 0
    const double down_excess = -p.k - p.r;   // -k - r < 0
    const double v = p.wealth;
    const double s = p.s;
    const double rho = 1.0 + p.r;
    switch (u.kind()) {
        case UtilityKind::log:
            return v * rho * (nu[0] * up_excess + nu[1] * down_excess) / (-s * up_excess * down_excess);
        case UtilityKind::power: {
            if (!(nu[0] > 0 && nu[1] > 0)) throw DomainError("power formula needs nu_up, nu_down > 0");
            double e = 1.0 / (u.gamma() - 1.0);
            double yu = std::pow(nu[0] * up_excess, e);
            double yd = std::pow(-nu[1] * down_excess, e);
            return (yu - yd) * rho * v / (yd * s * down_excess - yu * s * up_excess);
        }
        case UtilityKind::exponential: {
            double a = nu[0] * up_excess;
            double b = -nu[1] * down_excess;
            if (!(a > 0) || !(b > 0)) throw DomainError("exponential formula takes the log of a nonpositive quantity");
            return (std::log(a) - std::log(b)) / (u.alpha() * s * (p.h + p.k));
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------

CompleteSolution solve_complete(const CompleteMarket& m, const Utility& u, const Anticipation& nu, LambdaMethod method,
                                const SolverOptions& opts) {
    TerminalProblem prob = make_terminal_problem(m, nu);
    CompleteSolution sol;
    sol.lambda = solve_lambda(prob, u, method, opts);
    sol.terminal_wealth = optimal_terminal_wealth(prob, u, sol.lambda.log_lambda);
    sol.value.riskfree_utility = u.evaluate(prob.wealth * prob.growth);
    for (std::size_t x = 0; x < sol.terminal_wealth.size(); ++x)
        if (prob.nu[x] > 0.0) sol.value.u += prob.nu[x] * u.evaluate(sol.terminal_wealth[x]);
    sol.value.F = sol.value.u - sol.value.riskfree_utility;
    sol.value.pi = proportion(sol.value.u, sol.value.riskfree_utility);

    const int N = m.periods();
    const int M = m.states();
    const double rho = 1.0 + m.spec().r;
    sol.wealth.resize(static_cast<std::size_t>(N + 1));
    sol.holdings.resize(static_cast<std::size_t>(N));
    auto& last = sol.wealth[static_cast<std::size_t>(N)];
    last.resize(static_cast<std::size_t>(m.path_count()));
    for (std::int64_t b = 0; b < m.path_count(); ++b)
        last[static_cast<std::size_t>(b)] = sol.terminal_wealth[static_cast<std::size_t>(m.path_terminal(b))];

    std::int64_t width = m.path_count();
    for (int n = N - 1; n >= 0; --n) {
        width /= M;
        const auto& next = sol.wealth[static_cast<std::size_t>(n + 1)];
        auto& layer = sol.wealth[static_cast<std::size_t>(n)];
        auto& hold = sol.holdings[static_cast<std::size_t>(n)];
        layer.resize(static_cast<std::size_t>(width));
        hold.resize(static_cast<std::size_t>(width));
        const Eigen::VectorXd& q = m.martingale_weights(n);
        for (std::int64_t prefix = 0; prefix < width; ++prefix) {
            Eigen::VectorXd children(M);
            for (int j = 0; j < M; ++j) children(j) = next[static_cast<std::size_t>(prefix + j * width)];
            layer[static_cast<std::size_t>(prefix)] = q.dot(children) / rho;
            Eigen::FullPivLU<Eigen::MatrixXd> lu(m.price_matrix(prefix, n));
            if (!lu.isInvertible())
                throw InvalidParameter("price matrix at period " + std::to_string(n) + " is singular; market is not complete");
            hold[static_cast<std::size_t>(prefix)] = lu.solve(children);
        }
    }
    return sol;
}

// ---------------------------------------------------------------------------

NamedAnticipation preset_anticipation(const std::string& raw, std::size_t terminal_count) {
    std::string name;
    for (char c : raw) name += (c == '_' || c == ' ') ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (name == "uniform")
        return {"uniform", std::vector<double>(terminal_count, 1.0 / static_cast<double>(terminal_count))};
    if (name == "risk-neutral") return {"risk-neutral", {}};
    if (name == "precise" || name == "conservative") {
        if (terminal_count != 6)
            throw InvalidParameter("preset '" + name + "' is defined for 6 terminal nodes (5 periods)");
        if (name == "precise") return {"precise", {0.01, 0.01, 0.01, 0.95, 0.01, 0.01}};
        return {"conservative", {0.1, 0.2, 0.2, 0.2, 0.2, 0.1}};
    }
    throw InvalidParameter("unknown anticipation preset '" + raw + "'");
}

ProblemFactory binomial_factory(const BinomialParams& p) {
    return [p](double wealth, const NamedAnticipation& named) {
        BinomialParams q = p;
        q.wealth = wealth;
        std::vector<double> weights = named.weights;
        if (weights.empty()) {
            double pt = (q.r + q.k) / (q.h + q.k);
            for (int i = 0; i <= q.periods; ++i)
                weights.push_back(binomial_coefficient(q.periods, i) * std::pow(pt, q.periods - i) * std::pow(1.0 - pt, i));
            // Risk-neutral weights are exact up to rounding; renormalize for the sum check.
            double total = 0.0;
            for (double w : weights) total += w;
            for (double& w : weights) w /= total;
        }
        return make_terminal_problem(q, Anticipation{weights, named.pruning});
    };
}

std::vector<SweepRow> sweep(const ProblemFactory& factory, const Utility& u, const std::vector<NamedAnticipation>& nus,
                            const std::vector<double>& v_grid, int threads, LambdaMethod method, const SolverOptions& opts) {
    std::vector<SweepRow> rows(nus.size() * v_grid.size());
    auto run = [&](std::size_t k) {
        const auto& named = nus[k / v_grid.size()];
        SweepRow& row = rows[k];
        row.anticipation = named.name;
        row.v = v_grid[k % v_grid.size()];
        try {
            TerminalProblem prob = factory(row.v, named);
            ValueOfInformation val = value_of_information(prob, u, method, opts);
            row.u = val.u;
            row.F = val.F;
            row.pi = val.pi;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    };
    int workers = std::max(1, std::min<int>(threads, static_cast<int>(rows.size())));
    if (workers == 1) {
        for (std::size_t k = 0; k < rows.size(); ++k) run(k);
        return rows;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < rows.size(); k = next++) run(k);
        });
    for (auto& t : pool) t.join();
    return rows;
}

}  // namespace weakinfo
