#pragma once

#include "weakinfo/market.hpp"
#include "weakinfo/measures.hpp"
#include "weakinfo/utility.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace weakinfo {

/// Everything the complete-market dual needs: the optimal claim is measurable with respect to
/// the terminal node, so the problem reduces to the terminal laws of P̃ and ν.
struct TerminalProblem {
    std::vector<double> risk_neutral;  ///< P̃(S_N = x)
    std::vector<double> nu;            ///< ν(x); zeros only in pruning mode
    double growth = 1.0;               ///< (1+r)^N
    double wealth = 1.0;               ///< v
    bool pruning = false;

    int periods = 0;
    double rate = 0.0;
};

TerminalProblem make_terminal_problem(const BinomialParams& p, const Anticipation& nu);
TerminalProblem make_terminal_problem(const CompleteMarket& m, const Anticipation& nu);

enum class LambdaMethod {
    automatic,    ///< closed form for log/power/exponential
    closed_form,
    numeric,      ///< bracketing + bisection + Newton polish on the budget map
};

struct SolverOptions {
    double tolerance = 1e-10;  ///< relative budget residual
    int max_bracket_steps = 1000;
    int max_bisections = 400;
};

/// λ is carried as log λ as well: exponential utility drives λ below the double range for
/// moderately large v(1+r)^N.
struct LambdaSolution {
    double lambda = 0.0;
    double log_lambda = 0.0;
    double residual = 0.0;  ///< |budget - v| / v
    int iterations = 0;
    bool closed_form = false;
};

/// Discounted Ẽ[ I(λ (1+r)^{-N} dP̃/dP^ν) ] / (1+r)^N at λ = e^{log_lambda}.
double budget(const TerminalProblem& prob, const Utility& u, double log_lambda);

LambdaSolution solve_lambda(const TerminalProblem& prob, const Utility& u, LambdaMethod method = LambdaMethod::automatic,
                            const SolverOptions& opts = {});

/// V̂_N(x) = I(λ (1+r)^{-N} P̃(x)/ν(x)); pruned nodes (ν = 0) receive zero wealth.
std::vector<double> optimal_terminal_wealth(const TerminalProblem& prob, const Utility& u, double log_lambda);

struct ValueOfInformation {
    double u = 0.0;                ///< u(v, ν)
    double F = 0.0;                ///< u - U(v(1+r)^N)
    std::optional<double> pi;      ///< F / u; empty when undefined
    double riskfree_utility = 0.0; ///< U(v(1+r)^N)
};

/// π is undefined when u = 0 or when u and U(v(1+r)^N) have opposite signs.
std::optional<double> proportion(double u, double riskfree_utility);

/// Generic dual pipeline: u = E^ν[U(V̂_N)].
ValueOfInformation value_of_information(const TerminalProblem& prob, const Utility& u,
                                        LambdaMethod method = LambdaMethod::automatic, const SolverOptions& opts = {});

/// Closed forms: log u = ln(v(1+r)^N) + KL(ν | P̃_{S_N}); power and exponential via the
/// explicit λ.
ValueOfInformation closed_form_value(const TerminalProblem& prob, const Utility& u);

/// Relative entropy Σ ν ln(ν / P̃_{S_N}).
double relative_entropy(const std::vector<double>& nu, const std::vector<double>& reference);

// --- binomial lattice -------------------------------------------------------

/// Per-node values on the binomial lattice: values[n][i] for i = 0..n.
using LatticeValues = std::vector<std::vector<double>>;

/// V̂_n(node) = (1+r)^{-(N-n)} Ẽ[V̂_N | node].
LatticeValues optimal_wealth_process(const BinomialMeasure<double>& risk_neutral, const std::vector<double>& terminal_wealth,
                                     double r);

struct BinomialPortfolio {
    LatticeValues stock;  ///< δ_n: units of the risky asset held over period n+1
    LatticeValues bank;   ///< currency in the risk-free account at time n
};

/// δ_n = (V̂_up - V̂_down) / (S_up - S_down); the bank account takes the rest.
BinomialPortfolio replicate_portfolio(const LatticeValues& wealth, const BinomialLattice& lattice);

/// Runs the self-financing recursion from `wealth0` along every path; returns terminal wealth
/// per path (path bit t = 1 for a down move).
std::vector<double> simulate_strategy(const BinomialPortfolio& portfolio, const BinomialLattice& lattice, double r,
                                      double wealth0);

struct BinomialSolution {
    LambdaSolution lambda;
    ValueOfInformation value;
    std::vector<double> terminal_wealth;
    LatticeValues wealth;
    BinomialPortfolio portfolio;
    BinomialMeasure<double> risk_neutral;
    BinomialMeasure<double> minimal;
};

BinomialSolution solve_binomial(const BinomialParams& p, const Utility& u, const Anticipation& nu,
                                LambdaMethod method = LambdaMethod::automatic, const SolverOptions& opts = {});

/// One-period optimal share count δ̂₀ from the explicit log / power / exponential formulas.
/// ν = (ν₀, ν₁) for (up, down). Independent of the dual pipeline.
double single_period_closed_form(const Utility& u, const BinomialParams& p, const std::vector<double>& nu);

// --- general complete market -------------------------------------------------

struct CompleteSolution {
    LambdaSolution lambda;
    ValueOfInformation value;
    std::vector<double> terminal_wealth;           ///< per terminal node
    std::vector<std::vector<double>> wealth;       ///< wealth[n][prefix], prefix in [0, M^n)
    std::vector<std::vector<Eigen::VectorXd>> holdings;  ///< holdings[n][prefix]: units per asset
};

CompleteSolution solve_complete(const CompleteMarket& m, const Utility& u, const Anticipation& nu,
                                LambdaMethod method = LambdaMethod::automatic, const SolverOptions& opts = {});

// --- sweep ------------------------------------------------------------------

struct NamedAnticipation {
    std::string name;
    std::vector<double> weights;  ///< empty means "risk-neutral": ν = P̃_{S_N}
    bool pruning = false;
};

/// Built-in anticipations for the 5-period sweep: precise, uniform, conservative, risk-neutral.
/// uniform and risk-neutral adapt to any terminal count; the other two need 6 terminal nodes.
NamedAnticipation preset_anticipation(const std::string& name, std::size_t terminal_count);

struct SweepRow {
    std::string anticipation;
    double v = 0.0;
    double u = 0.0;
    double F = 0.0;
    std::optional<double> pi;
    std::string error;  ///< non-empty when the row failed
};

/// Builds the problem for a given initial wealth.
using ProblemFactory = std::function<TerminalProblem(double wealth, const NamedAnticipation&)>;

/// One row per (anticipation, v), in input order. Rows run on up to `threads` workers.
std::vector<SweepRow> sweep(const ProblemFactory& factory, const Utility& u, const std::vector<NamedAnticipation>& nus,
                            const std::vector<double>& v_grid, int threads = 1,
                            LambdaMethod method = LambdaMethod::automatic, const SolverOptions& opts = {});

ProblemFactory binomial_factory(const BinomialParams& p);

}  // namespace weakinfo
