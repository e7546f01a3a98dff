#include "weakinfo/commands.hpp"

#include "weakinfo/complete_solver.hpp"
#include "weakinfo/measures.hpp"
#include "weakinfo/trinomial.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <sstream>

namespace weakinfo {

using ojson = nlohmann::ordered_json;

double round_significant(double x, int digits) {
    if (digits >= 17 || x == 0.0 || !std::isfinite(x)) return x;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", std::max(digits, 1), x);
    return std::strtod(buf, nullptr);
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return exit_code::config;
    if (dynamic_cast<const SolverError*>(&e)) return exit_code::solver;
    if (dynamic_cast<const InvalidParameter*>(&e) || dynamic_cast<const DomainError*>(&e)) return exit_code::admissibility;
    return exit_code::other;
}

namespace {

class Emitter {
public:
    explicit Emitter(int digits) : digits_(digits) {}

    ojson num(double x) const {
        if (!std::isfinite(x)) return nullptr;
        return round_significant(x, digits_);
    }
    ojson list(const std::vector<double>& xs) const {
        ojson out = ojson::array();
        for (double x : xs) out.push_back(num(x));
        return out;
    }
    std::string cell(double x) const { return std::isfinite(x) ? num(x).dump() : ""; }

private:
    int digits_;
};

class Csv {
public:
    explicit Csv(std::initializer_list<const char*> header) {
        bool first = true;
        for (const char* h : header) {
            out_ << (first ? "" : ",") << h;
            first = false;
        }
        out_ << '\n';
    }
    template <class... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cells, first = false), ...);
        out_ << '\n';
    }
    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
};

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

LambdaMethod method_of(const RunConfig& cfg) {
    if (cfg.run.method == "closed-form") return LambdaMethod::closed_form;
    if (cfg.run.method == "numeric") return LambdaMethod::numeric;
    return LambdaMethod::automatic;
}

const AnticipationConfig& single_anticipation(const RunConfig& cfg, const std::string& command) {
    if (cfg.anticipations.size() != 1)
        throw ConfigError(command + " takes a single anticipation; the config lists " + std::to_string(cfg.anticipations.size()));
    return cfg.anticipations.front();
}

std::vector<double> to_doubles(const std::vector<Number>& xs) {
    std::vector<double> out;
    for (const auto& x : xs) out.push_back(x.value);
    return out;
}

std::vector<double> binomial_weights(const AnticipationConfig& a, const BinomialParams& p) {
    if (a.preset.empty()) return to_doubles(a.weights);
    if (a.preset == "risk-neutral") {
        auto w = risk_neutral_binomial(p).terminal_distribution();
        double total = std::accumulate(w.begin(), w.end(), 0.0);
        for (double& x : w) x /= total;
        return w;
    }
    return preset_anticipation(a.preset, static_cast<std::size_t>(p.periods + 1)).weights;
}

ojson value_json(const Emitter& em, const ValueOfInformation& v) {
    ojson out;
    out["u"] = em.num(v.u);
    out["F"] = em.num(v.F);
    out["pi"] = v.pi ? em.num(*v.pi) : ojson(nullptr);
    if (!v.pi) out["pi_note"] = "undefined: u is zero or has the opposite sign of U(v(1+r)^N)";
    out["riskfree_utility"] = em.num(v.riskfree_utility);
    return out;
}

ojson lambda_json(const Emitter& em, const LambdaSolution& l) {
    ojson out;
    out["lambda"] = em.num(l.lambda);
    out["log_lambda"] = em.num(l.log_lambda);
    out["residual"] = em.num(l.residual);
    out["closed_form"] = l.closed_form;
    out["iterations"] = l.iterations;
    return out;
}

// --- measure ------------------------------------------------------------------

void cmd_measure(const RunConfig& cfg, const Emitter& em, CommandResult& res) {
    if (cfg.model.kind != ModelKind::binomial) throw ConfigError("measure needs a binomial model");
    const auto& a = single_anticipation(cfg, "measure");
    BinomialParams p = cfg.binomial();
    require_valid(p);
    const int N = p.periods;
    auto start = Clock::now();

    auto rn = risk_neutral_binomial<Rational>(cfg.model.h.exact, cfg.model.k.exact, cfg.model.r.exact, N);
    std::vector<Rational> nu;
    if (a.preset.empty()) {
        for (const auto& w : a.weights) nu.push_back(w.exact);
    } else if (a.preset == "risk-neutral") {
        nu = rn.terminal_distribution();
    } else if (a.preset == "uniform") {
        nu.assign(static_cast<std::size_t>(N + 1), Rational(1, N + 1));
    } else {
        for (double w : preset_anticipation(a.preset, static_cast<std::size_t>(N + 1)).weights) nu.push_back(rational_from_double(w));
    }
    Rational total = 0;
    for (const auto& x : nu) total += x;
    // Decimal weights that sum to 1 only within rounding are renormalized exactly.
    if (total != 1)
        for (auto& x : nu) x /= total;
    std::vector<double> nu_d;
    for (const auto& x : nu) nu_d.push_back(to_double(x));
    require_anticipation(nu_d, static_cast<std::size_t>(N + 1), a.pruning);
    auto minimal = minimal_measure<Rational>(rn, nu);
    res.timings["measure_ms"] = elapsed_ms(start);

    BinomialLattice lattice(p);
    auto rn_terminal = rn.terminal_distribution();
    auto nu_terminal = minimal.terminal_distribution();
    ojson nodes = ojson::array();
    Csv csv({"time", "state", "price", "rn_up", "rn_down", "nu_up", "nu_down", "rn_up_exact", "rn_down_exact",
             "nu_up_exact", "nu_down_exact"});
    for (int n = 0; n <= N; ++n) {
        for (int i = 0; i <= n; ++i) {
            ojson node;
            node["time"] = n;
            node["state"] = i;
            node["price"] = em.num(lattice.price(n, i));
            if (n < N) {
                Rational ru = rn.up(n, i), rd = rn.down(n, i), mu = minimal.up(n, i), md = minimal.down(n, i);
                node["risk_neutral"] = {{"up", em.num(to_double(ru))}, {"down", em.num(to_double(rd))},
                                        {"up_exact", to_string(ru)}, {"down_exact", to_string(rd)}};
                node["minimal"] = {{"up", em.num(to_double(mu))}, {"down", em.num(to_double(md))},
                                   {"up_exact", to_string(mu)}, {"down_exact", to_string(md)}};
                csv.row(n, i, em.cell(lattice.price(n, i)), em.cell(to_double(ru)), em.cell(to_double(rd)),
                        em.cell(to_double(mu)), em.cell(to_double(md)), to_string(ru), to_string(rd), to_string(mu),
                        to_string(md));
            } else {
                auto iu = static_cast<std::size_t>(i);
                node["terminal"] = {{"risk_neutral", em.num(to_double(rn_terminal[iu]))},
                                    {"minimal", em.num(to_double(nu_terminal[iu]))},
                                    {"risk_neutral_exact", to_string(rn_terminal[iu])},
                                    {"minimal_exact", to_string(nu_terminal[iu])}};
                csv.row(n, i, em.cell(lattice.price(n, i)), "", "", "", "", "", "", "", "");
            }
            nodes.push_back(node);
        }
    }
    res.files["measure_tree.json"] = nodes.dump(2) + "\n";
    res.files["measure_tree.csv"] = csv.str();

    bool marginal_ok = nu_terminal == nu;
    res.report["p_tilde"] = em.num(to_double(rn.up(0, 0)));
    res.report["p_tilde_exact"] = to_string(rn.up(0, 0));
    ojson nu_exact = ojson::array();
    for (const auto& x : nu) nu_exact.push_back(to_string(x));
    res.report["nu_exact"] = nu_exact;
    res.report["terminal_marginal_matches_nu"] = marginal_ok;
    res.report["nodes"] = nodes.size();
}

// --- value --------------------------------------------------------------------

void value_binomial(const RunConfig& cfg, const Utility& u, const SolverOptions& so, const Emitter& em,
                    CommandResult& res) {
    const auto& a = single_anticipation(cfg, "value");
    BinomialParams p = cfg.binomial();
    require_valid(p);
    Anticipation nu{binomial_weights(a, p), a.pruning};
    auto start = Clock::now();
    BinomialSolution sol = solve_binomial(p, u, nu, method_of(cfg), so);
    res.timings["solve_ms"] = elapsed_ms(start);

    BinomialLattice lattice(p);
    ojson nodes = ojson::array();
    Csv csv({"time", "state", "price", "wealth", "delta", "bank", "nu_up"});
    for (int n = 0; n <= p.periods; ++n) {
        for (int i = 0; i <= n; ++i) {
            auto nu_ = static_cast<std::size_t>(n), iu = static_cast<std::size_t>(i);
            ojson node;
            node["time"] = n;
            node["state"] = i;
            node["price"] = em.num(lattice.price(n, i));
            node["wealth"] = em.num(sol.wealth[nu_][iu]);
            if (n < p.periods) {
                node["delta"] = em.num(sol.portfolio.stock[nu_][iu]);
                node["bank"] = em.num(sol.portfolio.bank[nu_][iu]);
                node["nu_up"] = em.num(sol.minimal.up(n, i));
                csv.row(n, i, em.cell(lattice.price(n, i)), em.cell(sol.wealth[nu_][iu]), em.cell(sol.portfolio.stock[nu_][iu]),
                        em.cell(sol.portfolio.bank[nu_][iu]), em.cell(sol.minimal.up(n, i)));
            } else {
                csv.row(n, i, em.cell(lattice.price(n, i)), em.cell(sol.wealth[nu_][iu]), "", "", "");
            }
            nodes.push_back(node);
        }
    }
    res.files["wealth_tree.json"] = nodes.dump(2) + "\n";
    res.files["wealth_tree.csv"] = csv.str();

    res.report["lambda"] = lambda_json(em, sol.lambda);
    res.report["value"] = value_json(em, sol.value);
    res.report["terminal_wealth"] = em.list(sol.terminal_wealth);
    res.report["delta0"] = em.num(sol.portfolio.stock[0][0]);
    if (p.periods == 1 && nu.weights[0] > 0 && nu.weights[1] > 0)
        res.report["delta0_closed_form"] = em.num(single_period_closed_form(u, p, nu.weights));
    ojson delta = ojson::array();
    for (const auto& layer : sol.portfolio.stock) delta.push_back(em.list(layer));
    res.report["delta"] = delta;
}

void value_complete(const RunConfig& cfg, const Utility& u, const SolverOptions& so, const Emitter& em,
                    CommandResult& res) {
    const auto& a = single_anticipation(cfg, "value");
    CompleteMarket market(cfg.complete());
    std::vector<double> weights;
    if (a.preset.empty()) {
        weights = to_doubles(a.weights);
    } else if (a.preset == "risk-neutral") {
        weights = make_terminal_problem(market, Anticipation{std::vector<double>(market.terminal_count(),
                                                                                 1.0 / static_cast<double>(market.terminal_count()))})
                      .risk_neutral;
        double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        for (double& x : weights) x /= total;
    } else {
        weights = preset_anticipation(a.preset, market.terminal_count()).weights;
    }
    auto start = Clock::now();
    CompleteSolution sol = solve_complete(market, u, Anticipation{weights, a.pruning}, method_of(cfg), so);
    res.timings["solve_ms"] = elapsed_ms(start);

    const int M = market.states();
    ojson nodes = ojson::array();
    Csv csv({"time", "node", "wealth", "prices", "holdings"});
    std::int64_t width = 1;
    for (int n = 0; n <= market.periods(); ++n) {
        for (std::int64_t prefix = 0; prefix < width; ++prefix) {
            ojson node;
            node["time"] = n;
            std::string label = n == 0 ? "root" : path_label(M, n, prefix);
            node["node"] = label;
            Eigen::VectorXd s = market.prices(prefix, n);
            std::vector<double> sv(s.data(), s.data() + s.size());
            node["prices"] = em.list(sv);
            double w = sol.wealth[static_cast<std::size_t>(n)][static_cast<std::size_t>(prefix)];
            node["wealth"] = em.num(w);
            std::string hold_cell;
            if (n < market.periods()) {
                const Eigen::VectorXd& h = sol.holdings[static_cast<std::size_t>(n)][static_cast<std::size_t>(prefix)];
                std::vector<double> hv(h.data(), h.data() + h.size());
                node["holdings"] = em.list(hv);
                for (double x : hv) hold_cell += (hold_cell.empty() ? "" : ";") + em.cell(x);
            }
            std::string price_cell;
            for (double x : sv) price_cell += (price_cell.empty() ? "" : ";") + em.cell(x);
            csv.row(n, label, em.cell(w), price_cell, hold_cell);
            nodes.push_back(node);
        }
        width *= M;
    }
    res.files["wealth_tree.json"] = nodes.dump(2) + "\n";
    res.files["wealth_tree.csv"] = csv.str();
    res.report["lambda"] = lambda_json(em, sol.lambda);
    res.report["value"] = value_json(em, sol.value);
    res.report["terminal_wealth"] = em.list(sol.terminal_wealth);
    res.report["terminal_count"] = market.terminal_count();
}

// --- sweep --------------------------------------------------------------------

void cmd_sweep(const RunConfig& cfg, const Utility& u, const SolverOptions& so, int threads, const Emitter& em,
               CommandResult& res) {
    if (cfg.run.v_grid.empty()) throw ConfigError("sweep needs run.v_grid");
    ProblemFactory factory;
    std::size_t terminals = 0;
    if (cfg.model.kind == ModelKind::binomial) {
        BinomialParams p = cfg.binomial();
        require_valid(p);
        factory = binomial_factory(p);
        terminals = static_cast<std::size_t>(p.periods + 1);
    } else if (cfg.model.kind == ModelKind::complete_matrix) {
        auto market = std::make_shared<CompleteMarket>(cfg.complete());
        terminals = market->terminal_count();
        factory = [market](double wealth, const NamedAnticipation& named) {
            CompleteMarketSpec spec = market->spec();
            spec.wealth = wealth;
            CompleteMarket m(spec);
            std::vector<double> w = named.weights;
            if (w.empty()) {
                w = make_terminal_problem(m, Anticipation{std::vector<double>(m.terminal_count(), 1.0 / static_cast<double>(m.terminal_count()))})
                        .risk_neutral;
                double total = std::accumulate(w.begin(), w.end(), 0.0);
                for (double& x : w) x /= total;
            }
            return make_terminal_problem(m, Anticipation{w, named.pruning});
        };
    } else {
        throw ConfigError("sweep needs a binomial or complete-matrix model");
    }
    std::vector<NamedAnticipation> nus;
    for (const auto& a : cfg.anticipations) {
        NamedAnticipation named = a.preset.empty() ? NamedAnticipation{a.name, to_doubles(a.weights), a.pruning}
                                                   : preset_anticipation(a.preset, terminals);
        named.name = a.name;
        named.pruning = a.pruning;
        nus.push_back(named);
    }
    auto start = Clock::now();
    auto rows = sweep(factory, u, nus, cfg.run.v_grid, threads, method_of(cfg), so);
    res.timings["sweep_ms"] = elapsed_ms(start);

    Csv csv({"anticipation", "v", "u", "F", "pi", "error"});
    ojson table = ojson::array();
    int failures = 0;
    for (const auto& r : rows) {
        ojson row;
        row["anticipation"] = r.anticipation;
        row["v"] = em.num(r.v);
        if (r.error.empty()) {
            row["u"] = em.num(r.u);
            row["F"] = em.num(r.F);
            row["pi"] = r.pi ? em.num(*r.pi) : ojson(nullptr);
        } else {
            row["error"] = r.error;
            ++failures;
        }
        table.push_back(row);
        std::string err = r.error;
        for (char& c : err)
            if (c == ',' || c == '\n') c = ';';
        csv.row(r.anticipation, em.cell(r.v), r.error.empty() ? em.cell(r.u) : "", r.error.empty() ? em.cell(r.F) : "",
                r.error.empty() && r.pi ? em.cell(*r.pi) : "", err);
    }
    res.files["curve.csv"] = csv.str();
    res.files["curve.json"] = table.dump(2) + "\n";
    res.report["rows"] = rows.size();
    res.report["failed_rows"] = failures;
    res.report["curve"] = table;
}

// --- trinomial ----------------------------------------------------------------

void cmd_trinomial(const RunConfig& cfg, const Utility& u, std::optional<double> tolerance, const Emitter& em,
                   CommandResult& res) {
    if (cfg.model.kind != ModelKind::trinomial) throw ConfigError("trinomial needs a trinomial model");
    const auto& a = single_anticipation(cfg, "trinomial");
    TrinomialParams p = cfg.trinomial();
    require_valid(p);
    TrinomialLattice lattice(p);
    auto pair = extremal_measures(p);
    std::vector<double> t = cfg.run.t.empty() ? std::vector<double>(static_cast<std::size_t>(p.periods), 0.5) : cfg.run.t;

    std::vector<double> nu_paths;
    if (a.preset == "risk-neutral") {
        nu_paths = interior_path_measure(pair, t);
    } else if (a.level == "path") {
        nu_paths = a.preset.empty() ? to_doubles(a.weights)
                                    : preset_anticipation(a.preset, static_cast<std::size_t>(lattice.path_count())).weights;
    } else {
        auto w = a.preset.empty() ? to_doubles(a.weights) : preset_anticipation(a.preset, lattice.terminal_count()).weights;
        nu_paths = lift_terminal_anticipation(lattice, pair, t, w);
    }
    double total = std::accumulate(nu_paths.begin(), nu_paths.end(), 0.0);
    for (double& x : nu_paths) x /= total;

    TrinomialSolverOptions so;
    if (tolerance) so.tolerance = *tolerance;
    auto start = Clock::now();
    TrinomialSolution sol;
    try {
        sol = solve_trinomial(p, u, nu_paths, a.pruning, t, so);
    } catch (const LambdaSystemError& e) {
        res.report["residual_history"] = em.list(e.history());
        throw;
    }
    res.timings["solve_ms"] = elapsed_ms(start);

    res.report["extremal"] = {{"P0", em.list({pair.p0.begin(), pair.p0.end()})},
                              {"P1", em.list({pair.p1.begin(), pair.p1.end()})}};
    res.report["lambda"] = em.list(sol.lambda.lambda);
    res.report["residuals"] = em.list(sol.lambda.residuals);
    res.report["residual_norm"] = em.num(sol.lambda.residual_norm);
    res.report["residual_history"] = em.list(sol.lambda.history);
    res.report["method"] = sol.lambda.method;
    res.report["iterations"] = sol.lambda.iterations;
    ValueOfInformation v{sol.u, sol.u - sol.riskfree_utility, proportion(sol.u, sol.riskfree_utility), sol.riskfree_utility};
    res.report["value"] = value_json(em, v);
    res.report["t"] = em.list(t);
    const auto& rep = sol.tree.replicability;
    res.report["replicability"] = {{"ok", rep.ok},
                                   {"worst_mismatch", em.num(rep.worst_mismatch)},
                                   {"worst_period", rep.worst_period},
                                   {"worst_node", rep.worst_node}};

    auto simulated = simulate_trinomial(sol.tree, lattice, p.r, p.wealth);
    Csv term({"path", "label", "nu", "wealth", "simulated"});
    ojson terminal = ojson::array();
    for (std::int64_t b = 0; b < lattice.path_count(); ++b) {
        auto bu = static_cast<std::size_t>(b);
        terminal.push_back({{"path", lattice.path_label(b)}, {"nu", em.num(nu_paths[bu])},
                            {"wealth", em.num(sol.terminal_wealth[bu])}, {"simulated", em.num(simulated[bu])}});
        term.row(b, lattice.path_label(b), em.cell(nu_paths[bu]), em.cell(sol.terminal_wealth[bu]), em.cell(simulated[bu]));
    }
    res.files["terminal.csv"] = term.str();
    res.files["terminal.json"] = terminal.dump(2) + "\n";

    Csv tree({"time", "node", "price", "wealth", "delta", "bank"});
    ojson nodes = ojson::array();
    std::int64_t width = 1;
    for (int n = 0; n <= p.periods; ++n) {
        for (std::int64_t prefix = 0; prefix < width; ++prefix) {
            auto node = lattice.path_node(prefix, n);
            double s = lattice.price(n, node.ups, node.mids);
            std::string label = n == 0 ? "root" : path_label(3, n, prefix);
            double w = sol.tree.wealth[static_cast<std::size_t>(n)][static_cast<std::size_t>(prefix)];
            ojson rec{{"time", n}, {"node", label}, {"price", em.num(s)}, {"wealth", em.num(w)}};
            if (n < p.periods) {
                double d = sol.tree.delta[static_cast<std::size_t>(n)][static_cast<std::size_t>(prefix)];
                double k = sol.tree.bank[static_cast<std::size_t>(n)][static_cast<std::size_t>(prefix)];
                rec["delta"] = em.num(d);
                rec["bank"] = em.num(k);
                tree.row(n, label, em.cell(s), em.cell(w), em.cell(d), em.cell(k));
            } else {
                tree.row(n, label, em.cell(s), em.cell(w), "", "");
            }
            nodes.push_back(rec);
        }
        width *= 3;
    }
    res.files["wealth_tree.csv"] = tree.str();
    res.files["wealth_tree.json"] = nodes.dump(2) + "\n";

    if (!rep.ok) {
        std::ostringstream os;
        os << "replicability check failed at node " << rep.worst_node << " (period " << rep.worst_period
           << "): pairwise hedge ratios differ by " << rep.worst_mismatch << " relative";
        res.exit_code = exit_code::solver;
        res.message = os.str();
    }
}

}  // namespace

CommandResult run_command(const RunConfig& cfg, const CommandOptions& opts) {
    CommandResult res;
    res.timings = ojson::object();
    std::string command = opts.command.empty() ? cfg.run.command : opts.command;
    res.report["command"] = command;
    res.report["input"] = cfg.to_json();
    try {
        if (command.empty()) throw ConfigError("no command given (pass a subcommand or set run.command)");
        if (!opts.command.empty() && !cfg.run.command.empty() && opts.command != cfg.run.command)
            throw ConfigError("subcommand '" + opts.command + "' conflicts with run.command '" + cfg.run.command + "'");
        Emitter em(opts.precision);
        Utility u = cfg.utility.build();
        SolverOptions so;
        std::optional<double> tol = opts.tolerance ? opts.tolerance : cfg.run.tolerance;
        if (tol) so.tolerance = *tol;
        auto start = Clock::now();
        if (command == "measure") {
            cmd_measure(cfg, em, res);
        } else if (command == "value") {
            if (cfg.model.kind == ModelKind::binomial) value_binomial(cfg, u, so, em, res);
            else if (cfg.model.kind == ModelKind::complete_matrix) value_complete(cfg, u, so, em, res);
            else throw ConfigError("value handles complete markets; use the trinomial command for trinomial models");
        } else if (command == "sweep") {
            cmd_sweep(cfg, u, so, std::max(1, opts.threads), em, res);
        } else if (command == "trinomial") {
            cmd_trinomial(cfg, u, tol, em, res);
        } else {
            throw ConfigError("unknown command '" + command + "' (measure, value, sweep, trinomial)");
        }
        res.timings["total_ms"] = elapsed_ms(start);
    } catch (const std::exception& e) {
        res.exit_code = exit_code_for(e);
        res.message = e.what();
    }
    res.report["status"] = res.exit_code == exit_code::ok ? "ok" : "error";
    if (res.exit_code != exit_code::ok) {
        res.report["exit_code"] = res.exit_code;
        res.report["error"] = res.message;
    }
    res.files["report.json"] = res.report.dump(2) + "\n";
    return res;
}

}  // namespace weakinfo
