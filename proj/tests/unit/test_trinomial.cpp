#include "doctest.h"

#include "oracles.hpp"
#include "weakinfo/errors.hpp"
#include "weakinfo/trinomial.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

using namespace weakinfo;

namespace {

Rational q(const char* s) { return parse_rational(s); }

TrinomialParams fixture(int periods, double b = 1.05, double r = 0.0) { return {10.0, 1.2, b, 0.9, r, periods, 100.0}; }

Eigen::MatrixXd dense(const ProductMeasureSet& set) {
    Eigen::MatrixXd a(set.path_count(), set.measure_count());
    for (std::int64_t b = 0; b < set.path_count(); ++b)
        for (std::int64_t j = 0; j < set.measure_count(); ++j) a(b, j) = set.probability(j, b);
    return a;
}

double expected_utility(const std::vector<double>& nu, const std::vector<double>& v, const Utility& u) {
    double acc = 0.0;
    for (std::size_t b = 0; b < nu.size(); ++b) acc += nu[b] * u.evaluate(v[b]);
    return acc;
}

// One free direction for N = 1: scan the feasible segment, then golden-section refine.
double grid_oracle_n1(const ProductMeasureSet& set, const std::vector<double>& nu, const Utility& u, double c) {
    Eigen::MatrixXd a = dense(set);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a.transpose());
    Eigen::VectorXd k = lu.kernel().col(0);
    double lo = -1e300, hi = 1e300;
    for (int b = 0; b < 3; ++b) {
        if (k(b) > 0) lo = std::max(lo, -c / k(b));
        if (k(b) < 0) hi = std::min(hi, -c / k(b));
    }
    auto f = [&](double z) {
        std::vector<double> v(3);
        for (int b = 0; b < 3; ++b) {
            v[static_cast<std::size_t>(b)] = c + z * k(b);
            if (!(v[static_cast<std::size_t>(b)] > 0)) return -1e300;
        }
        return expected_utility(nu, v, u);
    };
    const int points = 4001;
    double best_z = 0.0, best = f(0.0);
    for (int i = 1; i < points; ++i) {
        double z = lo + (hi - lo) * i / points;
        if (f(z) > best) best = f(best_z = z);
    }
    double step = (hi - lo) / points;
    double x0 = std::max(lo, best_z - step), x1 = std::min(hi, best_z + step);
    const double g = (std::sqrt(5.0) - 1) / 2;
    for (int it = 0; it < 200; ++it) {
        double m1 = x1 - g * (x1 - x0), m2 = x0 + g * (x1 - x0);
        if (f(m1) < f(m2)) x0 = m1; else x1 = m2;
    }
    return f(0.5 * (x0 + x1));
}

}  // namespace

TEST_SUITE("trinomial") {

TEST_CASE("extremal measures in exact arithmetic") {
    auto up_case = extremal_measures<Rational>(q("1.2"), q("1.05"), q("0.9"), Rational(0));
    CHECK(up_case.p0 == std::array<Rational, 3>{Rational(0), q("2/3"), q("1/3")});
    CHECK(up_case.p1 == std::array<Rational, 3>{q("1/3"), Rational(0), q("2/3")});

    auto down_case = extremal_measures<Rational>(q("1.2"), q("1.0"), q("0.9"), q("0.05"));
    CHECK(down_case.p0 == std::array<Rational, 3>{q("1/4"), q("3/4"), Rational(0)});

    for (const auto& [a, b, c, r] : std::vector<std::array<const char*, 4>>{
             {"1.2", "1.05", "0.9", "0"}, {"1.2", "1.0", "0.9", "0.05"}, {"13/10", "1", "4/5", "1/50"}, {"1.1", "1.02", "0.95", "0.02"}}) {
        auto pair = extremal_measures<Rational>(q(a), q(b), q(c), q(r));
        for (const auto& p : {pair.p0, pair.p1}) {
            CHECK(p[0] + p[1] + p[2] == 1);
            CHECK(p[0] * q(a) + p[1] * q(b) + p[2] * q(c) == 1 + q(r));
            for (const auto& x : p) CHECK(x >= 0);
        }
    }

    CHECK_THROWS_AS(extremal_measures<double>(1.2, 1.05, 0.9, 0.5), InvalidParameter);
    CHECK_THROWS_AS(extremal_measures<double>(1.2, 1.3, 0.9, 0.0), InvalidParameter);
    CHECK_THROWS_AS(extremal_measures<double>(1.2, 1.05, 1.01, 0.0), InvalidParameter);
}

TEST_CASE("product measures") {
    auto pair = extremal_measures(fixture(1));
    auto one = product_measures(pair, 1);
    REQUIRE(one.measure_count() == 2);
    for (int o = 0; o < 3; ++o) {
        CHECK(one.probability(0, o) == doctest::Approx(pair.p0[static_cast<std::size_t>(o)]).epsilon(1e-15));
        CHECK(one.probability(1, o) == doctest::Approx(pair.p1[static_cast<std::size_t>(o)]).epsilon(1e-15));
    }

    auto two = product_measures(pair, 2);
    REQUIRE(two.measure_count() == 4);
    REQUIRE(two.path_count() == 9);
    for (std::int64_t j = 0; j < 4; ++j) {
        double total = 0.0;
        for (std::int64_t b = 0; b < 9; ++b) {
            const auto& first = (j & 1) ? pair.p1 : pair.p0;
            const auto& second = (j & 2) ? pair.p1 : pair.p0;
            double direct = first[static_cast<std::size_t>(b % 3)] * second[static_cast<std::size_t>(b / 3)];
            CHECK(two.probability(j, b) == doctest::Approx(direct).epsilon(1e-15));
            total += two.probability(j, b);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK_THROWS_AS(product_measures(pair, 13), InvalidParameter);
}

TEST_CASE("interior measures are convex combinations of the products") {
    auto pair = extremal_measures(fixture(3, 1.0, 0.05));
    auto set = product_measures(pair, 3);
    oracle::Gen gen(41);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> t{gen.uniform(0.01, 0.99), gen.uniform(0.01, 0.99), gen.uniform(0.01, 0.99)};
        auto path = interior_path_measure(pair, t);
        auto w = convex_weights(t);
        double wsum = 0.0;
        for (double x : w) wsum += x;
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-14));
        for (std::int64_t b = 0; b < 27; ++b) {
            double mix = 0.0;
            for (std::int64_t j = 0; j < 8; ++j) mix += w[static_cast<std::size_t>(j)] * set.probability(j, b);
            CHECK(std::abs(mix - path[static_cast<std::size_t>(b)]) <= 1e-12);
        }

        // martingale at every node of the lattice under the interior measure
        TrinomialLattice lat(fixture(3, 1.0, 0.05));
        for (int n = 0; n < 3; ++n) {
            std::int64_t width = 1;
            for (int i = 0; i < n; ++i) width *= 3;
            for (std::int64_t prefix = 0; prefix < width; ++prefix) {
                double reach = 0.0, next = 0.0;
                for (std::int64_t b = 0; b < 27; ++b) {
                    if (b % width != prefix) continue;
                    reach += path[static_cast<std::size_t>(b)];
                    auto node = lat.path_node(b, n + 1);
                    next += path[static_cast<std::size_t>(b)] * lat.price(n + 1, node.ups, node.mids);
                }
                auto here = lat.path_node(prefix, n);
                double s = lat.price(n, here.ups, here.mids);
                CHECK(std::abs(next / reach - 1.05 * s) <= 1e-12 * s);
            }
        }
    }
}

TEST_CASE("budget equivalence between products and interior measures") {
    auto p = fixture(2, 1.0, 0.05);
    auto pair = extremal_measures(p);
    auto set = product_measures(pair, 2);
    oracle::Gen gen(43);
    auto nu = gen.simplex(9);
    auto sol = solve_trinomial(p, Utility::log(), nu);
    double c = p.wealth * std::pow(1.05, 2);

    std::vector<std::vector<double>> ts;
    for (int k = 0; k < 100; ++k) ts.push_back({gen.uniform(0.01, 0.99), gen.uniform(0.01, 0.99)});

    // products -> interior
    for (const auto& t : ts) {
        auto path = interior_path_measure(pair, t);
        double e = 0.0;
        for (std::size_t b = 0; b < 9; ++b) e += path[b] * sol.terminal_wealth[b];
        CHECK(std::abs(e - c) <= 1e-8 * c);
    }

    // interior -> products: any claim priced at c by all sampled interior measures
    Eigen::MatrixXd qm(100, 9);
    for (int k = 0; k < 100; ++k) {
        auto path = interior_path_measure(pair, ts[static_cast<std::size_t>(k)]);
        for (int b = 0; b < 9; ++b) qm(k, b) = path[static_cast<std::size_t>(b)];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(qm, Eigen::ComputeFullV);
    int rank = static_cast<int>(svd.rank());
    CHECK(rank == 4);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd v = Eigen::VectorXd::Constant(9, c);
        for (int col = rank; col < 9; ++col) v += gen.uniform(-20, 20) * svd.matrixV().col(col);
        auto budgets = product_budgets(set, std::vector<double>(v.data(), v.data() + 9), 0.05);
        for (double bj : budgets) CHECK(std::abs(bj - p.wealth) <= 1e-9 * p.wealth);
    }
    // and a claim breaking a product budget is caught by some interior measure
    std::vector<double> off(sol.terminal_wealth);
    off[4] += 1.0;
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        double e = 0.0;
        for (int b = 0; b < 9; ++b) e += qm(k, b) * off[static_cast<std::size_t>(b)];
        worst = std::max(worst, std::abs(e - c));
    }
    CHECK(worst > 1e-3);
}

TEST_CASE("single-period system against a grid oracle") {
    oracle::Gen gen(47);
    for (double b : {1.05, 1.0}) {
        for (double r : {0.0, 0.05}) {
            if (b >= 1.2 || 1 + r <= 0.9) continue;
            auto p = fixture(1, b, r);
            auto pair = extremal_measures(p);
            auto set = product_measures(pair, 1);
            for (const auto& u : {Utility::log(), Utility::power(0.5), Utility::power(-1.0)}) {
                auto nu = gen.simplex(3, 0.05);
                auto sol = solve_trinomial(p, u, nu);
                double c = p.wealth * (1 + r);
                double best = grid_oracle_n1(set, nu, u, c);
                CHECK(std::abs(sol.u - best) <= 1e-6 * std::max(1.0, std::abs(best)));
                CHECK(sol.lambda.residual_norm <= 1e-8);
                auto budgets = product_budgets(set, sol.terminal_wealth, r);
                for (double x : budgets) CHECK(std::abs(x - p.wealth) <= 1e-8 * p.wealth);
            }
        }
    }
}

TEST_CASE("two-period system against the constrained primal") {
    oracle::Gen gen(53);
    for (double b : {1.05, 1.0}) {
        auto p = fixture(2, b, 0.05);
        auto set = product_measures(extremal_measures(p), 2);
        Eigen::MatrixXd a = dense(set);
        for (const auto& u : {Utility::log(), Utility::power(0.5), Utility::exponential(0.01)}) {
            auto nu = gen.simplex(9, 0.02);
            auto sol = solve_trinomial(p, u, nu);
            double best = oracle::constrained_max(a, nu, u, p.wealth * 1.05 * 1.05);
            CHECK(std::abs(sol.u - best) <= 1e-6 * std::max(1.0, std::abs(best)));
            for (double x : product_budgets(set, sol.terminal_wealth, 0.05))
                CHECK(std::abs(x - p.wealth) <= 1e-8 * p.wealth);
        }
    }
}

TEST_CASE("per-utility wealth formulas") {
    auto p = fixture(2, 1.0, 0.05);
    auto set = product_measures(extremal_measures(p), 2);
    oracle::Gen gen(59);
    auto nu = gen.simplex(9);
    const double rn = 1.05 * 1.05;

    auto log_sol = solve_lambda_system(set, Utility::log(), nu, p.wealth, p.r);
    auto lw = optimal_terminal_wealth_trinomial(log_sol.lambda, set, Utility::log(), nu, p.r);
    for (std::int64_t b = 0; b < 9; ++b) {
        double s = 0.0;
        for (std::int64_t j = 0; j < 4; ++j) s += log_sol.lambda[j] * set.probability(j, b) / nu[b];
        CHECK(lw[b] == doctest::Approx(rn / s).epsilon(1e-12));
    }

    const double alpha = 0.02;
    auto eu = Utility::exponential(alpha);
    auto exp_sol = solve_lambda_system(set, eu, nu, p.wealth, p.r);
    auto ew = optimal_terminal_wealth_trinomial(exp_sol.lambda, set, eu, nu, p.r);
    for (std::int64_t b = 0; b < 9; ++b) {
        // the displayed form carries the multipliers with the opposite sign
        double s = 0.0;
        for (std::int64_t j = 0; j < 4; ++j) s += -exp_sol.lambda[j] * set.probability(j, b) / nu[b];
        CHECK(ew[b] == doctest::Approx(-std::log(-s / (rn * alpha)) / alpha).epsilon(1e-12));
    }

    auto pu = Utility::power(0.5);
    auto pow_sol = solve_lambda_system(set, pu, nu, p.wealth, p.r);
    auto pw = optimal_terminal_wealth_trinomial(pow_sol.lambda, set, pu, nu, p.r);
    for (std::int64_t b = 0; b < 9; ++b) {
        double s = 0.0;
        for (std::int64_t j = 0; j < 4; ++j) s += pow_sol.lambda[j] * set.probability(j, b) / nu[b];
        CHECK(pw[b] == doctest::Approx(std::pow(s / rn, 1.0 / (0.5 - 1.0))).epsilon(1e-12));
    }
}

TEST_CASE("martingale anticipation gives the risk-free claim") {
    auto p = fixture(2, 1.05, 0.02);
    auto pair = extremal_measures(p);
    auto nu = interior_path_measure(pair, {0.3, 0.6});
    for (const auto& u : {Utility::log(), Utility::power(0.5), Utility::exponential(0.05)}) {
        auto sol = solve_trinomial(p, u, nu);
        double c = p.wealth * 1.02 * 1.02;
        for (double v : sol.terminal_wealth) CHECK(std::abs(v - c) <= 1e-8 * c);
        for (const auto& layer : sol.tree.delta)
            for (double d : layer) CHECK(std::abs(d) <= 1e-8);
        CHECK(sol.tree.replicability.ok);
    }
}

TEST_CASE("log wealth scales with initial wealth") {
    auto p = fixture(2, 1.0, 0.05);
    auto set = product_measures(extremal_measures(p), 2);
    oracle::Gen gen(61);
    auto nu = gen.simplex(9);
    auto one = solve_lambda_system(set, Utility::log(), nu, 100.0, p.r);
    auto two = solve_lambda_system(set, Utility::log(), nu, 200.0, p.r);
    auto w1 = optimal_terminal_wealth_trinomial(one.lambda, set, Utility::log(), nu, p.r);
    auto w2 = optimal_terminal_wealth_trinomial(two.lambda, set, Utility::log(), nu, p.r);
    for (std::size_t b = 0; b < 9; ++b) CHECK(w2[b] == doctest::Approx(2 * w1[b]).epsilon(1e-9));
    for (std::size_t j = 0; j < 4; ++j) CHECK(two.lambda[j] == doctest::Approx(one.lambda[j] / 2).epsilon(1e-8));
}

TEST_CASE("value bounds") {
    oracle::Gen gen(67);
    for (int N : {1, 2, 3}) {
        auto p = fixture(N, 1.0, 0.05);
        auto pair = extremal_measures(p);
        std::int64_t paths = 1;
        for (int i = 0; i < N; ++i) paths *= 3;
        auto nu = gen.simplex(static_cast<std::size_t>(paths), 0.2 / static_cast<double>(paths));
        auto sol = solve_trinomial(p, Utility::log(), nu);
        double rf = std::log(p.wealth * std::pow(1.05, N));
        CHECK(sol.u >= rf - 1e-12);
        CHECK(sol.riskfree_utility == doctest::Approx(rf).epsilon(1e-14));
        // pricing with a single martingale measure relaxes the constraints: log value
        // ln(v(1+r)^N) + KL(ν | Q) bounds the trinomial value from above
        for (int k = 0; k < 20; ++k) {
            std::vector<double> t;
            for (int i = 0; i < N; ++i) t.push_back(gen.uniform(0.01, 0.99));
            auto qm = interior_path_measure(pair, t);
            double kl = 0.0;
            for (std::size_t b = 0; b < nu.size(); ++b) kl += nu[b] * std::log(nu[b] / qm[b]);
            CHECK(sol.u <= rf + kl + 1e-10);
        }
    }
}

TEST_CASE("middle branch removal leaves no feasible claim") {
    // with ν off the middle paths the equality budgets pin V̂_N on the remaining paths and
    // force a negative value somewhere
    for (double b : {1.05, 1.0}) {
        auto p = fixture(1, b, 0.05);
        CHECK_THROWS_AS(solve_trinomial(p, Utility::log(), {0.5, 0.0, 0.5}, true), std::exception);
    }
    CHECK_THROWS_AS(solve_trinomial(fixture(1), Utility::log(), {0.5, 0.0, 0.5}, false), InvalidParameter);
    CHECK_THROWS_AS(solve_trinomial(fixture(1), Utility::exponential(1.0), {0.5, 0.0, 0.5}, true), std::exception);
}

TEST_CASE("single-period hedge") {
    for (double b : {1.05, 1.0}) {
        auto p = fixture(1, b, 0.05);
        auto sol = solve_trinomial(p, Utility::log(), {0.5, 0.3, 0.2});
        const auto& v = sol.terminal_wealth;
        double s = p.s;
        double um = (v[0] - v[1]) / (s * (p.a - p.b));
        double md = (v[1] - v[2]) / (s * (p.b - p.c));
        double ud = (v[0] - v[2]) / (s * (p.a - p.c));
        CHECK(std::abs(um - md) <= 1e-7 * std::max(1.0, std::abs(um)));
        CHECK(std::abs(um - ud) <= 1e-7 * std::max(1.0, std::abs(um)));
        CHECK(sol.tree.replicability.ok);
        CHECK(sol.tree.delta[0][0] == doctest::Approx(um).epsilon(1e-9));
        TrinomialLattice lat(p);
        auto sim = simulate_trinomial(sol.tree, lat, p.r, p.wealth);
        for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(sim[i] - v[i]) <= 1e-7 * v[i]);
    }
}

TEST_CASE("flat claim needs no stock") {
    auto p = fixture(3, 1.05, 0.02);
    TrinomialLattice lat(p);
    auto tree = trinomial_wealth_and_delta(std::vector<double>(27, 50.0), lat, extremal_measures(p), p.r);
    CHECK(tree.replicability.ok);
    for (const auto& layer : tree.delta)
        for (double d : layer) CHECK(d == doctest::Approx(0.0));
    CHECK(tree.wealth[0][0] == doctest::Approx(50.0 / std::pow(1.02, 3)).epsilon(1e-12));
}

TEST_CASE("replicability check names the worst node") {
    auto p = fixture(1);
    TrinomialLattice lat(p);
    // a butterfly is not spanned by stock and bond
    auto tree = trinomial_wealth_and_delta({0.0, 1.0, 0.0}, lat, extremal_measures(p), p.r);
    CHECK_FALSE(tree.replicability.ok);
    CHECK(tree.replicability.worst_period == 0);
    CHECK(tree.replicability.worst_mismatch > 1e-7);
}

TEST_CASE("terminal anticipation lift") {
    auto p = fixture(2, 1.0, 0.05);
    TrinomialLattice lat(p);
    auto pair = extremal_measures(p);
    std::vector<double> nu_t{0.1, 0.2, 0.3, 0.15, 0.15, 0.1};
    auto lifted = lift_terminal_anticipation(lat, pair, {0.5, 0.5}, nu_t);
    REQUIRE(lifted.size() == 9);
    std::vector<double> back(6, 0.0);
    for (std::int64_t b = 0; b < 9; ++b) back[static_cast<std::size_t>(lat.path_terminal(b))] += lifted[b];
    for (std::size_t x = 0; x < 6; ++x) CHECK(back[x] == doctest::Approx(nu_t[x]).epsilon(1e-14));
    // paths sharing an endpoint split its weight by the interior measure
    auto path = interior_path_measure(pair, {0.5, 0.5});
    std::int64_t um = 0 + 1 * 3, mu = 1 + 0 * 3;
    CHECK(lifted[um] / lifted[mu] == doctest::Approx(path[um] / path[mu]).epsilon(1e-12));
}

}
