#include "doctest.h"

#include "oracles.hpp"
#include "weakinfo/complete_solver.hpp"
#include "weakinfo/errors.hpp"

#include <cmath>
#include <vector>

using namespace weakinfo;

namespace {

BinomialParams paper(int periods) { return {20.0, 0.09, 0.019, 0.032, periods, 200.0}; }

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

// λ straight from the budget equation, per family
double oracle_lambda(const Utility& u, const std::vector<double>& pt, const std::vector<double>& nu, double v, double G) {
    switch (u.kind()) {
        case UtilityKind::log: return 1.0 / v;
        case UtilityKind::power: {
            double beta = 1.0 / (u.gamma() - 1.0);
            double e = 0.0;
            for (std::size_t x = 0; x < pt.size(); ++x) e += pt[x] * std::pow(pt[x] / nu[x], beta);
            return G * std::pow(v * G / e, 1.0 / beta);
        }
        case UtilityKind::exponential: {
            double kl = 0.0;
            for (std::size_t x = 0; x < pt.size(); ++x) kl += pt[x] * std::log(pt[x] / nu[x]);
            return u.alpha() * G * std::exp(-v * u.alpha() * G - kl);
        }
    }
    return 0.0;
}

}  // namespace

TEST_SUITE("complete_solver") {

TEST_CASE("log multiplier is 1/v") {
    auto prob = make_terminal_problem(paper(3), Anticipation::validated({0.25, 0.25, 0.25, 0.25}));
    auto lam = solve_lambda(prob, Utility::log());
    CHECK(lam.lambda == doctest::Approx(0.005).epsilon(1e-14));
    CHECK(lam.closed_form);
    auto num = solve_lambda(prob, Utility::log(), LambdaMethod::numeric);
    CHECK(rel(num.lambda, 0.005) <= 1e-9);
    CHECK_FALSE(num.closed_form);
}

TEST_CASE("closed-form and bracketing multipliers agree") {
    std::vector<Utility> us{Utility::log(), Utility::power(0.5), Utility::power(-1.5), Utility::exponential(0.01)};
    for (int N : {1, 3, 5}) {
        auto prob = make_terminal_problem(paper(N), Anticipation::validated(std::vector<double>(N + 1, 1.0 / (N + 1))));
        for (const auto& u : us) {
            auto a = solve_lambda(prob, u, LambdaMethod::closed_form);
            auto b = solve_lambda(prob, u, LambdaMethod::numeric);
            CHECK(rel(a.lambda, b.lambda) <= 1e-9);
            CHECK(a.residual <= 1e-10);
            CHECK(b.residual <= 1e-10);
            CHECK(rel(a.lambda, oracle_lambda(u, prob.risk_neutral, prob.nu, prob.wealth, prob.growth)) <= 1e-12);
        }
    }
}

TEST_CASE("exponential multiplier matches the explicit display") {
    for (double alpha : {1.0, 0.05, 0.001}) {
        BinomialParams p = paper(3);
        p.wealth = 2.0;
        auto prob = make_terminal_problem(p, Anticipation::validated({0.2, 0.4, 0.3, 0.1}));
        auto u = Utility::exponential(alpha);
        auto lam = solve_lambda(prob, u);
        CHECK(rel(lam.lambda, oracle_lambda(u, prob.risk_neutral, prob.nu, p.wealth, prob.growth)) <= 1e-9);
        CHECK(rel(lam.lambda, solve_lambda(prob, u, LambdaMethod::numeric).lambda) <= 1e-9);
    }
    // very large vαG: λ underflows but log λ stays usable
    BinomialParams big = paper(5);
    big.wealth = 5000.0;
    auto prob = make_terminal_problem(big, Anticipation::validated(std::vector<double>(6, 1.0 / 6)));
    auto lam = solve_lambda(prob, Utility::exponential(1.0));
    CHECK(std::isfinite(lam.log_lambda));
    CHECK(std::abs(budget(prob, Utility::exponential(1.0), lam.log_lambda) - big.wealth) <= 1e-10 * big.wealth);
}

TEST_CASE("optimal terminal wealth") {
    auto p = paper(3);
    auto nu = Anticipation::validated({0.2, 0.4, 0.3, 0.1});
    auto prob = make_terminal_problem(p, nu);
    auto lam = solve_lambda(prob, Utility::log());
    auto w = optimal_terminal_wealth(prob, Utility::log(), lam.log_lambda);
    double G = std::pow(1.032, 3);
    auto pt = oracle::risk_neutral_terminal(0.09, 0.019, 0.032, 3);
    double disc = 0.0;
    for (std::size_t x = 0; x < 4; ++x) {
        CHECK(w[x] == doctest::Approx(200 * G * nu[x] / pt[x]).epsilon(1e-12));
        disc += pt[x] * w[x];
    }
    CHECK(std::abs(disc / G - 200.0) <= 1e-10 * 200.0);

    for (const auto& u : {Utility::log(), Utility::power(0.3), Utility::exponential(0.2)}) {
        auto flat = make_terminal_problem(p, Anticipation::validated(pt));
        auto wl = optimal_terminal_wealth(flat, u, solve_lambda(flat, u).log_lambda);
        for (double x : wl) CHECK(x == doctest::Approx(200 * G).epsilon(1e-10));
    }
}

TEST_CASE("log value is wealth growth plus relative entropy") {
    auto p = paper(3);
    std::vector<double> nu{0.2, 0.4, 0.3, 0.1};
    auto prob = make_terminal_problem(p, Anticipation::validated(nu));
    auto val = value_of_information(prob, Utility::log());
    auto pt = oracle::risk_neutral_terminal(0.09, 0.019, 0.032, 3);
    double kl = 0.0;
    for (std::size_t x = 0; x < 4; ++x) kl += nu[x] * std::log(nu[x] / pt[x]);
    CHECK(val.u == doctest::Approx(std::log(200 * std::pow(1.032, 3)) + kl).epsilon(1e-12));
    CHECK(val.F == doctest::Approx(kl).epsilon(1e-10));
    REQUIRE(val.pi);
    CHECK(*val.pi == doctest::Approx(kl / val.u).epsilon(1e-10));

    auto neutral = make_terminal_problem(p, Anticipation::validated(pt));
    auto v0 = value_of_information(neutral, Utility::log());
    CHECK(std::abs(v0.F) <= 1e-12);
    CHECK(v0.u == doctest::Approx(std::log(200 * std::pow(1.032, 3))).epsilon(1e-14));
}

TEST_CASE("additional value is nonnegative") {
    oracle::Gen gen(17);
    std::vector<Utility> us{Utility::log(), Utility::power(0.5), Utility::power(-2.0), Utility::exponential(0.05)};
    for (int trial = 0; trial < 100; ++trial) {
        auto p = gen.binomial(6);
        auto nu = gen.simplex(static_cast<std::size_t>(p.periods + 1));
        auto prob = make_terminal_problem(p, Anticipation::validated(nu));
        for (const auto& u : us) {
            auto val = value_of_information(prob, u);
            CHECK(val.F >= -1e-12 * std::max(1.0, std::abs(val.u)));
        }
    }
}

TEST_CASE("closed forms agree with the generic pipeline") {
    oracle::Gen gen(23);
    std::vector<Utility> us{Utility::log(), Utility::power(0.5), Utility::power(-1.0), Utility::exponential(0.02)};
    for (int trial = 0; trial < 50; ++trial) {
        auto p = gen.binomial(6);
        auto prob = make_terminal_problem(p, Anticipation::validated(gen.simplex(static_cast<std::size_t>(p.periods + 1))));
        for (const auto& u : us) {
            auto cf = closed_form_value(prob, u);
            auto gp = value_of_information(prob, u, LambdaMethod::numeric);
            CHECK(rel(cf.u, gp.u) <= 1e-9);
            CHECK(std::abs(cf.F - gp.F) <= 1e-9 * std::max(1.0, std::abs(cf.u)));
            CHECK(cf.pi.has_value() == gp.pi.has_value());
            if (cf.pi && gp.pi) CHECK(std::abs(*cf.pi - *gp.pi) <= 1e-9 * std::max(1.0, std::abs(*cf.pi)));
        }
    }
}

TEST_CASE("proportion is undefined across a sign change or at zero") {
    CHECK_FALSE(proportion(0.0, 1.0));
    CHECK_FALSE(proportion(0.5, -0.1));
    CHECK_FALSE(proportion(-0.5, 0.1));
    REQUIRE(proportion(2.0, 1.0));
    CHECK(*proportion(2.0, 1.0) == 0.5);
    REQUIRE(proportion(-1.0, -2.0));
    CHECK(*proportion(-1.0, -2.0) == -1.0);

    // log utility with v(1+r)^N < 1 and a value above zero
    BinomialParams p = paper(3);
    p.wealth = 0.5;
    auto prob = make_terminal_problem(p, Anticipation::validated({0.7, 0.1, 0.1, 0.1}));
    auto val = value_of_information(prob, Utility::log());
    CHECK(val.riskfree_utility < 0);
    if (val.u > 0) CHECK_FALSE(val.pi);
}

TEST_CASE("log trees on the three-period market") {
    auto sol = solve_binomial(paper(3), Utility::log(), Anticipation::validated({0.25, 0.25, 0.25, 0.25}));
    const auto& d = sol.portfolio.stock;
    CHECK(d[0][0] == doctest::Approx(12.21095).epsilon(1e-6));
    CHECK(d[1][0] == doctest::Approx(76.48093).epsilon(1e-6));
    CHECK(d[1][1] == doctest::Approx(-50.58155).epsilon(1e-6));
    CHECK(d[2][0] == doctest::Approx(146.4281).epsilon(1e-6));
    CHECK(d[2][1] == doctest::Approx(8.141736).epsilon(1e-6));
    CHECK(d[2][2] == doctest::Approx(-107.9549).epsilon(1e-6));
    CHECK(sol.wealth[0][0] == doctest::Approx(200.0).epsilon(1e-12));
}

TEST_CASE("wealth process, martingale and replication") {
    oracle::Gen gen(31);
    std::vector<Utility> us{Utility::log(), Utility::power(0.5), Utility::exponential(0.01)};
    for (int trial = 0; trial < 60; ++trial) {
        auto p = gen.binomial(7);
        auto nu = gen.simplex(static_cast<std::size_t>(p.periods + 1));
        for (const auto& u : us) {
            auto sol = solve_binomial(p, u, Anticipation::validated(nu));
            double pt = (p.r + p.k) / (p.h + p.k);
            CHECK(std::abs(sol.wealth[0][0] - p.wealth) <= 1e-10 * p.wealth);
            for (int n = 0; n < p.periods; ++n)
                for (int i = 0; i <= n; ++i) {
                    double cond = (pt * sol.wealth[n + 1][i] + (1 - pt) * sol.wealth[n + 1][i + 1]) / (1 + p.r);
                    CHECK(std::abs(cond - sol.wealth[n][i]) <= 1e-10 * std::max(1.0, std::abs(sol.wealth[n][i])));
                }
            for (int x = 0; x <= p.periods; ++x) CHECK(sol.wealth[p.periods][x] == sol.terminal_wealth[x]);
            if (u.requires_positive_wealth())
                for (const auto& layer : sol.wealth)
                    for (double w : layer) CHECK(w > 0);

            auto sim = oracle::forward_wealth(sol.portfolio.stock, p.s, p.h, p.k, p.r, p.periods, p.wealth);
            auto own = simulate_strategy(sol.portfolio, BinomialLattice(p), p.r, p.wealth);
            for (std::int64_t b = 0; b < (std::int64_t{1} << p.periods); ++b) {
                double target = sol.terminal_wealth[static_cast<std::size_t>(oracle::downs_of(b, p.periods))];
                double scale = oracle::path_wealth_scale(sol.wealth, b, p.periods);
                CHECK(std::abs(sim[static_cast<std::size_t>(b)] - target) <= 1e-9 * scale);
                CHECK(std::abs(own[static_cast<std::size_t>(b)] - target) <= 1e-9 * scale);
            }
        }
    }
}

TEST_CASE("single-period formulas") {
    auto p = paper(1);
    CHECK(single_period_closed_form(Utility::log(), p, {0.5, 0.5}) == doctest::Approx(12.21095).epsilon(1e-6));

    double pt = (p.r + p.k) / (p.h + p.k);
    CHECK(std::abs(single_period_closed_form(Utility::log(), p, {pt, 1 - pt})) <= 1e-12);

    for (const auto& u : {Utility::log(), Utility::power(0.5), Utility::power(-3.0), Utility::exponential(0.02)}) {
        for (const auto& nu : std::vector<std::vector<double>>{{0.5, 0.5}, {0.8, 0.2}, {0.3, 0.7}}) {
            auto sol = solve_binomial(p, u, Anticipation::validated(nu));
            CHECK(rel(single_period_closed_form(u, p, nu), sol.portfolio.stock[0][0]) <= 1e-9);
        }
    }
    CHECK_THROWS_AS(single_period_closed_form(Utility::log(), paper(2), {0.5, 0.5}), InvalidParameter);
    // exponential formula needs ν₀(h - r) > 0 and ν₁(k + r) > 0
    CHECK_THROWS_AS(single_period_closed_form(Utility::exponential(1.0), p, {0.0, 1.0}), DomainError);
}

TEST_CASE("general complete market") {
    CompleteMarketSpec spec;
    spec.states = 3;
    spec.initial_prices = Eigen::Vector3d(10, 20, 5);
    Eigen::Matrix3d d;
    d << 1.25, 1.10, 1.02, 1.00, 1.05, 1.02, 0.85, 0.95, 1.02;
    spec.gross_returns = {d};
    spec.r = 0.02;
    spec.periods = 2;
    spec.wealth = 100;
    CompleteMarket m(spec);
    std::vector<double> nu(m.terminal_count(), 1.0 / static_cast<double>(m.terminal_count()));
    for (const auto& u : {Utility::log(), Utility::power(0.5), Utility::exponential(0.01)}) {
        auto sol = solve_complete(m, u, Anticipation::validated(nu));
        CHECK(sol.wealth[0][0] == doctest::Approx(100.0).epsilon(1e-10));
        CHECK(sol.value.F >= -1e-12);
        for (int n = 0; n < 2; ++n) {
            std::int64_t width = n == 0 ? 1 : 3;
            for (std::int64_t prefix = 0; prefix < width; ++prefix) {
                Eigen::VectorXd held = m.price_matrix(prefix, n) * sol.holdings[n][prefix];
                Eigen::VectorXd cost = m.prices(prefix, n);
                CHECK(std::abs(cost.dot(sol.holdings[n][prefix]) - sol.wealth[n][prefix]) <=
                      1e-9 * std::abs(sol.wealth[n][prefix]));
                for (int j = 0; j < 3; ++j) {
                    double target = sol.wealth[n + 1][prefix + j * width];
                    CHECK(std::abs(held(j) - target) <= 1e-9 * std::abs(target));
                }
            }
        }
    }
    // binomial embedded as a two-asset complete market gives the same value
    CompleteMarketSpec bin;
    bin.states = 2;
    bin.initial_prices = Eigen::Vector2d(20, 1);
    Eigen::Matrix2d db;
    db << 1.09, 1.032, 0.981, 1.032;
    bin.gross_returns = {db};
    bin.r = 0.032;
    bin.periods = 3;
    bin.wealth = 200;
    CompleteMarket bm(bin);
    auto cs = solve_complete(bm, Utility::log(), Anticipation::validated({0.2, 0.4, 0.3, 0.1}));
    auto bs = solve_binomial(paper(3), Utility::log(), Anticipation::validated({0.2, 0.4, 0.3, 0.1}));
    CHECK(cs.value.u == doctest::Approx(bs.value.u).epsilon(1e-12));
    CHECK(cs.holdings[0][0](0) == doctest::Approx(bs.portfolio.stock[0][0]).epsilon(1e-9));
}

TEST_CASE("pruning") {
    auto p = paper(3);
    CHECK_THROWS_AS(Anticipation::validated({0.5, 0.5, 0.0, 0.0}), InvalidParameter);
    auto nu = Anticipation::validated({0.5, 0.5, 0.0, 0.0}, true);
    auto sol = solve_binomial(p, Utility::log(), nu);
    CHECK(sol.terminal_wealth[2] == 0.0);
    CHECK(sol.terminal_wealth[3] == 0.0);
    CHECK(sol.wealth[0][0] == doctest::Approx(200.0).epsilon(1e-10));
    auto prob = make_terminal_problem(p, nu);
    CHECK_THROWS_AS(solve_lambda(prob, Utility::exponential(0.1)), DomainError);
}

TEST_CASE("sweep properties") {
    BinomialParams p{20.0, 0.08, 0.04, 0.03, 5, 100.0};
    std::vector<NamedAnticipation> nus;
    for (const char* name : {"precise", "uniform", "conservative", "risk-neutral"}) nus.push_back(preset_anticipation(name, 6));
    std::vector<double> grid;
    for (int i = 0; i < 20; ++i) grid.push_back(50.0 + 950.0 * i / 19.0);
    auto factory = binomial_factory(p);

    auto log_rows = sweep(factory, Utility::log(), nus, grid, 1);
    REQUIRE(log_rows.size() == 80);
    for (std::size_t a = 0; a < nus.size(); ++a) {
        double f0 = log_rows[a * 20].F;
        for (std::size_t i = 0; i < 20; ++i) {
            const auto& row = log_rows[a * 20 + i];
            CHECK(row.error.empty());
            CHECK(row.anticipation == nus[a].name);
            CHECK(std::abs(row.F - f0) <= 1e-9);
            if (nus[a].name == "risk-neutral") CHECK(std::abs(row.F) <= 1e-10);
            else if (i > 0) CHECK(*row.pi < *log_rows[a * 20 + i - 1].pi);
        }
    }

    auto pow_rows = sweep(factory, Utility::power(0.5), nus, grid, 4);
    for (std::size_t a = 0; a < nus.size(); ++a)
        for (std::size_t i = 1; i < 20; ++i) {
            CHECK(std::abs(*pow_rows[a * 20 + i].pi - *pow_rows[a * 20].pi) <= 1e-9);
            if (nus[a].name != "risk-neutral") CHECK(pow_rows[a * 20 + i].F > pow_rows[a * 20 + i - 1].F);
        }

    auto threaded = sweep(factory, Utility::log(), nus, grid, 8);
    for (std::size_t k = 0; k < log_rows.size(); ++k) {
        CHECK(threaded[k].anticipation == log_rows[k].anticipation);
        CHECK(threaded[k].u == log_rows[k].u);
        CHECK(threaded[k].F == log_rows[k].F);
    }

    CHECK_THROWS_AS(preset_anticipation("precise", 4), InvalidParameter);
    CHECK_THROWS_AS(preset_anticipation("bogus", 6), InvalidParameter);
    CHECK(preset_anticipation("Risk_Neutral", 6).name == "risk-neutral");

    // a failing row is tagged and the rest keep going
    std::vector<double> bad_grid{-10.0, 100.0};
    auto rows = sweep(factory, Utility::log(), {nus[1]}, bad_grid, 2);
    CHECK_FALSE(rows[0].error.empty());
    CHECK(rows[1].error.empty());
}

}
