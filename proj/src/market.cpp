#include "weakinfo/market.hpp"

#include "weakinfo/errors.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace weakinfo {

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

void throw_first(const ArbitrageReport& rep) {
    if (!rep.ok) throw InvalidParameter(rep.violations.front());
}

std::int64_t ipow(std::int64_t base, int e) {
    std::int64_t r = 1;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

}  // namespace

ArbitrageReport validate_no_arbitrage(const BinomialParams& p) {
    ArbitrageReport rep;
    if (!(p.h > p.r)) rep.violations.push_back("no-arbitrage requires h > r (h=" + fmt(p.h) + ", r=" + fmt(p.r) + ")");
    if (!(p.r > -p.k)) rep.violations.push_back("no-arbitrage requires r > -k (r=" + fmt(p.r) + ", k=" + fmt(p.k) + ")");
    rep.ok = rep.violations.empty();
    return rep;
}

ArbitrageReport validate_no_arbitrage(const TrinomialParams& p) {
    ArbitrageReport rep;
    double rho = 1.0 + p.r;
    if (!(p.a > rho)) rep.violations.push_back("no-arbitrage requires a > 1+r (a=" + fmt(p.a) + ", 1+r=" + fmt(rho) + ")");
    if (!(rho > p.c)) rep.violations.push_back("no-arbitrage requires 1+r > c (1+r=" + fmt(rho) + ", c=" + fmt(p.c) + ")");
    rep.ok = rep.violations.empty();
    return rep;
}

ArbitrageReport validate_no_arbitrage(const CompleteMarketSpec& m) {
    ArbitrageReport rep;
    int periods_with_matrix = static_cast<int>(m.gross_returns.size());
    for (int n = 0; n < periods_with_matrix; ++n) {
        const auto& g = m.gross_returns[static_cast<std::size_t>(n)];
        if (g.rows() != m.states || g.cols() != m.states) {
            rep.violations.push_back("period " + std::to_string(n) + ": return matrix must be " +
                                     std::to_string(m.states) + "x" + std::to_string(m.states));
            continue;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(g.transpose());
        if (!lu.isInvertible()) {
            rep.violations.push_back("period " + std::to_string(n) + ": return matrix is singular (market not complete)");
            continue;
        }
        Eigen::VectorXd q = lu.solve(Eigen::VectorXd::Constant(m.states, 1.0 + m.r));
        for (int j = 0; j < m.states; ++j) {
            if (!(q(j) > 0.0))
                rep.violations.push_back("period " + std::to_string(n) + ": martingale weight of state " +
                                         std::to_string(j) + " is " + fmt(q(j)) + " (must be > 0)");
        }
    }
    rep.ok = rep.violations.empty();
    return rep;
}

void require_valid(const BinomialParams& p) {
    if (!(p.s > 0)) throw InvalidParameter("initial price s must be > 0");
    if (!(p.wealth > 0)) throw InvalidParameter("initial wealth v must be > 0");
    if (!(1.0 - p.k > 0)) throw InvalidParameter("prices must stay positive: 1-k > 0 (k=" + fmt(p.k) + ")");
    if (p.periods < 1) throw InvalidParameter("periods N must be >= 1");
    if (p.periods > kMaxBinomialPeriods)
        throw InvalidParameter("periods N=" + std::to_string(p.periods) + " exceeds the binomial cap of " +
                               std::to_string(kMaxBinomialPeriods));
    throw_first(validate_no_arbitrage(p));
}

void require_valid(const TrinomialParams& p) {
    if (!(p.s > 0)) throw InvalidParameter("initial price s must be > 0");
    if (!(p.wealth > 0)) throw InvalidParameter("initial wealth v must be > 0");
    if (!(p.a > p.b && p.b > p.c)) throw InvalidParameter("multipliers must satisfy a > b > c");
    if (!(p.c > 0)) throw InvalidParameter("multiplier c must be > 0");
    if (p.periods < 1) throw InvalidParameter("periods N must be >= 1");
    if (p.periods > kMaxTrinomialPeriods)
        throw InvalidParameter("periods N=" + std::to_string(p.periods) + " exceeds the trinomial cap of " +
                               std::to_string(kMaxTrinomialPeriods));
    throw_first(validate_no_arbitrage(p));
}

void require_valid(const CompleteMarketSpec& m) {
    if (m.states < 2) throw InvalidParameter("a complete market needs at least 2 states");
    if (m.initial_prices.size() != m.states) throw InvalidParameter("initial_prices must have one entry per asset");
    for (int a = 0; a < m.states; ++a)
        if (!(m.initial_prices(a) > 0)) throw InvalidParameter("initial prices must be > 0");
    if (!(m.wealth > 0)) throw InvalidParameter("initial wealth v must be > 0");
    if (m.periods < 1) throw InvalidParameter("periods N must be >= 1");
    if (m.gross_returns.size() != 1 && m.gross_returns.size() != static_cast<std::size_t>(m.periods))
        throw InvalidParameter("gross_returns must hold one matrix or one per period");
    double paths = std::pow(static_cast<double>(m.states), m.periods);
    if (paths > static_cast<double>(kMaxCompletePaths))
        throw InvalidParameter("M^N = " + fmt(paths) + " paths exceeds the cap of " + std::to_string(kMaxCompletePaths));
    throw_first(validate_no_arbitrage(m));
}

// ---------------------------------------------------------------------------

BinomialLattice::BinomialLattice(const BinomialParams& p) : s_(p.s), h_(p.h), k_(p.k), periods_(p.periods) {
    require_valid(p);
}

double BinomialLattice::price(int n, int downs) const {
    return s_ * std::pow(1.0 + h_, n - downs) * std::pow(1.0 - k_, downs);
}

int BinomialLattice::path_downs(std::int64_t path, int upto) const {
    int d = 0;
    for (int t = 0; t < upto; ++t) d += static_cast<int>((path >> t) & 1);
    return d;
}

std::string BinomialLattice::path_label(std::int64_t path) const {
    std::string out;
    for (int t = 0; t < periods_; ++t) out += ((path >> t) & 1) ? 'D' : 'U';
    return out;
}

// ---------------------------------------------------------------------------

TrinomialLattice::TrinomialLattice(const TrinomialParams& p)
    : s_(p.s), factors_{p.a, p.b, p.c}, periods_(p.periods), path_count_(0) {
    require_valid(p);
    path_count_ = ipow(3, periods_);
    for (int i = periods_; i >= 0; --i)
        for (int j = periods_ - i; j >= 0; --j) terminals_.push_back({i, j});
}

double TrinomialLattice::price(int n, int ups, int mids) const {
    return s_ * std::pow(factors_[0], ups) * std::pow(factors_[1], mids) * std::pow(factors_[2], n - ups - mids);
}

int TrinomialLattice::path_outcome(std::int64_t path, int t) const {
    for (int i = 0; i < t; ++i) path /= 3;
    return static_cast<int>(path % 3);
}

TrinomialLattice::Node TrinomialLattice::path_node(std::int64_t path, int n) const {
    Node node{0, 0};
    for (int t = 0; t < n; ++t, path /= 3) {
        int o = static_cast<int>(path % 3);
        if (o == 0) ++node.ups;
        if (o == 1) ++node.mids;
    }
    return node;
}

std::string TrinomialLattice::path_label(std::int64_t path) const {
    static constexpr char kNames[] = {'U', 'M', 'D'};
    std::string out;
    for (int t = 0; t < periods_; ++t, path /= 3) out += kNames[path % 3];
    return out;
}

int TrinomialLattice::terminal_index(Node node) const {
    // Row for `ups` starts after all rows with more ups: sum_{u>ups} (N-u+1).
    int start = 0;
    for (int u = periods_; u > node.ups; --u) start += periods_ - u + 1;
    return start + (periods_ - node.ups - node.mids);
}

// ---------------------------------------------------------------------------

CompleteMarket::CompleteMarket(CompleteMarketSpec spec) : spec_(std::move(spec)), path_count_(0) {
    require_valid(spec_);
    path_count_ = ipow(spec_.states, spec_.periods);
    for (const auto& g : spec_.gross_returns) {
        Eigen::VectorXd q = g.transpose().fullPivLu().solve(Eigen::VectorXd::Constant(spec_.states, 1.0 + spec_.r));
        weights_.push_back(q);
    }
    if (weights_.size() == 1)
        for (int n = 1; n < spec_.periods; ++n) weights_.push_back(weights_.front());

    path_terminal_.resize(static_cast<std::size_t>(path_count_));
    if (spec_.gross_returns.size() == 1) {
        std::map<std::vector<int>, int> index;
        for (std::int64_t p = 0; p < path_count_; ++p) {
            std::vector<int> counts(static_cast<std::size_t>(spec_.states), 0);
            for (int t = 0; t < spec_.periods; ++t) ++counts[static_cast<std::size_t>(path_state(p, t))];
            auto [it, inserted] = index.emplace(counts, static_cast<int>(index.size()));
            path_terminal_[static_cast<std::size_t>(p)] = it->second;
        }
        terminal_count_ = index.size();
    } else {
        for (std::int64_t p = 0; p < path_count_; ++p) path_terminal_[static_cast<std::size_t>(p)] = static_cast<int>(p);
        terminal_count_ = static_cast<std::size_t>(path_count_);
    }
}

int CompleteMarket::path_state(std::int64_t path, int t) const {
    for (int i = 0; i < t; ++i) path /= spec_.states;
    return static_cast<int>(path % spec_.states);
}

std::string CompleteMarket::path_label(std::int64_t path) const {
    std::string out;
    for (int t = 0; t < spec_.periods; ++t) {
        if (t) out += '.';
        out += std::to_string(path_state(path, t));
    }
    return out;
}

const Eigen::MatrixXd& CompleteMarket::gross_returns(int n) const {
    return spec_.gross_returns.size() == 1 ? spec_.gross_returns.front()
                                           : spec_.gross_returns[static_cast<std::size_t>(n)];
}

Eigen::VectorXd CompleteMarket::prices(std::int64_t path, int n) const {
    Eigen::VectorXd s = spec_.initial_prices;
    for (int t = 0; t < n; ++t) s = s.cwiseProduct(gross_returns(t).row(path_state(path, t)).transpose());
    return s;
}

Eigen::MatrixXd CompleteMarket::price_matrix(std::int64_t path, int n) const {
    Eigen::VectorXd s = prices(path, n);
    return gross_returns(n) * s.asDiagonal();
}

}  // namespace weakinfo
