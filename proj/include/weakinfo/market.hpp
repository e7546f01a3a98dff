#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace weakinfo {

inline constexpr int kMaxBinomialPeriods = 20;
inline constexpr int kMaxTrinomialPeriods = 12;
inline constexpr std::int64_t kMaxCompletePaths = std::int64_t{1} << 20;

/// One risky asset moving to s(1+h) or s(1-k) each period, plus a bank account at rate r.
struct BinomialParams {
    double s = 1.0;
    double h = 0.0;
    double k = 0.0;
    double r = 0.0;
    int periods = 1;
    double wealth = 1.0;
};

/// One risky asset with gross per-period multipliers a > b > c.
struct TrinomialParams {
    double s = 1.0;
    double a = 1.0;
    double b = 1.0;
    double c = 1.0;
    double r = 0.0;
    int periods = 1;
    double wealth = 1.0;
};

/// General complete market with M states per period and M linearly independent assets.
/// gross_returns[n](j, a) is the factor applied to asset a's price when state j occurs in
/// period n; a single matrix is reused for every period.
struct CompleteMarketSpec {
    int states = 2;
    Eigen::VectorXd initial_prices;
    std::vector<Eigen::MatrixXd> gross_returns;
    double r = 0.0;
    int periods = 1;
    double wealth = 1.0;
};

struct ArbitrageReport {
    bool ok = true;
    std::vector<std::string> violations;
};

ArbitrageReport validate_no_arbitrage(const BinomialParams& p);
ArbitrageReport validate_no_arbitrage(const TrinomialParams& p);
ArbitrageReport validate_no_arbitrage(const CompleteMarketSpec& m);

/// Full parameter validation (arbitrage plus positivity and caps). Throws InvalidParameter
/// naming the first violated condition.
void require_valid(const BinomialParams& p);
void require_valid(const TrinomialParams& p);
void require_valid(const CompleteMarketSpec& m);

/// Recombining binomial lattice. Node (n, i) is reached after i down-moves in n periods.
/// Path bit t is 1 when period t moves down.
class BinomialLattice {
public:
    explicit BinomialLattice(const BinomialParams& p);

    int periods() const { return periods_; }
    double price(int n, int downs) const;
    double up_factor() const { return 1.0 + h_; }
    double down_factor() const { return 1.0 - k_; }

    std::int64_t path_count() const { return std::int64_t{1} << periods_; }
    int path_downs(std::int64_t path, int upto) const;
    int path_terminal(std::int64_t path) const { return path_downs(path, periods_); }
    double path_price(std::int64_t path, int n) const { return price(n, path_downs(path, n)); }
    std::string path_label(std::int64_t path) const;

private:
    double s_, h_, k_;
    int periods_;
};

/// Recombining trinomial lattice. Node (n, ups, mids); path digit t in {0,1,2} is
/// up / middle / down for period t (least significant digit first).
class TrinomialLattice {
public:
    struct Node {
        int ups;
        int mids;
    };

    explicit TrinomialLattice(const TrinomialParams& p);

    int periods() const { return periods_; }
    double price(int n, int ups, int mids) const;
    double factor(int outcome) const { return factors_[outcome]; }

    std::int64_t path_count() const { return path_count_; }
    int path_outcome(std::int64_t path, int t) const;
    Node path_node(std::int64_t path, int n) const;
    std::string path_label(std::int64_t path) const;

    /// Terminal nodes ordered by ups descending, then mids descending.
    const std::vector<Node>& terminal_nodes() const { return terminals_; }
    std::size_t terminal_count() const { return terminals_.size(); }
    int terminal_index(Node node) const;
    int path_terminal(std::int64_t path) const { return terminal_index(path_node(path, periods_)); }

private:
    double s_;
    double factors_[3];
    int periods_;
    std::int64_t path_count_;
    std::vector<Node> terminals_;
};

/// Validated general complete market: per-period martingale weights and enumerated paths.
/// Path digit t (base M, least significant first) is the state of period t.
class CompleteMarket {
public:
    explicit CompleteMarket(CompleteMarketSpec spec);

    const CompleteMarketSpec& spec() const { return spec_; }
    int states() const { return spec_.states; }
    int periods() const { return spec_.periods; }
    std::int64_t path_count() const { return path_count_; }
    int path_state(std::int64_t path, int t) const;
    std::string path_label(std::int64_t path) const;

    const Eigen::MatrixXd& gross_returns(int n) const;
    /// Strictly positive one-period martingale weights for period n.
    const Eigen::VectorXd& martingale_weights(int n) const { return weights_[static_cast<std::size_t>(n)]; }

    /// Asset prices after the first n periods of `path`.
    Eigen::VectorXd prices(std::int64_t path, int n) const;
    /// D_{n+1}: rows are states of period n, columns the assets, at the node reached by `path`.
    Eigen::MatrixXd price_matrix(std::int64_t path, int n) const;

    /// Terminal identity: the state-count vector when every period shares one return matrix,
    /// otherwise the path itself.
    std::size_t terminal_count() const { return terminal_count_; }
    int path_terminal(std::int64_t path) const { return path_terminal_[static_cast<std::size_t>(path)]; }

private:
    CompleteMarketSpec spec_;
    std::int64_t path_count_;
    std::vector<Eigen::VectorXd> weights_;
    std::vector<int> path_terminal_;
    std::size_t terminal_count_ = 0;
};

}  // namespace weakinfo
