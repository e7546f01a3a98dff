#include "weakinfo/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace weakinfo {

Anticipation Anticipation::validated(std::vector<double> weights, bool pruning) {
    require_anticipation(weights, weights.size(), pruning);
    return Anticipation{std::move(weights), pruning};
}

void require_anticipation(const std::vector<double>& nu, std::size_t terminal_count, bool pruning) {
    if (nu.size() != terminal_count) {
        throw InvalidParameter("anticipation has " + std::to_string(nu.size()) + " entries, expected " +
                               std::to_string(terminal_count));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < nu.size(); ++i) {
        double w = nu[i];
        if (!std::isfinite(w) || w < 0.0)
            throw InvalidParameter("anticipation entry " + std::to_string(i) + " is negative or not finite");
        if (w == 0.0 && !pruning)
            throw InvalidParameter("anticipation entry " + std::to_string(i) +
                                   " is zero; zero weights need pruning mode");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        std::ostringstream os;
        os.precision(17);
        os << "anticipation must sum to 1, sums to " << sum;
        throw InvalidParameter(os.str());
    }
}

std::string path_label(int branching, int periods, std::int64_t path) {
    std::string out;
    for (int t = 0; t < periods; ++t, path /= branching) {
        int d = static_cast<int>(path % branching);
        if (branching == 2) {
            out += d ? 'D' : 'U';
        } else if (branching == 3) {
            out += "UMD"[d];
        } else {
            if (t) out += '.';
            out += std::to_string(d);
        }
    }
    return out;
}

namespace {

struct Phi {
    const char* name;
    double (*fn)(double);
};

double phi_square(double x) { return x * x; }
double phi_entropy(double x) { return x > 0 ? x * std::log(x) : 0.0; }
double phi_exp(double x) { return std::exp(x); }

constexpr Phi kPhis[] = {{"x^2", phi_square}, {"x ln x", phi_entropy}, {"e^x", phi_exp}};

}  // namespace

MinimalityReport verify_minimality(const BinomialMeasure<double>& risk_neutral, const std::vector<double>& nu,
                                   const MinimalityOptions& opts) {
    const int N = risk_neutral.periods();
    if (N > 6) throw InvalidParameter("minimality check enumerates paths; keep N <= 6");
    PathMeasure<double> base = risk_neutral.path_measure();
    require_anticipation(nu, base.terminal_count, false);
    PathMeasure<double> minimal = minimal_measure(base, nu);

    std::vector<std::vector<std::size_t>> classes(base.terminal_count);
    for (std::size_t b = 0; b < base.prob.size(); ++b) classes[static_cast<std::size_t>(base.terminal[b])].push_back(b);

    auto objective = [&](const std::vector<double>& q, double (*phi)(double)) {
        double acc = 0.0;
        for (std::size_t b = 0; b < q.size(); ++b) acc += base.prob[b] * phi(q[b] / base.prob[b]);
        return acc;
    };

    MinimalityReport rep;
    for (const auto& phi : kPhis) {
        MinimalityCheck c;
        c.phi = phi.name;
        c.minimal_value = objective(minimal.prob, phi.fn);
        c.best_sampled = std::numeric_limits<double>::infinity();
        rep.checks.push_back(c);
    }

    std::mt19937_64 rng(opts.seed);
    std::gamma_distribution<double> gamma(1.0, 1.0);
    static constexpr double kThetas[] = {0.001, 0.05, 0.3, 0.7, 0.95};
    const int grid = static_cast<int>(std::size(kThetas)) * static_cast<int>(base.prob.size());

    std::vector<double> q(base.prob.size());
    for (int s = 0; s < opts.samples; ++s) {
        // First draws walk a near-vertex grid: mass concentrated on one path per class.
        for (const auto& cls : classes) {
            const std::size_t m = cls.size();
            std::vector<double> w(m);
            if (s < grid) {
                double theta = kThetas[static_cast<std::size_t>(s) % std::size(kThetas)];
                std::size_t vertex = static_cast<std::size_t>(s / static_cast<int>(std::size(kThetas))) % m;
                for (std::size_t j = 0; j < m; ++j) w[j] = theta / static_cast<double>(m) + (j == vertex ? 1.0 - theta : 0.0);
            } else {
                double total = 0.0;
                for (auto& x : w) total += (x = gamma(rng));
                for (auto& x : w) x /= total;
            }
            double mass = nu[static_cast<std::size_t>(base.terminal[cls.front()])];
            for (std::size_t j = 0; j < m; ++j) q[cls[j]] = mass * w[j];
        }
        for (std::size_t f = 0; f < std::size(kPhis); ++f) {
            double val = objective(q, kPhis[f].fn);
            auto& c = rep.checks[f];
            c.best_sampled = std::min(c.best_sampled, val);
            if (val - c.minimal_value < -opts.tolerance) ++c.violations;
        }
    }
    for (auto& c : rep.checks) c.margin = c.best_sampled - c.minimal_value;
    rep.samples = opts.samples;
    return rep;
}

bool is_martingale(const BinomialMeasure<double>& m, const BinomialLattice& lattice, double r, double tol) {
    for (int n = 0; n < m.periods(); ++n) {
        for (int i = 0; i <= n; ++i) {
            double s = lattice.price(n, i);
            double expected = m.up(n, i) * lattice.price(n + 1, i) + m.down(n, i) * lattice.price(n + 1, i + 1);
            if (std::abs(expected / (1.0 + r) - s) > tol * s) return false;
        }
    }
    return true;
}

}  // namespace weakinfo
