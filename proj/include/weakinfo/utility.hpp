#pragma once

#include <string>

namespace weakinfo {

enum class UtilityKind { log, power, exponential };

/// Log, power (x^γ/γ) or exponential (-e^{-αx}) utility with its marginal, inverse
/// marginal I = (U')^{-1} and convex conjugate Ũ(y) = sup_x [U(x) - xy].
///
/// Every map is total on its stated domain and throws DomainError outside it.
class Utility {
public:
    static Utility log();
    static Utility power(double gamma);
    static Utility exponential(double alpha);

    UtilityKind kind() const { return kind_; }
    double gamma() const { return gamma_; }
    double alpha() const { return alpha_; }
    std::string name() const;

    /// Log and power utilities need x > 0; exponential accepts any real wealth.
    bool requires_positive_wealth() const { return kind_ != UtilityKind::exponential; }
    /// The Inada condition U'(0+) = ∞, U'(∞) = 0 (false for exponential).
    bool satisfies_inada() const { return kind_ != UtilityKind::exponential; }

    double evaluate(double x) const;
    double marginal(double x) const;
    double inverse_marginal(double y) const;
    /// I(e^{log_y}), computed without forming y (keeps tiny multipliers usable).
    double inverse_marginal_log(double log_y) const;
    /// d/dℓ of I(e^ℓ), i.e. y·I'(y) at y = e^ℓ.
    double inverse_marginal_log_slope(double log_y) const;
    /// dI/dy evaluated at y.
    double inverse_marginal_derivative(double y) const;
    double conjugate(double y) const;

    bool operator==(const Utility&) const = default;

private:
    Utility(UtilityKind kind, double gamma, double alpha) : kind_(kind), gamma_(gamma), alpha_(alpha) {}

    UtilityKind kind_;
    double gamma_;
    double alpha_;
};

}  // namespace weakinfo
