#include "weakinfo/utility.hpp"

#include "weakinfo/errors.hpp"

#include <cmath>
#include <sstream>

namespace weakinfo {

namespace {

void require_positive(double y, const char* what) {
    if (!(y > 0) || !std::isfinite(y)) {
        std::ostringstream os;
        os << what << " requires a finite positive argument, got " << y;
        throw DomainError(os.str());
    }
}

}  // namespace

Utility Utility::log() { return {UtilityKind::log, 0.0, 0.0}; }

Utility Utility::power(double gamma) {
    if (!(gamma < 1.0) || gamma == 0.0 || !std::isfinite(gamma))
        throw InvalidParameter("power utility needs gamma < 1 and gamma != 0");
    return {UtilityKind::power, gamma, 0.0};
}

Utility Utility::exponential(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidParameter("exponential utility needs alpha > 0");
    return {UtilityKind::exponential, 0.0, alpha};
}

std::string Utility::name() const {
    std::ostringstream os;
    switch (kind_) {
        case UtilityKind::log: return "log";
        case UtilityKind::power: os << "power(gamma=" << gamma_ << ")"; break;
        case UtilityKind::exponential: os << "exponential(alpha=" << alpha_ << ")"; break;
    }
    return os.str();
}

double Utility::evaluate(double x) const {
    switch (kind_) {
        case UtilityKind::log:
            require_positive(x, "log utility");
            return std::log(x);
        case UtilityKind::power:
            require_positive(x, "power utility");
            return std::pow(x, gamma_) / gamma_;
        case UtilityKind::exponential:
            if (!std::isfinite(x)) throw DomainError("exponential utility requires finite wealth");
            return -std::exp(-alpha_ * x);
    }
    return 0.0;
}

double Utility::marginal(double x) const {
    switch (kind_) {
        case UtilityKind::log:
            require_positive(x, "log marginal utility");
            return 1.0 / x;
        case UtilityKind::power:
            require_positive(x, "power marginal utility");
            return std::pow(x, gamma_ - 1.0);
        case UtilityKind::exponential:
            if (!std::isfinite(x)) throw DomainError("exponential marginal utility requires finite wealth");
            return alpha_ * std::exp(-alpha_ * x);
    }
    return 0.0;
}

double Utility::inverse_marginal(double y) const {
    require_positive(y, "inverse marginal utility");
    return inverse_marginal_log(std::log(y));
}

double Utility::inverse_marginal_log(double log_y) const {
    if (!std::isfinite(log_y)) throw DomainError("inverse marginal utility requires a finite log argument");
    switch (kind_) {
        case UtilityKind::log: return std::exp(-log_y);
        case UtilityKind::power: return std::exp(log_y / (gamma_ - 1.0));
        case UtilityKind::exponential: return -(log_y - std::log(alpha_)) / alpha_;
    }
    return 0.0;
}

double Utility::inverse_marginal_log_slope(double log_y) const {
    switch (kind_) {
        case UtilityKind::log: return -inverse_marginal_log(log_y);
        case UtilityKind::power: return inverse_marginal_log(log_y) / (gamma_ - 1.0);
        case UtilityKind::exponential: return -1.0 / alpha_;
    }
    return 0.0;
}

double Utility::inverse_marginal_derivative(double y) const {
    require_positive(y, "inverse marginal derivative");
    switch (kind_) {
        case UtilityKind::log: return -1.0 / (y * y);
        case UtilityKind::power: return std::pow(y, 1.0 / (gamma_ - 1.0) - 1.0) / (gamma_ - 1.0);
        case UtilityKind::exponential: return -1.0 / (alpha_ * y);
    }
    return 0.0;
}

double Utility::conjugate(double y) const {
    require_positive(y, "convex conjugate");
    switch (kind_) {
        case UtilityKind::log: return -std::log(y) - 1.0;
        case UtilityKind::power: return (1.0 / gamma_ - 1.0) * std::pow(y, gamma_ / (gamma_ - 1.0));
        case UtilityKind::exponential: {
            double x = inverse_marginal(y);
            return -y / alpha_ - x * y;
        }
    }
    return 0.0;
}

}  // namespace weakinfo
