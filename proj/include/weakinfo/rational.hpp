#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <type_traits>

namespace weakinfo {

using Rational = boost::multiprecision::cpp_rational;

/// Parses "3", "-1/4", "0.032" or "1.5e-3" into an exact rational.
Rational parse_rational(std::string_view text);

/// Exact rational equal to the shortest decimal that round-trips `x`.
Rational rational_from_double(double x);

std::string to_string(const Rational& q);

inline double to_double(const Rational& q) { return q.convert_to<double>(); }
inline double to_double(double x) { return x; }

/// Scalar helpers shared by templates that run on both double and Rational.
template <class T>
bool near_equal(const T& a, const T& b, double rel_tol = 1e-12) {
    if constexpr (std::is_same_v<T, Rational>) {
        return a == b;
    } else {
        double scale = std::max({1.0, std::abs(a), std::abs(b)});
        return std::abs(a - b) <= rel_tol * scale;
    }
}

}  // namespace weakinfo
