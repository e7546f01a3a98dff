#include "weakinfo/rational.hpp"

#include "weakinfo/errors.hpp"

#include <cctype>
#include <charconv>

namespace weakinfo {

namespace {

using boost::multiprecision::cpp_int;

cpp_int pow10(int e) {
    cpp_int r = 1;
    for (int i = 0; i < e; ++i) r *= 10;
    return r;
}

Rational parse_decimal(std::string_view s) {
    bool neg = false;
    std::size_t pos = 0;
    if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
        neg = s[pos] == '-';
        ++pos;
    }
    cpp_int mantissa = 0;
    int frac_digits = 0;
    bool seen_digit = false;
    bool seen_point = false;
    for (; pos < s.size(); ++pos) {
        char c = s[pos];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            mantissa = mantissa * 10 + (c - '0');
            if (seen_point) ++frac_digits;
            seen_digit = true;
        } else if (c == '.' && !seen_point) {
            seen_point = true;
        } else {
            break;
        }
    }
    if (!seen_digit) throw InvalidParameter("not a number: '" + std::string(s) + "'");
    int exponent = 0;
    if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
        ++pos;
        auto [ptr, ec] = std::from_chars(s.data() + pos + (s[pos] == '+' ? 1 : 0), s.data() + s.size(), exponent);
        if (ec != std::errc() || ptr != s.data() + s.size())
            throw InvalidParameter("bad exponent in '" + std::string(s) + "'");
        pos = s.size();
    }
    if (pos != s.size()) throw InvalidParameter("trailing characters in '" + std::string(s) + "'");
    int shift = exponent - frac_digits;
    Rational q = shift >= 0 ? Rational(mantissa * pow10(shift)) : Rational(mantissa, pow10(-shift));
    return neg ? Rational(-q) : q;
}

}  // namespace

Rational parse_rational(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    if (text.empty()) throw InvalidParameter("empty number");
    auto slash = text.find('/');
    if (slash == std::string_view::npos) return parse_decimal(text);
    Rational num = parse_decimal(text.substr(0, slash));
    Rational den = parse_decimal(text.substr(slash + 1));
    if (den == 0) throw InvalidParameter("zero denominator in '" + std::string(text) + "'");
    return num / den;
}

Rational rational_from_double(double x) {
    if (!std::isfinite(x)) throw InvalidParameter("non-finite number");
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return parse_decimal(std::string_view(buf, static_cast<std::size_t>(ptr - buf)));
}

std::string to_string(const Rational& q) {
    auto num = boost::multiprecision::numerator(q);
    auto den = boost::multiprecision::denominator(q);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

}  // namespace weakinfo
