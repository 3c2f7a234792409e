#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace keyrelay {

namespace detail {

inline constexpr double kEulerGamma = 0.57721566490153286061;
inline constexpr int kMaxTerms = 500;

// E1(x) for 0 < x <= 1: -gamma - ln(x) - sum_{k>=1} (-x)^k / (k k!)
inline double e1_series(double x)
{
    double sum = 0.0;
    double term = 1.0;  // (-x)^k / k!
    for (int k = 1; k <= kMaxTerms; ++k) {
        term *= -x / k;
        const double contrib = term / k;
        sum += contrib;
        if (std::fabs(contrib) < std::fabs(sum) * 1e-17)
            break;
    }
    return -kEulerGamma - std::log(x) - sum;
}

// e^x E1(x) for x > 1 from the continued fraction
//   1 / (x + 1 - 1 / (x + 3 - 4 / (x + 5 - 9 / (x + 7 - ...)))).
// The tail g = x + 3 - 4 / (...) is summed by modified Lentz and the result
// formed as 1 / ((x + 1) - 1 / g), which keeps it inside (1/(x+1), 1/x) in
// floating point.
inline double scaled_e1_continued_fraction(double x)
{
    constexpr double tiny = 1e-300;
    double g = x + 3.0;
    double c = g;
    double d = 0.0;
    for (int i = 1; i <= kMaxTerms; ++i) {
        const double a = -static_cast<double>(i + 1) * (i + 1);
        const double b = x + 3.0 + 2.0 * i;
        d = b + a * d;
        if (d == 0.0)
            d = tiny;
        c = b + a / c;
        if (c == 0.0)
            c = tiny;
        d = 1.0 / d;
        const double del = c * d;
        g *= del;
        if (std::fabs(del - 1.0) < 1e-16)
            break;
    }
    return 1.0 / ((x + 1.0) - 1.0 / g);
}

inline void require_positive(double x, const char* what)
{
    if (!(x > 0.0))
        throw std::domain_error(std::string(what) + ": argument must be positive");
}

}  // namespace detail

/// Exponential integral E1(x) = int_x^inf e^{-u}/u du for x > 0.
///
/// Uses the power series up to x = 1 and a continued fraction above.
/// Underflows to zero for x beyond roughly 740; use scaled_exp_integral
/// when the argument can be large.
inline double exp_integral(double x)
{
    detail::require_positive(x, "exp_integral");
    if (x <= 1.0)
        return detail::e1_series(x);
    return std::exp(-x) * detail::scaled_e1_continued_fraction(x);
}

/// e^x E1(x), finite for every positive x. Satisfies 1/(x+1) < value < 1/x.
inline double scaled_exp_integral(double x)
{
    detail::require_positive(x, "scaled_exp_integral");
    if (x <= 1.0)
        return std::exp(x) * detail::e1_series(x);
    return detail::scaled_e1_continued_fraction(x);
}

}  // namespace keyrelay
