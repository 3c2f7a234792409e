#pragma once

// Independent reference computations used only by the tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

using boost::math::quadrature::gauss_kronrod;

// e^x E1(x) = int_0^inf e^-u / (x + u) du, with u = e^v so that the small-x
// log singularity becomes a smooth sigmoid in v.
inline double scaled_e1(double x)
{
    auto f = [x](double v) {
        const double u = std::exp(v);
        return std::exp(v - u) / (x + u);
    };
    const double knee = std::log(x);
    const double lo = std::min(knee, 0.0) - 45.0;
    const double hi = 5.0;
    double total = 0.0;
    if (knee > lo && knee < hi) {
        total += gauss_kronrod<double, 61>::integrate(f, lo, knee, 20, 1e-15);
        total += gauss_kronrod<double, 61>::integrate(f, knee, hi, 20, 1e-15);
    } else {
        total = gauss_kronrod<double, 61>::integrate(f, lo, hi, 20, 1e-15);
    }
    return total;
}

// E[ln(1 + c X)] for X ~ Exp(1).
inline double mean_log1p_exponential(double c)
{
    auto f = [c](double v) {
        const double t = std::exp(v);
        return std::exp(v - t) * std::log1p(c * t);
    };
    return gauss_kronrod<double, 61>::integrate(f, -60.0, 5.0, 20, 1e-15);
}

// Stationary vector of a dense row-stochastic matrix from (T^T - I) pi = 0
// with the last equation replaced by sum(pi) = 1.
inline std::vector<double> stationary_dense(const std::vector<std::vector<double>>& t)
{
    const auto n = static_cast<Eigen::Index>(t.size());
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            a(i, j) = t[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] - (i == j ? 1.0 : 0.0);
    a.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    const Eigen::VectorXd pi = a.fullPivLu().solve(rhs);
    return {pi.data(), pi.data() + n};
}

// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf)
{
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

}  // namespace oracle
