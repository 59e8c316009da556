#pragma once

// Modified Bessel functions of the first kind, orders 0 and 1.
//
// Power series up to |x| = 12, Hankel asymptotic expansion beyond. At the
// switchover the truncated asymptotic series is accurate to ~e^{-2x}, well
// under 1e-10 relative.

#include <cmath>
#include <numbers>

namespace mtm {

namespace detail {

inline constexpr double kBesselSeriesLimit = 12.0;

/// sum_k (x/2)^(2k+nu) / (k! (k+nu)!) for nu in {0, 1}, x >= 0.
inline double bessel_i_series(int nu, double x) {
    const double q = 0.25 * x * x;
    double term = nu == 0 ? 1.0 : 0.5 * x;
    double sum = term;
    for (int k = 1; k < 200; ++k) {
        term *= q / (static_cast<double>(k) * static_cast<double>(k + nu));
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return sum;
}

/// 1 / sqrt(2 pi x) * sum_k (-1)^k a_k(nu) / x^k, stopped at the smallest term.
inline double bessel_i_asymptotic_scaled(int nu, double x) {
    const double mu = 4.0 * nu * nu;
    double term = 1.0;
    double sum = 1.0;
    double last = 1.0;
    for (int k = 1; k < 60; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= -(mu - odd * odd) / (k * 8.0 * x);
        if (std::abs(term) > last) break;
        sum += term;
        last = std::abs(term);
        if (last < 1e-17 * std::abs(sum)) break;
    }
    return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

inline double bessel_i_asymptotic(int nu, double x) {
    return std::exp(x) * bessel_i_asymptotic_scaled(nu, x);
}

} // namespace detail

/// e^{-|x|} I0(x).
inline double bessel_i0e(double x) {
    const double ax = std::abs(x);
    return ax <= detail::kBesselSeriesLimit ? std::exp(-ax) * detail::bessel_i_series(0, ax)
                                            : detail::bessel_i_asymptotic_scaled(0, ax);
}

/// e^{-|x|} I1(x).
inline double bessel_i1e(double x) {
    const double ax = std::abs(x);
    const double v = ax <= detail::kBesselSeriesLimit ? std::exp(-ax) * detail::bessel_i_series(1, ax)
                                                      : detail::bessel_i_asymptotic_scaled(1, ax);
    return x < 0.0 ? -v : v;
}

/// I0(x). Even in x.
inline double bessel_i0(double x) {
    const double ax = std::abs(x);
    return ax <= detail::kBesselSeriesLimit ? detail::bessel_i_series(0, ax)
                                            : detail::bessel_i_asymptotic(0, ax);
}

/// I1(x). Odd in x.
inline double bessel_i1(double x) {
    const double ax = std::abs(x);
    const double v = ax <= detail::kBesselSeriesLimit ? detail::bessel_i_series(1, ax)
                                                      : detail::bessel_i_asymptotic(1, ax);
    return x < 0.0 ? -v : v;
}

} // namespace mtm
