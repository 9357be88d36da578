#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace fairrec {

inline double normal_pdf(double x) {
    return 0.3989422804014326779399461 * std::exp(-0.5 * x * x);
}

/// Standard normal CDF via the Abramowitz-Stegun 26.2.17 rational
/// approximation, absolute error below 7.5e-8. Every consumer of p-values
/// goes through this one routine so reported precision is consistent.
inline double normal_cdf(double x) {
    const double ax = std::fabs(x);
    const double t = 1.0 / (1.0 + 0.2316419 * ax);
    const double poly =
        t * (0.319381530 + t * (-0.356563782 + t * (1.781477937 + t * (-1.821255978 + t * 1.330274429))));
    const double tail = normal_pdf(ax) * poly;
    return x >= 0.0 ? 1.0 - tail : tail;
}

inline double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

/// Sample standard deviation (n-1 denominator).
inline double sample_stddev(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace fairrec
