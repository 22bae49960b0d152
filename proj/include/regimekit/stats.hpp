#ifndef REGIMEKIT_STATS_HPP
#define REGIMEKIT_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace regimekit {

inline double mean(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

// Sample standard deviation (n-1 denominator).
inline double sample_sd(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

// Quantile by linear interpolation between order statistics, h = (n-1)p + 1
// in 1-based indexing (the R type-7 / numpy default convention).
inline double quantile_type7(std::vector<double> x, double p) {
    std::sort(x.begin(), x.end());
    const std::size_t n = x.size();
    if (n == 1) return x[0];
    double h = static_cast<double>(n - 1) * p;
    auto lo = static_cast<std::size_t>(h);
    if (lo >= n - 1) return x[n - 1];
    double frac = h - static_cast<double>(lo);
    return x[lo] + frac * (x[lo + 1] - x[lo]);
}

// Standard normal upper tail P(Z > z).
inline double normal_sf(double z) {
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

// Two-sided normal p-value.
inline double normal_two_sided_p(double z) {
    return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

}  // namespace regimekit

#endif
