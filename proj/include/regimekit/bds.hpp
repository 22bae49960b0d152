#ifndef REGIMEKIT_BDS_HPP
#define REGIMEKIT_BDS_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "regimekit/errors.hpp"
#include "regimekit/ingest.hpp"
#include "regimekit/stats.hpp"

namespace regimekit {

struct BdsConfig {
    int m = 2;             // embedding dimension
    double eps_factor = 0.5;  // epsilon as a multiple of the sample std dev
    int t_lag = 1;         // index lag of the delay embedding
};

struct BdsResult {
    int m = 0;
    double epsilon = 0;
    double c1 = 0;         // C(1,r) on the trimmed sample
    double cm = 0;         // C(m,r)
    double k = 0;          // triple-indicator estimator K
    double sigma = 0;      // asymptotic std dev of sqrt(M) (C_m - C_1^m)
    double statistic = 0;
    double p_value = 1;
};

namespace detail {

// Pair indicator: sup-norm distance of the ends of two m-histories <= r.
// Theta(0) = 1, so ties at exactly r count as close.
inline bool embedded_close(std::span<const double> x, std::size_t i, std::size_t j, int m,
                           int t_lag, double r) {
    for (int k = 0; k < m; ++k) {
        double d = x[i + static_cast<std::size_t>(k * t_lag)] -
                   x[j + static_cast<std::size_t>(k * t_lag)];
        if (std::fabs(d) > r) return false;
    }
    return true;
}

}  // namespace detail

// Fraction of embedded point pairs (i<j) whose sup-norm separation is <= r,
// normalized by M(M-1)/2 with M = N - (m-1) * t_lag.
inline double correlation_integral(std::span<const double> x, int m, double r, int t_lag = 1) {
    if (m < 1 || t_lag < 1) throw ConfigError("bds: need m >= 1 and t_lag >= 1");
    const std::int64_t n = static_cast<std::int64_t>(x.size());
    const std::int64_t big_m = n - static_cast<std::int64_t>(m - 1) * t_lag;
    if (big_m < 2) throw SeriesTooShortError("bds: fewer than 2 embedded points");
    std::uint64_t close_pairs = 0;
    for (std::size_t i = 0; i + 1 < static_cast<std::size_t>(big_m); ++i)
        for (std::size_t j = i + 1; j < static_cast<std::size_t>(big_m); ++j)
            if (detail::embedded_close(x, i, j, m, t_lag, r)) ++close_pairs;
    return 2.0 * static_cast<double>(close_pairs) /
           (static_cast<double>(big_m) * static_cast<double>(big_m - 1));
}

namespace detail {

// K = P(two pairs sharing a point are both close), the U-statistic over
// ordered scalar triples: sum_j r_j (r_j - 1) / (N (N-1) (N-2)) with r_j the
// number of neighbours of x_j within epsilon.
inline double k_estimator(std::span<const double> x, double eps) {
    const std::size_t n = x.size();
    if (n < 3) throw SeriesTooShortError("bds: K estimator needs N >= 3");
    std::uint64_t acc = 0;
    for (std::size_t j = 0; j < n; ++j) {
        std::uint64_t rj = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (i != j && std::fabs(x[i] - x[j]) <= eps) ++rj;
        acc += rj * (rj - (rj > 0 ? 1 : 0));
    }
    return static_cast<double>(acc) /
           (static_cast<double>(n) * static_cast<double>(n - 1) * static_cast<double>(n - 2));
}

inline double bds_sigma2(double c, double k, int m) {
    double tmp = 0.0;
    for (int j = 1; j < m; ++j) tmp += std::pow(k, m - j) * std::pow(c, 2 * j);
    double mm = static_cast<double>(m);
    return 4.0 * (std::pow(k, m) + 2.0 * tmp +
                  (mm - 1.0) * (mm - 1.0) * std::pow(c, 2 * m) -
                  mm * mm * k * std::pow(c, 2 * m - 2));
}

}  // namespace detail

// Standardized BDS statistic sqrt(M) (C_m - C_1^m) / sigma. In the effect
// term C_1 is estimated on the last M scalars so both correlation sums cover
// the same sample span; the nuisance constants C and K in the variance come
// from the full series.
inline BdsResult bds_statistic(std::span<const double> x, const BdsConfig& cfg) {
    if (cfg.m < 2) throw ConfigError("bds: m must be >= 2");
    if (!(cfg.eps_factor > 0.0)) throw ConfigError("bds: eps_factor must be > 0");
    const std::int64_t n = static_cast<std::int64_t>(x.size());
    const std::int64_t skip = static_cast<std::int64_t>(cfg.m - 1) * cfg.t_lag;
    const std::int64_t big_m = n - skip;
    if (big_m < 3) throw SeriesTooShortError("bds: series too short for m=" + std::to_string(cfg.m));

    BdsResult res;
    res.m = cfg.m;
    res.epsilon = cfg.eps_factor * sample_sd(x);
    res.cm = correlation_integral(x, cfg.m, res.epsilon, cfg.t_lag);
    res.c1 = correlation_integral(x.subspan(static_cast<std::size_t>(skip)), 1, res.epsilon, 1);
    res.k = detail::k_estimator(x, res.epsilon);

    double c_full = correlation_integral(x, 1, res.epsilon, 1);
    double sigma2 = detail::bds_sigma2(c_full, res.k, cfg.m);
    if (!(sigma2 > 1e-24) || !std::isfinite(sigma2))
        throw DegenerateVarianceError("bds: degenerate variance (constant or near-constant series)");
    res.sigma = std::sqrt(sigma2);
    res.statistic =
        std::sqrt(static_cast<double>(big_m)) * (res.cm - std::pow(res.c1, cfg.m)) / res.sigma;
    res.p_value = normal_two_sided_p(res.statistic);
    return res;
}

// The paper's configuration: m in {2,3}, epsilon = 0.5 sample std dev.
inline std::vector<BdsResult> bds_suite(const ReturnSeries& r,
                                        const std::vector<int>& dims = {2, 3},
                                        double eps_factor = 0.5) {
    std::vector<BdsResult> out;
    out.reserve(dims.size());
    for (int m : dims) {
        BdsConfig cfg;
        cfg.m = m;
        cfg.eps_factor = eps_factor;
        out.push_back(bds_statistic(r.r, cfg));
    }
    return out;
}

}  // namespace regimekit

#endif
