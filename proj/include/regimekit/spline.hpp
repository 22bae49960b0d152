#ifndef REGIMEKIT_SPLINE_HPP
#define REGIMEKIT_SPLINE_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "regimekit/errors.hpp"

namespace regimekit {

// Natural cubic spline (zero second derivative at both ends) through
// strictly increasing knots. Evaluation outside the knot range
// extrapolates the boundary cubic.
class NaturalCubicSpline {
public:
    NaturalCubicSpline(std::span<const double> xs, std::span<const double> ys)
        : x_(xs.begin(), xs.end()), y_(ys.begin(), ys.end()) {
        const std::size_t n = x_.size();
        if (n == 0 || n != y_.size()) throw Error("spline: bad knots");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1])) throw Error("spline: knots not increasing");
        d2_.assign(n, 0.0);
        if (n < 3) return;

        // Tridiagonal system for interior second derivatives (Thomas algorithm).
        const std::size_t m = n - 2;
        std::vector<double> diag(m), off(m > 1 ? m - 1 : 0), rhs(m);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double hm = x_[i] - x_[i - 1];
            double hp = x_[i + 1] - x_[i];
            diag[i - 1] = (hm + hp) / 3.0;
            rhs[i - 1] = (y_[i + 1] - y_[i]) / hp - (y_[i] - y_[i - 1]) / hm;
            if (i + 2 < n) off[i - 1] = hp / 6.0;
        }
        for (std::size_t i = 1; i < m; ++i) {
            double q = off[i - 1] / diag[i - 1];
            diag[i] -= q * off[i - 1];
            rhs[i] -= q * rhs[i - 1];
        }
        for (std::size_t i = m - 1; i-- > 0;) rhs[i] -= off[i] / diag[i + 1] * rhs[i + 1];
        for (std::size_t i = 0; i < m; ++i) d2_[i + 1] = rhs[i] / diag[i];
    }

    double operator()(double t) const {
        const std::size_t n = x_.size();
        if (n == 1) return y_[0];
        std::size_t lo = 0, hi = n - 1;
        if (t <= x_[0]) hi = 1;
        else if (t >= x_[n - 1]) lo = n - 2;
        else {
            while (hi - lo > 1) {
                std::size_t mid = (lo + hi) / 2;
                (x_[mid] <= t ? lo : hi) = mid;
            }
        }
        double h = x_[hi] - x_[lo];
        double a = (x_[hi] - t) / h;
        double b = (t - x_[lo]) / h;
        return a * y_[lo] + b * y_[hi] +
               ((a * a * a - a) * d2_[lo] + (b * b * b - b) * d2_[hi]) * h * h / 6.0;
    }

    std::vector<double> sample(std::size_t count) const {
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) out[i] = (*this)(static_cast<double>(i));
        return out;
    }

private:
    std::vector<double> x_, y_;
    std::vector<double> d2_;
};

}  // namespace regimekit

#endif
