#include <catch2/catch_amalgamated.hpp>

#include "regimekit/spline.hpp"

using namespace regimekit;
using Catch::Approx;

TEST_CASE("natural spline reproduces knot values") {
    std::vector<double> xs = {0, 1, 2.5, 4, 7};
    std::vector<double> ys = {1.0, -2.0, 0.5, 3.0, -1.0};
    NaturalCubicSpline sp(xs, ys);
    for (std::size_t i = 0; i < xs.size(); ++i) REQUIRE(sp(xs[i]) == Approx(ys[i]).margin(1e-12));
}

TEST_CASE("natural spline matches reference values") {
    // scipy.interpolate.CubicSpline(x, y, bc_type='natural') on the same knots
    std::vector<double> xs = {0, 1, 2, 3, 4, 5};
    std::vector<double> ys = {0.0, 0.8414709848078965, 0.9092974268256817, 0.1411200080598672,
                              -0.7568024953079282, -0.9589242746631385};
    NaturalCubicSpline sp(xs, ys);
    REQUIRE(sp(0.5) == Approx(0.47814963872017924).margin(1e-12));
    REQUIRE(sp(1.5) == Approx(0.993258470414388).margin(1e-12));
    REQUIRE(sp(2.5) == Approx(0.5999156640762903).margin(1e-12));
    REQUIRE(sp(3.5) == Approx(-0.36238744023609937).margin(1e-12));
    REQUIRE(sp(4.5) == Approx(-0.9266564099497502).margin(1e-12));
}

TEST_CASE("two knots degenerate to a line") {
    std::vector<double> xs = {0, 10};
    std::vector<double> ys = {1, 3};
    NaturalCubicSpline sp(xs, ys);
    REQUIRE(sp(5) == Approx(2.0));
    REQUIRE(sp(2.5) == Approx(1.5));
}

TEST_CASE("second derivative vanishes at the ends") {
    std::vector<double> xs = {0, 1, 2, 3, 4};
    std::vector<double> ys = {0, 1, -1, 2, 0};
    NaturalCubicSpline sp(xs, ys);
    auto d2 = [&](double t) {
        double h = 1e-4;
        return (sp(t + h) - 2 * sp(t) + sp(t - h)) / (h * h);
    };
    REQUIRE(d2(0.0) == Approx(0.0).margin(1e-4));
    REQUIRE(d2(4.0) == Approx(0.0).margin(1e-4));
}

TEST_CASE("non-increasing knots are rejected") {
    std::vector<double> xs = {0, 0, 1};
    std::vector<double> ys = {1, 2, 3};
    REQUIRE_THROWS_AS(NaturalCubicSpline(xs, ys), Error);
}
