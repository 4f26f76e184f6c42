#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "parapost/quad.hpp"

using namespace parapost;

TEST_CASE("polynomials up to cubic integrate exactly") {
    auto cubic = [](double x) { return 3.0 * x * x * x - x * x + 2.0 * x - 5.0; };
    // antiderivative: 3/4 x^4 - x^3/3 + x^2 - 5x
    auto F = [](double x) {
        return 0.75 * x * x * x * x - x * x * x / 3.0 + x * x - 5.0 * x;
    };
    REQUIRE(integrate(cubic, -1.0, 2.5) == Catch::Approx(F(2.5) - F(-1.0)).margin(1e-12));
}

TEST_CASE("sin over [0, pi]") {
    const double v = integrate([](double x) { return std::sin(x); }, 0.0, M_PI, 1e-12);
    REQUIRE(v == Catch::Approx(2.0).margin(1e-10));
}

TEST_CASE("narrow gaussian bump") {
    const double s = 1e-3;
    auto f = [&](double x) {
        const double z = (x - 0.3) / s;
        return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * M_PI) * s);
    };
    REQUIRE(integrate(f, 0.0, 1.0, 1e-12) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("orientation and additivity") {
    auto f = [](double x) { return std::exp(x); };
    const double whole = integrate(f, 0.0, 2.0);
    const double split = integrate(f, 0.0, 0.7) + integrate(f, 0.7, 2.0);
    REQUIRE(whole == Catch::Approx(split).margin(1e-10));
    REQUIRE(whole == Catch::Approx(std::exp(2.0) - 1.0).margin(1e-9));
}

TEST_CASE("non-finite integrand is rejected") {
    auto f = [](double x) { return 1.0 / x; };
    REQUIRE_THROWS_AS(integrate(f, -1.0, 1.0), QuadratureError);
}
