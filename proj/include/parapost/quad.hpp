#pragma once

#include <cmath>

#include "parapost/errors.hpp"

namespace parapost {

namespace detail {

inline double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adaptive_simpson_rec(F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    if (!std::isfinite(flm) || !std::isfinite(frm))
        throw QuadratureError("non-finite integrand");
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    if (depth <= 0) return left + right;
    if (std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

/// Adaptive Simpson quadrature on [a, b]. The interval is pre-split into
/// fixed panels so narrow features cannot slip between the seed points of
/// the adaptive refinement.
template <typename F>
double integrate(F f, double a, double b, double tol = 1e-10, int max_depth = 40) {
    constexpr int panels = 32;
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double pa = a + p * h;
        const double pb = (p + 1 == panels) ? b : pa + h;
        const double m = 0.5 * (pa + pb);
        const double fa = f(pa), fm = f(m), fb = f(pb);
        if (!std::isfinite(fa) || !std::isfinite(fm) || !std::isfinite(fb))
            throw QuadratureError("non-finite integrand");
        const double whole = detail::simpson(pa, pb, fa, fm, fb);
        total += detail::adaptive_simpson_rec(f, pa, pb, fa, fm, fb, whole,
                                              tol / panels, max_depth);
    }
    return total;
}

} // namespace parapost
