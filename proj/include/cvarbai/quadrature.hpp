#pragma once

#include <cmath>
#include <functional>

namespace cvarbai::detail {

/// Recursive adaptive Simpson on [a,b] with absolute tolerance tol.
template <class F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    const bool tiny = (b - a) < 1e-13 * (std::abs(a) + std::abs(b) + 1.0);
    if (depth <= 0 || tiny || std::abs(delta) <= 15.0 * tol) {
        const double refined = left + right + delta / 15.0;
        return std::isfinite(refined) ? refined : 0.0;
    }
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol, int max_depth = 28) {
    if (!(b > a)) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// Integral of g over the upper quantile tail: int_{u in [1-q0, 1)} g(1-u) du,
/// written as int_0^{q0} g(q) dq with q = 1-u the upper-tail mass.  The
/// substitution q = exp(-y) turns an algebraic endpoint singularity
/// g(q) ~ q^{-theta}, theta < 1, into an exponentially decaying integrand;
/// panels extend geometrically until their contribution is negligible.
template <class G>
double integrate_upper_tail(const G& g, double q0, double tol) {
    if (!(q0 > 0.0)) return 0.0;
    const double y0 = -std::log(q0);
    auto h = [&](double y) {
        const double q = std::exp(-y);
        if (q < 1e-280) return 0.0;  // tail mass below representable relevance
        const double val = g(q) * q;
        return std::isfinite(val) ? val : 0.0;
    };
    double total = 0.0;
    double lo = y0;
    double len = 1.0;
    int calm = 0;
    for (int k = 0; k < 64 && calm < 3 && lo < 646.0; ++k) {
        const double hi = lo + len;
        const double piece = adaptive_simpson(h, lo, hi, tol * 0.25);
        total += piece;
        calm = (std::abs(piece) < 0.01 * tol) ? calm + 1 : 0;
        lo = hi;
        len *= 1.5;
    }
    return total;
}

}  // namespace cvarbai::detail
