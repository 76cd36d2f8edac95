#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "cvarbai/common.hpp"
#include "cvarbai/measure.hpp"

namespace cvarbai {

// ---------------------------------------------------------------------------
// Dual variable records
// ---------------------------------------------------------------------------

struct UpperCvarDual {
    double l1 = 0.0, l2 = 0.0, l3 = 0.0;
};
struct LowerCvarDual {
    double x0 = 0.0, g1 = 0.0, g2 = 0.0;
};
struct JointDual {
    double x0 = 0.0, l1 = 0.0, l2 = 0.0, g2 = 0.0, r1 = 0.0, r2 = 0.0;
};
struct MeanCvarLowerDual {
    double z = 0.0, l1 = 0.0, l2 = 0.0;
};
struct MeanCvarUpperDual {
    double r1 = 0.0, r2 = 0.0, r4 = 0.0;
};

using DualPoint =
    std::variant<UpperCvarDual, LowerCvarDual, JointDual, MeanCvarLowerDual, MeanCvarUpperDual>;

struct KlinfResult {
    double value = 0.0;
    DualPoint dual;
    std::vector<std::pair<double, double>> x0_trace;  // (x0, inner value) for min-over-x0 problems
};

/// Per-coordinate bounds on a dual feasible region (solver box constraints).
struct DualBox {
    std::array<Interval, 5> coord{};
    int dim = 0;
};

enum class DualProblem { UpperCvar, LowerCvar, Joint, MeanCvarLower, MeanCvarUpper };

/// Warm-start hint: previous outer minimizer and inner dual point.
struct KlinfHint {
    bool valid = false;
    double x0 = 0.0;
    double radius = 0.0;
    std::array<double, 5> theta{};
};

/// Weighted sample view with cached |x|^{1+eps}; weights sum to 1.
struct SampleView {
    const double* x = nullptr;
    const double* w = nullptr;
    const double* fx = nullptr;
    std::size_t n = 0;
};

/// Owning prepared sample.
struct PreppedSample {
    std::vector<double> x, w, fx;

    static PreppedSample from(const DiscreteDist& d, const MomentClass& mc) {
        PreppedSample p;
        p.x = d.xs;
        p.w = d.ws;
        p.fx.resize(d.xs.size());
        for (std::size_t i = 0; i < d.xs.size(); ++i) p.fx[i] = mc.f(d.xs[i]);
        return p;
    }
    static PreppedSample from(const Measure& m, const MomentClass& mc) {
        return from(m.as_discrete(), mc);
    }
    SampleView view() const { return {x.data(), w.data(), fx.data(), x.size()}; }
    double moment() const {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * fx[i];
        return s;
    }
};

namespace detail {

inline constexpr double kLogFloor = 1e-300;
inline constexpr double kLogClamp = -690.0;

inline double safe_log(double g) { return g > kLogFloor ? std::log(g) : kLogClamp; }

struct MinPoint {
    double value = 0.0;
    double y = 0.0;
};

/// min over y in [lo, hi] of a*|y|^{1+eps} + b*y, a >= 0 (lo/hi may be inf).
inline MinPoint min_power_linear(double a, double b, double eps, double lo, double hi) {
    if (a <= 0.0) {
        if (b > 0.0) return {std::isinf(lo) ? -kInf : b * lo, lo};
        if (b < 0.0) return {std::isinf(hi) ? -kInf : b * hi, hi};
        double y = 0.0;
        if (y < lo) y = lo;
        if (y > hi) y = hi;
        return {0.0, y};
    }
    double ystar;
    if (b == 0.0) {
        ystar = 0.0;
    } else {
        ystar = -std::copysign(std::pow(std::abs(b) / (a * (1.0 + eps)), 1.0 / eps), b);
    }
    if (ystar < lo) ystar = lo;
    if (ystar > hi) ystar = hi;
    const double value = a * std::pow(std::abs(ystar), 1.0 + eps) + b * ystar;
    return {value, ystar};
}

// ---------------------------------------------------------------------------
// Problem definitions: each provides dim/box/objective/gmin on theta.
// All integrands are affine in the dual variables, so min_y g is concave in
// theta and g(., 0) == 1.
// ---------------------------------------------------------------------------

/// KLinfU-CVaR dual (Theorem: max over S_hat(v) of E log g_U).
struct UpperCvarProblem {
    SampleView s;
    double v;
    MomentClass mc;
    DualBox box;

    static constexpr int dim = 3;
    static constexpr unsigned moment_mask = 0b100;  // lambda3

    double objective(const double* th, double* grad) const {
        const double l1 = th[0], l2 = th[1], l3 = th[2];
        const double omp = 1.0 - mc.pi;
        const double A = 1.0 + l1 * v - l2 * omp - l3 * mc.B;
        double obj = 0.0;
        if (grad) grad[0] = grad[1] = grad[2] = 0.0;
        for (std::size_t i = 0; i < s.n; ++i) {
            const double u = l1 * s.x[i] / omp - l2;
            const double g = A + l3 * s.fx[i] - (u > 0.0 ? u : 0.0);
            obj += s.w[i] * safe_log(g);
            if (grad && g > kLogFloor) {
                const double inv = s.w[i] / g;
                const bool on = u > 0.0;
                grad[0] += inv * (v - (on ? s.x[i] / omp : 0.0));
                grad[1] += inv * (-omp + (on ? 1.0 : 0.0));
                grad[2] += inv * (s.fx[i] - mc.B);
            }
        }
        return obj;
    }

    MinPoint gmin(const double* th) const {
        const double l1 = th[0], l2 = th[1], l3 = th[2];
        const double omp = 1.0 - mc.pi;
        const double A = 1.0 + l1 * v - l2 * omp - l3 * mc.B;
        if (l1 <= 0.0) {
            MinPoint m = min_power_linear(l3, 0.0, mc.eps, -kInf, kInf);
            return {A + m.value - std::max(-l2, 0.0), m.y};
        }
        const double y2 = l2 * omp / l1;
        MinPoint m1 = min_power_linear(l3, 0.0, mc.eps, -kInf, y2);
        MinPoint m2 = min_power_linear(l3, -l1 / omp, mc.eps, y2, kInf);
        const double v2 = m2.value + l2;
        if (m1.value <= v2) return {A + m1.value, m1.y};
        return {A + v2, m2.y};
    }

    void gmin_grad(const double* th, double ystar, double* grad) const {
        const double omp = 1.0 - mc.pi;
        const double u = th[0] * ystar / omp - th[1];
        const bool on = u > 0.0;
        grad[0] = v - (on ? ystar / omp : 0.0);
        grad[1] = -omp + (on ? 1.0 : 0.0);
        grad[2] = mc.f(ystar) - mc.B;
    }
};

/// Inner KLinfL-CVaR dual for a fixed x0 (max over R2(x0, v) of E log g_L).
struct LowerCvarProblem {
    SampleView s;
    double v;
    double x0;
    MomentClass mc;
    DualBox box;

    static constexpr int dim = 2;
    static constexpr unsigned moment_mask = 0b10;  // gamma2

    double objective(const double* th, double* grad) const {
        const double g1 = th[0], g2 = th[1];
        const double omp = 1.0 - mc.pi;
        const double A = 1.0 - g1 * (v - x0) - g2 * mc.B;
        double obj = 0.0;
        if (grad) grad[0] = grad[1] = 0.0;
        for (std::size_t i = 0; i < s.n; ++i) {
            const double pos = s.x[i] > x0 ? (s.x[i] - x0) / omp : 0.0;
            const double g = A + g1 * pos + g2 * s.fx[i];
            obj += s.w[i] * safe_log(g);
            if (grad && g > kLogFloor) {
                const double inv = s.w[i] / g;
                grad[0] += inv * (-(v - x0) + pos);
                grad[1] += inv * (s.fx[i] - mc.B);
            }
        }
        return obj;
    }

    MinPoint gmin(const double* th) const {
        const double g1 = th[0], g2 = th[1];
        const double omp = 1.0 - mc.pi;
        const double A = 1.0 - g1 * (v - x0) - g2 * mc.B;
        const double b = g1 / omp;
        MinPoint m1 = min_power_linear(g2, 0.0, mc.eps, -kInf, x0);
        MinPoint m2 = min_power_linear(g2, b, mc.eps, x0, kInf);
        const double v2 = m2.value - b * x0;
        if (m1.value <= v2) return {A + m1.value, m1.y};
        return {A + v2, m2.y};
    }

    void gmin_grad(const double* /*th*/, double ystar, double* grad) const {
        const double omp = 1.0 - mc.pi;
        grad[0] = -(v - x0) + (ystar > x0 ? (ystar - x0) / omp : 0.0);
        grad[1] = mc.f(ystar) - mc.B;
    }
};

/// Joint dual of Z (Proposition): theta = (l1, l2, g2, r1, r2) at a fixed x0.
struct JointProblem {
    SampleView s1;  // KLinfU side
    SampleView s2;  // KLinfL side
    double a1 = 0.5, a2 = 0.5;  // normalized weights, a1 + a2 == 1
    double x0 = 0.0;
    MomentClass mc;
    DualBox box;

    static constexpr int dim = 5;
    static constexpr unsigned moment_mask = 0b110;  // lambda2, gamma2

    double hu(const double* th, double x, double fx) const {
        const double omp = 1.0 - mc.pi;
        const double u = (th[3] * x - th[4]) / omp;
        return 1.0 + th[0] + th[1] * (fx - mc.B) - th[4] - (u > 0.0 ? u : 0.0);
    }
    double hl(const double* th, double x, double fx) const {
        const double omp = 1.0 - mc.pi;
        const double pos = x > x0 ? (x - x0) / omp : 0.0;
        return 1.0 - th[0] + th[2] * (fx - mc.B) + th[3] * (x0 + pos);
    }

    double objective(const double* th, double* grad) const {
        const double omp = 1.0 - mc.pi;
        double obj = 0.0;
        if (grad)
            for (int k = 0; k < 5; ++k) grad[k] = 0.0;
        for (std::size_t i = 0; i < s1.n; ++i) {
            const double g = hu(th, s1.x[i], s1.fx[i]);
            obj += a1 * s1.w[i] * safe_log(g);
            if (grad && g > kLogFloor) {
                const double inv = a1 * s1.w[i] / g;
                const bool on = th[3] * s1.x[i] - th[4] > 0.0;
                grad[0] += inv;
                grad[1] += inv * (s1.fx[i] - mc.B);
                grad[3] += inv * (on ? -s1.x[i] / omp : 0.0);
                grad[4] += inv * (-1.0 + (on ? 1.0 / omp : 0.0));
            }
        }
        for (std::size_t i = 0; i < s2.n; ++i) {
            const double g = hl(th, s2.x[i], s2.fx[i]);
            obj += a2 * s2.w[i] * safe_log(g);
            if (grad && g > kLogFloor) {
                const double inv = a2 * s2.w[i] / g;
                const double pos = s2.x[i] > x0 ? (s2.x[i] - x0) / omp : 0.0;
                grad[0] -= inv;
                grad[2] += inv * (s2.fx[i] - mc.B);
                grad[3] += inv * (x0 + pos);
            }
        }
        return obj;
    }

    MinPoint gmin_hu(const double* th) const {
        const double omp = 1.0 - mc.pi;
        const double A = 1.0 + th[0] - th[1] * mc.B - th[4];
        if (th[3] <= 0.0) {
            MinPoint m = min_power_linear(th[1], 0.0, mc.eps, -kInf, kInf);
            return {A + m.value - std::max(-th[4], 0.0) / omp, m.y};
        }
        const double y2 = th[4] / th[3];
        MinPoint m1 = min_power_linear(th[1], 0.0, mc.eps, -kInf, y2);
        MinPoint m2 = min_power_linear(th[1], -th[3] / omp, mc.eps, y2, kInf);
        const double v2 = m2.value + th[4] / omp;
        if (m1.value <= v2) return {A + m1.value, m1.y};
        return {A + v2, m2.y};
    }

    MinPoint gmin_hl(const double* th) const {
        const double omp = 1.0 - mc.pi;
        const double A = 1.0 - th[0] - th[2] * mc.B + th[3] * x0;
        const double b = th[3] / omp;
        MinPoint m1 = min_power_linear(th[2], 0.0, mc.eps, -kInf, x0);
        MinPoint m2 = min_power_linear(th[2], b, mc.eps, x0, kInf);
        const double v2 = m2.value - b * x0;
        if (m1.value <= v2) return {A + m1.value, m1.y};
        return {A + v2, m2.y};
    }

    MinPoint gmin(const double* th) const {
        MinPoint u = gmin_hu(th);
        MinPoint l = gmin_hl(th);
        // encode which branch is active in the sign convention of y via value
        return u.value <= l.value ? MinPoint{u.value, u.y} : MinPoint{l.value, l.y};
    }

    void gmin_grad(const double* th, double ystar, double* grad) const {
        const double omp = 1.0 - mc.pi;
        MinPoint u = gmin_hu(th);
        MinPoint l = gmin_hl(th);
        for (int k = 0; k < 5; ++k) grad[k] = 0.0;
        if (u.value <= l.value) {
            const bool on = th[3] * ystar - th[4] > 0.0;
            grad[0] = 1.0;
            grad[1] = mc.f(ystar) - mc.B;
            grad[3] = on ? -ystar / omp : 0.0;
            grad[4] = -1.0 + (on ? 1.0 / omp : 0.0);
        } else {
            const double pos = ystar > x0 ? (ystar - x0) / omp : 0.0;
            grad[0] = -1.0;
            grad[2] = mc.f(ystar) - mc.B;
            grad[3] = x0 + pos;
        }
    }
};

/// Mean-CVaR lower dual for a fixed z: theta = (l1, l2), objective weights
/// (alpha1, alpha2) multiply mean and CVaR.
struct MeanCvarLowerProblem {
    SampleView s;
    double x = 0.0, z = 0.0;
    double alpha1 = 0.0, alpha2 = 1.0;
    MomentClass mc;
    DualBox box;

    static constexpr int dim = 2;
    static constexpr unsigned moment_mask = 0b01;  // lambda1

    double integrand(const double* th, double xi, double fxi) const {
        const double omp = 1.0 - mc.pi;
        const double pos = xi > z ? (xi - z) / omp : 0.0;
        return 1.0 - th[0] * (mc.B - fxi) - th[1] * (x - alpha1 * xi - alpha2 * z - alpha2 * pos);
    }

    double objective(const double* th, double* grad) const {
        const double omp = 1.0 - mc.pi;
        double obj = 0.0;
        if (grad) grad[0] = grad[1] = 0.0;
        for (std::size_t i = 0; i < s.n; ++i) {
            const double g = integrand(th, s.x[i], s.fx[i]);
            obj += s.w[i] * safe_log(g);
            if (grad && g > kLogFloor) {
                const double inv = s.w[i] / g;
                const double pos = s.x[i] > z ? (s.x[i] - z) / omp : 0.0;
                grad[0] += inv * (s.fx[i] - mc.B);
                grad[1] += inv * (alpha1 * s.x[i] + alpha2 * z + alpha2 * pos - x);
            }
        }
        return obj;
    }

    MinPoint gmin(const double* th) const {
        const double omp = 1.0 - mc.pi;
        const double A = 1.0 - th[0] * mc.B - th[1] * (x - alpha2 * z);
        const double b1 = th[1] * alpha1;
        const double b2 = th[1] * alpha2 / omp;
        MinPoint m1 = min_power_linear(th[0], b1, mc.eps, -kInf, z);
        MinPoint m2 = min_power_linear(th[0], b1 + b2, mc.eps, z, kInf);
        const double v2 = m2.value - b2 * z;
        if (m1.value <= v2) return {A + m1.value, m1.y};
        return {A + v2, m2.y};
    }

    void gmin_grad(const double* /*th*/, double ystar, double* grad) const {
        const double omp = 1.0 - mc.pi;
        const double pos = ystar > z ? (ystar - z) / omp : 0.0;
        grad[0] = mc.f(ystar) - mc.B;
        grad[1] = alpha1 * ystar + alpha2 * z + alpha2 * pos - x;
    }
};

/// Mean-CVaR upper dual: theta = (r1, r2, r4).
struct MeanCvarUpperProblem {
    SampleView s;
    double x = 0.0;
    double alpha1 = 0.0, alpha2 = 1.0;
    MomentClass mc;
    DualBox box;

    static constexpr int dim = 3;
    static constexpr unsigned moment_mask = 0b01;  // rho1

    double integrand(const double* th, double xi, double fxi) const {
        const double omp = 1.0 - mc.pi;
        const double u = th[1] * alpha2 * xi / omp - th[2];
        return 1.0 - th[0] * (mc.B - fxi) + th[1] * (x - alpha1 * xi) - th[2] * omp -
               (u > 0.0 ? u : 0.0);
    }

    double objective(const double* th, double* grad) const {
        const double omp = 1.0 - mc.pi;
        double obj = 0.0;
        if (grad) grad[0] = grad[1] = grad[2] = 0.0;
        for (std::size_t i = 0; i < s.n; ++i) {
            const double g = integrand(th, s.x[i], s.fx[i]);
            obj += s.w[i] * safe_log(g);
            if (grad && g > kLogFloor) {
                const double inv = s.w[i] / g;
                const bool on = th[1] * alpha2 * s.x[i] / omp - th[2] > 0.0;
                grad[0] += inv * (s.fx[i] - mc.B);
                grad[1] += inv * ((x - alpha1 * s.x[i]) - (on ? alpha2 * s.x[i] / omp : 0.0));
                grad[2] += inv * (-omp + (on ? 1.0 : 0.0));
            }
        }
        return obj;
    }

    MinPoint gmin(const double* th) const {
        const double omp = 1.0 - mc.pi;
        const double A = 1.0 - th[0] * mc.B + th[1] * x - th[2] * omp;
        const double b1 = -th[1] * alpha1;
        const double b2 = th[1] * alpha2 / omp;
        if (b2 <= 0.0) {
            MinPoint m = min_power_linear(th[0], b1, mc.eps, -kInf, kInf);
            return {A + m.value - std::max(-th[2], 0.0), m.y};
        }
        const double y2 = th[2] / b2;
        MinPoint m1 = min_power_linear(th[0], b1, mc.eps, -kInf, y2);
        MinPoint m2 = min_power_linear(th[0], b1 - b2, mc.eps, y2, kInf);
        const double v2 = m2.value + th[2];
        if (m1.value <= v2) return {A + m1.value, m1.y};
        return {A + v2, m2.y};
    }

    void gmin_grad(const double* th, double ystar, double* grad) const {
        const double omp = 1.0 - mc.pi;
        const bool on = th[1] * alpha2 * ystar / omp - th[2] > 0.0;
        grad[0] = mc.f(ystar) - mc.B;
        grad[1] = (x - alpha1 * ystar) - (on ? alpha2 * ystar / omp : 0.0);
        grad[2] = -omp + (on ? 1.0 : 0.0);
    }
};

// ---------------------------------------------------------------------------
// Projected gradient ascent with exact penalty on min_y g >= 0
// ---------------------------------------------------------------------------

struct PgaOptions {
    int max_iters = 160;  // per barrier stage
    double grad_tol = 1e-7;
};

struct PgaOutcome {
    std::array<double, 5> theta{};
    double value = 0.0;
    int iters = 0;
};

template <class P>
PgaOutcome pga_maximize(const P& prob, const double* theta0, const PgaOptions& opt = {}) {
    constexpr int d = P::dim;
    std::array<double, 5> th{}, g{}, gm{}, thn{}, gprev{}, thprev{};
    for (int k = 0; k < d; ++k) th[k] = theta0 ? theta0[k] : 0.0;

    auto clip = [&](std::array<double, 5>& t) {
        for (int k = 0; k < d; ++k) {
            if (t[k] < prob.box.coord[k].lo) t[k] = prob.box.coord[k].lo;
            if (t[k] > prob.box.coord[k].hi) t[k] = prob.box.coord[k].hi;
        }
    };
    clip(th);
    if (!theta0) {
        // cold start: seed the moment coordinates so linear duals have a
        // power term to lean on (min_y g = -inf otherwise)
        for (int k = 0; k < d; ++k) {
            if (P::moment_mask & (1u << k))
                th[k] = std::min(1e-2, 0.5 * prob.box.coord[k].hi);
        }
    }
    // pull strictly inside {min_y g > 0}; g is affine in theta with g(.,0)=1
    {
        MinPoint m = prob.gmin(th.data());
        if (m.value < 1e-3) {
            const double s = (1.0 - 1e-3) / (1.0 - std::min(m.value, 0.0));
            for (int k = 0; k < d; ++k) th[k] *= s;
        }
    }

    PgaOutcome out;
    int total_iters = 0;
    for (double mu : {1e-3, 1e-6, 1e-9}) {
        auto eval = [&](const std::array<double, 5>& t, std::array<double, 5>* grad) {
            MinPoint m = prob.gmin(t.data());
            if (!(m.value > 0.0)) return -kInf;
            double f = prob.objective(t.data(), grad ? grad->data() : nullptr);
            f += mu * std::log(m.value);
            if (grad) {
                prob.gmin_grad(t.data(), m.y, gm.data());
                const double c = mu / m.value;
                for (int k = 0; k < d; ++k) (*grad)[k] += c * gm[k];
            }
            return f;
        };
        double f = eval(th, &g);
        double step = 1.0;
        bool have_prev = false;
        bool probed = false;
        for (int it = 0; it < opt.max_iters; ++it, ++total_iters) {
            double pg = 0.0;
            for (int k = 0; k < d; ++k) {
                double t = th[k] + g[k];
                if (t < prob.box.coord[k].lo) t = prob.box.coord[k].lo;
                if (t > prob.box.coord[k].hi) t = prob.box.coord[k].hi;
                pg = std::max(pg, std::abs(t - th[k]));
            }
            if (pg < opt.grad_tol) break;

            if (have_prev) {  // Barzilai-Borwein step guess
                double sy = 0.0, ss = 0.0;
                for (int k = 0; k < d; ++k) {
                    const double sk = th[k] - thprev[k];
                    const double yk = g[k] - gprev[k];
                    ss += sk * sk;
                    sy += sk * -yk;
                }
                if (sy > 1e-300 && ss > 0.0) step = ss / sy;
                step = std::min(std::max(step, 1e-14), 1e10);
            }

            thprev = th;
            gprev = g;
            bool moved = false;
            for (int bt = 0; bt < 48; ++bt) {
                thn = th;
                for (int k = 0; k < d; ++k) thn[k] += step * g[k];
                clip(thn);
                double dot = 0.0, dist = 0.0;
                for (int k = 0; k < d; ++k) {
                    dot += g[k] * (thn[k] - th[k]);
                    dist = std::max(dist, std::abs(thn[k] - th[k]));
                }
                if (dist == 0.0) break;
                const double fn = eval(thn, nullptr);
                if (fn >= f + 1e-4 * dot && std::isfinite(fn)) {
                    th = thn;
                    f = eval(th, &g);
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved && !probed) {
                // one budgeted sweep of coordinate and pair probes to step
                // past a kink of the subdifferential
                probed = true;
                auto try_dir = [&](const std::array<double, 5>& dir) {
                    double cstep = 1e-2;
                    for (int bt = 0; bt < 16 && !moved; ++bt, cstep *= 0.25) {
                        thn = th;
                        for (int k = 0; k < d; ++k) thn[k] += cstep * dir[k];
                        clip(thn);
                        bool same = true;
                        for (int k = 0; k < d; ++k) same = same && thn[k] == th[k];
                        if (same) break;
                        const double fn = eval(thn, nullptr);
                        if (std::isfinite(fn) && fn > f + 1e-14 * (1.0 + std::abs(f))) {
                            th = thn;
                            f = eval(th, &g);
                            moved = true;
                        }
                    }
                };
                std::array<double, 5> dir{};
                for (int k = 0; k < d && !moved; ++k) {
                    for (double sgn : {1.0, -1.0}) {
                        dir.fill(0.0);
                        dir[k] = sgn;
                        try_dir(dir);
                        if (moved) break;
                    }
                }
                for (int k = 0; k < d && !moved; ++k) {
                    for (int l = 0; l < d && !moved; ++l) {
                        if (k == l) continue;
                        for (double ratio : {1.0, 0.1, 10.0}) {
                            dir.fill(0.0);
                            dir[k] = 1.0;
                            dir[l] = ratio;
                            try_dir(dir);
                            if (moved) break;
                        }
                    }
                }
            }
            if (!moved) break;
            have_prev = true;
        }
    }

    out.theta = th;
    out.value = prob.objective(th.data(), nullptr);
    out.iters = total_iters;
    return out;
}

// ---------------------------------------------------------------------------
// Ellipsoid method: deterministic fallback for the same inner problems.
// Feasibility cuts from min_y g(., theta) >= 0 and the box; objective cuts
// from the supergradient.  Handles the kinks and the boundary optimum that
// stall first-order ascent.
// ---------------------------------------------------------------------------

template <class P>
PgaOutcome ellipsoid_maximize(const P& prob, const double* theta0, int max_iters = 2000,
                              double tol = 1e-10) {
    constexpr int d = P::dim;
    std::array<double, 5> c{}, best{}, g{};
    double Pm[5][5] = {};
    double radius2 = 0.0;
    for (int k = 0; k < d; ++k) {
        const double half = 0.5 * (prob.box.coord[k].hi - prob.box.coord[k].lo);
        c[k] = 0.5 * (prob.box.coord[k].hi + prob.box.coord[k].lo);
        radius2 += half * half;
    }
    radius2 *= 1.01;
    for (int k = 0; k < d; ++k) Pm[k][k] = radius2;
    if (theta0) {
        // recenter on the warm start but keep the ball large enough for the box
        for (int k = 0; k < d; ++k) c[k] = theta0[k];
        for (int k = 0; k < d; ++k) {
            const double lo = c[k] - prob.box.coord[k].lo, hi = prob.box.coord[k].hi - c[k];
            radius2 = std::max(radius2, 2.0 * (lo * lo + hi * hi));
        }
        for (int k = 0; k < d; ++k) {
            for (int l = 0; l < d; ++l) Pm[k][l] = (k == l) ? radius2 : 0.0;
        }
    }

    double fbest = -kInf;
    best.fill(0.0);  // theta = 0 is always feasible with objective 0
    {
        const double f0 = prob.objective(best.data(), nullptr);
        fbest = f0;
    }

    const double nd = static_cast<double>(d);
    for (int it = 0; it < max_iters; ++it) {
        // pick the cut
        bool feas = true;
        g.fill(0.0);
        for (int k = 0; k < d && feas; ++k) {
            if (c[k] < prob.box.coord[k].lo) {
                g[k] = 1.0;  // violated lower bound: keep halfspace th_k >= lo
                feas = false;
            } else if (c[k] > prob.box.coord[k].hi) {
                g[k] = -1.0;
                feas = false;
            }
        }
        if (feas) {
            MinPoint m = prob.gmin(c.data());
            if (m.value < 0.0) {
                prob.gmin_grad(c.data(), m.y, g.data());
                feas = false;
            }
        }
        if (feas) {
            const double f = prob.objective(c.data(), g.data());
            if (f > fbest) {
                fbest = f;
                best = c;
            }
        }
        // ellipsoid update cutting away {x : g . (x - c) < 0}
        double Pg[5] = {};
        double gPg = 0.0;
        for (int k = 0; k < d; ++k) {
            double s = 0.0;
            for (int l = 0; l < d; ++l) s += Pm[k][l] * g[l];
            Pg[k] = s;
        }
        for (int k = 0; k < d; ++k) gPg += g[k] * Pg[k];
        if (!(gPg > tol * tol)) break;
        const double sq = std::sqrt(gPg);
        if (feas && sq < 1e-9 * (1.0 + std::abs(fbest))) break;
        const double c1 = 1.0 / (nd + 1.0);
        for (int k = 0; k < d; ++k) c[k] += c1 * Pg[k] / sq;
        const double c2 = nd * nd / (nd * nd - 1.0);
        const double c3 = 2.0 / (nd + 1.0);
        for (int k = 0; k < d; ++k) {
            for (int l = 0; l < d; ++l) {
                Pm[k][l] = c2 * (Pm[k][l] - c3 * Pg[k] * Pg[l] / gPg);
            }
        }
        // keep symmetric against drift
        for (int k = 0; k < d; ++k)
            for (int l = 0; l < k; ++l) Pm[k][l] = Pm[l][k] = 0.5 * (Pm[k][l] + Pm[l][k]);
    }

    // exact feasibilization onto {min_y g >= 0}
    MinPoint m = prob.gmin(best.data());
    if (m.value < 0.0) {
        const double scale = (1.0 - 1e-12) / (1.0 - m.value);
        for (int k = 0; k < d; ++k) best[k] *= scale;
    }
    PgaOutcome out;
    out.theta = best;
    out.value = prob.objective(best.data(), nullptr);
    out.iters = max_iters;
    return out;
}

/// Inner dual maximization: warm-started gradient ascent first, ellipsoid
/// fallback when the fast path looks stalled.
template <class P>
PgaOutcome maximize_dual(const P& prob, const double* theta0, bool thorough) {
    PgaOutcome fast = pga_maximize(prob, theta0);
    if (!thorough) return fast;
    PgaOutcome slow = ellipsoid_maximize(prob, fast.value > 0.0 ? fast.theta.data() : theta0);
    return slow.value > fast.value ? slow : fast;
}

// ---------------------------------------------------------------------------
// Outer 1-d minimization over x0 / z: grid prescan + slope bisection
// ---------------------------------------------------------------------------

struct OuterOptions {
    int grid_points = 33;
    double xtol_rel = 3e-6;
    const KlinfHint* hint = nullptr;
};

struct OuterResult {
    double x0 = 0.0;
    double value = 0.0;
    std::array<double, 5> theta{};
    std::vector<std::pair<double, double>> trace;
};

/// eval(x0, warm_theta_or_null) -> (value, theta)
template <class Eval>
OuterResult minimize_outer(const Eval& eval, double lo, double hi, const OuterOptions& opt) {
    OuterResult best;
    best.value = kInf;
    std::array<double, 5> warm{};
    bool have_warm = false;

    auto probe = [&](double x0) {
        auto [val, th] = eval(x0, have_warm ? warm.data() : nullptr);
        warm = th;
        have_warm = true;
        best.trace.emplace_back(x0, val);
        if (val < best.value) {
            best.value = val;
            best.x0 = x0;
            best.theta = th;
        }
        return val;
    };

    if (!(hi > lo)) {
        probe(lo);
        return best;
    }

    double a = lo, b = hi;
    bool quasiconvex = true;

    if (opt.hint && opt.hint->valid) {
        const double r = std::max(opt.hint->radius, 1e-3 * (hi - lo));
        double ha = std::max(lo, opt.hint->x0 - r);
        double hb = std::min(hi, opt.hint->x0 + r);
        warm = opt.hint->theta;
        have_warm = true;
        double v0 = probe(ha), v1 = probe(0.5 * (ha + hb)), v2 = probe(hb);
        // expand until an interior point wins or the full range is covered
        int guard = 0;
        while (((v0 < v1 && ha > lo) || (v2 < v1 && hb < hi)) && guard++ < 12) {
            const double width = hb - ha;
            ha = std::max(lo, ha - width);
            hb = std::min(hi, hb + width);
            v0 = probe(ha);
            v2 = probe(hb);
            v1 = std::min(v1, best.value);
        }
        a = ha;
        b = hb;
        if (guard >= 12) {
            a = lo;
            b = hi;
        }
    }

    if (!(opt.hint && opt.hint->valid) || (a == lo && b == hi)) {
        // uniform prescan
        const int n = opt.grid_points;
        std::vector<double> vals(static_cast<std::size_t>(n));
        int kbest = 0;
        for (int k = 0; k < n; ++k) {
            const double x0 = lo + (hi - lo) * static_cast<double>(k) / (n - 1);
            vals[static_cast<std::size_t>(k)] = probe(x0);
            if (vals[static_cast<std::size_t>(k)] < vals[static_cast<std::size_t>(kbest)]) kbest = k;
        }
        // quasiconvexity: nonincreasing up to the argmin, nondecreasing after
        const double tol = 1e-9 * (1.0 + std::abs(vals[static_cast<std::size_t>(kbest)]));
        for (int k = 1; k <= kbest && quasiconvex; ++k)
            if (vals[static_cast<std::size_t>(k)] > vals[static_cast<std::size_t>(k - 1)] + tol)
                quasiconvex = false;
        for (int k = kbest + 1; k < n && quasiconvex; ++k)
            if (vals[static_cast<std::size_t>(k)] < vals[static_cast<std::size_t>(k - 1)] - tol)
                quasiconvex = false;
        const double h = (hi - lo) / (n - 1);
        a = std::max(lo, best.x0 - h);
        b = std::min(hi, best.x0 + h);
        if (!quasiconvex) {
            // refine around the best grid point with shrinking grids
            for (int round = 0; round < 3; ++round) {
                const double width = (b - a) / 4.0;
                const double c = best.x0;
                a = std::max(lo, c - 2.0 * width);
                b = std::min(hi, c + 2.0 * width);
                for (int k = 0; k <= 12; ++k) probe(a + (b - a) * k / 12.0);
                a = std::max(lo, best.x0 - (b - a) / 12.0);
                b = std::min(hi, best.x0 + (b - a) / 12.0);
            }
        }
    }

    // bisection on the sign of a symmetric finite-difference slope
    const double xtol = opt.xtol_rel * (hi - lo);
    int guard = 0;
    while (b - a > xtol && guard++ < 64) {
        const double m = 0.5 * (a + b);
        const double h = std::max(0.02 * (b - a), 1e-10 * (hi - lo));
        const double vminus = probe(m - h);
        const double vplus = probe(m + h);
        if (vplus > vminus)
            b = m + h;
        else
            a = m - h;
    }
    probe(0.5 * (a + b));
    return best;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dual boxes (Appendix-style compactness bounds used as solver constraints)
// ---------------------------------------------------------------------------

namespace detail {
inline constexpr double kBoxCap = 1e12;

inline double checked_inverse(double denom, const char* what, bool strict = true) {
    if (!(denom > 1e-14)) {
        if (strict)
            throw DegenerateRegion(std::string("dual_box: vanishing denominator in ") + what);
        return kBoxCap;
    }
    return 1.0 / denom;
}

inline DualBox upper_cvar_box(double v, const MomentClass& mc, bool strict = true) {
    DualBox box;
    box.dim = 3;
    const double vpos = std::max(v, 0.0);
    const double l3hi = checked_inverse(mc.B - std::pow(vpos, 1.0 + mc.eps) * (1.0 - mc.pi), "lambda3", strict);
    // lambda1 blows up like 1/(D.hi - v) near the top of the range; a generous
    // multiple keeps the region bounded without cutting into the feasible set
    const double gap = std::max(mc.cvar_range().hi - v, 1e-12);
    const double l1hi = std::min(1e4 * (1.0 + 1.0 / (gap * (1.0 - mc.pi))), kBoxCap);
    const double m = 1.0 + l1hi * std::max(std::abs(v), 1.0) + std::min(l3hi, kBoxCap) * mc.B;
    box.coord[0] = {0.0, l1hi};
    box.coord[1] = {-m / mc.pi, m / (1.0 - mc.pi)};
    box.coord[2] = {0.0, std::min(l3hi, kBoxCap)};
    return box;
}

inline DualBox lower_cvar_box(double x0, double v, const MomentClass& mc, bool strict = true) {
    DualBox box;
    box.dim = 2;
    const double fx0 = mc.f(x0);
    if (x0 == v) {
        if (x0 >= 0.0) {
            // feasible-measure support lies below v: gamma1 restricted to 0
            box.coord[0] = {0.0, 0.0};
            box.coord[1] = {0.0, checked_inverse(mc.B, "gamma2", strict)};
            return box;
        }
        const double g2hi = checked_inverse(mc.B - fx0, "gamma2", strict);
        box.coord[1] = {0.0, g2hi};
        box.coord[0] = {0.0, std::pow(-x0, mc.eps) * (1.0 - mc.pi) * (1.0 + mc.eps) * g2hi};
        return box;
    }
    if (x0 >= 0.0) {
        box.coord[0] = {0.0, checked_inverse(v - x0, "gamma1", strict)};
        box.coord[1] = {0.0, checked_inverse(mc.B, "gamma2", strict)};
        return box;
    }
    if (fx0 <= mc.B) {
        box.coord[0] = {0.0, checked_inverse(v - x0, "gamma1", strict)};
        box.coord[1] = {0.0, checked_inverse(mc.B - fx0, "gamma2", strict)};
        return box;
    }
    const double cut = std::max(0.0, -mc.pi * x0 - (1.0 - mc.pi) * v);
    const double denom = mc.B - std::pow(cut, 1.0 + mc.eps);
    const double g2hi = checked_inverse(denom, "gamma2", strict);
    box.coord[1] = {0.0, std::min(g2hi, kBoxCap)};
    box.coord[0] = {0.0, std::min(std::pow(-x0, mc.eps) * (1.0 - mc.pi) * (1.0 + mc.eps) * g2hi, kBoxCap)};
    return box;
}

inline DualBox joint_box(double x0, const MomentClass& mc) {
    // conservative probe-derived bounds; containment is what matters here
    DualBox box;
    box.dim = 5;
    const double omp = 1.0 - mc.pi;
    const double w0 = x0 >= 0.0 ? x0 : -x0 * mc.pi / omp;  // x0 + (0-x0)_+/(1-pi)
    double lam1hi = 2.0;
    double r1hi = 0.0, g2hi = 0.0, l2hi = 0.0, r2hi = 0.0;
    for (int pass = 0; pass < 6; ++pass) {
        l2hi = (1.0 + lam1hi) / mc.B;
        r2hi = 1.0 + lam1hi;
        const double m = 1.0 + lam1hi + r2hi / omp;
        r1hi = omp * (1.0 + mc.eps) *
               std::pow(m / mc.eps, mc.eps / (1.0 + mc.eps)) * std::pow(l2hi, 1.0 / (1.0 + mc.eps));
        g2hi = (2.0 + r1hi * w0) / mc.B;
        const double fx0 = mc.f(x0);
        const double next =
            1.0 + r1hi * std::max(x0, 0.0) + g2hi * std::max(fx0 - mc.B, 0.0) + 1.0;
        if (next <= lam1hi) break;
        lam1hi = std::min(2.0 * next, kBoxCap);
    }
    box.coord[0] = {-1.0, std::min(lam1hi, kBoxCap)};
    box.coord[1] = {0.0, std::min(l2hi, kBoxCap)};
    box.coord[2] = {0.0, std::min(g2hi, kBoxCap)};
    box.coord[3] = {0.0, std::min(r1hi, kBoxCap)};
    box.coord[4] = {-std::min(r2hi, kBoxCap) * omp / mc.pi, std::min(r2hi, kBoxCap)};
    return box;
}

inline DualBox meancvar_lower_box(double z, double x, double a1, double a2, const MomentClass& mc) {
    DualBox box;
    box.dim = 2;
    const double omp = 1.0 - mc.pi;
    // probe y = z: 1 - l1 (B - f(z)) - l2 (x - a1 z - a2 z) >= 0 is not sign-stable,
    // so cap via the power-counting balance instead
    const double l1hi = std::max(4.0 / mc.B, 1.0 / std::max(mc.B - mc.f(z), mc.B * 0.25));
    const double cbar = a1 + a2 / omp;
    double l2hi = kBoxCap;
    if (cbar > 0.0) {
        const double slack = 2.0 + l1hi * mc.B + 2.0;
        l2hi = std::pow(slack * std::pow(1.0 + mc.eps, 1.0 + 1.0 / mc.eps) *
                            std::pow(l1hi, 1.0 / mc.eps) / mc.eps,
                        mc.eps / (1.0 + mc.eps)) /
               cbar;
        l2hi = std::min(4.0 * l2hi + 4.0, kBoxCap);
    }
    box.coord[0] = {0.0, std::min(4.0 * l1hi, kBoxCap)};
    box.coord[1] = {0.0, l2hi};
    return box;
}

inline DualBox meancvar_upper_box(double /*x*/, double a1, double a2, const MomentClass& mc) {
    DualBox box;
    box.dim = 3;
    const double omp = 1.0 - mc.pi;
    const double r1hi = 4.0 / mc.B;
    const double cbar = a1 + a2 / omp;
    double r2hi = kBoxCap;
    if (cbar > 0.0) {
        const double slack = 8.0;
        r2hi = std::pow(slack * std::pow(1.0 + mc.eps, 1.0 + 1.0 / mc.eps) *
                            std::pow(r1hi, 1.0 / mc.eps) / mc.eps,
                        mc.eps / (1.0 + mc.eps)) /
               cbar;
        r2hi = std::min(4.0 * r2hi + 4.0, kBoxCap);
    }
    box.coord[0] = {0.0, r1hi};
    box.coord[1] = {0.0, r2hi};
    const double r4cap = std::min((1.0 + r2hi * 16.0), kBoxCap);
    box.coord[2] = {-r4cap / mc.pi, r4cap};
    return box;
}
}  // namespace detail

/// Per-variable bounds on the dual feasible region of the given problem.
/// Throws DegenerateRegion when v sits at the boundary of its range.
inline DualBox dual_box(DualProblem problem, double v, std::optional<double> x0,
                        const MomentClass& mc, double alpha1 = 0.0, double alpha2 = 1.0) {
    switch (problem) {
        case DualProblem::UpperCvar: return detail::upper_cvar_box(v, mc);
        case DualProblem::LowerCvar:
            if (!x0) throw std::invalid_argument("dual_box: LowerCvar needs x0");
            return detail::lower_cvar_box(*x0, v, mc);
        case DualProblem::Joint:
            if (!x0) throw std::invalid_argument("dual_box: Joint needs x0");
            return detail::joint_box(*x0, mc);
        case DualProblem::MeanCvarLower:
            if (!x0) throw std::invalid_argument("dual_box: MeanCvarLower needs z");
            return detail::meancvar_lower_box(*x0, v, alpha1, alpha2, mc);
        case DualProblem::MeanCvarUpper:
            return detail::meancvar_upper_box(v, alpha1, alpha2, mc);
    }
    throw std::logic_error("dual_box: unknown problem");
}

// ---------------------------------------------------------------------------
// VaR projection functionals (closed forms)
// ---------------------------------------------------------------------------

/// KLinfL for the VaR constraint: d2(min{F(y), pi}, pi).
inline double klinf_lower_var(const Measure& eta, double y, double pi) {
    return bernoulli_kl(std::min(eta.cdf(y), pi), pi);
}

/// KLinfU for the VaR constraint: d2(max{F^-(y), pi}, pi).
inline double klinf_upper_var(const Measure& eta, double y, double pi) {
    return bernoulli_kl(std::max(eta.cdf_left(y), pi), pi);
}

// ---------------------------------------------------------------------------
// CVaR projection functionals via the dual formulations
// ---------------------------------------------------------------------------

namespace detail {

inline double view_moment(const SampleView& s) {
    double m = 0.0;
    for (std::size_t i = 0; i < s.n; ++i) m += s.w[i] * s.fx[i];
    return m;
}

inline double view_cvar(const SampleView& s, double pi) {
    // atoms are sorted for all callers constructed from DiscreteDist
    double c = 0.0;
    std::size_t k = 0;
    for (; k < s.n; ++k) {
        c += s.w[k];
        if (c >= pi) break;
    }
    if (k >= s.n) k = s.n - 1;
    double tail = 0.0;
    for (std::size_t j = k + 1; j < s.n; ++j) tail += s.x[j] * s.w[j];
    return ((c - pi) * s.x[k] + tail) / (1.0 - pi);
}

inline double view_mean(const SampleView& s) {
    double m = 0.0;
    for (std::size_t i = 0; i < s.n; ++i) m += s.w[i] * s.x[i];
    return m;
}

}  // namespace detail

/// KLinfU for the CVaR constraint c_pi(kappa) >= v on a finite-support measure.
inline KlinfResult klinf_upper_cvar(const PreppedSample& eta, double v, const MomentClass& mc,
                                    const KlinfHint* hint = nullptr, bool thorough = true) {
    const Interval D = mc.cvar_range();
    if (!D.contains_interior(v)) throw InfeasibleLevel("klinf_upper_cvar: v outside interior of D");
    const double vc = D.clamp_interior(v);
    const SampleView s = eta.view();
    if (detail::view_moment(s) <= mc.B * (1.0 + 1e-12) && detail::view_cvar(s, mc.pi) >= vc) {
        return {0.0, UpperCvarDual{}, {}};
    }
    detail::UpperCvarProblem prob{s, vc, mc, detail::upper_cvar_box(vc, mc, false)};
    detail::PgaOutcome o =
        detail::maximize_dual(prob, hint && hint->valid ? hint->theta.data() : nullptr, thorough);
    KlinfResult res;
    res.value = std::max(0.0, o.value);
    res.dual = UpperCvarDual{o.theta[0], o.theta[1], o.theta[2]};
    return res;
}

/// KLinfL for the CVaR constraint c_pi(kappa) <= v: outer min over x0.
inline KlinfResult klinf_lower_cvar(const PreppedSample& eta, double v, const MomentClass& mc,
                                    const KlinfHint* hint = nullptr,
                                    const detail::OuterOptions* outer_opts = nullptr,
                                    bool thorough = true) {
    const Interval D = mc.cvar_range();
    if (!D.contains_interior(v)) throw InfeasibleLevel("klinf_lower_cvar: v outside interior of D");
    const double vc = D.clamp_interior(v);
    const SampleView s = eta.view();
    if (detail::view_moment(s) <= mc.B * (1.0 + 1e-12) && detail::view_cvar(s, mc.pi) <= vc) {
        return {0.0, LowerCvarDual{vc, 0.0, 0.0}, {}};
    }
    const double x0lo = -mc.finv(mc.B / mc.pi);
    const double x0hi = vc - 1e-9 * D.width();  // x0 == v handled by the range lemma remark
    auto eval = [&](double x0, const double* warm) {
        detail::LowerCvarProblem prob{s, vc, x0, mc, detail::lower_cvar_box(x0, vc, mc, false)};
        detail::PgaOutcome o = detail::maximize_dual(prob, warm, thorough);
        std::array<double, 5> th{};
        th[0] = o.theta[0];
        th[1] = o.theta[1];
        return std::make_pair(o.value, th);
    };
    detail::OuterOptions opts = outer_opts ? *outer_opts : detail::OuterOptions{};
    if (hint && hint->valid) opts.hint = hint;
    detail::OuterResult out = detail::minimize_outer(eval, x0lo, x0hi, opts);
    KlinfResult res;
    res.value = std::max(0.0, out.value);
    res.dual = LowerCvarDual{out.x0, out.theta[0], out.theta[1]};
    res.x0_trace = std::move(out.trace);
    return res;
}

/// Joint statistic Z = inf_{x<=y} { a1 KLinfU(eta1, y) + a2 KLinfL(eta2, x) }
/// via the joint dual; one dimension smaller than composing the single duals.
inline KlinfResult joint_z_cvar(const PreppedSample& eta1, double a1, const PreppedSample& eta2,
                                double a2, const MomentClass& mc, const KlinfHint* hint = nullptr,
                                const detail::OuterOptions* outer_opts = nullptr,
                                bool thorough = true) {
    if (!(a1 >= 0.0 && a2 >= 0.0 && a1 + a2 > 0.0))
        throw std::invalid_argument("joint_z_cvar: weights must be nonnegative, not both 0");
    if (a1 == 0.0 || a2 == 0.0) {
        return {0.0, JointDual{}, {}};
    }
    const SampleView s1 = eta1.view(), s2 = eta2.view();
    const bool in_l1 = detail::view_moment(s1) <= mc.B * (1.0 + 1e-12);
    const bool in_l2 = detail::view_moment(s2) <= mc.B * (1.0 + 1e-12);
    if (in_l1 && in_l2 && detail::view_cvar(s2, mc.pi) <= detail::view_cvar(s1, mc.pi)) {
        return {0.0, JointDual{}, {}};
    }
    const double total = a1 + a2;
    const double na1 = a1 / total, na2 = a2 / total;
    const double entropy = -na1 * std::log(na1) - na2 * std::log(na2) - std::log(2.0);
    const Interval C = mc.var_range();
    const double pad = 1e-9 * C.width();

    auto eval = [&](double x0, const double* warm) {
        detail::JointProblem prob{s1, s2, na1, na2, x0, mc, detail::joint_box(x0, mc)};
        std::array<double, 5> init{};
        if (warm) {
            for (int k = 0; k < 5; ++k) init[k] = warm[k];
        } else {
            init[0] = na1 - na2;  // maximizer of the lambda1-only subproblem
        }
        detail::PgaOutcome o = detail::maximize_dual(prob, init.data(), thorough);
        return std::make_pair(o.value, o.theta);
    };
    detail::OuterOptions opts = outer_opts ? *outer_opts : detail::OuterOptions{};
    if (hint && hint->valid) opts.hint = hint;
    detail::OuterResult out = detail::minimize_outer(eval, C.lo + pad, C.hi - pad, opts);

    KlinfResult res;
    res.value = std::max(0.0, total * (out.value + entropy));
    res.dual = JointDual{out.x0,       out.theta[0], out.theta[1],
                         out.theta[2], out.theta[3], out.theta[4]};
    res.x0_trace = std::move(out.trace);
    return res;
}

// ---------------------------------------------------------------------------
// Mean-CVaR projection functionals (objective o = a1*mean + a2*cvar)
// ---------------------------------------------------------------------------

/// Valid range O of the mean-CVaR objective over the moment class.
inline Interval meancvar_range(const MomentClass& mc, double a1, double a2) {
    const double root = mc.finv(mc.B);
    const double lo = -root * (a1 + a2);
    double hi;
    if (a1 <= 0.0) {
        hi = a2 * mc.finv(mc.B / (1.0 - mc.pi));
    } else {
        const double inner = mc.pi + (1.0 - mc.pi) * std::pow(1.0 + a2 / (a1 * (1.0 - mc.pi)),
                                                              1.0 + 1.0 / mc.eps);
        hi = root * a1 * std::pow(inner, mc.eps / (1.0 + mc.eps));
    }
    return {lo, hi};
}

/// z-range Z(x) for the mean-CVaR lower dual.
inline Interval meancvar_z_range(const MomentClass& mc, double x, double a1, double a2) {
    return {-mc.finv(mc.B / mc.pi), (x + a1 * mc.finv(mc.B)) / a2};
}

inline KlinfResult klinf_lower_meancvar(const PreppedSample& eta, double x, double a1, double a2,
                                        const MomentClass& mc, const KlinfHint* hint = nullptr,
                                        bool thorough = true) {
    const Interval O = meancvar_range(mc, a1, a2);
    if (!O.contains_interior(x)) throw InfeasibleLevel("klinf_lower_meancvar: x outside O");
    const double xc = O.clamp_interior(x);
    const SampleView s = eta.view();
    const double o_emp = a1 * detail::view_mean(s) + a2 * detail::view_cvar(s, mc.pi);
    if (detail::view_moment(s) <= mc.B * (1.0 + 1e-12) && o_emp <= xc) {
        return {0.0, MeanCvarLowerDual{}, {}};
    }
    if (a2 <= 0.0) {
        // pure mean constraint: integrand has no z dependence
        detail::MeanCvarLowerProblem prob{s, xc, 0.0, a1, a2, mc,
                                          detail::meancvar_lower_box(0.0, xc, a1, a2, mc)};
        detail::PgaOutcome o = detail::maximize_dual(
            prob, hint && hint->valid ? hint->theta.data() : nullptr, thorough);
        return {std::max(0.0, o.value), MeanCvarLowerDual{0.0, o.theta[0], o.theta[1]}, {}};
    }
    const Interval Z = meancvar_z_range(mc, xc, a1, a2);
    auto eval = [&](double z, const double* warm) {
        detail::MeanCvarLowerProblem prob{s, xc, z, a1, a2, mc,
                                          detail::meancvar_lower_box(z, xc, a1, a2, mc)};
        detail::PgaOutcome o = detail::maximize_dual(prob, warm, thorough);
        std::array<double, 5> th{};
        th[0] = o.theta[0];
        th[1] = o.theta[1];
        return std::make_pair(o.value, th);
    };
    detail::OuterOptions opts;
    if (hint && hint->valid) opts.hint = hint;
    detail::OuterResult out = detail::minimize_outer(eval, Z.lo, Z.hi, opts);
    KlinfResult res;
    res.value = std::max(0.0, out.value);
    res.dual = MeanCvarLowerDual{out.x0, out.theta[0], out.theta[1]};
    res.x0_trace = std::move(out.trace);
    return res;
}

inline KlinfResult klinf_upper_meancvar(const PreppedSample& eta, double x, double a1, double a2,
                                        const MomentClass& mc, const KlinfHint* hint = nullptr,
                                        bool thorough = true) {
    const Interval O = meancvar_range(mc, a1, a2);
    if (!O.contains_interior(x)) throw InfeasibleLevel("klinf_upper_meancvar: x outside O");
    const double xc = O.clamp_interior(x);
    const SampleView s = eta.view();
    const double o_emp = a1 * detail::view_mean(s) + a2 * detail::view_cvar(s, mc.pi);
    if (detail::view_moment(s) <= mc.B * (1.0 + 1e-12) && o_emp >= xc) {
        return {0.0, MeanCvarUpperDual{}, {}};
    }
    detail::MeanCvarUpperProblem prob{s, xc, a1, a2, mc, detail::meancvar_upper_box(xc, a1, a2, mc)};
    detail::PgaOutcome o = detail::maximize_dual(
        prob, hint && hint->valid ? hint->theta.data() : nullptr, thorough);
    return {std::max(0.0, o.value), MeanCvarUpperDual{o.theta[0], o.theta[1], o.theta[2]}, {}};
}

}  // namespace cvarbai
