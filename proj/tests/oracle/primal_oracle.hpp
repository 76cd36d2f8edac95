#pragma once

// Brute-force primal solvers used only by tests.  They evaluate the
// KL-projection programs directly on finite supports with a generic
// log-barrier interior-point method, independent of the dual formulations
// in cvarbai/klinf.hpp.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <variant>
#include <vector>

#include "cvarbai/common.hpp"
#include "cvarbai/measure.hpp"

namespace oracle {

using cvarbai::Interval;
using cvarbai::MomentClass;

struct LinearConstraint {
    std::vector<double> a;  // a . w <= b
    double b = 0.0;
};

struct IpmResult {
    bool feasible = false;
    double value = cvarbai::kInf;  // sum eta_i log(eta_i / w_i)
    std::vector<double> w;
};

namespace detail {

inline void project_simplex(std::vector<double>& v) {
    const std::size_t m = v.size();
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, theta = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        css += u[i];
        const double t = (css - 1.0) / static_cast<double>(i + 1);
        if (i + 1 == m || u[i + 1] <= t) {
            theta = t;
            if (i + 1 == m) theta = (css - 1.0) / static_cast<double>(m);
            break;
        }
    }
    // recompute theta exactly
    css = 0.0;
    theta = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        css += u[i];
        const double t = (css - 1.0) / static_cast<double>(i + 1);
        if (u[i] > t) theta = t;
    }
    for (auto& x : v) x = std::max(x - theta, 0.0);
    double s = std::accumulate(v.begin(), v.end(), 0.0);
    if (s <= 0.0) {
        std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(m));
    } else {
        for (auto& x : v) x /= s;
    }
}

inline double violation(const std::vector<LinearConstraint>& cons, const std::vector<double>& w) {
    double v = -cvarbai::kInf;
    for (const auto& c : cons) {
        double dot = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) dot += c.a[i] * w[i];
        v = std::max(v, dot - c.b);
    }
    return v;
}

inline void floor_normalize(std::vector<double>& w) {
    for (auto& x : w) x = std::max(x, 1e-13);
    double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= s;
}

/// Phase 1: find a point of the simplex with a. w < b strictly for all rows.
/// Tries the provided seed points first, then subgradient polish.
inline bool find_interior(const std::vector<LinearConstraint>& cons, std::size_t m,
                          std::vector<double>& w,
                          const std::vector<std::vector<double>>& seeds) {
    // quick pass: any seed already strictly feasible?
    for (const auto& s : seeds) {
        if (s.size() != m) continue;
        std::vector<double> cand = s;
        floor_normalize(cand);
        if (violation(cons, cand) < -1e-12) {
            w = cand;
            return true;
        }
    }
    auto polish = [&](std::vector<double> cand) -> bool {
        floor_normalize(cand);
        for (int it = 0; it < 2500; ++it) {
            if (violation(cons, cand) < -1e-12) {
                w = cand;
                return true;
            }
            std::vector<double> g(m, 0.0);
            double viol = 0.0;
            for (const auto& c : cons) {
                double dot = 0.0;
                for (std::size_t i = 0; i < m; ++i) dot += c.a[i] * cand[i];
                if (dot > c.b - 1e-10) {
                    viol = std::max(viol, dot - c.b);
                    for (std::size_t i = 0; i < m; ++i) g[i] += c.a[i];
                }
            }
            double gn = 0.0;
            for (double x : g) gn += x * x;
            if (gn < 1e-30) break;
            const double step = (viol + 1e-9) / gn;
            for (std::size_t i = 0; i < m; ++i) cand[i] -= step * g[i];
            project_simplex(cand);
            floor_normalize(cand);
        }
        if (violation(cons, cand) < -1e-13) {
            w = cand;
            return true;
        }
        return false;
    };
    // polish the three least-violating seeds, then uniform
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        if (seeds[k].size() != m) continue;
        std::vector<double> cand = seeds[k];
        floor_normalize(cand);
        ranked.emplace_back(violation(cons, cand), k);
    }
    std::sort(ranked.begin(), ranked.end());
    for (std::size_t r = 0; r < std::min<std::size_t>(3, ranked.size()); ++r) {
        if (polish(seeds[ranked[r].second])) return true;
    }
    return polish(std::vector<double>(m, 1.0 / static_cast<double>(m)));
}

/// Two-point blend seed family; mirrors the interior constructions used in
/// the feasibility arguments for these programs.
inline std::vector<std::vector<double>> make_seeds(const std::vector<double>& xs,
                                                   const MomentClass& mc,
                                                   std::vector<std::size_t> anchors = {}) {
    const std::size_t m = xs.size();
    std::size_t z0 = 0;
    for (std::size_t i = 1; i < m; ++i)
        if (mc.f(xs[i]) < mc.f(xs[z0])) z0 = i;
    anchors.push_back(0);
    if (m > 1) anchors.push_back(1);
    anchors.push_back(m - 1);
    if (m > 1) anchors.push_back(m - 2);
    anchors.push_back(z0);
    std::sort(anchors.begin(), anchors.end());
    anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
    // atoms bracketing the range endpoints are useful point-mass anchors
    for (double target : {-mc.finv(mc.B), mc.finv(mc.B), mc.finv(mc.B / (1.0 - mc.pi)),
                          -mc.finv(mc.B / mc.pi), 0.97 * mc.finv(mc.B / (1.0 - mc.pi))}) {
        const auto it = std::lower_bound(xs.begin(), xs.end(), target);
        if (it != xs.end()) anchors.push_back(static_cast<std::size_t>(it - xs.begin()));
        if (it != xs.begin()) anchors.push_back(static_cast<std::size_t>(it - xs.begin()) - 1);
    }
    const double qs[] = {0.9999,               0.999,               0.95,
                         0.999 * (1.0 - mc.pi), 0.9 * (1.0 - mc.pi), 0.5 * (1.0 - mc.pi),
                         mc.pi - 0.01,          mc.pi + 0.01,        0.05,
                         0.3,                   0.5,                 0.7};
    std::vector<std::vector<double>> seeds;
    for (std::size_t a : anchors) {
        if (a >= m) continue;
        std::vector<double> qlist(std::begin(qs), std::end(qs));
        const double fa = mc.f(xs[a]);
        if (fa > mc.B) {
            // mass at this anchor is limited by the moment budget
            for (double fac : {0.9, 0.5, 0.1}) qlist.push_back(fac * mc.B / fa);
        }
        for (double q : qlist) {
            if (!(q > 0.0 && q < 1.0)) continue;
            std::vector<double> w(m, 0.0);  // floor applied by the caller
            w[a] += q;
            w[z0] += 1.0 - q;
            seeds.push_back(std::move(w));
        }
    }
    // uniform over the atoms individually inside the moment bound
    {
        std::vector<double> w(m, 1e-12);
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < m; ++i)
            if (mc.f(xs[i]) < mc.B) ++cnt;
        if (cnt > 0) {
            for (std::size_t i = 0; i < m; ++i)
                if (mc.f(xs[i]) < mc.B) w[i] = 1.0 / static_cast<double>(cnt);
            seeds.push_back(std::move(w));
        }
    }
    return seeds;
}

}  // namespace detail

/// minimize sum_i eta_i log(eta_i / w_i) over the simplex with A w <= b.
/// Log-barrier Newton; the Hessian is diagonal plus one rank-1 term per
/// constraint, solved by Woodbury with the simplex equality bordered in.
inline IpmResult solve_simplex_kl(const std::vector<double>& eta,
                                  const std::vector<LinearConstraint>& cons,
                                  const std::vector<double>* warm = nullptr,
                                  const std::vector<std::vector<double>>& seeds = {},
                                  bool coarse = false) {
    const std::size_t m = eta.size();
    const std::size_t K = cons.size();
    IpmResult out;
    std::vector<double> w;
    if (warm && warm->size() == m) {
        w = *warm;
        detail::floor_normalize(w);
        if (detail::violation(cons, w) >= -1e-13) {
            // blend toward a strictly feasible seed; the violation is affine
            // along the segment, so the crossing point is exact
            std::vector<double> anchor;
            for (const auto& sd : seeds) {
                if (sd.size() != m) continue;
                std::vector<double> cand = sd;
                detail::floor_normalize(cand);
                if (detail::violation(cons, cand) < -1e-11) {
                    anchor = cand;
                    break;
                }
            }
            if (!anchor.empty()) {
                double tmix = 0.0;
                for (const auto& c : cons) {
                    double dw = 0.0, da = 0.0;
                    for (std::size_t i = 0; i < m; ++i) {
                        dw += c.a[i] * w[i];
                        da += c.a[i] * anchor[i];
                    }
                    if (dw > c.b - 1e-12 && dw > da)
                        tmix = std::max(tmix, (dw - c.b + 1e-10) / (dw - da));
                }
                tmix = std::min(1.0, tmix + 1e-6);
                for (std::size_t i = 0; i < m; ++i) w[i] = (1.0 - tmix) * w[i] + tmix * anchor[i];
                detail::floor_normalize(w);
                if (detail::violation(cons, w) >= -1e-13) w.clear();
            } else {
                w.clear();
            }
        }
    }
    if (w.empty()) {
        if (!detail::find_interior(cons, m, w, seeds)) return out;  // infeasible
    }

    std::vector<double> slack(K), g(m), dinv(m), du(m), hg(m), h1(m), wn(m), ones(m, 1.0);
    std::vector<double> C_mat(K ? K * K : 1), rhs(K), A_mat(K ? K * K : 1), ysol(K);
    std::vector<std::vector<double>> U(K, std::vector<double>(m));

    auto phi = [&](const std::vector<double>& x, double t) {
        double f = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (x[i] <= 0.0) return cvarbai::kInf;
            if (eta[i] > 0.0) f -= t * eta[i] * std::log(x[i]);
            f -= std::log(x[i]);
        }
        for (std::size_t k = 0; k < K; ++k) {
            double dot = 0.0;
            for (std::size_t i = 0; i < m; ++i) dot += cons[k].a[i] * x[i];
            const double s = cons[k].b - dot;
            if (s <= 0.0) return cvarbai::kInf;
            f -= std::log(s);
        }
        return f;
    };

    const double t_max = coarse ? 2.0e5 : 2.0e9;
    for (double t = 16.0; t < t_max; t *= 32.0) {
        for (int newton = 0; newton < 30; ++newton) {
            for (std::size_t k = 0; k < K; ++k) {
                double dot = 0.0;
                for (std::size_t i = 0; i < m; ++i) dot += cons[k].a[i] * w[i];
                slack[k] = cons[k].b - dot;
            }
            for (std::size_t i = 0; i < m; ++i) {
                g[i] = -(t * eta[i] + 1.0) / w[i];
                dinv[i] = w[i] * w[i] / (t * eta[i] + 1.0);
            }
            for (std::size_t k = 0; k < K; ++k) {
                const double inv_s = 1.0 / slack[k];
                for (std::size_t i = 0; i < m; ++i) {
                    g[i] += cons[k].a[i] * inv_s;
                    U[k][i] = cons[k].a[i] * inv_s;
                }
            }
            // Woodbury: H = D + sum_k u_k u_k^T ; solve H x = r for r in {g, 1}
            // C = I + U D^-1 U^T (K x K)
            std::vector<double>& C = C_mat;
            for (std::size_t k = 0; k < K; ++k) {
                for (std::size_t l = k; l < K; ++l) {
                    double s = (k == l) ? 1.0 : 0.0;
                    for (std::size_t i = 0; i < m; ++i) s += U[k][i] * dinv[i] * U[l][i];
                    C[k * K + l] = C[l * K + k] = s;
                }
            }
            auto solveH = [&](const std::vector<double>& r, std::vector<double>& x) {
                for (std::size_t i = 0; i < m; ++i) x[i] = dinv[i] * r[i];
                if (K == 0) return;
                std::fill(rhs.begin(), rhs.end(), 0.0);
                for (std::size_t k = 0; k < K; ++k)
                    for (std::size_t i = 0; i < m; ++i) rhs[k] += U[k][i] * x[i];
                // tiny dense solve C y = rhs (Gaussian elimination, small K)
                std::vector<double>& A = A_mat;
                A = C;
                std::vector<double>& y = ysol;
                y = rhs;
                for (std::size_t k = 0; k < K; ++k) {
                    std::size_t p = k;
                    for (std::size_t l = k + 1; l < K; ++l)
                        if (std::abs(A[l * K + k]) > std::abs(A[p * K + k])) p = l;
                    if (p != k) {
                        for (std::size_t c = 0; c < K; ++c) std::swap(A[k * K + c], A[p * K + c]);
                        std::swap(y[k], y[p]);
                    }
                    const double piv = A[k * K + k];
                    for (std::size_t l = k + 1; l < K; ++l) {
                        const double f = A[l * K + k] / piv;
                        for (std::size_t c = k; c < K; ++c) A[l * K + c] -= f * A[k * K + c];
                        y[l] -= f * y[k];
                    }
                }
                for (std::size_t k = K; k-- > 0;) {
                    for (std::size_t c = k + 1; c < K; ++c) y[k] -= A[k * K + c] * y[c];
                    y[k] /= A[k * K + k];
                }
                for (std::size_t i = 0; i < m; ++i) {
                    double corr = 0.0;
                    for (std::size_t k = 0; k < K; ++k) corr += U[k][i] * y[k];
                    x[i] -= dinv[i] * corr;
                }
            };
            solveH(g, hg);
            solveH(ones, h1);
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                num += hg[i];
                den += h1[i];
            }
            const double nu = -num / den;
            double lambda2 = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                du[i] = -(hg[i] + nu * h1[i]);
                lambda2 += -du[i] * (g[i] + nu);
            }
            if (!(lambda2 > 2e-13)) break;

            const double f0 = phi(w, t);
            double step = 1.0;
            bool ok = false;
            for (int bt = 0; bt < 50; ++bt) {
                for (std::size_t i = 0; i < m; ++i) wn[i] = w[i] + step * du[i];
                const double fn = phi(wn, t);
                if (fn <= f0 - 1e-4 * step * lambda2) {
                    w = wn;
                    ok = true;
                    break;
                }
                step *= 0.5;
            }
            if (!ok) break;
        }
    }

    out.feasible = true;
    out.w = w;
    double kl = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (eta[i] > 0.0) kl += eta[i] * std::log(eta[i] / w[i]);
    }
    out.value = kl;
    return out;
}

// ---------------------------------------------------------------------------
// KL-projection primal specs on small supports
// ---------------------------------------------------------------------------

struct CvarLE {
    double v;
};
struct CvarGE {
    double v;
};
struct VarLE {
    double y;
};
struct VarGE {
    double y;
};
struct MeanCvarLE {
    double x, a1, a2;
};
struct MeanCvarGE {
    double x, a1, a2;
};

struct PrimalSpec {
    std::vector<double> xs;  // support of eta (sorted)
    std::vector<double> ws;  // eta weights
    std::variant<CvarLE, CvarGE, VarLE, VarGE, MeanCvarLE, MeanCvarGE> constraint;
    MomentClass mc;
    int extra_grid_points = 201;
};

namespace detail {

struct Support {
    std::vector<double> xs;   // full support (eta atoms + grid atoms)
    std::vector<double> eta;  // eta weights, zero on grid atoms
};

/// Extra refinement points near grid atoms that received mass in a previous
/// round; the optimum's off-grid support points cost O(spacing) otherwise.
inline std::vector<double> refine_candidates(const Support& s, const std::vector<double>& w) {
    std::vector<double> out;
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
        if (s.eta[i] > 0.0 || w[i] < 1e-7) continue;
        const double left = i > 0 ? s.xs[i - 1] : s.xs[i] - 1.0;
        const double right = i + 1 < s.xs.size() ? s.xs[i + 1] : s.xs[i] + 1.0;
        for (double frac : {0.5, 0.25, 0.125, 0.0625}) {
            out.push_back(s.xs[i] - (s.xs[i] - left) * frac);
            out.push_back(s.xs[i] + (right - s.xs[i]) * frac);
        }
    }
    return out;
}

inline Support build_support(const PrimalSpec& spec, const std::vector<double>& extra = {}) {
    Support s;
    const double lo = -spec.mc.finv(spec.mc.B / spec.mc.pi);
    const double hi = spec.mc.finv(spec.mc.B / (1.0 - spec.mc.pi));
    std::vector<double> pts = spec.xs;
    const int n = std::max(spec.extra_grid_points, 201);
    for (int k = 0; k < n; ++k)
        pts.push_back(lo + (hi - lo) * static_cast<double>(k) / (n - 1));
    // The optimal projections can park tiny masses far outside [lo, hi]
    // (the moment budget admits f(y)*mass <= B at any y), so the grid gets
    // log-spaced far-tail atoms on both sides.
    for (double x = hi * 1.12; x < hi * 3.0e4; x *= 1.12) pts.push_back(x);
    for (double x = lo * 1.12; x > lo * 3.0e4; x *= 1.12) pts.push_back(x);
    pts.insert(pts.end(), extra.begin(), extra.end());
    // Mass outside the constraint-relevant window can always be moved to 0
    // without increasing KL or violating the constraint, so those grid atoms
    // can be dropped (eta atoms and 0 always stay).
    double keep_lo = -cvarbai::kInf, keep_hi = cvarbai::kInf;
    double eta_lo = spec.xs.front(), eta_hi = spec.xs.back();
    if (const auto* c = std::get_if<CvarLE>(&spec.constraint))
        keep_hi = std::max({0.0, c->v, eta_hi});
    if (const auto* c = std::get_if<CvarGE>(&spec.constraint))
        keep_lo = std::min({0.0, c->v, eta_lo});
    if (const auto* c = std::get_if<VarLE>(&spec.constraint))
        keep_hi = std::max({0.0, c->y, eta_hi});
    if (const auto* c = std::get_if<VarGE>(&spec.constraint))
        keep_lo = std::min({0.0, c->y, eta_lo});
    if (std::get_if<MeanCvarLE>(&spec.constraint)) keep_hi = std::max(0.0, eta_hi);
    if (std::get_if<MeanCvarGE>(&spec.constraint)) keep_lo = std::min(0.0, eta_lo);
    pts.push_back(0.0);
    pts.erase(std::remove_if(pts.begin(), pts.end(),
                             [&](double x) { return x < keep_lo - 1e-12 || x > keep_hi + 1e-12; }),
              pts.end());
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    s.xs = pts;
    s.eta.assign(pts.size(), 0.0);
    for (std::size_t i = 0; i < spec.xs.size(); ++i) {
        const auto it = std::lower_bound(s.xs.begin(), s.xs.end(), spec.xs[i]);
        s.eta[static_cast<std::size_t>(it - s.xs.begin())] = spec.ws[i];
    }
    return s;
}

inline LinearConstraint moment_constraint(const Support& s, const MomentClass& mc) {
    LinearConstraint c;
    c.a.resize(s.xs.size());
    for (std::size_t i = 0; i < s.xs.size(); ++i) c.a[i] = mc.f(s.xs[i]);
    c.b = mc.B;
    return c;
}

/// x0-linearized CVaR upper bound: x0 + E(X-x0)_+/(1-pi) <= v.
inline LinearConstraint cvar_le_cut(const Support& s, const MomentClass& mc, double x0, double v) {
    LinearConstraint c;
    c.a.resize(s.xs.size());
    for (std::size_t i = 0; i < s.xs.size(); ++i)
        c.a[i] = s.xs[i] > x0 ? (s.xs[i] - x0) / (1.0 - mc.pi) : 0.0;
    c.b = v - x0;
    return c;
}

/// Valid cut for c_pi(kappa) >= v at a chosen x0: -(x0 + E(X-x0)_+/(1-pi)) <= -v.
inline LinearConstraint cvar_ge_cut(const Support& s, const MomentClass& mc, double x0, double v) {
    LinearConstraint c = cvar_le_cut(s, mc, x0, v);
    for (auto& a : c.a) a = -a;
    c.b = -(v - x0);
    return c;
}

inline double discrete_cvar(const std::vector<double>& xs, const std::vector<double>& w,
                            double pi) {
    double c = 0.0;
    std::size_t k = 0;
    for (; k < xs.size(); ++k) {
        c += w[k];
        if (c >= pi) break;
    }
    if (k >= xs.size()) k = xs.size() - 1;
    double tail = 0.0;
    for (std::size_t j = k + 1; j < xs.size(); ++j) tail += xs[j] * w[j];
    return ((c - pi) * xs[k] + tail) / (1.0 - pi);
}

inline double discrete_var(const std::vector<double>& xs, const std::vector<double>& w, double pi) {
    double c = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        c += w[k];
        if (c >= pi) return xs[k];
    }
    return xs.back();
}

inline double discrete_mean(const std::vector<double>& xs, const std::vector<double>& w) {
    double m = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) m += xs[i] * w[i];
    return m;
}

}  // namespace detail

/// Direct primal value of the KL projection onto the constrained class,
/// over the support of eta augmented with the grid atoms.  Three rounds of
/// local grid refinement around the mass-receiving atoms.
inline double primal_klinf(const PrimalSpec& spec) {
    using namespace detail;
    const MomentClass& mc = spec.mc;

    // one solve on a fixed support; returns (value, weights)
    auto solve_on = [&](const Support& s, double* x0_hint) -> IpmResult {
        const std::size_t m = s.xs.size();
        std::vector<LinearConstraint> base{moment_constraint(s, mc)};
        std::vector<std::size_t> anchors;
        auto anchor_below = [&](double value) {
            const auto it = std::upper_bound(s.xs.begin(), s.xs.end(), value);
            if (it != s.xs.begin()) anchors.push_back(static_cast<std::size_t>(it - s.xs.begin()) - 1);
        };
        auto anchor_above = [&](double value) {
            const auto it = std::lower_bound(s.xs.begin(), s.xs.end(), value);
            if (it != s.xs.end()) anchors.push_back(static_cast<std::size_t>(it - s.xs.begin()));
        };
        if (const auto* c = std::get_if<CvarLE>(&spec.constraint)) {
            anchor_below(c->v - 1e-9);
            anchor_below(c->v - 0.02 * (c->v + mc.finv(mc.B)));
        }
        if (const auto* c = std::get_if<CvarGE>(&spec.constraint)) anchor_above(c->v);
        if (const auto* c = std::get_if<MeanCvarLE>(&spec.constraint)) {
            if (c->a1 + c->a2 > 0.0) anchor_below(c->x / (c->a1 + c->a2) - 1e-9);
        }
        if (const auto* c = std::get_if<MeanCvarGE>(&spec.constraint)) {
            if (c->a1 + c->a2 > 0.0) anchor_above(c->x / (c->a1 + c->a2));
        }
        if (const auto* c = std::get_if<VarLE>(&spec.constraint)) anchor_below(c->y);
        if (const auto* c = std::get_if<VarGE>(&spec.constraint)) anchor_above(c->y);
        const auto seeds = make_seeds(s.xs, mc, anchors);

        if (const auto* c = std::get_if<VarLE>(&spec.constraint)) {
            // x_pi(kappa) <= y  <=>  F_kappa(y) >= pi
            LinearConstraint lc;
            lc.a.resize(m);
            for (std::size_t i = 0; i < m; ++i) lc.a[i] = s.xs[i] <= c->y ? -1.0 : 0.0;
            lc.b = -mc.pi;
            base.push_back(lc);
            return solve_simplex_kl(s.eta, base, nullptr, seeds);
        }
        if (const auto* c = std::get_if<VarGE>(&spec.constraint)) {
            // x_pi(kappa) >= y  <=>  F^-_kappa(y) <= pi
            LinearConstraint lc;
            lc.a.resize(m);
            for (std::size_t i = 0; i < m; ++i) lc.a[i] = s.xs[i] < c->y ? 1.0 : 0.0;
            lc.b = mc.pi;
            base.push_back(lc);
            return solve_simplex_kl(s.eta, base, nullptr, seeds);
        }
        if (const auto* c = std::get_if<CvarLE>(&spec.constraint)) {
            // union over x0 of one linear constraint; the scan covers the
            // auxiliary grid plus all support atoms <= v, where the
            // piecewise-linear CVaR minimizer of any kappa on this support
            // lives, making the linearized scan exact
            const double lo = -mc.finv(mc.B / mc.pi);
            std::vector<double> x0s;
            if (x0_hint && std::isfinite(*x0_hint)) {
                const double r = 0.06 * (c->v - lo);
                for (int k = 0; k <= 12; ++k)
                    x0s.push_back(*x0_hint - r + 2.0 * r * k / 12.0);
                for (double xi : s.xs)
                    if (xi >= *x0_hint - r && xi <= std::min(*x0_hint + r, c->v)) x0s.push_back(xi);
            } else {
                // phase A: uniform scan to locate the competitive basins
                std::vector<double> cx(101), cv(101, cvarbai::kInf);
                std::vector<double> cw;
                double coarse_best = cvarbai::kInf;
                for (int k = 0; k < 101; ++k) {
                    cx[k] = lo + (c->v - lo) * static_cast<double>(k) / 100.0;
                    auto cons = base;
                    cons.push_back(cvar_le_cut(s, mc, cx[k], c->v));
                    auto r = solve_simplex_kl(s.eta, cons, cw.empty() ? nullptr : &cw, seeds, true);
                    if (r.feasible) {
                        cw = r.w;
                        cv[k] = r.value;
                        coarse_best = std::min(coarse_best, r.value);
                    }
                }
                // phase B: support atoms and a finer grid around every local
                // minimum within reach of the best coarse value
                const double h = (c->v - lo) / 100.0;
                const double cutoff = coarse_best + 0.35 * (1.0 + std::abs(coarse_best));
                for (int k = 0; k < 101; ++k) {
                    const bool locmin = cv[k] <= cutoff &&
                                        (k == 0 || cv[k] <= cv[k - 1] + 1e-12) &&
                                        (k == 100 || cv[k] <= cv[k + 1] + 1e-12);
                    if (!locmin) continue;
                    for (int j = 0; j <= 8; ++j)
                        x0s.push_back(cx[k] - 2.0 * h + 4.0 * h * j / 8.0);
                    for (double xi : s.xs)
                        if (xi >= cx[k] - 2.0 * h && xi <= std::min(cx[k] + 2.0 * h, c->v))
                            x0s.push_back(xi);
                }
            }
            std::sort(x0s.begin(), x0s.end());
            x0s.erase(std::remove_if(x0s.begin(), x0s.end(),
                                     [&](double x0) { return x0 < lo || x0 > c->v; }),
                      x0s.end());
            IpmResult best;
            std::vector<double> warm;
            double best_x0 = cvarbai::kInf;
            for (double x0 : x0s) {
                auto cons = base;
                cons.push_back(cvar_le_cut(s, mc, x0, c->v));
                auto r = solve_simplex_kl(s.eta, cons, warm.empty() ? nullptr : &warm, seeds);
                if (r.feasible) {
                    warm = r.w;
                    if (r.value < best.value) {
                        best = r;
                        best_x0 = x0;
                    }
                }
            }
            if (x0_hint) *x0_hint = best_x0;
            return best;
        }
        if (const auto* c = std::get_if<CvarGE>(&spec.constraint)) {
            // cutting planes: c_pi(kappa) >= v holds iff every x0-cut holds
            auto cons = base;
            IpmResult r;
            std::vector<double> warm;
            for (int round = 0; round < 80; ++round) {
                r = solve_simplex_kl(s.eta, cons, warm.empty() ? nullptr : &warm, seeds);
                if (!r.feasible) return r;
                warm = r.w;
                const double cv = discrete_cvar(s.xs, r.w, mc.pi);
                if (cv >= c->v - 1e-11) break;
                const double x0 = discrete_var(s.xs, r.w, mc.pi);
                cons.push_back(cvar_ge_cut(s, mc, x0, c->v));
            }
            return r;
        }
        if (const auto* c = std::get_if<MeanCvarLE>(&spec.constraint)) {
            const double lo = -mc.finv(mc.B / mc.pi);
            const double hi = mc.finv(mc.B / (1.0 - mc.pi));
            std::vector<double> x0s;
            if (x0_hint && std::isfinite(*x0_hint)) {
                const double r = 0.06 * (hi - lo);
                for (int k = 0; k <= 12; ++k)
                    x0s.push_back(*x0_hint - r + 2.0 * r * k / 12.0);
                for (double xi : s.xs)
                    if (xi >= *x0_hint - r && xi <= *x0_hint + r) x0s.push_back(xi);
            } else {
                std::vector<double> cx(101), cv(101, cvarbai::kInf);
                std::vector<double> cw;
                double coarse_best = cvarbai::kInf;
                for (int k = 0; k < 101; ++k) {
                    cx[k] = lo + (hi - lo) * static_cast<double>(k) / 100.0;
                    auto cons = base;
                    LinearConstraint lc = cvar_le_cut(s, mc, cx[k], 0.0);
                    for (std::size_t i = 0; i < m; ++i)
                        lc.a[i] = c->a1 * s.xs[i] + c->a2 * lc.a[i];
                    lc.b = c->x - c->a2 * cx[k];
                    cons.push_back(lc);
                    auto r = solve_simplex_kl(s.eta, cons, cw.empty() ? nullptr : &cw, seeds, true);
                    if (r.feasible) {
                        cw = r.w;
                        cv[k] = r.value;
                        coarse_best = std::min(coarse_best, r.value);
                    }
                }
                const double hstep = (hi - lo) / 100.0;
                const double cutoff = coarse_best + 0.35 * (1.0 + std::abs(coarse_best));
                for (int k = 0; k < 101; ++k) {
                    const bool locmin = cv[k] <= cutoff &&
                                        (k == 0 || cv[k] <= cv[k - 1] + 1e-12) &&
                                        (k == 100 || cv[k] <= cv[k + 1] + 1e-12);
                    if (!locmin) continue;
                    for (int j = 0; j <= 8; ++j)
                        x0s.push_back(cx[k] - 2.0 * hstep + 4.0 * hstep * j / 8.0);
                    for (double xi : s.xs)
                        if (xi >= cx[k] - 2.0 * hstep && xi <= cx[k] + 2.0 * hstep)
                            x0s.push_back(xi);
                }
            }
            std::sort(x0s.begin(), x0s.end());
            x0s.erase(std::remove_if(x0s.begin(), x0s.end(),
                                     [&](double x0) { return x0 < lo || x0 > hi; }),
                      x0s.end());
            IpmResult best;
            std::vector<double> warm;
            double best_x0 = cvarbai::kInf;
            for (double x0 : x0s) {
                auto cons = base;
                LinearConstraint lc = cvar_le_cut(s, mc, x0, 0.0);
                for (std::size_t i = 0; i < m; ++i)
                    lc.a[i] = c->a1 * s.xs[i] + c->a2 * lc.a[i];
                lc.b = c->x - c->a2 * x0;
                cons.push_back(lc);
                auto r = solve_simplex_kl(s.eta, cons, warm.empty() ? nullptr : &warm, seeds);
                if (r.feasible) {
                    warm = r.w;
                    if (r.value < best.value) {
                        best = r;
                        best_x0 = x0;
                    }
                }
            }
            if (x0_hint) *x0_hint = best_x0;
            return best;
        }
        const auto* c = std::get_if<MeanCvarGE>(&spec.constraint);
        if (!c) throw std::logic_error("oracle: unknown constraint");
        auto cons = base;
        IpmResult r;
        std::vector<double> warm;
        for (int round = 0; round < 80; ++round) {
            r = solve_simplex_kl(s.eta, cons, warm.empty() ? nullptr : &warm, seeds);
            if (!r.feasible) return r;
            warm = r.w;
            const double val =
                c->a1 * discrete_mean(s.xs, r.w) + c->a2 * discrete_cvar(s.xs, r.w, mc.pi);
            if (val >= c->x - 1e-11) break;
            const double x0 = discrete_var(s.xs, r.w, mc.pi);
            LinearConstraint lc = cvar_ge_cut(s, mc, x0, 0.0);
            for (std::size_t i = 0; i < m; ++i) lc.a[i] = -c->a1 * s.xs[i] + c->a2 * lc.a[i];
            lc.b = -(c->x - c->a2 * x0);
            cons.push_back(lc);
        }
        return r;
    };

    std::vector<double> extra;
    double value = cvarbai::kInf;
    double x0_hint = cvarbai::kInf;
    for (int round = 0; round < 3; ++round) {
        Support s = build_support(spec, extra);
        IpmResult r = solve_on(s, &x0_hint);
        if (!r.feasible) throw std::runtime_error("oracle: constraint set infeasible on grid");
        value = std::min(value, r.value);
        if (round < 2) {
            auto cand = refine_candidates(s, r.w);
            if (cand.empty()) break;
            extra.insert(extra.end(), cand.begin(), cand.end());
        }
    }
    return value;
}

/// Two-block reweighting for the VaR projections: build the reweighted
/// measure kappa* explicitly and sum the KL atom by atom.
inline double var_two_block_lower(const cvarbai::Measure& eta, double y, double pi) {
    const auto& d = eta.as_discrete();
    const double F = eta.cdf(y);
    if (F >= pi) return 0.0;  // constraint x_pi(kappa) <= y already holds
    // push CDF at y up to pi: scale mass <= y by pi/F, mass > y by (1-pi)/(1-F)
    double kl = 0.0;
    for (std::size_t i = 0; i < d.xs.size(); ++i) {
        const double scale = d.xs[i] <= y ? pi / F : (1.0 - pi) / (1.0 - F);
        kl += d.ws[i] * std::log(d.ws[i] / (d.ws[i] * scale));
    }
    return kl;
}

inline double var_two_block_upper(const cvarbai::Measure& eta, double y, double pi) {
    const auto& d = eta.as_discrete();
    const double F = eta.cdf_left(y);
    if (F <= pi) return 0.0;  // constraint x_pi(kappa) >= y already holds
    // push the left limit at y down to pi
    double kl = 0.0;
    for (std::size_t i = 0; i < d.xs.size(); ++i) {
        const double scale = d.xs[i] < y ? pi / F : (1.0 - pi) / (1.0 - F);
        kl += d.ws[i] * std::log(d.ws[i] / (d.ws[i] * scale));
    }
    return kl;
}

}  // namespace oracle
