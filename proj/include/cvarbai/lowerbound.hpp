#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cvarbai/common.hpp"
#include "cvarbai/klinf.hpp"
#include "cvarbai/measure.hpp"

namespace cvarbai {

/// Point of the K-simplex: the sampling allocation.
struct Weights {
    std::vector<double> t;

    void validate() const {
        double s = 0.0;
        for (double x : t) {
            if (!(x >= 0.0)) throw std::invalid_argument("Weights: negative entry");
            s += x;
        }
        if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("Weights: must sum to 1");
    }
};

/// One pairwise statistic with its supergradient in the two weights
/// (value = ta*du + tb*dl by 1-homogeneity).
struct PairValue {
    double value = 0.0;
    double du = 0.0;  // d value / d t_a
    double dl = 0.0;  // d value / d t_b
};

namespace detail {

/// Joint-dual pairwise statistic for CVaR; du/dl by Danskin on the weights.
inline PairValue pair_cvar(const PreppedSample& pa, double ta, const PreppedSample& pb, double tb,
                           const MomentClass& mc, KlinfHint* hint, bool thorough) {
    PairValue out;
    if (ta <= 0.0 && tb <= 0.0) return out;
    if (ta <= 0.0 || tb <= 0.0) return out;  // one-sided constraint binds nothing
    KlinfResult r = joint_z_cvar(pa, ta, pb, tb, mc, hint, nullptr, thorough);
    out.value = r.value;
    const auto& jd = std::get<JointDual>(r.dual);
    // re-evaluate the two expectation blocks at the optimal duals
    JointProblem prob{pa.view(), pb.view(), 1.0, 1.0, jd.x0, mc, DualBox{}};
    const double th[5] = {jd.l1, jd.l2, jd.g2, jd.r1, jd.r2};
    double eu = 0.0, el = 0.0;
    for (std::size_t i = 0; i < pa.view().n; ++i)
        eu += pa.view().w[i] * safe_log(prob.hu(th, pa.view().x[i], pa.view().fx[i]));
    for (std::size_t i = 0; i < pb.view().n; ++i)
        el += pb.view().w[i] * safe_log(prob.hl(th, pb.view().x[i], pb.view().fx[i]));
    const double total = ta + tb;
    out.du = eu + std::log(total / (2.0 * ta));
    out.dl = el + std::log(total / (2.0 * tb));
    if (hint) {
        hint->valid = true;
        hint->x0 = jd.x0;
        hint->radius = 0.05 * mc.var_range().width();
        hint->theta = {jd.l1, jd.l2, jd.g2, jd.r1, jd.r2};
    }
    return out;
}

/// Closed-form pairwise statistic for VaR over y in [x_pi^+(a), x_pi(b)].
inline PairValue pair_var(const Measure& ma, double ta, const Measure& mb, double tb, double pi) {
    PairValue out;
    if (ta <= 0.0 && tb <= 0.0) return out;
    const double lo = ma.var_upper(pi);
    const double hi = mb.var(pi);
    if (!(lo <= hi)) {
        // quantile sets overlap: the infimum is zero at a common quantile
        return out;
    }
    std::vector<double> cand{lo, hi, 0.5 * (lo + hi)};
    auto add_atoms = [&](const Measure& m) {
        if (!m.is_discrete()) {
            for (int k = 1; k < 64; ++k) cand.push_back(lo + (hi - lo) * k / 64.0);
            return;
        }
        const auto& d = m.as_discrete();
        for (double x : d.xs) {
            if (x >= lo && x <= hi) {
                cand.push_back(x);
                cand.push_back(std::nextafter(x, kInf));  // just past the atom
            }
        }
    };
    add_atoms(ma);
    add_atoms(mb);
    double bestv = kInf, bu = 0.0, bl = 0.0;
    for (double y : cand) {
        if (y < lo || y > hi) continue;
        const double u = klinf_upper_var(ma, y, pi);
        const double l = klinf_lower_var(mb, y, pi);
        const double v = ta * u + tb * l;
        if (v < bestv) {
            bestv = v;
            bu = u;
            bl = l;
        }
    }
    out.value = bestv;
    out.du = bu;
    out.dl = bl;
    return out;
}

/// Composed pairwise statistic for the mean-CVaR objective over a common
/// constraint level x in [o(a), o(b)].
inline PairValue pair_meancvar(const PreppedSample& pa, double ta, const PreppedSample& pb,
                               double tb, double a1, double a2, const MomentClass& mc,
                               bool thorough) {
    PairValue out;
    if (ta <= 0.0 && tb <= 0.0) return out;
    if (ta <= 0.0 || tb <= 0.0) return out;
    const Interval O = meancvar_range(mc, a1, a2);
    auto oval = [&](const PreppedSample& p) {
        return a1 * view_mean(p.view()) + a2 * view_cvar(p.view(), mc.pi);
    };
    double lo = O.clamp_interior(oval(pa), 1e-7);
    double hi = O.clamp_interior(oval(pb), 1e-7);
    if (!(lo < hi)) return out;
    double bestv = kInf, bu = 0.0, bl = 0.0;
    KlinfHint hu, hl;
    auto eval = [&](double x) {
        auto ru = klinf_upper_meancvar(pa, x, a1, a2, mc, &hu, thorough);
        auto rl = klinf_lower_meancvar(pb, x, a1, a2, mc, &hl, thorough);
        const double v = ta * ru.value + tb * rl.value;
        if (v < bestv) {
            bestv = v;
            bu = ru.value;
            bl = rl.value;
        }
        return v;
    };
    const int n = 24;
    int kbest = 0;
    std::vector<double> vals(n + 1);
    for (int k = 0; k <= n; ++k) {
        vals[k] = eval(lo + (hi - lo) * k / n);
        if (vals[k] < vals[kbest]) kbest = k;
    }
    double a = lo + (hi - lo) * std::max(0, kbest - 1) / n;
    double b = lo + (hi - lo) * std::min(n, kbest + 1) / n;
    for (int it = 0; it < 24 && b - a > 1e-7 * (hi - lo); ++it) {
        const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
        if (eval(m1) <= eval(m2))
            b = m2;
        else
            a = m1;
    }
    out.value = bestv;
    out.du = bu;
    out.dl = bl;
    return out;
}

}  // namespace detail

/// Arms pre-discretized and prepared for repeated pairwise evaluation.
struct PreparedInstance {
    std::vector<Measure> arms;          // original (analytic) arms
    std::vector<Measure> discretized;   // 512-point quantile grid where analytic
    std::vector<PreppedSample> prepped;
    std::vector<double> risks;
    int best = 0;
    MomentClass mc;
    ObjectiveSpec objective;

    static PreparedInstance make(const std::vector<Measure>& arms, const MomentClass& mc,
                                 const ObjectiveSpec& obj, std::size_t grid = 512) {
        PreparedInstance p;
        p.arms = arms;
        p.mc = mc;
        p.objective = obj;
        for (const auto& m : arms) {
            Measure d = m.is_discrete() ? m : discretize(m, grid);
            p.prepped.push_back(PreppedSample::from(d, mc));
            p.discretized.push_back(std::move(d));
        }
        for (const auto& m : arms) p.risks.push_back(risk_value(m, obj, mc.pi));
        p.best = static_cast<int>(std::min_element(p.risks.begin(), p.risks.end()) -
                                  p.risks.begin());
        return p;
    }
};

/// Pairwise inner value g_{a,b} = inf_x { t_a KLinfU(mu_a, x) + t_b KLinfL(mu_b, x) }
/// for arms with risk(mu_a) < risk(mu_b).
inline double pairwise_g(const std::vector<Measure>& arms, const Weights& t, int a, int b,
                         const MomentClass& mc, const ObjectiveSpec& obj) {
    PreparedInstance p = PreparedInstance::make(arms, mc, obj);
    switch (obj.kind) {
        case Objective::Var:
            return detail::pair_var(arms[static_cast<std::size_t>(a)], t.t[static_cast<std::size_t>(a)],
                                    arms[static_cast<std::size_t>(b)], t.t[static_cast<std::size_t>(b)],
                                    mc.pi)
                .value;
        case Objective::Cvar:
            return detail::pair_cvar(p.prepped[static_cast<std::size_t>(a)],
                                     t.t[static_cast<std::size_t>(a)],
                                     p.prepped[static_cast<std::size_t>(b)],
                                     t.t[static_cast<std::size_t>(b)], mc, nullptr, true)
                .value;
        case Objective::MeanCvar:
            return detail::pair_meancvar(p.prepped[static_cast<std::size_t>(a)],
                                         t.t[static_cast<std::size_t>(a)],
                                         p.prepped[static_cast<std::size_t>(b)],
                                         t.t[static_cast<std::size_t>(b)], obj.alpha1, obj.alpha2,
                                         mc, true)
                .value;
    }
    return 0.0;
}

struct SolveVResult {
    double v = 0.0;
    Weights tstar;
    int best = 0;
    std::vector<double> risks;
};

namespace detail {

inline cvarbai::PairValue eval_pair(const PreparedInstance& p, double ta, double tb, int j,
                           std::vector<KlinfHint>* hints, bool thorough) {
    const std::size_t uj = static_cast<std::size_t>(j);
    KlinfHint* h = hints ? &(*hints)[uj] : nullptr;
    switch (p.objective.kind) {
        case Objective::Var:
            return pair_var(p.arms[static_cast<std::size_t>(p.best)], ta, p.arms[uj], tb, p.mc.pi);
        case Objective::Cvar:
            return pair_cvar(p.prepped[static_cast<std::size_t>(p.best)], ta, p.prepped[uj], tb,
                             p.mc, h, thorough);
        case Objective::MeanCvar:
            return pair_meancvar(p.prepped[static_cast<std::size_t>(p.best)], ta, p.prepped[uj],
                                 tb, p.objective.alpha1, p.objective.alpha2, p.mc, thorough);
    }
    return {};
}

}  // namespace detail

/// V(mu) = sup_t min_{j != best} g_{best,j}(t) by entropic mirror ascent with
/// the step schedule 1/sqrt(iter); returns the averaged iterate.
inline SolveVResult solve_v(const std::vector<Measure>& arms, const MomentClass& mc,
                            const ObjectiveSpec& obj, double tol = 1e-4, int max_iters = 2000) {
    PreparedInstance p = PreparedInstance::make(arms, mc, obj);
    const std::size_t K = arms.size();
    if (K < 2) throw std::invalid_argument("solve_v: need at least two arms");
    {
        std::vector<double> sorted = p.risks;
        std::sort(sorted.begin(), sorted.end());
        if (!(sorted[1] - sorted[0] > 1e-12 * (1.0 + std::abs(sorted[0]))))
            throw Unlearnable("solve_v: best risk ties the runner-up");
    }

    std::vector<double> w(K, 1.0 / static_cast<double>(K)), wsum(K, 0.0);
    std::vector<KlinfHint> hints(K);
    double gscale = 1.0;
    double prev_avg_value = -kInf;

    auto phi = [&](const std::vector<double>& t, int* argmin, bool thorough) {
        double worst = kInf;
        PairValue pv;
        for (std::size_t j = 0; j < K; ++j) {
            if (static_cast<int>(j) == p.best) continue;
            auto val = detail::eval_pair(p, t[static_cast<std::size_t>(p.best)], t[j],
                                         static_cast<int>(j), &hints, thorough);
            if (val.value < worst) {
                worst = val.value;
                if (argmin) *argmin = static_cast<int>(j);
                pv = val;
            }
        }
        return std::make_pair(worst, pv);
    };

    long k = 0;
    for (int it = 1; it <= max_iters; ++it) {
        int jstar = -1;
        auto [value, pv] = phi(w, &jstar, false);
        gscale = std::max({gscale, std::abs(pv.du), std::abs(pv.dl)});
        const double step = 1.0 / (gscale * std::sqrt(static_cast<double>(it)));
        w[static_cast<std::size_t>(p.best)] *= std::exp(step * pv.du);
        w[static_cast<std::size_t>(jstar)] *= std::exp(step * pv.dl);
        double s = std::accumulate(w.begin(), w.end(), 0.0);
        for (double& x : w) x /= s;
        for (std::size_t i = 0; i < K; ++i) wsum[i] += w[i];
        ++k;
        if (it % 100 == 0) {
            std::vector<double> avg(K);
            for (std::size_t i = 0; i < K; ++i) avg[i] = wsum[i] / static_cast<double>(k);
            const double av = phi(avg, nullptr, false).first;
            if (std::abs(av - prev_avg_value) < tol * (1.0 + std::abs(av)) && it >= 400) break;
            prev_avg_value = av;
        }
    }

    SolveVResult out;
    out.best = p.best;
    out.risks = p.risks;
    out.tstar.t.resize(K);
    for (std::size_t i = 0; i < K; ++i) out.tstar.t[i] = wsum[i] / static_cast<double>(k);
    out.v = phi(out.tstar.t, nullptr, true).first;
    return out;
}

/// State carried by the one-step saddle iterate used inside the engine.
struct SaddleState {
    std::vector<double> w;
    std::vector<double> wsum;
    long k = 0;
    double gscale = 1.0;
    std::vector<KlinfHint> hints;

    void init(std::size_t arms) {
        w.assign(arms, 1.0 / static_cast<double>(arms));
        wsum.assign(arms, 0.0);
        k = 0;
        gscale = 1.0;
        hints.assign(arms, {});
    }
};

/// One mirror-ascent step on the weights of V(mu_hat); returns the averaged
/// iterate.  The supergradient costs one pairwise evaluation per suboptimal
/// arm.
inline Weights saddle_step(SaddleState& state, const PreparedInstance& p) {
    const std::size_t K = p.prepped.size();
    if (state.w.size() != K) state.init(K);
    int jstar = -1;
    double worst = kInf;
    PairValue best_pv;
    for (std::size_t j = 0; j < K; ++j) {
        if (static_cast<int>(j) == p.best) continue;
        auto pv = detail::eval_pair(p, state.w[static_cast<std::size_t>(p.best)], state.w[j],
                                    static_cast<int>(j), &state.hints, false);
        if (pv.value < worst) {
            worst = pv.value;
            jstar = static_cast<int>(j);
            best_pv = pv;
        }
    }
    state.gscale = std::max({state.gscale, std::abs(best_pv.du), std::abs(best_pv.dl)});
    ++state.k;
    const double step = 1.0 / (state.gscale * std::sqrt(static_cast<double>(state.k)));
    state.w[static_cast<std::size_t>(p.best)] *= std::exp(step * best_pv.du);
    state.w[static_cast<std::size_t>(jstar)] *= std::exp(step * best_pv.dl);
    double s = std::accumulate(state.w.begin(), state.w.end(), 0.0);
    for (double& x : state.w) x /= s;
    for (std::size_t i = 0; i < K; ++i) state.wsum[i] += state.w[i];

    Weights out;
    out.t.resize(K);
    for (std::size_t i = 0; i < K; ++i) out.t[i] = state.wsum[i] / static_cast<double>(state.k);
    return out;
}

/// Interpretable sandwich on the approximate characteristic time: returns
/// (lower, upper) bracketing 1/V-tilde with ratio exactly 2^{1/eps}.
/// gaps holds the suboptimality gaps of the K-1 competitors.
struct ApproxV {
    double lower = 0.0;
    double upper = 0.0;
};

inline ApproxV approx_v(const std::vector<double>& gaps, const MomentClass& mc) {
    if (gaps.empty()) return {};
    double dmin = kInf;
    for (double d : gaps) {
        if (!(d > 0.0)) throw std::invalid_argument("approx_v: gaps must be positive");
        dmin = std::min(dmin, d);
    }
    const double c = std::pow((1.0 - mc.pi) / 4.0, 1.0 + 1.0 / mc.eps);
    const double bpow = std::pow(mc.B, 1.0 / mc.eps);
    double sum = std::pow(dmin, -1.0 - 1.0 / mc.eps);  // best arm enters with the minimum gap
    for (double d : gaps) sum += std::pow(d, -1.0 - 1.0 / mc.eps);
    ApproxV out;
    out.lower = c * bpow * sum;
    out.upper = std::pow(2.0, 1.0 / mc.eps) * out.lower;
    return out;
}

}  // namespace cvarbai
