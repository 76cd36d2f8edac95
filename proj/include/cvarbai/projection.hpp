#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cvarbai/common.hpp"
#include "cvarbai/measure.hpp"

namespace cvarbai {

namespace detail {

struct ClippedTails {
    std::vector<double> xs;
    std::vector<double> ws;
};

/// Remove up to z mass from the left tail of the negative atoms and up to z
/// from the right tail of the positive atoms; the removed mass lands on 0.
inline ClippedTails clip_tails(const DiscreteDist& d, double z) {
    ClippedTails out;
    std::vector<double> ws = d.ws;
    double neg_cut = 0.0, pos_cut = 0.0;
    {
        double remaining = z;
        for (std::size_t i = 0; i < d.xs.size() && remaining > 0.0; ++i) {
            if (d.xs[i] >= 0.0) break;
            const double cut = std::min(ws[i], remaining);
            ws[i] -= cut;
            remaining -= cut;
            neg_cut += cut;
        }
    }
    {
        double remaining = z;
        for (std::size_t i = d.xs.size(); i-- > 0 && remaining > 0.0;) {
            if (d.xs[i] <= 0.0) break;
            const double cut = std::min(ws[i], remaining);
            ws[i] -= cut;
            remaining -= cut;
            pos_cut += cut;
        }
    }
    const double to_zero = neg_cut + pos_cut;
    bool zero_present = false;
    for (std::size_t i = 0; i < d.xs.size(); ++i) {
        double w = ws[i];
        if (d.xs[i] == 0.0) {
            zero_present = true;
            w += to_zero;
        }
        if (w > 0.0) {
            out.xs.push_back(d.xs[i]);
            out.ws.push_back(w);
        }
    }
    if (!zero_present && to_zero > 0.0) {
        const auto it = std::lower_bound(out.xs.begin(), out.xs.end(), 0.0);
        const std::size_t i = static_cast<std::size_t>(it - out.xs.begin());
        out.xs.insert(out.xs.begin() + static_cast<std::ptrdiff_t>(i), 0.0);
        out.ws.insert(out.ws.begin() + static_cast<std::ptrdiff_t>(i), to_zero);
    }
    return out;
}

}  // namespace detail

/// G_z: both CDF tails clipped by z with the removed mass relocated to 0.
inline Measure gz(const Measure& f, double z) {
    if (!(z >= 0.0 && z <= 1.0)) throw std::invalid_argument("gz: z must be in [0,1]");
    const auto& d = f.as_discrete();
    if (z == 0.0) return f;
    auto ct = detail::clip_tails(d, z);
    double total = 0.0;
    for (double w : ct.ws) total += w;
    for (double& w : ct.ws) w /= total;
    return Measure::discrete(std::move(ct.xs), std::move(ct.ws));
}

/// E_{G_z} |X|^{1+eps}, exact weighted sum.
inline double moment_of_gz(const Measure& f, double z, const MomentClass& mc) {
    const auto& d = f.as_discrete();
    auto ct = detail::clip_tails(d, z);
    double m = 0.0;
    for (std::size_t i = 0; i < ct.xs.size(); ++i) m += ct.ws[i] * mc.f(ct.xs[i]);
    return m;
}

struct ProjectionResult {
    Measure measure;
    double z = 0.0;
};

/// Kolmogorov projection of a discrete measure onto the moment class: the
/// smallest z with moment_of_gz(F, z) <= B, found by walking the knots of
/// the piecewise-linear map z -> E_{G_z} f and interpolating on the
/// bracketing segment.
inline ProjectionResult project_kolmogorov(const Measure& f, const MomentClass& mc) {
    const auto& d = f.as_discrete();
    double m0 = 0.0;
    for (std::size_t i = 0; i < d.xs.size(); ++i) m0 += d.ws[i] * mc.f(d.xs[i]);
    if (m0 <= mc.B) return {f, 0.0};

    // active tail atoms: negative side eaten left-to-right, positive side
    // right-to-left, both at rate 1 in z
    // li indexes the current negative atom (if d.xs[li] < 0) and ri-1 the
    // current positive atom (if d.xs[ri-1] > 0)
    std::size_t li = 0;
    std::size_t ri = d.xs.size();
    double lrem = (li < d.xs.size() && d.xs[li] < 0.0) ? d.ws[li] : 0.0;
    double rrem = (ri > 0 && d.xs[ri - 1] > 0.0) ? d.ws[ri - 1] : 0.0;

    double z = 0.0;
    double m = m0;
    while (m > mc.B) {
        const bool has_l = li < d.xs.size() && d.xs[li] < 0.0;
        const bool has_r = ri > 0 && d.xs[ri - 1] > 0.0;
        if (!has_l && !has_r) break;  // everything at 0: moment is 0 <= B
        const double fl = has_l ? mc.f(d.xs[li]) : 0.0;
        const double fr = has_r ? mc.f(d.xs[ri - 1]) : 0.0;
        const double slope = fl + fr;
        // segment ends when either active atom exhausts
        double seg = kInf;
        if (has_l) seg = std::min(seg, lrem);
        if (has_r) seg = std::min(seg, rrem);
        if (slope > 0.0 && m - slope * seg <= mc.B) {
            z += (m - mc.B) / slope;
            m = mc.B;
            break;
        }
        z += seg;
        m -= slope * seg;
        if (has_l) {
            lrem -= seg;
            if (lrem <= 1e-18) {
                ++li;
                lrem = (li < d.xs.size() && d.xs[li] < 0.0) ? d.ws[li] : 0.0;
            }
        }
        if (has_r) {
            rrem -= seg;
            if (rrem <= 1e-18) {
                --ri;
                rrem = (ri > 0 && d.xs[ri - 1] > 0.0) ? d.ws[ri - 1] : 0.0;
            }
        }
    }
    const double zstar = std::min(z, 1.0);
    return {gz(f, zstar), zstar};
}

}  // namespace cvarbai
