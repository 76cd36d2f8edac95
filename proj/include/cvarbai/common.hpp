#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cvarbai {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Thrown when a tail expectation (CVaR, truncated mean) does not converge.
struct DivergentTail : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when a risk level lies outside the valid interior range of its class.
struct InfeasibleLevel : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when a dual bounding box degenerates (level at the range boundary).
struct DegenerateRegion : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when the best risk ties the runner-up and no allocation separates them.
struct Unlearnable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Closed interval [lo, hi].
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
    bool contains(double x) const { return x >= lo && x <= hi; }
    bool contains_interior(double x) const { return x > lo && x < hi; }

    /// Clamp x into the interval shrunk by rel*width on both sides.
    double clamp_interior(double x, double rel = 1e-9) const {
        const double pad = rel * width();
        const double a = lo + pad, b = hi - pad;
        if (x < a) return a;
        if (x > b) return b;
        return x;
    }
};

/// Moment class parameters: distributions with E|X|^{1+eps} <= B, evaluated
/// at risk level pi.  Also owns the derived ranges for CVaR (D) and VaR (C).
struct MomentClass {
    double B = 1.0;
    double eps = 1.0;
    double pi = 0.5;

    MomentClass() = default;
    MomentClass(double B_, double eps_, double pi_) : B(B_), eps(eps_), pi(pi_) {
        if (!(B > 0.0)) throw std::invalid_argument("MomentClass: B must be > 0");
        if (!(eps > 0.0)) throw std::invalid_argument("MomentClass: eps must be > 0");
        if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("MomentClass: pi must be in (0,1)");
    }

    double p() const { return 1.0 + eps; }
    double f(double x) const { return std::pow(std::abs(x), 1.0 + eps); }
    double finv(double c) const { return std::pow(c, 1.0 / (1.0 + eps)); }

    /// CVaR range D = [-B^{1/(1+eps)}, (B/(1-pi))^{1/(1+eps)}].
    Interval cvar_range() const { return {-finv(B), finv(B / (1.0 - pi))}; }

    /// VaR range C = [-(B/pi)^{1/(1+eps)}, (B/(1-pi))^{1/(1+eps)}].
    Interval var_range() const { return {-finv(B / pi), finv(B / (1.0 - pi))}; }
};

/// KL divergence between Bernoulli(p) and Bernoulli(q), with 0 log 0 = 0.
inline double bernoulli_kl(double p, double q) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("bernoulli_kl: q must be in (0,1)");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("bernoulli_kl: p must be in [0,1]");
    double out = 0.0;
    if (p > 0.0) out += p * std::log(p / q);
    if (p < 1.0) out += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
    return out;
}

}  // namespace cvarbai
