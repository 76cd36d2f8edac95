#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <memory>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "cvarbai/common.hpp"
#include "cvarbai/quadrature.hpp"
#include "cvarbai/rng.hpp"

namespace cvarbai {

class Measure;

/// Fisher-Tippett (generalized extreme value) distribution F(mu, sigma, gamma)
/// with CDF exp(-(1 + gamma z)^{-1/gamma}), z = (x-mu)/sigma, and the Gumbel
/// limit exp(-exp(-z)) for |gamma| below 1e-10.
struct FisherTippett {
    double mu = 0.0;
    double sigma = 1.0;
    double gamma = 0.0;
};

/// Generalized Pareto distribution P(mu, sigma, gamma), gamma > 0, with CDF
/// 1 - (1 + gamma z)^{-1/gamma} on z = (x-mu)/sigma >= 0.
struct Pareto {
    double mu = 0.0;
    double sigma = 1.0;
    double gamma = 1.0;
};

struct MixtureDist {
    std::vector<double> weights;
    std::vector<std::shared_ptr<const Measure>> components;
};

/// Weighted discrete measure; atoms strictly increasing, weights positive.
struct DiscreteDist {
    std::vector<double> xs;
    std::vector<double> ws;
    std::vector<double> cumw;  // inclusive prefix sums, back() == 1
};

namespace detail {
inline constexpr double kGammaZeroTol = 1e-10;
inline constexpr double kEulerMascheroni = 0.57721566490153286;
}  // namespace detail

class Measure {
  public:
    static Measure fisher_tippett(double mu, double sigma, double gamma) {
        if (!(sigma > 0.0)) throw std::invalid_argument("fisher_tippett: sigma must be > 0");
        return Measure(FisherTippett{mu, sigma, gamma});
    }

    static Measure pareto(double mu, double sigma, double gamma) {
        if (!(sigma > 0.0)) throw std::invalid_argument("pareto: sigma must be > 0");
        if (!(gamma > 0.0)) throw std::invalid_argument("pareto: gamma must be > 0");
        return Measure(Pareto{mu, sigma, gamma});
    }

    static Measure mixture(std::vector<std::pair<double, Measure>> parts) {
        if (parts.empty()) throw std::invalid_argument("mixture: needs components");
        MixtureDist mix;
        double total = 0.0;
        for (auto& [w, m] : parts) {
            if (!(w > 0.0)) throw std::invalid_argument("mixture: weights must be > 0");
            total += w;
            mix.weights.push_back(w);
            mix.components.push_back(std::make_shared<const Measure>(std::move(m)));
        }
        if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture: weights must sum to 1");
        return Measure(std::move(mix));
    }

    /// Atoms must be strictly increasing with positive weights summing to 1.
    static Measure discrete(std::vector<double> xs, std::vector<double> ws) {
        if (xs.empty() || xs.size() != ws.size())
            throw std::invalid_argument("discrete: bad atom list");
        double total = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!(ws[i] > 0.0)) throw std::invalid_argument("discrete: weights must be > 0");
            if (i > 0 && !(xs[i] > xs[i - 1]))
                throw std::invalid_argument("discrete: atoms must be strictly increasing");
            total += ws[i];
        }
        if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("discrete: weights must sum to 1");
        DiscreteDist d{std::move(xs), std::move(ws), {}};
        d.cumw.resize(d.ws.size());
        double c = 0.0;
        for (std::size_t i = 0; i < d.ws.size(); ++i) {
            c += d.ws[i];
            d.cumw[i] = c;
        }
        d.cumw.back() = 1.0;
        return Measure(std::move(d));
    }

    static Measure point_mass(double c) { return discrete({c}, {1.0}); }

    /// Equal-weight empirical measure; duplicates merge at exact bit equality.
    static Measure from_samples(std::vector<double> samples) {
        if (samples.empty()) throw std::invalid_argument("from_samples: empty sample");
        std::sort(samples.begin(), samples.end());
        std::vector<double> xs, ws;
        const double w = 1.0 / static_cast<double>(samples.size());
        for (double s : samples) {
            if (!xs.empty() && xs.back() == s) {
                ws.back() += w;
            } else {
                xs.push_back(s);
                ws.push_back(w);
            }
        }
        // exact renormalization against accumulated rounding
        double total = 0.0;
        for (double v : ws) total += v;
        for (double& v : ws) v /= total;
        return discrete(std::move(xs), std::move(ws));
    }

    bool is_discrete() const { return std::holds_alternative<DiscreteDist>(v_); }
    const DiscreteDist& as_discrete() const { return std::get<DiscreteDist>(v_); }

    /// Right-continuous CDF F(x).
    double cdf(double x) const {
        return std::visit([&](const auto& d) { return cdf_impl(d, x); }, v_);
    }

    /// Left limit F^-(x) = lim_{y -> x^-} F(y).
    double cdf_left(double x) const {
        return std::visit([&](const auto& d) { return cdf_left_impl(d, x); }, v_);
    }

    double survival(double x) const {
        return std::visit([&](const auto& d) { return survival_impl(d, x); }, v_);
    }

    /// Generalized inverse min{x : F(x) >= p}, p in (0,1).
    double quantile(double p) const {
        check_level(p);
        return std::visit([&](const auto& d) { return quantile_impl(d, p); }, v_);
    }

    /// Quantile addressed by upper-tail mass q = 1-p; precise for tiny q.
    double upper_quantile(double q) const {
        return std::visit([&](const auto& d) { return upper_quantile_impl(d, q); }, v_);
    }

    /// VaR x_pi = min{z : F(z) >= pi}.
    double var(double pi) const { return quantile(pi); }

    /// Upper quantile boundary x_pi^+ = sup{x : F(x) <= pi}.
    double var_upper(double pi) const {
        check_level(pi);
        return std::visit([&](const auto& d) { return var_upper_impl(d, pi); }, v_);
    }

    /// CVaR c_pi; atom-exact for discrete measures, quantile-integral
    /// quadrature (abs tol 1e-8) otherwise.  Throws DivergentTail when the
    /// upper-tail mean does not exist.
    double cvar(double pi) const {
        check_level(pi);
        if (upper_tail_mean_divergent()) throw DivergentTail("cvar: upper tail mean diverges");
        if (const auto* d = std::get_if<DiscreteDist>(&v_)) {
            return discrete_cvar(*d, pi);
        }
        const double q0 = 1.0 - pi;
        const double integral =
            detail::integrate_upper_tail([&](double q) { return upper_quantile(q); }, q0, 1e-8);
        return integral / q0;
    }

    /// Mean; +inf when divergent (never an exception).
    double mean() const {
        return std::visit([&](const auto& d) { return mean_impl(d); }, v_);
    }

    /// Raw absolute moment E|X|^p, p > 1; +inf when divergent.
    double moment(double p) const {
        if (!(p > 1.0)) throw std::invalid_argument("moment: p must be > 1");
        return std::visit([&](const auto& d) { return moment_impl(d, p); }, v_);
    }

    double sample(Rng& rng) const {
        return std::visit([&](const auto& d) { return sample_impl(d, rng); }, v_);
    }

    std::vector<double> sample_n(Rng& rng, std::size_t n) const {
        std::vector<double> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(sample(rng));
        return out;
    }

  private:
    template <class T>
        requires(!std::is_same_v<std::decay_t<T>, Measure>)
    explicit Measure(T&& d) : v_(std::forward<T>(d)) {}

    static void check_level(double p) {
        if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("level must be in (0,1)");
    }

    // ---- Fisher-Tippett ----
    static bool ft_is_gumbel(const FisherTippett& d) {
        return std::abs(d.gamma) < detail::kGammaZeroTol;
    }

    static double cdf_impl(const FisherTippett& d, double x) {
        const double z = (x - d.mu) / d.sigma;
        if (ft_is_gumbel(d)) return std::exp(-std::exp(-z));
        const double a = 1.0 + d.gamma * z;
        if (a <= 0.0) return d.gamma > 0.0 ? 0.0 : 1.0;
        return std::exp(-std::pow(a, -1.0 / d.gamma));
    }
    static double cdf_left_impl(const FisherTippett& d, double x) { return cdf_impl(d, x); }
    static double survival_impl(const FisherTippett& d, double x) {
        const double z = (x - d.mu) / d.sigma;
        double t;
        if (ft_is_gumbel(d)) {
            t = std::exp(-z);
        } else {
            const double a = 1.0 + d.gamma * z;
            if (a <= 0.0) return d.gamma > 0.0 ? 1.0 : 0.0;
            t = std::pow(a, -1.0 / d.gamma);
        }
        return -std::expm1(-t);
    }
    static double quantile_impl(const FisherTippett& d, double p) {
        const double l = -std::log(p);
        if (ft_is_gumbel(d)) return d.mu - d.sigma * std::log(l);
        return d.mu + d.sigma * (std::pow(l, -d.gamma) - 1.0) / d.gamma;
    }
    static double upper_quantile_impl(const FisherTippett& d, double q) {
        const double l = -std::log1p(-q);  // -log(1-q)
        if (ft_is_gumbel(d)) return d.mu - d.sigma * std::log(l);
        return d.mu + d.sigma * (std::pow(l, -d.gamma) - 1.0) / d.gamma;
    }
    static double var_upper_impl(const FisherTippett& d, double pi) { return quantile_impl(d, pi); }
    static double mean_impl(const FisherTippett& d) {
        if (d.gamma >= 1.0) return kInf;
        if (ft_is_gumbel(d)) return d.mu + d.sigma * detail::kEulerMascheroni;
        return d.mu + d.sigma * (std::tgamma(1.0 - d.gamma) - 1.0) / d.gamma;
    }
    static double moment_impl(const FisherTippett& d, double p) {
        if (d.gamma > 0.0 && p * d.gamma >= 1.0) return kInf;
        return moment_by_quadrature([&](double u) { return quantile_impl(d, u); },
                                    [&](double q) { return upper_quantile_impl(d, q); }, p);
    }
    static double sample_impl(const FisherTippett& d, Rng& rng) {
        return quantile_impl(d, rng.uniform_open());
    }

    // ---- Pareto ----
    static double cdf_impl(const Pareto& d, double x) {
        const double z = (x - d.mu) / d.sigma;
        if (z <= 0.0) return 0.0;
        return -std::expm1(std::log1p(d.gamma * z) * (-1.0 / d.gamma));
    }
    static double cdf_left_impl(const Pareto& d, double x) { return cdf_impl(d, x); }
    static double survival_impl(const Pareto& d, double x) {
        const double z = (x - d.mu) / d.sigma;
        if (z <= 0.0) return 1.0;
        return std::pow(1.0 + d.gamma * z, -1.0 / d.gamma);
    }
    static double quantile_impl(const Pareto& d, double p) {
        return upper_quantile_impl(d, 1.0 - p);
    }
    static double upper_quantile_impl(const Pareto& d, double q) {
        return d.mu + d.sigma * (std::pow(q, -d.gamma) - 1.0) / d.gamma;
    }
    static double var_upper_impl(const Pareto& d, double pi) { return quantile_impl(d, pi); }
    static double mean_impl(const Pareto& d) {
        if (d.gamma >= 1.0) return kInf;
        return d.mu + d.sigma / (1.0 - d.gamma);
    }
    static double moment_impl(const Pareto& d, double p) {
        if (p * d.gamma >= 1.0) return kInf;
        return moment_by_quadrature([&](double u) { return quantile_impl(d, u); },
                                    [&](double q) { return upper_quantile_impl(d, q); }, p);
    }
    static double sample_impl(const Pareto& d, Rng& rng) {
        return upper_quantile_impl(d, rng.uniform_open());
    }

    // ---- Discrete ----
    static std::size_t upper_bound_idx(const std::vector<double>& xs, double x) {
        return static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
    }
    static double cdf_impl(const DiscreteDist& d, double x) {
        const std::size_t i = upper_bound_idx(d.xs, x);
        return i == 0 ? 0.0 : d.cumw[i - 1];
    }
    static double cdf_left_impl(const DiscreteDist& d, double x) {
        const std::size_t i = static_cast<std::size_t>(
            std::lower_bound(d.xs.begin(), d.xs.end(), x) - d.xs.begin());
        return i == 0 ? 0.0 : d.cumw[i - 1];
    }
    static double survival_impl(const DiscreteDist& d, double x) { return 1.0 - cdf_impl(d, x); }
    static double quantile_impl(const DiscreteDist& d, double p) {
        const std::size_t i = static_cast<std::size_t>(
            std::lower_bound(d.cumw.begin(), d.cumw.end(), p) - d.cumw.begin());
        return d.xs[std::min(i, d.xs.size() - 1)];
    }
    static double upper_quantile_impl(const DiscreteDist& d, double q) {
        return quantile_impl(d, 1.0 - q);
    }
    static double var_upper_impl(const DiscreteDist& d, double pi) {
        // first atom whose CDF strictly exceeds pi
        const std::size_t i = static_cast<std::size_t>(
            std::upper_bound(d.cumw.begin(), d.cumw.end(), pi) - d.cumw.begin());
        return d.xs[std::min(i, d.xs.size() - 1)];
    }
    static double discrete_cvar(const DiscreteDist& d, double pi) {
        const std::size_t i = static_cast<std::size_t>(
            std::lower_bound(d.cumw.begin(), d.cumw.end(), pi) - d.cumw.begin());
        const std::size_t k = std::min(i, d.xs.size() - 1);
        const double xpi = d.xs[k];
        double tail = 0.0;
        for (std::size_t j = d.xs.size(); j-- > k + 1;) tail += d.xs[j] * d.ws[j];
        return ((d.cumw[k] - pi) * xpi + tail) / (1.0 - pi);
    }
    static double mean_impl(const DiscreteDist& d) {
        double m = 0.0;
        for (std::size_t i = 0; i < d.xs.size(); ++i) m += d.xs[i] * d.ws[i];
        return m;
    }
    static double moment_impl(const DiscreteDist& d, double p) {
        double m = 0.0;
        for (std::size_t i = 0; i < d.xs.size(); ++i) m += std::pow(std::abs(d.xs[i]), p) * d.ws[i];
        return m;
    }
    static double sample_impl(const DiscreteDist& d, Rng& rng) {
        const double u = rng.uniform();
        const std::size_t i = static_cast<std::size_t>(
            std::upper_bound(d.cumw.begin(), d.cumw.end(), u) - d.cumw.begin());
        return d.xs[std::min(i, d.xs.size() - 1)];
    }

    // ---- Mixture ----
    static double cdf_impl(const MixtureDist& d, double x) {
        double f = 0.0;
        for (std::size_t i = 0; i < d.weights.size(); ++i) f += d.weights[i] * d.components[i]->cdf(x);
        return f;
    }
    static double cdf_left_impl(const MixtureDist& d, double x) {
        double f = 0.0;
        for (std::size_t i = 0; i < d.weights.size(); ++i)
            f += d.weights[i] * d.components[i]->cdf_left(x);
        return f;
    }
    static double survival_impl(const MixtureDist& d, double x) {
        double s = 0.0;
        for (std::size_t i = 0; i < d.weights.size(); ++i)
            s += d.weights[i] * d.components[i]->survival(x);
        return s;
    }
    static double quantile_impl(const MixtureDist& d, double p) {
        // min{x : F(x) >= p} by expanding-bracket bisection on the mixture CDF
        double lo = kInf, hi = -kInf;
        for (std::size_t i = 0; i < d.weights.size(); ++i) {
            lo = std::min(lo, d.components[i]->quantile(std::min(p, 0.999999999999)));
            hi = std::max(hi, d.components[i]->quantile(std::max(p, 1e-15)));
        }
        if (lo == hi) return lo;
        lo = std::nextafter(lo, -kInf);
        for (int it = 0; it < 200 && cdf_impl(d, hi) < p; ++it) hi += std::max(1.0, std::abs(hi));
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (cdf_impl(d, mid) >= p)
                hi = mid;
            else
                lo = mid;
        }
        return hi;
    }
    static double upper_quantile_impl(const MixtureDist& d, double q) {
        // inf{x : S(x) <= q} on the survival function for tail precision
        double lo = kInf, hi = -kInf;
        for (std::size_t i = 0; i < d.weights.size(); ++i) {
            lo = std::min(lo, d.components[i]->upper_quantile(std::min(1.0 - 1e-15, q)));
            hi = std::max(hi, d.components[i]->upper_quantile(std::max(q, 1e-300)));
        }
        if (lo == hi) return lo;
        lo = std::nextafter(lo, -kInf);
        for (int it = 0; it < 400 && survival_impl(d, hi) > q; ++it) hi += std::max(1.0, std::abs(hi));
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (survival_impl(d, mid) <= q)
                hi = mid;
            else
                lo = mid;
        }
        return hi;
    }
    static double var_upper_impl(const MixtureDist& d, double pi) {
        // sup{x : F(x) <= pi} = inf{x : F(x) > pi}
        double lo = quantile_impl(d, pi);
        double hi = lo + 1.0;
        for (int it = 0; it < 200 && cdf_impl(d, hi) <= pi; ++it) hi += std::max(1.0, std::abs(hi));
        if (cdf_impl(d, lo) > pi) return lo;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (cdf_impl(d, mid) > pi)
                hi = mid;
            else
                lo = mid;
        }
        return hi;
    }
    static double mean_impl(const MixtureDist& d) {
        double m = 0.0;
        for (std::size_t i = 0; i < d.weights.size(); ++i) {
            const double mi = d.components[i]->mean();
            if (std::isinf(mi)) return kInf;
            m += d.weights[i] * mi;
        }
        return m;
    }
    static double moment_impl(const MixtureDist& d, double p) {
        double m = 0.0;
        for (std::size_t i = 0; i < d.weights.size(); ++i) {
            const double mi = d.components[i]->moment(p);
            if (std::isinf(mi)) return kInf;
            m += d.weights[i] * mi;
        }
        return m;
    }
    static double sample_impl(const MixtureDist& d, Rng& rng) {
        const double u = rng.uniform();
        double c = 0.0;
        for (std::size_t i = 0; i < d.weights.size(); ++i) {
            c += d.weights[i];
            if (u < c || i + 1 == d.weights.size()) return d.components[i]->sample(rng);
        }
        return d.components.back()->sample(rng);
    }

    // ---- shared helpers ----
    bool upper_tail_mean_divergent() const {
        if (const auto* ft = std::get_if<FisherTippett>(&v_)) return ft->gamma >= 1.0;
        if (const auto* pa = std::get_if<Pareto>(&v_)) return pa->gamma >= 1.0;
        if (const auto* mx = std::get_if<MixtureDist>(&v_)) {
            for (const auto& c : mx->components)
                if (c->upper_tail_mean_divergent()) return true;
            return false;
        }
        return false;
    }

    template <class Q, class UQ>
    static double moment_by_quadrature(const Q& quantile_fn, const UQ& upper_quantile_fn, double p) {
        // E|X|^p = int_0^1 |Q(u)|^p du, split at 1/2 with exp-transformed tails
        auto upper = detail::integrate_upper_tail(
            [&](double q) { return std::pow(std::abs(upper_quantile_fn(q)), p); }, 0.5, 1e-9);
        auto lower = detail::integrate_upper_tail(
            [&](double q) { return std::pow(std::abs(quantile_fn(q)), p); }, 0.5, 1e-9);
        return upper + lower;
    }

    std::variant<FisherTippett, Pareto, MixtureDist, DiscreteDist> v_;
};

/// Summary of the risk functionals of one measure under a moment class.
struct RiskReport {
    double mean = 0.0;
    double var = 0.0;
    double cvar = 0.0;
    double moment_1pe = 0.0;
};

inline RiskReport risk_report(const Measure& m, const MomentClass& mc) {
    return RiskReport{m.mean(), m.var(mc.pi), m.cvar(mc.pi), m.moment(1.0 + mc.eps)};
}

/// Objective selecting which risk functional drives best-arm comparisons.
enum class Objective { Cvar, Var, MeanCvar };

struct ObjectiveSpec {
    Objective kind = Objective::Cvar;
    double alpha1 = 0.0;  // mean weight   (MeanCvar)
    double alpha2 = 1.0;  // cvar weight   (MeanCvar)

    static ObjectiveSpec cvar() { return {Objective::Cvar, 0.0, 1.0}; }
    static ObjectiveSpec var() { return {Objective::Var, 0.0, 0.0}; }
    static ObjectiveSpec mean_cvar(double a1, double a2) { return {Objective::MeanCvar, a1, a2}; }
};

inline double risk_value(const Measure& m, const ObjectiveSpec& obj, double pi) {
    switch (obj.kind) {
        case Objective::Cvar: return m.cvar(pi);
        case Objective::Var: return m.var(pi);
        case Objective::MeanCvar: return obj.alpha1 * m.mean() + obj.alpha2 * m.cvar(pi);
    }
    return 0.0;
}

/// N-point equal-probability quantile discretization (atoms at the midpoint
/// quantiles).  Duplicate quantile values merge.
inline Measure discretize(const Measure& m, std::size_t n) {
    std::vector<double> xs;
    xs.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        xs.push_back(m.quantile((static_cast<double>(k) + 0.5) / static_cast<double>(n)));
    }
    return Measure::from_samples(std::move(xs));
}

/// Incremental equal-weight empirical measure with exact-bit merge.
class Empirical {
  public:
    void push(double x) {
        auto it = std::lower_bound(xs_.begin(), xs_.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - xs_.begin());
        if (it != xs_.end() && *it == x) {
            counts_[i] += 1;
        } else {
            xs_.insert(it, x);
            counts_.insert(counts_.begin() + static_cast<std::ptrdiff_t>(i), 1);
        }
        ++n_;
    }

    long size() const { return n_; }
    bool empty() const { return n_ == 0; }
    const std::vector<double>& xs() const { return xs_; }
    const std::vector<long>& counts() const { return counts_; }

    std::vector<double> weights() const {
        std::vector<double> ws(counts_.size());
        for (std::size_t i = 0; i < counts_.size(); ++i)
            ws[i] = static_cast<double>(counts_[i]) / static_cast<double>(n_);
        return ws;
    }

    Measure as_measure() const {
        if (n_ == 0) throw std::invalid_argument("Empirical::as_measure: empty");
        return Measure::discrete(xs_, weights());
    }

  private:
    std::vector<double> xs_;
    std::vector<long> counts_;
    long n_ = 0;
};

/// Pure single-sample update of an n-sample equal-weight empirical measure.
inline Measure empirical_push(const Measure& emp, double x, long n) {
    if (n <= 0) return Measure::point_mass(x);
    const auto& d = emp.as_discrete();
    Empirical acc;
    for (std::size_t i = 0; i < d.xs.size(); ++i) {
        const long c = std::lround(d.ws[i] * static_cast<double>(n));
        for (long k = 0; k < c; ++k) acc.push(d.xs[i]);
    }
    acc.push(x);
    return acc.as_measure();
}

}  // namespace cvarbai
