#pragma once

#include "riskconv/space.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace riskconv {

/**
 * @brief Young function for Orlicz norms: convex, nondecreasing on [0,inf),
 * phi(0) = 0, not identically zero.  May return +inf (finite values are
 * required only near 0).  The conjugate, when supplied, enables the Amemiya
 * route to the associate norm.
 */
struct OrliczFunction {
    std::function<double(double)> phi;
    std::optional<std::function<double(double)>> conjugate;
    std::string name;

    /// phi(t) = e^t - 1, conjugate psi(s) = s log s - s + 1 for s >= 1, else 0.
    static OrliczFunction exp_minus_one() {
        OrliczFunction f;
        f.phi = [](double t) { return t > 700.0 ? std::numeric_limits<double>::infinity()
                                                : std::expm1(t); };
        f.conjugate = [](double s) {
            return s <= 1.0 ? 0.0 : s * std::log(s) - s + 1.0;
        };
        f.name = "orlicz_exp";
        return f;
    }

    /// phi(t) = t^2, conjugate psi(s) = s^2/4.  Its Luxemburg norm equals L2.
    static OrliczFunction square() {
        OrliczFunction f;
        f.phi = [](double t) { return t * t; };
        f.conjugate = [](double s) { return 0.25 * s * s; };
        f.name = "orlicz_square";
        return f;
    }
};

/**
 * @brief Rearrangement-invariant norm on random variables over a finite
 * space: either L^p for p in [1, inf] or the Luxemburg norm of an Orlicz
 * function.
 *
 * Evaluation reads only the law of |X|, so variables with the same
 * distribution get identical values by construction.
 */
class RiNorm {
  public:
    static RiNorm lp(double p) {
        if (!(p >= 1.0)) throw std::invalid_argument("RiNorm::lp: p must be >= 1");
        RiNorm n;
        n.p_ = p;
        return n;
    }

    static RiNorm linf() { return lp(std::numeric_limits<double>::infinity()); }

    static RiNorm orlicz(OrliczFunction f, double tol = 1e-10) {
        if (!f.phi) throw std::invalid_argument("RiNorm::orlicz: missing phi");
        RiNorm n;
        n.orlicz_ = std::move(f);
        n.tol_ = tol;
        return n;
    }

    bool is_orlicz() const { return orlicz_.has_value(); }
    bool is_lp() const { return !orlicz_.has_value(); }
    double p() const { return p_; }
    double tolerance() const { return tol_; }
    const OrliczFunction& orlicz_function() const { return *orlicz_; }

    std::string name() const {
        if (is_orlicz()) return orlicz_->name;
        if (std::isinf(p_)) return "linf";
        return "l" + std::to_string(p_);
    }

    double operator()(const RandomVariable<double>& x) const {
        return law_norm(distribution(x));
    }

    /// Norm of a variable given only its law (values may repeat; probs > 0).
    double law_norm(const Distribution<double>& d) const {
        if (is_orlicz()) return luxemburg(d);
        if (std::isinf(p_)) {
            double best = 0.0;
            for (double v : d.values) best = std::max(best, std::fabs(v));
            return best;
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < d.values.size(); ++i)
            acc += d.probs[i] * std::pow(std::fabs(d.values[i]), p_);
        return std::pow(acc, 1.0 / p_);
    }

  private:
    RiNorm() = default;

    // inf{ lambda > 0 : E[phi(|X|/lambda)] <= 1 }, bisected on the monotone
    // acceptance predicate to relative tolerance tol_.
    double luxemburg(const Distribution<double>& d) const {
        double top = 0.0;
        for (double v : d.values) top = std::max(top, std::fabs(v));
        if (top == 0.0) return 0.0;
        const auto& phi = orlicz_->phi;
        auto accepted = [&](double lambda) {
            double acc = 0.0;
            for (std::size_t i = 0; i < d.values.size(); ++i) {
                acc += d.probs[i] * phi(std::fabs(d.values[i]) / lambda);
                if (!(acc <= 1.0)) return false; // also catches inf and nan
            }
            return true;
        };
        double hi = top;
        for (int i = 0; i < 2000 && !accepted(hi); ++i) hi *= 2.0;
        if (!accepted(hi))
            throw std::domain_error("luxemburg: no accepted scale; phi not a Young function");
        double lo = hi;
        int halvings = 0;
        while (accepted(lo * 0.5) && halvings++ < 400) lo *= 0.5;
        if (halvings >= 400)
            throw std::domain_error("luxemburg: phi stays below 1; not a Young function");
        lo *= 0.5;
        while (hi - lo > tol_ * hi) {
            const double mid = 0.5 * (lo + hi);
            (accepted(mid) ? hi : lo) = mid;
        }
        return hi;
    }

    double p_ = 2.0;
    std::optional<OrliczFunction> orlicz_;
    double tol_ = 1e-10;
};

namespace detail {

// Golden-section minimization of a quasiconvex function on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo, double hi,
                         int iters = 160) {
    const double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iters && b - a > 1e-14 * (1.0 + std::fabs(a)); ++i) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

inline Distribution<double> abs_law(const RandomVariable<double>& y) {
    return distribution(y.map([](const double& v) { return std::fabs(v); }));
}

} // namespace detail

/**
 * @brief Associate norm ||Y||_* = sup{ E[XY] : ||X|| <= 1 }.
 *
 * L^p routes through the conjugate exponent q = p/(p-1); an Orlicz
 * Luxemburg norm routes through the Amemiya formula
 * inf_{k>0} (1 + E[psi(k|Y|)])/k with psi the conjugate Young function,
 * minimized to relative accuracy 1e-8.
 */
inline double associate_norm(const RiNorm& n, const RandomVariable<double>& y) {
    if (n.is_lp()) {
        const double p = n.p();
        double q;
        if (std::isinf(p)) q = 1.0;
        else if (p == 1.0) q = std::numeric_limits<double>::infinity();
        else q = p / (p - 1.0);
        return RiNorm::lp(q)(y);
    }
    const auto& f = n.orlicz_function();
    if (!f.conjugate)
        throw std::invalid_argument("associate_norm: Orlicz conjugate not supplied");
    const auto& psi = *f.conjugate;
    const Distribution<double> d = detail::abs_law(y);
    double top = 0.0;
    for (double v : d.values) top = std::max(top, v);
    if (top == 0.0) return 0.0;
    auto amemiya = [&](double log_k) {
        const double k = std::exp(log_k);
        double acc = 1.0;
        for (std::size_t i = 0; i < d.values.size(); ++i)
            acc += d.probs[i] * psi(k * d.values[i]);
        return acc / k;
    };
    // (1 + E[psi(k|Y|)])/k is quasiconvex in k; scan a wide log grid for a
    // bracket, then golden-section.
    double best_log = 0.0, best = std::numeric_limits<double>::infinity();
    for (double lk = std::log(1e-9 / top); lk <= std::log(1e12 / top); lk += 0.5) {
        const double v = amemiya(lk);
        if (v < best) { best = v; best_log = lk; }
    }
    const double refined = detail::golden_min(amemiya, best_log - 1.0, best_log + 1.0, 200);
    return std::min(best, amemiya(refined));
}

/**
 * @brief Independent evaluation of the associate norm by searching the unit
 * ball directly.
 *
 * The supremum in sup{ E[XY] : ||X|| <= 1 } is attained at an X of the form
 * sign(Y) * G(|Y|) with G nondecreasing and nonnegative (similarly ordered
 * to Y), so the search runs over one-parameter families of that shape:
 * upper-level indicators 1_{|Y| >= u}, powers |Y|^s, and, when a conjugate
 * is available, derivative profiles psi'(k|Y|); a cyclic ascent over the
 * indicator cone then polishes the best candidate.  Used as the cross-check
 * for the formula/Amemiya route.
 */
inline double associate_norm_ball_search(const RiNorm& n, const RandomVariable<double>& y) {
    const Distribution<double> d = detail::abs_law(y);
    const std::size_t m = d.values.size();
    double top = d.values.back();
    if (top == 0.0) return 0.0;

    // E[X Y] with X = sign(Y) G(|Y|), G given per distinct |Y| level, over
    // the law of |Y|: sum_j G_j * v_j * mass_j.
    auto rate = [&](const std::vector<double>& g) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += g[j] * d.values[j] * d.probs[j];
        return acc;
    };
    auto gnorm = [&](const std::vector<double>& g) {
        Distribution<double> law;
        law.values = g;
        law.probs = d.probs;
        return n.law_norm(law);
    };
    auto ratio = [&](const std::vector<double>& g) {
        const double nn = gnorm(g);
        return nn > 0.0 ? rate(g) / nn : 0.0;
    };

    double best = 0.0;
    std::vector<double> best_g;

    auto consider = [&](const std::vector<double>& g) {
        const double r = ratio(g);
        if (r > best) { best = r; best_g = g; }
    };

    // upper-level indicators
    for (std::size_t j = 0; j < m; ++j) {
        if (d.values[j] == 0.0 && j + 1 < m) continue;
        std::vector<double> g(m, 0.0);
        for (std::size_t i = j; i < m; ++i) g[i] = 1.0;
        consider(g);
    }
    // power profiles |Y|^s, s on a log-ish grid including 0 (constant sign(Y))
    for (double s : {0.0, 0.125, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0,
                     13.0, 21.0, 34.0}) {
        std::vector<double> g(m);
        for (std::size_t j = 0; j < m; ++j) g[j] = std::pow(d.values[j] / top, s);
        consider(g);
    }
    if (n.is_lp() && n.p() > 1.0 && !std::isinf(n.p())) {
        const double s = n.p() / (n.p() - 1.0) - 1.0; // q - 1, the exact profile
        std::vector<double> g(m);
        for (std::size_t j = 0; j < m; ++j) g[j] = std::pow(d.values[j] / top, s);
        consider(g);
    }
    // conjugate derivative profiles psi'(k |Y|)
    if (n.is_orlicz() && n.orlicz_function().conjugate) {
        const auto& psi = *n.orlicz_function().conjugate;
        auto dpsi = [&](double s) {
            const double h = 1e-6 * std::max(1.0, s);
            return (psi(s + h) - psi(s - h)) / (2.0 * h);
        };
        auto value_at = [&](double log_k) {
            const double k = std::exp(log_k);
            std::vector<double> g(m);
            for (std::size_t j = 0; j < m; ++j) g[j] = dpsi(k * d.values[j]);
            return -ratio(g);
        };
        double best_lk = 0.0, best_v = 0.0;
        for (double lk = std::log(1e-6 / top); lk <= std::log(1e9 / top); lk += 0.25) {
            const double v = value_at(lk);
            if (v < best_v) { best_v = v; best_lk = lk; }
        }
        const double lk = detail::golden_min(value_at, best_lk - 0.5, best_lk + 0.5, 200);
        const double k = std::exp(lk);
        std::vector<double> g(m);
        for (std::size_t j = 0; j < m; ++j) g[j] = dpsi(k * d.values[j]);
        consider(g);
    }

    // cyclic ascent over nondecreasing profiles written as sums of
    // upper-level indicators; each coordinate line is a quasiconcave ratio.
    if (!best_g.empty()) {
        std::vector<double> c(m, 0.0);
        c[0] = best_g[0];
        for (std::size_t j = 1; j < m; ++j) c[j] = std::max(0.0, best_g[j] - best_g[j - 1]);
        auto assemble = [&](const std::vector<double>& cc) {
            std::vector<double> g(m);
            double run = 0.0;
            for (std::size_t j = 0; j < m; ++j) { run += cc[j]; g[j] = run; }
            return g;
        };
        for (int sweep = 0; sweep < 60; ++sweep) {
            const double before = best;
            for (std::size_t j = 0; j < m; ++j) {
                auto obj = [&](double cj) {
                    std::vector<double> cc(c);
                    cc[j] = cj;
                    return -ratio(assemble(cc));
                };
                const double span = std::max(1.0, 4.0 * c[j]);
                c[j] = detail::golden_min(obj, 0.0, span, 120);
            }
            consider(assemble(c));
            if (best - before <= 1e-12 * (1.0 + best)) break;
        }
    }
    return best;
}

/// Norm of the indicator of an event with the given probability; evaluated
/// on a two-point law, which is equivalent to any concrete event of the same
/// mass by rearrangement invariance.
inline double indicator_norm(const RiNorm& n, double t) {
    if (!(t > 0.0) || t > 1.0)
        throw std::invalid_argument("indicator_norm: t must lie in (0,1]");
    Distribution<double> law;
    if (t == 1.0) {
        law.values = {1.0};
        law.probs = {1.0};
    } else {
        law.values = {0.0, 1.0};
        law.probs = {1.0 - t, t};
    }
    return n.law_norm(law);
}

inline RandomVariable<double> indicator_variable(double t) {
    if (t == 1.0) return RandomVariable<double>(uniform_space<double>(1), {1.0});
    auto sp = make_space<double>({t, 1.0 - t});
    return RandomVariable<double>(sp, {1.0, 0.0});
}

struct FundamentalValue {
    double value;      // ||1_E|| at the achieved mass
    double achieved_t; // k/resolution, nearest representable to the request
    bool exact;        // achieved_t == requested t
};

/**
 * phi(t) = ||1_E|| for P(E) = t, evaluated on a uniform space with the given
 * resolution.  A request not of the form k/resolution is rounded to the
 * nearest representable mass (at least one atom) and reported as inexact.
 */
inline FundamentalValue fundamental_function(const RiNorm& n, double t,
                                             std::size_t resolution = 4096) {
    if (!(t > 0.0) || t > 1.0)
        throw std::invalid_argument("fundamental_function: t must lie in (0,1]");
    const double scaled = t * static_cast<double>(resolution);
    std::size_t k = static_cast<std::size_t>(std::llround(scaled));
    k = std::max<std::size_t>(1, std::min(k, resolution));
    const double achieved = static_cast<double>(k) / static_cast<double>(resolution);
    return {indicator_norm(n, achieved), achieved, achieved == t};
}

struct PropertyStarReport {
    std::vector<std::pair<double, double>> samples; // (t, ||1_A||_*)
    double loglog_slope = 0.0;
    bool holds = false;
};

/**
 * @brief Probes whether the associate fundamental function vanishes at 0,
 * i.e. ||1_A||_* -> 0 as P(A) -> 0.
 *
 * Samples ||1_A||_* on the decreasing mass grid and fits the endpoint
 * log-log slope; verdict "holds" requires a strictly positive decay exponent
 * (slope >= 0.05).  For L^p the sampled values are t^{1/q}, so the verdict
 * is "holds" exactly when p > 1, and L^1 reports the constant value 1.
 */
inline PropertyStarReport property_star_probe(const RiNorm& n,
                                              const std::vector<double>& grid) {
    if (grid.size() < 2)
        throw std::invalid_argument("property_star_probe: need at least two grid points");
    PropertyStarReport rep;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double t = grid[i];
        if (!(t > 0.0) || !(t < 1.0) || (i > 0 && t >= grid[i - 1]))
            throw std::invalid_argument("property_star_probe: grid must decrease in (0,1)");
        rep.samples.emplace_back(t, associate_norm(n, indicator_variable(t)));
    }
    const auto& first = rep.samples.front();
    const auto& last = rep.samples.back();
    rep.loglog_slope = std::log(last.second / first.second) /
                       std::log(last.first / first.first);
    rep.holds = rep.loglog_slope >= 0.05;
    return rep;
}

struct ContractionReport {
    bool ok;
    double lhs; // ||E[X|pi]||
    double rhs; // ||X||
};

/// Checks ||E[X|pi]|| <= ||X|| + 1e-9 for the given norm.
inline ContractionReport verify_contraction(const RiNorm& n, const RandomVariable<double>& x,
                                            const Partition& pi) {
    const double lhs = n(cond_expect(x, pi));
    const double rhs = n(x);
    return {lhs <= rhs + 1e-9, lhs, rhs};
}

} // namespace riskconv
