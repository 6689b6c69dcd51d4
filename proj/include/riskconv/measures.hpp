#pragma once

#include "riskconv/random.hpp"
#include "riskconv/rational.hpp"
#include "riskconv/space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace riskconv {

// ---------------------------------------------------------------------------
// law-invariant functionals
// ---------------------------------------------------------------------------

/// VaR_alpha(X) = -quantile(X, alpha), alpha in (0,1).
template <class S> S var_alpha(const RandomVariable<S>& x, const S& alpha) {
    return -quantile(x, alpha);
}

/**
 * @brief Expected shortfall at level alpha in (0,1].
 *
 * ES_alpha(X) = -(1/alpha) int_0^alpha quantile(X,u) du.  The integrand is a
 * step function of u, so the integral is the exact weighted sum of the lowest
 * outcomes until mass alpha is used up; no sampling is involved and the
 * result is exact for rational scalars.  ES_1 is the negative mean.
 */
template <class S> S es_alpha(const RandomVariable<S>& x, const S& alpha) {
    if (!(alpha > S(0)) || alpha > S(1))
        throw std::invalid_argument("es_alpha: level must lie in (0,1]");
    const Distribution<S> d = distribution(x);
    S acc(0);
    S reached(0);
    for (std::size_t i = 0; i < d.values.size() && reached < alpha; ++i) {
        S next = reached + d.probs[i];
        if (next > alpha) next = alpha;
        acc += d.values[i] * (next - reached);
        reached = next;
    }
    return -acc / alpha;
}

/// rho(X) = E[-X], the linear risk measure.
template <class S> S neg_expectation(const RandomVariable<S>& x) { return -expectation(x); }

/**
 * @brief Entropic risk measure gamma * log E[exp(-X/gamma)], gamma > 0.
 *
 * Evaluated with the largest exponent subtracted, so wide outcome ranges and
 * small gamma cannot overflow.  Converges to E[-X] as gamma -> infinity and
 * to max(-X) as gamma -> 0.
 */
inline double entropic(const RandomVariable<double>& x, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("entropic: gamma must be positive");
    double m = -std::numeric_limits<double>::infinity();
    for (double v : x.values()) m = std::max(m, -v / gamma);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        acc += x.space()->probs()[i] * std::exp(-x.values()[i] / gamma - m);
    return gamma * (m + std::log(acc));
}

// ---------------------------------------------------------------------------
// numeraire
// ---------------------------------------------------------------------------

/**
 * @brief Unit of account used for capital injections.
 *
 * Either the constant 1 (usable on every space) or a fixed strictly positive
 * random variable on a concrete space.
 */
template <class S> class Numeraire {
  public:
    Numeraire() = default;

    explicit Numeraire(RandomVariable<S> s) : rv_(std::move(s)) {
        for (const S& v : rv_->values())
            if (!(v > S(0))) throw std::invalid_argument("Numeraire: values must be positive");
    }

    bool constant_one() const { return !rv_.has_value(); }

    /// Underlying space, or nullptr when the numeraire is the constant 1.
    SpacePtr<S> space() const { return rv_ ? rv_->space() : nullptr; }

    /// Materialize on a concrete space; a fixed numeraire refuses foreign spaces.
    RandomVariable<S> on(const SpacePtr<S>& sp) const {
        if (!rv_) return RandomVariable<S>::constant(sp, S(1));
        if (!same_space(rv_->space(), sp))
            throw std::invalid_argument("Numeraire: variable lives on a different space");
        return *rv_;
    }

    S min_on(const SpacePtr<S>& sp) const {
        const RandomVariable<S> s = on(sp);
        S m = s.values()[0];
        for (const S& v : s.values()) m = std::min(m, v);
        return m;
    }

  private:
    std::optional<RandomVariable<S>> rv_;
};

// ---------------------------------------------------------------------------
// type-erased measure
// ---------------------------------------------------------------------------

/// Structural properties a measure claims; check_flags tries to falsify them.
struct MeasureFlags {
    bool convex = false;
    bool monotone = false;
    /// additive against the measure's own numeraire: rho(X + m*S) = rho(X) - m
    bool cash_additive = false;
    bool law_invariant = false;
    /// rho(X) = rho(-X^-) for all X
    bool surplus_invariant = false;
    /// rho(X) = rho(-X^-) whenever rho(X) > 0
    bool surplus_invariant_positive = false;
};

class RiskMeasure {
  public:
    using Eval = std::function<double(const RandomVariable<double>&)>;

    RiskMeasure(std::string name, Eval eval, MeasureFlags flags,
                Numeraire<double> numeraire = {})
        : name_(std::move(name)), eval_(std::move(eval)), flags_(flags),
          numeraire_(std::move(numeraire)) {
        if (!eval_) throw std::invalid_argument("RiskMeasure: evaluator must be callable");
    }

    double operator()(const RandomVariable<double>& x) const { return eval_(x); }

    const std::string& name() const { return name_; }
    const MeasureFlags& flags() const { return flags_; }
    const Numeraire<double>& numeraire() const { return numeraire_; }

  private:
    std::string name_;
    Eval eval_;
    MeasureFlags flags_;
    Numeraire<double> numeraire_;
};

namespace detail {

inline std::string format_level(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

} // namespace detail

inline RiskMeasure make_var(double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw std::invalid_argument("make_var: level must lie in (0,1)");
    MeasureFlags f;
    f.monotone = f.cash_additive = f.law_invariant = true;
    return RiskMeasure("var:" + detail::format_level(alpha),
                       [alpha](const RandomVariable<double>& x) { return var_alpha(x, alpha); },
                       f);
}

inline RiskMeasure make_es(double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::invalid_argument("make_es: level must lie in (0,1]");
    MeasureFlags f;
    f.convex = f.monotone = f.cash_additive = f.law_invariant = true;
    return RiskMeasure("es:" + detail::format_level(alpha),
                       [alpha](const RandomVariable<double>& x) { return es_alpha(x, alpha); },
                       f);
}

inline RiskMeasure make_entropic(double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("make_entropic: gamma must be positive");
    MeasureFlags f;
    f.convex = f.monotone = f.cash_additive = f.law_invariant = true;
    return RiskMeasure("entropic:" + detail::format_level(gamma),
                       [gamma](const RandomVariable<double>& x) { return entropic(x, gamma); },
                       f);
}

inline RiskMeasure make_neg_expectation() {
    MeasureFlags f;
    f.convex = f.monotone = f.cash_additive = f.law_invariant = true;
    return RiskMeasure("neg_expectation",
                       [](const RandomVariable<double>& x) { return neg_expectation(x); }, f);
}

// ---------------------------------------------------------------------------
// solid sets and acceptance sets
// ---------------------------------------------------------------------------

/**
 * @brief Solid subset of the nonnegative orthant.
 *
 * Supported shapes: a budget set {Y >= 0 : E[w Y] <= c} with weight w >= 0
 * (a constant or a fixed nonnegative variable) and capacity c >= 0, and finite
 * intersections of such sets.  Both are convex and solid: 0 <= Y' <= Y with
 * Y in D implies Y' in D.
 */
template <class S> class SolidPositiveSet {
  public:
    static SolidPositiveSet budget(S weight, S capacity) {
        if (!(weight >= S(0)))
            throw std::invalid_argument("SolidPositiveSet: weight must be nonnegative");
        if (!(capacity >= S(0)))
            throw std::invalid_argument("SolidPositiveSet: capacity must be nonnegative");
        SolidPositiveSet d;
        d.weight_const_ = weight;
        d.capacity_ = capacity;
        return d;
    }

    static SolidPositiveSet budget(RandomVariable<S> weight, S capacity) {
        if (!(capacity >= S(0)))
            throw std::invalid_argument("SolidPositiveSet: capacity must be nonnegative");
        for (const S& v : weight.values())
            if (!(v >= S(0)))
                throw std::invalid_argument("SolidPositiveSet: weight must be nonnegative");
        SolidPositiveSet d;
        d.weight_rv_ = std::move(weight);
        d.capacity_ = capacity;
        return d;
    }

    static SolidPositiveSet intersection(std::vector<SolidPositiveSet> parts) {
        if (parts.empty())
            throw std::invalid_argument("SolidPositiveSet: intersection needs at least one part");
        if (parts.size() == 1) return std::move(parts.front());
        for (const SolidPositiveSet& p : parts)
            if (!p.is_budget())
                throw std::invalid_argument("SolidPositiveSet: intersection parts must be budgets");
        SolidPositiveSet d;
        d.parts_ = std::move(parts);
        return d;
    }

    bool is_budget() const { return parts_.empty(); }
    const std::vector<SolidPositiveSet>& parts() const { return parts_; }

    bool constant_weight() const { return is_budget() && !weight_rv_.has_value(); }
    const S& weight_constant() const { return weight_const_; }
    const S& capacity() const { return capacity_; }

    RandomVariable<S> weight_on(const SpacePtr<S>& sp) const {
        if (!is_budget()) throw std::invalid_argument("SolidPositiveSet: not a budget set");
        if (!weight_rv_) return RandomVariable<S>::constant(sp, weight_const_);
        if (!same_space(weight_rv_->space(), sp))
            throw std::invalid_argument("SolidPositiveSet: weight lives on a different space");
        return *weight_rv_;
    }

    /// Membership test; y must be nonnegative.
    bool contains(const RandomVariable<S>& y) const {
        for (const S& v : y.values())
            if (v < S(0))
                throw std::invalid_argument("SolidPositiveSet: membership is defined for Y >= 0");
        return contains_nonneg(y);
    }

    bool contains_nonneg(const RandomVariable<S>& y) const {
        if (!is_budget()) {
            for (const SolidPositiveSet& p : parts_)
                if (!p.contains_nonneg(y)) return false;
            return true;
        }
        const RandomVariable<S> w = weight_on(y.space());
        return expectation(w * y) <= capacity_;
    }

  private:
    SolidPositiveSet() = default;

    std::optional<RandomVariable<S>> weight_rv_;
    S weight_const_ = S(1);
    S capacity_ = S(0);
    std::vector<SolidPositiveSet> parts_;
};

/**
 * @brief Acceptance set of positions.
 *
 * The structured kind is A = {X : X^- in D} for a solid set D, i.e. a
 * position is acceptable exactly when its shortfall profile fits inside D;
 * such sets are monotone and, for the supported D, convex.  The predicate
 * kind wraps an arbitrary membership oracle together with caller-declared
 * structure.
 */
template <class S> class AcceptanceSet {
  public:
    using Member = std::function<bool(const RandomVariable<S>&)>;

    static AcceptanceSet shortfall_budget(SolidPositiveSet<S> d) {
        AcceptanceSet a;
        a.solid_ = std::move(d);
        a.monotone_ = true;
        a.convex_ = true;
        return a;
    }

    static AcceptanceSet from_predicate(Member member, bool monotone, bool convex) {
        if (!member) throw std::invalid_argument("AcceptanceSet: membership oracle is empty");
        AcceptanceSet a;
        a.member_ = std::move(member);
        a.monotone_ = monotone;
        a.convex_ = convex;
        return a;
    }

    bool solid_kind() const { return solid_.has_value(); }
    const SolidPositiveSet<S>& solid() const {
        if (!solid_) throw std::invalid_argument("AcceptanceSet: no solid-set structure");
        return *solid_;
    }

    bool monotone() const { return monotone_; }
    bool convex() const { return convex_; }

    bool contains(const RandomVariable<S>& x) const {
        if (solid_) return solid_->contains_nonneg(neg_part(x));
        return member_(x);
    }

  private:
    AcceptanceSet() = default;

    std::optional<SolidPositiveSet<S>> solid_;
    Member member_;
    bool monotone_ = false;
    bool convex_ = false;
};

namespace detail {

/**
 * Exact threshold for one budget constraint: smallest m with
 * E[w (X + m S)^-] <= c.  The charge is piecewise linear, convex and
 * nonincreasing in m with kinks at -x_i/s_i, so the crossing is solved on the
 * relevant segment in closed form; with rational scalars the result is exact.
 * A vacuous constraint (w = 0 on the support) accepts every m.
 */
template <class S>
std::optional<S> budget_threshold(const RandomVariable<S>& x, const RandomVariable<S>& s,
                                  const SolidPositiveSet<S>& d) {
    const RandomVariable<S> w = d.weight_on(x.space());
    const S& c = d.capacity();
    struct Term {
        S kink;
        S rate; // p_i w_i s_i, slope contribution below the kink
    };
    std::vector<Term> terms;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const S a = x.space()->probs()[i] * w.values()[i];
        if (a > S(0)) terms.push_back({-x.values()[i] / s.values()[i], a * s.values()[i]});
    }
    if (terms.empty()) return std::nullopt; // every m accepted
    std::sort(terms.begin(), terms.end(),
              [](const Term& a, const Term& b) { return a.kink > b.kink; });
    // walk down from the largest kink; g = 0 there
    S g(0);
    S at = terms.front().kink;
    S slope(0);
    std::size_t i = 0;
    while (i < terms.size()) {
        // absorb the group of equal kinks at `at`
        while (i < terms.size() && terms[i].kink == at) {
            slope += terms[i].rate;
            ++i;
        }
        const S next = i < terms.size() ? terms[i].kink : at;
        const S g_next = i < terms.size() ? S(g + slope * (at - next)) : g;
        if (i >= terms.size() || g_next > c) {
            // crossing lies in (next, at] or below the last kink
            return at - (c - g) / slope;
        }
        g = g_next;
        at = next;
    }
    return at; // unreachable; the loop always returns
}

} // namespace detail

/**
 * @brief Smallest m such that X + m S is acceptable.
 *
 * For the structured kind the threshold is computed exactly per budget
 * constraint and the maximum is taken over the intersection.  For predicate
 * kinds the function brackets and bisects the monotone membership boundary:
 * +infinity when no bracket is acceptable, a contract error when acceptance
 * holds arbitrarily far down (the induced measure would be unbounded below)
 * or when the oracle is visibly non-monotone.
 */
template <class S>
S acceptance_threshold(const AcceptanceSet<S>& a, const RandomVariable<S>& x,
                       const Numeraire<S>& numeraire = {}, double tol = 1e-9) {
    const RandomVariable<S> s = numeraire.on(x.space());
    if (a.solid_kind()) {
        const SolidPositiveSet<S>& d = a.solid();
        const std::vector<SolidPositiveSet<S>> single{d};
        const std::vector<SolidPositiveSet<S>>& parts = d.is_budget() ? single : d.parts();
        std::optional<S> best;
        for (const SolidPositiveSet<S>& part : parts) {
            std::optional<S> m = detail::budget_threshold(x, s, part);
            if (m && (!best || *m > *best)) best = m;
        }
        if (!best)
            throw std::domain_error(
                "acceptance_threshold: every position is acceptable, measure unbounded below");
        return *best;
    }

    // predicate kind: bracket, then bisect the boundary of {m : accepted}
    const double span = to_double(max_abs(x)) / to_double(numeraire.min_on(x.space())) + 1.0;
    S lo = scalar_traits<S>::from_double(-span);
    S hi = scalar_traits<S>::from_double(span);
    const auto accepted = [&](const S& m) { return a.contains(x + m * s); };
    int expand = 0;
    while (!accepted(hi)) {
        if (++expand > 60) return scalar_traits<S>::infinity();
        S width = hi - lo;
        lo = hi;
        hi = hi + width * S(2);
    }
    expand = 0;
    while (accepted(lo)) {
        if (!a.monotone() && !accepted(hi))
            throw std::domain_error("acceptance_threshold: membership is not monotone in m");
        if (++expand > 60)
            throw std::domain_error(
                "acceptance_threshold: acceptance persists arbitrarily far down, "
                "measure unbounded below");
        S width = hi - lo;
        hi = lo;
        lo = lo - width * S(2);
    }
    while (to_double(S(hi - lo)) > tol * (1.0 + std::abs(to_double(hi)))) {
        const S mid = (lo + hi) / S(2);
        if (accepted(mid))
            hi = mid;
        else {
            if (!a.monotone() && !accepted(hi))
                throw std::domain_error("acceptance_threshold: membership is not monotone in m");
            lo = mid;
        }
    }
    return hi;
}

/**
 * @brief Risk measure induced by an acceptance set: rho(X) = inf{m : X + mS in A}.
 *
 * Cash additivity against S holds by construction.  Law invariance is claimed
 * only for structured sets built from constant-weight budgets under the
 * constant numeraire, where membership depends on the law alone.  Structured
 * sets ignore surplus, so the measure is surplus-invariant subject to
 * positivity.
 */
inline RiskMeasure from_acceptance(AcceptanceSet<double> a, Numeraire<double> numeraire = {},
                                   double tol = 1e-9, std::string name = "acceptance") {
    MeasureFlags f;
    f.monotone = a.monotone();
    f.convex = a.convex();
    f.cash_additive = true;
    if (a.solid_kind()) {
        f.surplus_invariant_positive = true;
        if (numeraire.constant_one()) {
            const SolidPositiveSet<double>& d = a.solid();
            bool const_weights = d.is_budget()
                                     ? d.constant_weight()
                                     : std::all_of(d.parts().begin(), d.parts().end(),
                                                   [](const SolidPositiveSet<double>& p) {
                                                       return p.constant_weight();
                                                   });
            f.law_invariant = const_weights;
        }
    }
    auto eval = [a = std::move(a), numeraire, tol](const RandomVariable<double>& x) {
        return acceptance_threshold(a, x, numeraire, tol);
    };
    return RiskMeasure(std::move(name), std::move(eval), f, std::move(numeraire));
}

/**
 * @brief rho_tilde(X) = rho(-X^-): charge only the shortfall, discard surplus.
 *
 * Monotonicity and law invariance carry over; convexity carries over when rho
 * is also monotone (a nonincreasing convex functional of a concave map);
 * cash additivity is lost.
 */
inline RiskMeasure surplus_transform(const RiskMeasure& rho) {
    MeasureFlags f;
    f.monotone = rho.flags().monotone;
    f.convex = rho.flags().convex && rho.flags().monotone;
    f.law_invariant = rho.flags().law_invariant;
    f.surplus_invariant = true;
    f.surplus_invariant_positive = true;
    auto eval = [rho](const RandomVariable<double>& x) { return rho(-neg_part(x)); };
    return RiskMeasure("surplus(" + rho.name() + ")", std::move(eval), f);
}

// ---------------------------------------------------------------------------
// randomized flag falsification
// ---------------------------------------------------------------------------

struct FlagCheck {
    std::string property;
    std::size_t trials = 0;
    std::size_t violations = 0;
    double max_violation = 0.0;
};

struct FlagReport {
    std::vector<FlagCheck> checks;

    bool all_ok() const {
        return std::all_of(checks.begin(), checks.end(),
                           [](const FlagCheck& c) { return c.violations == 0; });
    }
};

/**
 * @brief Try to falsify every flag the measure claims.
 *
 * Each declared property gets `trials` randomized instances; a violation
 * beyond tol is counted and the worst gap reported.  Properties the measure
 * does not claim are skipped.  Nonfinite evaluations count as violations
 * unless both sides agree.
 */
inline FlagReport check_flags(const RiskMeasure& rho, std::size_t trials, std::uint64_t seed,
                              double tol = 1e-7) {
    Rng rng(seed);
    FlagReport report;

    const auto record = [&](FlagCheck& c, double gap) {
        ++c.trials;
        if (std::isnan(gap)) gap = std::numeric_limits<double>::infinity();
        if (gap > tol) {
            ++c.violations;
            c.max_violation = std::max(c.max_violation, gap);
        }
    };
    // gap for an equality |l - r|; infinities agree only with themselves
    const auto eq_gap = [](double l, double r) {
        if (std::isfinite(l) && std::isfinite(r)) return std::abs(l - r);
        return l == r ? 0.0 : std::numeric_limits<double>::infinity();
    };
    // gap for l <= r
    const auto le_gap = [](double l, double r) {
        if (std::isfinite(l) && std::isfinite(r)) return l - r;
        return l <= r ? 0.0 : std::numeric_limits<double>::infinity();
    };

    const SpacePtr<double> fixed = rho.numeraire().space(); // nullptr for constant 1
    const auto fresh_space = [&]() {
        if (fixed) return fixed;
        return random_space(rng, 2 + rng.index(9), rng.coin());
    };

    const MeasureFlags& f = rho.flags();

    if (f.law_invariant) {
        FlagCheck c{"law_invariant"};
        for (std::size_t t = 0; t < trials; ++t) {
            const auto sp = fixed ? fixed : uniform_space<double>(2 + rng.index(9));
            const auto x = random_variable(rng, sp);
            // on a uniform space any permutation preserves the law
            if (sp->uniform()) {
                const auto y = random_rearrangement(rng, x);
                record(c, eq_gap(rho(x), rho(y)));
            } else {
                record(c, 0.0);
            }
        }
        report.checks.push_back(std::move(c));
    }

    if (f.cash_additive) {
        FlagCheck c{"cash_additive"};
        for (std::size_t t = 0; t < trials; ++t) {
            const auto sp = fresh_space();
            const auto x = random_variable(rng, sp);
            const auto s = rho.numeraire().on(sp);
            const double m = rng.uniform(-3.0, 3.0);
            record(c, eq_gap(rho(x + m * s), rho(x) - m));
        }
        report.checks.push_back(std::move(c));
    }

    if (f.convex) {
        FlagCheck c{"convex"};
        for (std::size_t t = 0; t < trials; ++t) {
            const auto sp = fresh_space();
            const auto x = random_variable(rng, sp);
            const auto y = random_variable(rng, sp);
            const double lam = rng.uniform(0.05, 0.95);
            const auto z = lam * x + (1.0 - lam) * y;
            record(c, le_gap(rho(z), lam * rho(x) + (1.0 - lam) * rho(y)));
        }
        report.checks.push_back(std::move(c));
    }

    if (f.monotone) {
        FlagCheck c{"monotone"};
        for (std::size_t t = 0; t < trials; ++t) {
            const auto sp = fresh_space();
            const auto x = random_variable(rng, sp);
            std::vector<double> bump(sp->size());
            for (double& b : bump) b = rng.uniform(0.0, 2.0);
            const auto y = x + RandomVariable<double>(sp, std::move(bump));
            record(c, le_gap(rho(y), rho(x)));
        }
        report.checks.push_back(std::move(c));
    }

    if (f.surplus_invariant || f.surplus_invariant_positive) {
        FlagCheck c{f.surplus_invariant ? "surplus_invariant" : "surplus_invariant_positive"};
        for (std::size_t t = 0; t < trials; ++t) {
            const auto sp = fresh_space();
            const auto x = random_variable(rng, sp);
            const double v = rho(x);
            if (!f.surplus_invariant && !(v > tol)) {
                ++c.trials; // positivity premise not met; nothing to test
                continue;
            }
            record(c, eq_gap(v, rho(-neg_part(x))));
        }
        report.checks.push_back(std::move(c));
    }

    return report;
}

} // namespace riskconv
