#pragma once

#include "riskconv/measures.hpp"
#include "riskconv/space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace riskconv {

// ---------------------------------------------------------------------------
// comonotone allocations
// ---------------------------------------------------------------------------

/**
 * @brief Piecewise-linear split of the identity among d agents.
 *
 * Stored as agent values on a common strictly increasing knot grid that
 * contains 0 and the support of the shared position.  A valid allocation has
 * every f_i nondecreasing with slopes in [0,1], sum equal to the identity at
 * every knot, and f_i(0) = 0; validity is checked, not assumed.
 */
template <class S> class Allocation {
  public:
    Allocation(std::vector<S> knots, std::vector<std::vector<S>> values)
        : knots_(std::move(knots)), values_(std::move(values)) {
        if (knots_.empty()) throw std::invalid_argument("Allocation: needs at least one knot");
        for (const auto& row : values_)
            if (row.size() != knots_.size())
                throw std::invalid_argument("Allocation: value row does not match knots");
        if (values_.empty()) throw std::invalid_argument("Allocation: needs at least one agent");
    }

    /// Anchored reconstruction from per-segment increments; delta[k][i] is
    /// agent i's share of the gap knots[k+1]-knots[k].
    static Allocation from_increments(std::vector<S> knots, std::size_t zero_index,
                                      const std::vector<std::vector<S>>& delta,
                                      std::size_t agents) {
        const std::size_t n = knots.size();
        if (zero_index >= n || knots[zero_index] != S(0))
            throw std::invalid_argument("Allocation: zero knot missing");
        if (delta.size() + 1 != n)
            throw std::invalid_argument("Allocation: increment rows must match segments");
        std::vector<std::vector<S>> values(agents, std::vector<S>(n, S(0)));
        for (std::size_t i = 0; i < agents; ++i) {
            for (std::size_t k = zero_index; k + 1 < n; ++k)
                values[i][k + 1] = values[i][k] + delta[k][i];
            for (std::size_t k = zero_index; k > 0; --k)
                values[i][k - 1] = values[i][k] - delta[k - 1][i];
        }
        return Allocation(std::move(knots), std::move(values));
    }

    static Allocation identity(std::vector<S> knots) {
        std::vector<std::vector<S>> values(1, knots);
        return Allocation(std::move(knots), std::move(values));
    }

    std::size_t agents() const { return values_.size(); }
    std::size_t knot_count() const { return knots_.size(); }
    const std::vector<S>& knots() const { return knots_; }
    const std::vector<std::vector<S>>& values() const { return values_; }

    /// f_i(t), linear between knots, extended with the boundary slopes.
    S evaluate(std::size_t agent, const S& t) const {
        const std::vector<S>& v = values_[agent];
        if (knots_.size() == 1) return v[0];
        std::size_t k;
        if (t <= knots_.front())
            k = 0;
        else if (t >= knots_.back())
            k = knots_.size() - 2;
        else {
            k = static_cast<std::size_t>(
                    std::upper_bound(knots_.begin(), knots_.end(), t) - knots_.begin()) -
                1;
        }
        const S w = (t - knots_[k]) / (knots_[k + 1] - knots_[k]);
        return v[k] + w * (v[k + 1] - v[k]);
    }

    RandomVariable<S> apply(std::size_t agent, const RandomVariable<S>& x) const {
        return x.map([&](const S& t) { return evaluate(agent, t); });
    }

    /**
     * Named invariant violations beyond tol, empty when valid.  tol = 0 gives
     * the exact check used in rational mode.
     */
    std::vector<std::string> violations(double tol) const {
        std::vector<std::string> out;
        for (std::size_t k = 0; k + 1 < knots_.size(); ++k)
            if (!(knots_[k] < knots_[k + 1])) {
                out.push_back("knots_increasing");
                break;
            }
        bool anchored = false;
        for (std::size_t k = 0; k < knots_.size(); ++k) {
            if (knots_[k] != S(0)) continue;
            anchored = true;
            for (const auto& row : values_)
                if (to_double(scalar_traits<S>::abs(row[k])) > tol) {
                    out.push_back("zero_anchor");
                    k = knots_.size();
                    break;
                }
        }
        if (!anchored) out.push_back("zero_knot_missing");
        bool monotone = true, lipschitz = true;
        for (const auto& row : values_) {
            for (std::size_t k = 0; k + 1 < knots_.size(); ++k) {
                const S gap = knots_[k + 1] - knots_[k];
                const S step = row[k + 1] - row[k];
                if (to_double(step) < -tol) monotone = false;
                if (to_double(S(step - gap)) > tol) lipschitz = false;
            }
        }
        if (!monotone) out.push_back("monotone");
        if (!lipschitz) out.push_back("lipschitz");
        for (std::size_t k = 0; k < knots_.size(); ++k) {
            S sum(0);
            for (const auto& row : values_) sum += row[k];
            if (to_double(scalar_traits<S>::abs(S(sum - knots_[k]))) > tol) {
                out.push_back("sum_to_identity");
                break;
            }
        }
        return out;
    }

  private:
    std::vector<S> knots_;
    std::vector<std::vector<S>> values_; ///< values_[agent][knot]
};

/**
 * Rational allocation with the invariants restored exactly: increments are
 * clipped to be nonnegative and rescaled per segment so each segment's total
 * equals the knot gap; a degenerate segment falls back to the equal split.
 */
inline Allocation<Rational> snap_allocation(const Allocation<double>& a,
                                            const std::vector<Rational>& knots) {
    if (knots.size() != a.knot_count())
        throw std::invalid_argument("snap_allocation: knot count mismatch");
    std::size_t zero_index = knots.size();
    for (std::size_t k = 0; k < knots.size(); ++k)
        if (knots[k] == 0) zero_index = k;
    if (zero_index == knots.size())
        throw std::invalid_argument("snap_allocation: zero knot missing");
    const std::size_t d = a.agents();
    std::vector<std::vector<Rational>> delta(knots.size() - 1, std::vector<Rational>(d));
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        const Rational gap = knots[k + 1] - knots[k];
        Rational total(0);
        for (std::size_t i = 0; i < d; ++i) {
            const double raw = a.values()[i][k + 1] - a.values()[i][k];
            delta[k][i] = raw > 0.0 ? Rational(raw) : Rational(0);
            total += delta[k][i];
        }
        if (total == 0) {
            for (std::size_t i = 0; i < d; ++i) delta[k][i] = gap / Rational(long(d));
        } else {
            for (std::size_t i = 0; i < d; ++i) delta[k][i] = delta[k][i] * gap / total;
        }
    }
    return Allocation<Rational>::from_increments(knots, zero_index, delta, d);
}

// ---------------------------------------------------------------------------
// solver
// ---------------------------------------------------------------------------

struct InfConvOpts {
    std::size_t iterations = 3000;   ///< projected subgradient steps
    double step_scale = 0.0;         ///< c in the step c/sqrt(t); 0 picks 0.2*max gap
    std::size_t polish_rounds = 40;  ///< cap on pairwise exact line-search sweeps
    double tol = 1e-3;               ///< convergence: subgradient best vs polished value
    std::size_t fold_iterations = 500; ///< budget for inner solves when d > 2
};

struct InfConvResult {
    double value = 0.0;
    std::optional<Allocation<double>> allocation;
    double gap = 0.0; ///< best subgradient-phase value minus the polished value
    std::size_t iterations = 0;
    bool converged = false;
};

namespace detail {

/// project v onto {u >= 0, sum u = total}, the scaled simplex
inline void project_simplex(std::vector<double>& v, double total) {
    std::vector<double> u(v);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cum += u[j];
        const double t = (cum - total) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) theta = t;
    }
    for (double& x : v) x = std::max(0.0, x - theta);
}

/// shared-position data for the increment parameterization
struct SharingProblem {
    const std::vector<RiskMeasure>* measures = nullptr;
    RandomVariable<double> x;
    std::vector<double> knots;       // sorted distinct support of x plus 0
    std::size_t zero_index = 0;
    std::vector<std::size_t> atom_knot; // knot index of each atom value
    std::vector<double> gaps;

    SharingProblem(const std::vector<RiskMeasure>& ms, const RandomVariable<double>& pos)
        : measures(&ms), x(pos) {
        knots.assign(pos.values().begin(), pos.values().end());
        knots.push_back(0.0);
        std::sort(knots.begin(), knots.end());
        knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
        for (std::size_t k = 0; k < knots.size(); ++k)
            if (knots[k] == 0.0) zero_index = k;
        atom_knot.resize(pos.size());
        for (std::size_t j = 0; j < pos.size(); ++j)
            atom_knot[j] = static_cast<std::size_t>(
                std::lower_bound(knots.begin(), knots.end(), pos[j]) - knots.begin());
        for (std::size_t k = 0; k + 1 < knots.size(); ++k)
            gaps.push_back(knots[k + 1] - knots[k]);
    }

    std::size_t agents() const { return measures->size(); }
    std::size_t segments() const { return gaps.size(); }

    /// knot values of agent i under increments delta (anchored at the 0 knot)
    std::vector<double> agent_values(const std::vector<std::vector<double>>& delta,
                                     std::size_t i) const {
        std::vector<double> v(knots.size(), 0.0);
        for (std::size_t k = zero_index; k + 1 < knots.size(); ++k) v[k + 1] = v[k] + delta[k][i];
        for (std::size_t k = zero_index; k > 0; --k) v[k - 1] = v[k] - delta[k - 1][i];
        return v;
    }

    double objective(const std::vector<std::vector<double>>& delta) const {
        double total = 0.0;
        std::vector<double> share(x.size());
        for (std::size_t i = 0; i < agents(); ++i) {
            const std::vector<double> v = agent_values(delta, i);
            for (std::size_t j = 0; j < x.size(); ++j) share[j] = v[atom_knot[j]];
            total += (*measures)[i](RandomVariable<double>(x.space(), share));
        }
        return total;
    }

    Allocation<double> allocation(const std::vector<std::vector<double>>& delta) const {
        return Allocation<double>::from_increments(knots, zero_index, delta, agents());
    }
};

/// one golden-section exact line search moving mass between agents i and j on
/// segment k; the objective is convex along the move
inline void pair_line_search(SharingProblem& prob, std::vector<std::vector<double>>& delta,
                             std::size_t k, std::size_t i, std::size_t j) {
    const double lo = -delta[k][i], hi = delta[k][j];
    if (hi - lo <= 1e-14) return;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    const auto eval = [&](double s) {
        delta[k][i] += s;
        delta[k][j] -= s;
        const double f = prob.objective(delta);
        delta[k][i] -= s;
        delta[k][j] += s;
        return f;
    };
    double a = lo, b = hi;
    double c1 = b - phi * (b - a), c2 = a + phi * (b - a);
    double f1 = eval(c1), f2 = eval(c2);
    for (int it = 0; it < 80 && b - a > 1e-12 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
        if (f1 <= f2) {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - phi * (b - a);
            f1 = eval(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + phi * (b - a);
            f2 = eval(c2);
        }
    }
    const double best = 0.5 * (a + b);
    if (eval(best) < prob.objective(delta)) {
        delta[k][i] += best;
        delta[k][j] -= best;
    }
}

inline void require_sharing_flags(const std::vector<RiskMeasure>& measures) {
    for (const RiskMeasure& m : measures) {
        const MeasureFlags& f = m.flags();
        if (!f.convex || !f.cash_additive || !f.law_invariant)
            throw std::invalid_argument(
                "infconv_law_invariant: measures must be convex, cash additive and law "
                "invariant");
        if (!m.numeraire().constant_one())
            throw std::invalid_argument(
                "infconv_law_invariant: measures must use the constant numeraire");
    }
}

} // namespace detail

/**
 * @brief Optimal risk sharing among convex cash-additive law-invariant measures.
 *
 * Allocations are restricted to comonotone piecewise-linear splits of the
 * identity, parameterized by nonnegative slope increments that sum to the
 * knot gaps.  The convex objective sum_i rho_i(f_i(X)) is minimized by
 * projected subgradient descent on the product of scaled simplices with step
 * c/sqrt(t) from the proportional warm start, then sharpened by pairwise
 * exact line searches.  `gap` reports how far the subgradient phase ended
 * from the polished value; convergence means the two phases agree within tol.
 * With more than two agents the tail agents are folded into one composite
 * measure, the pair split is solved, the tail position is shared recursively,
 * and the joint polish runs over all agents at the end.
 */
inline InfConvResult infconv_law_invariant(const std::vector<RiskMeasure>& measures,
                                           const RandomVariable<double>& x,
                                           const InfConvOpts& opts = {}) {
    if (measures.size() < 2)
        throw std::invalid_argument("infconv_law_invariant: needs at least two measures");
    detail::require_sharing_flags(measures);
    const std::size_t d = measures.size();

    // degenerate position: cash additivity splits constants exactly
    const auto& vals = x.values();
    if (std::all_of(vals.begin(), vals.end(), [&](double v) { return v == vals.front(); })) {
        const double c = vals.front();
        InfConvResult out;
        const auto zero = RandomVariable<double>::constant(x.space(), 0.0);
        out.value = -c;
        for (const RiskMeasure& m : measures) out.value += m(zero);
        std::vector<double> knots{0.0};
        if (c != 0.0) knots.push_back(c);
        std::sort(knots.begin(), knots.end());
        std::vector<std::vector<double>> values(d, std::vector<double>(knots.size(), 0.0));
        for (std::size_t k = 0; k < knots.size(); ++k)
            for (std::size_t i = 0; i < d; ++i)
                values[i][k] = knots[k] / static_cast<double>(d);
        out.allocation = Allocation<double>(std::move(knots), std::move(values));
        out.converged = true;
        return out;
    }

    detail::SharingProblem prob(measures, x);
    const std::size_t segs = prob.segments();

    // warm start: proportional increments
    std::vector<std::vector<double>> delta(segs, std::vector<double>(d));
    for (std::size_t k = 0; k < segs; ++k)
        for (std::size_t i = 0; i < d; ++i)
            delta[k][i] = prob.gaps[k] / static_cast<double>(d);

    if (d > 2) {
        // fold the tail into one composite measure, split the pair, then share
        // the tail position among the remaining agents
        std::vector<RiskMeasure> tail(measures.begin() + 1, measures.end());
        InfConvOpts inner = opts;
        inner.iterations = std::max<std::size_t>(50, opts.fold_iterations / 8);
        inner.polish_rounds = 4;
        MeasureFlags ff;
        ff.convex = ff.cash_additive = ff.law_invariant = true;
        RiskMeasure folded("folded_tail",
                           [tail, inner](const RandomVariable<double>& y) {
                               return infconv_law_invariant(tail, y, inner).value;
                           },
                           ff);
        InfConvOpts outer = opts;
        outer.iterations = std::max<std::size_t>(150, opts.fold_iterations / 3);
        outer.polish_rounds = 4;
        const InfConvResult pair =
            infconv_law_invariant({measures.front(), folded}, x, outer);
        const InfConvResult rest =
            infconv_law_invariant(tail, pair.allocation->apply(1, x), opts);
        // compose: agent 0 keeps the pair split, agents 1.. get g_i(f_tail(.))
        for (std::size_t k = 0; k < segs; ++k) {
            const double a = prob.knots[k], b = prob.knots[k + 1];
            delta[k][0] = pair.allocation->evaluate(0, b) - pair.allocation->evaluate(0, a);
            const double ta = pair.allocation->evaluate(1, a);
            const double tb = pair.allocation->evaluate(1, b);
            for (std::size_t i = 1; i < d; ++i)
                delta[k][i] = rest.allocation->evaluate(i - 1, tb) -
                              rest.allocation->evaluate(i - 1, ta);
            detail::project_simplex(delta[k], prob.gaps[k]);
        }
    }

    double max_gap = 0.0;
    for (double g : prob.gaps) max_gap = std::max(max_gap, g);
    const double c_step = opts.step_scale > 0.0 ? opts.step_scale : 0.2 * max_gap;
    const double h = 1e-6 * max_gap;

    std::vector<std::vector<double>> best = delta;
    double best_val = prob.objective(delta);
    std::size_t iterations = 0;

    for (std::size_t t = 1; t <= opts.iterations; ++t) {
        ++iterations;
        // central finite-difference subgradient in the increment coordinates
        std::vector<std::vector<double>> grad(segs, std::vector<double>(d, 0.0));
        for (std::size_t k = 0; k < segs; ++k) {
            for (std::size_t i = 0; i < d; ++i) {
                delta[k][i] += h;
                const double up = prob.objective(delta);
                delta[k][i] -= 2.0 * h;
                const double dn = prob.objective(delta);
                delta[k][i] += h;
                grad[k][i] = (up - dn) / (2.0 * h);
            }
        }
        const double step = c_step / std::sqrt(static_cast<double>(t));
        for (std::size_t k = 0; k < segs; ++k) {
            for (std::size_t i = 0; i < d; ++i) delta[k][i] -= step * grad[k][i];
            detail::project_simplex(delta[k], prob.gaps[k]);
        }
        const double val = prob.objective(delta);
        if (val < best_val) {
            best_val = val;
            best = delta;
        }
    }

    // pairwise exact line searches from the best iterate, swept until stall
    delta = best;
    double polished = best_val;
    for (std::size_t round = 0; round < opts.polish_rounds; ++round) {
        for (std::size_t k = 0; k < segs; ++k)
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = i + 1; j < d; ++j)
                    detail::pair_line_search(prob, delta, k, i, j);
        const double cur = prob.objective(delta);
        const bool stalled = polished - cur < 1e-13 * (1.0 + std::abs(cur));
        polished = std::min(polished, cur);
        if (stalled) break;
    }

    // when the anchor 0 lies strictly inside the knot range the minimizer is
    // a face, not a point: moving cash c from agent j to agent i off the
    // anchor is free by cash additivity, and the two segments meeting at 0
    // absorb the shift.  Center along these directions by minimizing the
    // per-agent slope variation, a quadratic with a closed-form step, so the
    // witness lands on the constant-slope member of the face.
    if (prob.zero_index > 0 && prob.zero_index < segs) {
        const std::vector<std::vector<double>> keep = delta;
        const std::size_t L = prob.zero_index - 1, R = prob.zero_index;
        const double gl = prob.gaps[L], gr = prob.gaps[R];
        const double span = prob.knots.back() - prob.knots.front();
        const auto mean_slope = [&](std::size_t i) {
            double m = 0.0;
            for (std::size_t k = 0; k < segs; ++k) m += delta[k][i];
            return m / span;
        };
        for (std::size_t sweep = 0; sweep < 8; ++sweep)
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = i + 1; j < d; ++j) {
                    const double mi = mean_slope(i), mj = mean_slope(j);
                    const double slope = (delta[R][i] / gr - mi) - (delta[L][i] / gl - mi) +
                                         (delta[L][j] / gl - mj) - (delta[R][j] / gr - mj);
                    double c = -slope / (2.0 * (1.0 / gl + 1.0 / gr));
                    c = std::min(c, std::min(delta[L][i], delta[R][j]));
                    c = std::max(c, -std::min(delta[L][j], delta[R][i]));
                    delta[L][i] -= c;
                    delta[R][i] += c;
                    delta[L][j] += c;
                    delta[R][j] -= c;
                }
        const double centered = prob.objective(delta);
        if (centered > polished + 1e-9 * (1.0 + std::abs(polished)))
            delta = keep; // rounding drifted off the face, keep the polished point
        else
            polished = std::min(polished, centered);
    }

    InfConvResult out;
    out.value = std::min(polished, best_val);
    out.allocation = polished <= best_val ? prob.allocation(delta) : prob.allocation(best);
    out.gap = std::max(0.0, best_val - polished);
    out.iterations = iterations;
    out.converged = out.gap <= opts.tol;
    return out;
}

// ---------------------------------------------------------------------------
// brute-force oracle
// ---------------------------------------------------------------------------

/// grid spacing used by infconv_bruteforce for the same inputs
inline double bruteforce_resolution(const RandomVariable<double>& x, std::size_t grid = 41) {
    double lo = x[0], hi = x[0];
    for (double v : x.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double range = hi - lo;
    if (range == 0.0) range = 1.0;
    return 3.0 * range / static_cast<double>(grid - 1);
}

/**
 * @brief Ground-truth two-agent value by exhaustive per-atom grid search.
 *
 * Minimizes rho1(Y) + rho2(X-Y) with every Y coordinate on a uniform grid
 * spanning [min X - range, max X + range].  Intended as an oracle on small
 * instances only; anything beyond 6 atoms or ~2e7 grid nodes is refused.
 */
inline double infconv_bruteforce(const RiskMeasure& rho1, const RiskMeasure& rho2,
                                 const RandomVariable<double>& x, std::size_t grid = 41) {
    const std::size_t n = x.size();
    if (grid < 2) throw std::invalid_argument("infconv_bruteforce: grid too small");
    double nodes = 1.0;
    for (std::size_t j = 0; j < n; ++j) nodes *= static_cast<double>(grid);
    if (n > 6 || nodes > 2e7)
        throw std::invalid_argument("infconv_bruteforce: instance too large for the oracle");

    double lo = x[0], hi = x[0];
    for (double v : x.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double range = hi - lo;
    if (range == 0.0) range = 1.0;
    const double start = lo - range;
    const double step = 3.0 * range / static_cast<double>(grid - 1);

    std::vector<std::size_t> idx(n, 0);
    std::vector<double> y(n), rest(n);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        for (std::size_t j = 0; j < n; ++j) {
            y[j] = start + step * static_cast<double>(idx[j]);
            rest[j] = x[j] - y[j];
        }
        const double v = rho1(RandomVariable<double>(x.space(), y)) +
                         rho2(RandomVariable<double>(x.space(), rest));
        best = std::min(best, v);
        std::size_t j = 0;
        while (j < n && ++idx[j] == grid) {
            idx[j] = 0;
            ++j;
        }
        if (j == n) break;
    }
    return best;
}

// ---------------------------------------------------------------------------
// certification
// ---------------------------------------------------------------------------

struct Certificate {
    bool ok = false;
    double value_recomputed = 0.0;
    std::vector<std::string> failed; ///< named violated constraints, empty when ok
};

/**
 * Recompute the witness value and validate the allocation invariants; any
 * failure is reported by constraint name.  `tol` covers both the invariant
 * slack and the value agreement.
 */
inline Certificate certify_exactness(const InfConvResult& result,
                                     const std::vector<RiskMeasure>& measures,
                                     const RandomVariable<double>& x, double tol = 1e-6) {
    Certificate cert;
    if (!result.allocation) {
        cert.failed.push_back("allocation_missing");
        return cert;
    }
    const Allocation<double>& a = *result.allocation;
    if (a.agents() != measures.size()) {
        cert.failed.push_back("agent_count");
        return cert;
    }
    cert.failed = a.violations(tol);
    double total = 0.0;
    for (std::size_t i = 0; i < measures.size(); ++i) total += measures[i](a.apply(i, x));
    cert.value_recomputed = total;
    if (std::abs(total - result.value) > tol) cert.failed.push_back("value_mismatch");
    cert.ok = cert.failed.empty();
    return cert;
}

// ---------------------------------------------------------------------------
// surplus-invariant sharing via acceptance-set sums
// ---------------------------------------------------------------------------

namespace detail {

/**
 * Greedy split of a shortfall profile z >= 0 between two budget sets:
 * maximizes the second budget's relief E[w2 Y] subject to E[w1 Y] <= c1 and
 * 0 <= Y <= z (fractional knapsack over atoms sorted by w2/w1); feasibility
 * is decided from the greedy's own residual E[w2 (z-Y)] <= c2, which is the
 * exact optimum, so a boundary-tight budget is not re-summed in a different
 * order.  Atoms with equal ratio are filled proportionally so the witness
 * stays exact for proportional weights.
 */
template <class S> struct ShortfallSplit {
    bool feasible = false;
    RandomVariable<S> first;  ///< part sent to D1
    RandomVariable<S> second; ///< remainder, sent to D2
};

template <class S>
ShortfallSplit<S> split_shortfall(const SolidPositiveSet<S>& d1, const SolidPositiveSet<S>& d2,
                                  const RandomVariable<S>& z) {
    const RandomVariable<S> w1 = d1.weight_on(z.space());
    const RandomVariable<S> w2 = d2.weight_on(z.space());
    const std::size_t n = z.size();
    std::vector<S> take(n, S(0));

    S remaining(0); // E[w2 (z - Y)], everything starts on the second side
    std::vector<std::size_t> paid;
    for (std::size_t j = 0; j < n; ++j) {
        if (z[j] == S(0)) continue;
        const S benefit = z.space()->prob(j) * w2[j] * z[j];
        if (benefit == S(0)) continue; // free to leave with D2
        remaining += benefit;
        const S cost = z.space()->prob(j) * w1[j] * z[j];
        if (cost == S(0)) {
            take[j] = z[j]; // free to move to D1
            remaining -= benefit;
        } else {
            paid.push_back(j);
        }
    }
    std::sort(paid.begin(), paid.end(), [&](std::size_t a, std::size_t b) {
        // order by w2/w1 descending without dividing
        return w2[a] * w1[b] > w2[b] * w1[a];
    });
    S budget = d1.capacity();
    std::size_t g = 0;
    while (g < paid.size() && budget > S(0)) {
        // group of equal ratios
        std::size_t e = g + 1;
        while (e < paid.size() &&
               w2[paid[e]] * w1[paid[g]] == w2[paid[g]] * w1[paid[e]])
            ++e;
        S group_cost(0), group_benefit(0);
        for (std::size_t t = g; t < e; ++t) {
            const std::size_t j = paid[t];
            group_cost += z.space()->prob(j) * w1[j] * z[j];
            group_benefit += z.space()->prob(j) * w2[j] * z[j];
        }
        if (group_cost <= budget) {
            for (std::size_t t = g; t < e; ++t) take[paid[t]] = z[paid[t]];
            budget -= group_cost;
            remaining -= group_benefit;
        } else {
            const S frac = budget / group_cost;
            for (std::size_t t = g; t < e; ++t) take[paid[t]] = frac * z[paid[t]];
            remaining -= frac * group_benefit;
            budget = S(0);
        }
        g = e;
    }

    std::vector<S> rest(n);
    for (std::size_t j = 0; j < n; ++j) rest[j] = z[j] - take[j];
    ShortfallSplit<S> out{false, RandomVariable<S>(z.space(), std::move(take)),
                          RandomVariable<S>(z.space(), std::move(rest))};
    out.feasible = remaining <= d2.capacity();
    return out;
}

template <class S>
const SolidPositiveSet<S>& require_budget(const AcceptanceSet<S>& a, const char* who) {
    if (!a.solid_kind() || !a.solid().is_budget())
        throw std::invalid_argument(std::string(who) +
                                    ": only budget-type shortfall sets are supported");
    return a.solid();
}

/// effective weight p_i w_i identically zero means the budget accepts everything
template <class S>
bool vacuous_budget(const SolidPositiveSet<S>& d, const SpacePtr<S>& sp) {
    const RandomVariable<S> w = d.weight_on(sp);
    for (std::size_t j = 0; j < sp->size(); ++j)
        if (sp->prob(j) * w[j] > S(0)) return false;
    return true;
}

} // namespace detail

/**
 * @brief Minkowski sum of two budget-type acceptance sets.
 *
 * Membership of X asks whether X^- splits into two affordable shortfall
 * profiles; the greedy split decides that exactly.  The sum is again
 * monotone, convex and solid.
 */
template <class S>
AcceptanceSet<S> sum_acceptance(const AcceptanceSet<S>& a1, const AcceptanceSet<S>& a2) {
    const SolidPositiveSet<S> d1 = detail::require_budget(a1, "sum_acceptance");
    const SolidPositiveSet<S> d2 = detail::require_budget(a2, "sum_acceptance");
    return AcceptanceSet<S>::from_predicate(
        [d1, d2](const RandomVariable<S>& x) {
            return detail::split_shortfall(d1, d2, neg_part(x)).feasible;
        },
        true, true);
}

template <class S> struct SurplusResult {
    S value = S(0);
    RandomVariable<S> part1;      ///< agent 1's position, X = part1 + part2
    RandomVariable<S> part2;
    RandomVariable<S> shortfall1; ///< split of (X + value*S)^- certified by D1
    RandomVariable<S> shortfall2;
    bool merged_closed_form = false; ///< proportional weights: threshold solved exactly
    std::optional<S> merged_capacity;
    std::size_t iterations = 0;   ///< bisection steps on the general path
};

/**
 * @brief Shared capital requirement for two budget-induced measures.
 *
 * Computes inf{m : (X + m S)^- in D1 + D2}.  Proportional weights collapse
 * the sum into one budget with capacity c1 + c2/lambda, solved in closed form
 * (exact in rational mode); otherwise m is bisected with the greedy
 * membership test.  The returned decomposition X = part1 + part2 realizes the
 * value: part1 + value*S is acceptable to agent 1 and part2 to agent 2.
 */
template <class S>
SurplusResult<S> infconv_surplus(const AcceptanceSet<S>& a1, const AcceptanceSet<S>& a2,
                                 const RandomVariable<S>& x, const Numeraire<S>& numeraire = {},
                                 double tol = 1e-9) {
    const SolidPositiveSet<S> d1 = detail::require_budget(a1, "infconv_surplus");
    const SolidPositiveSet<S> d2 = detail::require_budget(a2, "infconv_surplus");
    const SpacePtr<S>& sp = x.space();
    if (detail::vacuous_budget(d1, sp) || detail::vacuous_budget(d2, sp))
        throw std::domain_error("infconv_surplus: a vacuous budget makes the value unbounded");
    const RandomVariable<S> s = numeraire.on(sp);
    const RandomVariable<S> w1 = d1.weight_on(sp);
    const RandomVariable<S> w2 = d2.weight_on(sp);

    SurplusResult<S> out{S(0), x, x, x, x, false, std::nullopt, 0};

    // proportional weights: w2 = lambda * w1 on every atom that matters
    std::optional<S> lambda;
    bool proportional = true;
    for (std::size_t j = 0; j < sp->size() && proportional; ++j) {
        if (sp->prob(j) * w1[j] == S(0) && sp->prob(j) * w2[j] == S(0)) continue;
        if (w1[j] == S(0) || w2[j] == S(0)) {
            proportional = false;
            break;
        }
        const S r = w2[j] / w1[j];
        if (!lambda)
            lambda = r;
        else if (*lambda != r)
            proportional = false;
    }

    if (proportional && lambda) {
        const S capacity = d1.capacity() + d2.capacity() / *lambda;
        const auto merged =
            AcceptanceSet<S>::shortfall_budget(SolidPositiveSet<S>::budget(w1, capacity));
        out.value = acceptance_threshold(merged, x, numeraire, tol);
        out.merged_closed_form = true;
        out.merged_capacity = capacity;
    } else {
        const auto member = [&](const S& m) {
            return detail::split_shortfall(d1, d2, neg_part(x + m * s)).feasible;
        };
        double span = to_double(max_abs(x)) / to_double(numeraire.min_on(sp)) + 1.0;
        S lo = scalar_traits<S>::from_double(-span);
        S hi = scalar_traits<S>::from_double(span);
        int expand = 0;
        while (!member(hi)) {
            if (++expand > 60)
                throw std::domain_error("infconv_surplus: no acceptable capital level found");
            S width = hi - lo;
            lo = hi;
            hi = hi + width * S(2);
        }
        expand = 0;
        while (member(lo)) {
            if (++expand > 60)
                throw std::domain_error("infconv_surplus: value unbounded below");
            S width = hi - lo;
            hi = lo;
            lo = lo - width * S(2);
        }
        while (to_double(S(hi - lo)) > tol * (1.0 + std::abs(to_double(hi)))) {
            ++out.iterations;
            const S mid = (lo + hi) / S(2);
            if (member(mid))
                hi = mid;
            else
                lo = mid;
        }
        out.value = hi;
    }

    // witness: split the optimal shortfall and decompose X around it; the
    // form part1 = X + Z2 keeps part1 + part2 = X exact even in floats
    const RandomVariable<S> at_value = x + out.value * s;
    const auto split = detail::split_shortfall(d1, d2, neg_part(at_value));
    out.shortfall1 = split.first;
    out.shortfall2 = split.second;
    out.part1 = x + split.second;
    out.part2 = -split.second;
    return out;
}

} // namespace riskconv
