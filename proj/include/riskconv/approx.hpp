#pragma once

#include "riskconv/measures.hpp"
#include "riskconv/norms.hpp"
#include "riskconv/random.hpp"
#include "riskconv/space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskconv {

// ---------------------------------------------------------------------------
// refinement scheme
// ---------------------------------------------------------------------------

struct RefineStep {
    std::size_t n = 0;
    double truncation_level = 0.0; ///< m_n, outcomes with |x| > m_n are zeroed
    std::size_t cells = 0;         ///< blocks actually used at this step
    double error = 0.0;            ///< ||X - E[X|pi_n]|| in the scheme norm
};

struct RefineResult {
    std::vector<RefineStep> steps;
    std::vector<Partition> partitions; ///< pi_n per step, same length as steps
    bool exact = false;                ///< final error is zero
};

namespace detail {

/// X restricted to {|X| <= level}, zero elsewhere.
inline RandomVariable<double> truncate_at(const RandomVariable<double>& x, double level) {
    return x.map([level](double v) { return std::abs(v) <= level ? v : 0.0; });
}

/// Smallest distinct |outcome| level whose tail X 1_{|X| > m} has norm <= bound.
inline double truncation_level(const RandomVariable<double>& x, const RiNorm& norm,
                               double bound) {
    std::vector<double> levels{0.0};
    for (double v : x.values()) levels.push_back(std::abs(v));
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    for (double m : levels) {
        const auto tail = x.map([m](double v) { return std::abs(v) > m ? v : 0.0; });
        if (norm(tail) <= bound) return m;
    }
    return levels.back(); // unreachable: the top level leaves an empty tail
}

} // namespace detail

/**
 * @brief Successive conditional-expectation approximations of X.
 *
 * Step n zeroes the outcomes beyond the smallest level whose tail norm is at
 * most 1/n, splits the truncated variable into at most 2^n cells with
 * quantile_partition, and records e_n = ||X - E[X|pi_n]||.  A candidate
 * partition that would increase the error is discarded and the previous one
 * kept, so the error trace is nonincreasing.  On a finite space the scheme
 * reaches e_n = 0 once the cell budget covers every distinct outcome and the
 * truncation keeps all of them; the loop stops there.
 */
inline RefineResult refine_scheme(const RandomVariable<double>& x, const RiNorm& norm,
                                  std::size_t n_max = 16) {
    if (n_max == 0) throw std::invalid_argument("refine_scheme: n_max must be >= 1");
    RefineResult out;
    Partition best = Partition::trivial(x.size());
    double best_err = norm(x - cond_expect(x, best));
    for (std::size_t n = 1; n <= n_max; ++n) {
        const double level = detail::truncation_level(x, norm, 1.0 / static_cast<double>(n));
        const std::size_t cells = n >= 20 ? x.size() : std::min<std::size_t>(
                                                           x.size(), std::size_t{1} << n);
        const Partition cand = quantile_partition(detail::truncate_at(x, level), cells);
        const double cand_err = norm(x - cond_expect(x, cand));
        if (cand_err < best_err) {
            best = cand;
            best_err = cand_err;
        }
        out.steps.push_back({n, level, best.block_count(), best_err});
        out.partitions.push_back(best);
        if (best_err == 0.0) break;
    }
    out.exact = !out.steps.empty() && out.steps.back().error == 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// conditional expectation by averaged rearrangements
// ---------------------------------------------------------------------------

template <class S> struct EquidistResult {
    RandomVariable<S> average;
    std::size_t copies = 0;  ///< rearranged copies averaged
    bool exact = false;      ///< cyclic route: average equals E[X|pi] identically
    double deviation = 0.0;  ///< max |average - E[X|pi]| actually achieved
};

namespace detail {

/// Within-block permutations only preserve the law under equal atom weights.
template <class S>
void require_equal_block_weights(const RandomVariable<S>& x, const Partition& pi,
                                 const char* who) {
    if (pi.atom_count() != x.size())
        throw std::invalid_argument(std::string(who) + ": partition size mismatch");
    for (const auto& block : pi.blocks()) {
        const S& p0 = x.space()->prob(block.front());
        for (std::size_t i : block)
            if (x.space()->prob(i) != p0)
                throw std::invalid_argument(std::string(who) +
                                            ": blocks must have equal atom weights");
    }
}

} // namespace detail

/**
 * @brief E[X|pi] as an average of law-preserving rearrangements of X.
 *
 * Every copy permutes X within the blocks of pi, so all copies share the law
 * of X; the conditional expectation emerges as their average.  Blocks must
 * carry equal atom weights, otherwise within-block permutations change the
 * law and the averaging identity fails.  With the cyclic construction,
 * lcm(block sizes) copies reproduce E[X|pi] exactly (each block entry appears
 * equally often at each position); when that lcm exceeds `cap` the function
 * falls back to seeded random within-block shuffles and reports the achieved
 * deviation.
 */
template <class S>
EquidistResult<S> equidistributed_average(const RandomVariable<S>& x, const Partition& pi,
                                          std::size_t cap = 1000000,
                                          std::uint64_t seed = 1u) {
    detail::require_equal_block_weights(x, pi, "equidistributed_average");

    std::vector<std::size_t> sizes;
    for (const auto& block : pi.blocks()) sizes.push_back(block.size());
    const unsigned long long period = capped_lcm(sizes, cap);

    const RandomVariable<S> target = cond_expect(x, pi);
    std::vector<S> acc(x.size(), S(0));
    EquidistResult<S> out{target, 0, false, 0.0};

    if (period != 0) {
        // cyclic shifts by k within each block, k = 0..period-1
        for (unsigned long long k = 0; k < period; ++k) {
            for (const auto& block : pi.blocks())
                for (std::size_t j = 0; j < block.size(); ++j)
                    acc[block[j]] += x[block[(j + k) % block.size()]];
        }
        std::vector<S> avg(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            avg[i] = acc[i] / S(static_cast<long>(period));
        out.average = RandomVariable<S>(x.space(), std::move(avg));
        out.copies = static_cast<std::size_t>(period);
        out.exact = true;
        out.deviation = to_double(max_abs(out.average - target));
        return out;
    }

    // fallback: seeded random within-block shuffles
    Rng rng(seed);
    const std::size_t copies = cap;
    for (std::size_t k = 0; k < copies; ++k) {
        for (const auto& block : pi.blocks()) {
            std::vector<std::size_t> perm(block);
            for (std::size_t i = perm.size(); i > 1; --i)
                std::swap(perm[i - 1], perm[rng.index(i)]);
            for (std::size_t j = 0; j < block.size(); ++j) acc[block[j]] += x[perm[j]];
        }
    }
    std::vector<S> avg(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) avg[i] = acc[i] / S(static_cast<long>(copies));
    out.average = RandomVariable<S>(x.space(), std::move(avg));
    out.copies = copies;
    out.deviation = to_double(max_abs(out.average - target));
    return out;
}

/**
 * @brief The cyclic law-preserving copies behind equidistributed_average.
 *
 * Copy k shifts every block of pi cyclically by k, for k up to
 * lcm(block sizes), so each copy permutes X within blocks and their plain
 * average is E[X|pi] identically.  Throws when the lcm exceeds `cap`.
 */
template <class S>
std::vector<RandomVariable<S>> equidistributed_copies(const RandomVariable<S>& x,
                                                      const Partition& pi,
                                                      std::size_t cap = 1000000) {
    detail::require_equal_block_weights(x, pi, "equidistributed_copies");
    std::vector<std::size_t> sizes;
    for (const auto& block : pi.blocks()) sizes.push_back(block.size());
    const unsigned long long period = capped_lcm(sizes, cap);
    if (period == 0)
        throw std::invalid_argument("equidistributed_copies: lcm of block sizes exceeds cap");
    std::vector<RandomVariable<S>> out;
    out.reserve(static_cast<std::size_t>(period));
    for (unsigned long long k = 0; k < period; ++k) {
        std::vector<S> vals(x.size());
        for (const auto& block : pi.blocks())
            for (std::size_t j = 0; j < block.size(); ++j)
                vals[block[j]] = x[block[(j + k) % block.size()]];
        out.emplace_back(x.space(), std::move(vals));
    }
    return out;
}

// ---------------------------------------------------------------------------
// localization of a law-invariant measure along the scheme
// ---------------------------------------------------------------------------

struct LocalizationResult {
    std::vector<double> trace; ///< rho(E[X|pi_n]) per refinement step
    double target = 0.0;       ///< rho(X)
    bool converged = false;
    std::size_t steps = 0;
};

/**
 * @brief Evaluate rho along the refinement scheme until it reproduces rho(X).
 *
 * Requires a law-invariant measure; conditioning is a law-dependent surrogate
 * and the trace has no reason to approach rho(X) otherwise.  Throws when the
 * step budget runs out before |rho(E[X|pi_n]) - rho(X)| <= tol, carrying the
 * final gap in the message.
 */
inline LocalizationResult localization_limit(const RiskMeasure& rho,
                                             const RandomVariable<double>& x, const RiNorm& norm,
                                             double tol = 1e-9, std::size_t n_max = 24) {
    if (!rho.flags().law_invariant)
        throw std::invalid_argument("localization_limit: measure must be law invariant");
    LocalizationResult out;
    out.target = rho(x);
    const RefineResult scheme = refine_scheme(x, norm, n_max);
    for (const Partition& pi : scheme.partitions) {
        out.trace.push_back(rho(cond_expect(x, pi)));
        ++out.steps;
        if (std::abs(out.trace.back() - out.target) <= tol) {
            out.converged = true;
            return out;
        }
    }
    std::ostringstream msg;
    msg << "localization_limit: no convergence after " << out.steps << " steps, gap "
        << (out.trace.empty() ? out.target
                              : std::abs(out.trace.back() - out.target))
        << ", tol " << tol;
    throw std::runtime_error(msg.str());
}

// ---------------------------------------------------------------------------
// Cesaro means
// ---------------------------------------------------------------------------

/// Prefix averages (X_1 + ... + X_n)/n of a sequence on one common space.
template <class S>
std::vector<RandomVariable<S>> cesaro_means(const std::vector<RandomVariable<S>>& xs) {
    if (xs.empty()) return {};
    for (const auto& x : xs)
        if (!same_space(x.space(), xs.front().space()))
            throw std::invalid_argument("cesaro_means: sequence spans multiple spaces");
    std::vector<RandomVariable<S>> out;
    out.reserve(xs.size());
    std::vector<S> acc(xs.front().size(), S(0));
    for (std::size_t n = 0; n < xs.size(); ++n) {
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += xs[n][i];
        std::vector<S> avg(acc.size());
        for (std::size_t i = 0; i < acc.size(); ++i) avg[i] = acc[i] / S(static_cast<long>(n + 1));
        out.emplace_back(xs.front().space(), std::move(avg));
    }
    return out;
}

} // namespace riskconv
