#pragma once

#include "riskconv/measures.hpp"
#include "riskconv/norms.hpp"
#include "riskconv/random.hpp"
#include "riskconv/rational.hpp"
#include "riskconv/space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskconv {

// ---------------------------------------------------------------------------
// sequence families
// ---------------------------------------------------------------------------

/// Hypotheses under which lower semicontinuity of a risk measure is probed:
/// every kind converges almost surely, and each adds its own side constraint.
enum class ConvergenceKind {
    order_dominated, ///< |X_n| <= Y for one fixed dominator Y
    norm_bounded_as, ///< sup_n ||X_n|| < inf in a declared norm
    as_only          ///< no bound at all, norms may explode
};

inline const char* to_string(ConvergenceKind k) {
    switch (k) {
    case ConvergenceKind::order_dominated: return "order_dominated";
    case ConvergenceKind::norm_bounded_as: return "norm_bounded_as";
    case ConvergenceKind::as_only: return "as_only";
    }
    return "unknown";
}

/// One generated sequence X_1..X_horizon with its limit and certificates.
struct SequenceSample {
    std::vector<RandomVariable<double>> terms;
    RandomVariable<double> limit;
    std::optional<RandomVariable<double>> dominator; ///< order_dominated only
    double norm_bound = 0.0;                         ///< norm_bounded_as only
};

/**
 * @brief Seeded generator of sequences converging a.s. to a random limit.
 *
 * All kinds share the same skeleton: a random limit X, a noise profile that
 * decays geometrically and lives on a shrinking random block (so the
 * exceptional mass vanishes), and, for the undominated kinds, a positive
 * spike on the atoms where X is largest.  The spike support has mass about
 * 1/n; its height is 1/||1_A|| (norm_bounded_as, so the spike keeps constant
 * norm) or n/P(A) (as_only, so norms explode).  Boosting only the
 * highest-value atoms leaves every lower quantile of the law untouched,
 * which is what lets tail-sensitive measures ignore the spikes while the
 * mean cannot.
 *
 * On a fixed finite space a.s. convergence is represented by a vanishing
 * exceptional mass: the atoms still moving at step n carry mass
 * O(1/n + 1/#atoms), the second term being the resolution floor.
 */
class SequenceFamily {
  public:
    static SequenceFamily order_dominated(SpacePtr<double> space, std::uint64_t seed = 1) {
        return SequenceFamily(ConvergenceKind::order_dominated, std::move(space),
                              std::nullopt, seed);
    }

    static SequenceFamily norm_bounded_as(SpacePtr<double> space, RiNorm norm,
                                          std::uint64_t seed = 1) {
        return SequenceFamily(ConvergenceKind::norm_bounded_as, std::move(space),
                              std::move(norm), seed);
    }

    static SequenceFamily as_only(SpacePtr<double> space, std::uint64_t seed = 1) {
        return SequenceFamily(ConvergenceKind::as_only, std::move(space), std::nullopt,
                              seed);
    }

    ConvergenceKind kind() const { return kind_; }
    const SpacePtr<double>& space() const { return space_; }
    const std::optional<RiNorm>& norm() const { return norm_; }
    std::uint64_t seed() const { return seed_; }

    SequenceSample sample(std::size_t trial, std::size_t horizon) const {
        if (horizon < 2)
            throw std::invalid_argument("SequenceFamily::sample: horizon must be >= 2");
        Rng rng(seed_ + 0x9E3779B97F4A7C15ull * (trial + 1));
        const std::size_t n_atoms = space_->size();

        std::vector<double> lim(n_atoms), noise(n_atoms);
        for (double& v : lim) v = rng.uniform(-3.0, 3.0);
        for (double& v : noise) v = rng.uniform(-1.0, 1.0);
        RandomVariable<double> limit(space_, lim);

        // noise scale r^n with r^horizon = 1e-14, so the per-atom error is
        // far below any probe tolerance at the horizon
        const double r = std::pow(1e-14, 1.0 / static_cast<double>(horizon));

        // spikes sit on the atoms where the limit is largest; ties break by
        // index so samples are deterministic
        std::vector<std::size_t> by_value(n_atoms);
        for (std::size_t i = 0; i < n_atoms; ++i) by_value[i] = i;
        std::stable_sort(by_value.begin(), by_value.end(),
                         [&](std::size_t a, std::size_t b) { return lim[a] > lim[b]; });

        SequenceSample out{{}, limit, std::nullopt, 0.0};
        out.terms.reserve(horizon);

        if (kind_ == ConvergenceKind::order_dominated) {
            std::vector<double> dom(n_atoms);
            for (std::size_t i = 0; i < n_atoms; ++i)
                dom[i] = std::abs(lim[i]) + std::abs(noise[i]);
            out.dominator = RandomVariable<double>(space_, dom);
            double scale = r;
            for (std::size_t n = 1; n <= horizon; ++n, scale *= r) {
                std::vector<double> vals(lim);
                for (std::size_t i = 0; i < n_atoms; ++i) vals[i] += scale * noise[i];
                out.terms.emplace_back(space_, std::move(vals));
            }
            return out;
        }

        if (kind_ == ConvergenceKind::norm_bounded_as)
            out.norm_bound = (*norm_)(limit) + 1.0 + (*norm_)(
                RandomVariable<double>(space_, noise)) + 1e-9;

        double scale = r;
        for (std::size_t n = 1; n <= horizon; ++n, scale *= r) {
            std::vector<double> vals(lim);

            const std::size_t k = std::max<std::size_t>(1, n_atoms / n);
            std::vector<double> ind(n_atoms, 0.0);
            double mass = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                ind[by_value[j]] = 1.0;
                mass += to_double(space_->prob(by_value[j]));
            }
            double height;
            if (kind_ == ConvergenceKind::norm_bounded_as)
                height = 1.0 / (*norm_)(RandomVariable<double>(space_, ind));
            else
                height = static_cast<double>(n) / mass;
            for (std::size_t j = 0; j < k; ++j) vals[by_value[j]] += height;

            // damped noise on a shrinking ring block keeps the moving mass small
            const std::size_t kb = std::max<std::size_t>(1, n_atoms / n);
            const std::size_t start = rng.index(n_atoms);
            for (std::size_t j = 0; j < kb; ++j) {
                const std::size_t i = (start + j) % n_atoms;
                vals[i] += scale * noise[i];
            }
            out.terms.emplace_back(space_, std::move(vals));
        }
        return out;
    }

  private:
    SequenceFamily(ConvergenceKind kind, SpacePtr<double> space, std::optional<RiNorm> norm,
                   std::uint64_t seed)
        : kind_(kind), space_(std::move(space)), norm_(std::move(norm)), seed_(seed) {
        if (!space_) throw std::invalid_argument("SequenceFamily: null space");
    }

    ConvergenceKind kind_;
    SpacePtr<double> space_;
    std::optional<RiNorm> norm_;
    std::uint64_t seed_;
};

struct KindCheck {
    bool ok = true;
    std::string failed;  ///< first violated constraint, empty when ok
    double breach = 0.0; ///< worst slack past the constraint
};

/**
 * @brief Verifies that a sample satisfies its kind's defining constraints.
 *
 * Domination is pointwise with 1e-12 slack; the norm bound uses the family
 * norm with 1e-9 slack; a.s. convergence is surrogated by the mass of
 * {|X_n - X| > 1e-9} staying below 2/n + 2/#atoms (spike plus noise block,
 * each about 1/n with a one-atom floor).  The dominated kind additionally
 * requires per-atom error below 1e-9 at the horizon, which its spike-free
 * construction actually attains.
 */
inline KindCheck verify_kind(const SequenceFamily& fam, const SequenceSample& s) {
    KindCheck out;
    auto fail = [&](const char* what, double breach) {
        if (out.ok) {
            out.ok = false;
            out.failed = what;
        }
        out.breach = std::max(out.breach, breach);
    };
    const std::size_t horizon = s.terms.size();
    const std::size_t n_atoms = s.limit.size();
    for (const auto& t : s.terms)
        if (!same_space(t.space(), s.limit.space()))
            throw std::invalid_argument("verify_kind: terms on a foreign space");

    if (fam.kind() == ConvergenceKind::order_dominated) {
        if (!s.dominator) throw std::invalid_argument("verify_kind: missing dominator");
        for (const auto& t : s.terms)
            for (std::size_t i = 0; i < n_atoms; ++i) {
                const double excess = std::abs(t[i]) - (*s.dominator)[i];
                if (excess > 1e-12) fail("domination", excess);
            }
        double horizon_err = 0.0;
        for (std::size_t i = 0; i < n_atoms; ++i)
            horizon_err = std::max(horizon_err,
                                   std::abs(s.terms.back()[i] - s.limit[i]));
        if (horizon_err > 1e-9) fail("pointwise_convergence", horizon_err);
        return out;
    }

    if (fam.kind() == ConvergenceKind::norm_bounded_as) {
        const RiNorm& n = *fam.norm();
        for (const auto& t : s.terms) {
            const double excess = n(t) - s.norm_bound;
            if (excess > 1e-9) fail("norm_bound", excess);
        }
    }
    for (std::size_t idx = 0; idx < horizon; ++idx) {
        double moving = 0.0;
        for (std::size_t i = 0; i < n_atoms; ++i)
            if (std::abs(s.terms[idx][i] - s.limit[i]) > 1e-9)
                moving += to_double(s.limit.space()->prob(i));
        const double allowed = 2.0 / static_cast<double>(idx + 1) +
                               2.0 / static_cast<double>(n_atoms);
        if (moving > allowed + 1e-12) fail("exceptional_mass", moving - allowed);
    }
    return out;
}

// ---------------------------------------------------------------------------
// lower-semicontinuity probe
// ---------------------------------------------------------------------------

struct ProbeReport {
    std::size_t trials = 0;
    std::size_t horizon = 0;
    double tol = 0.0;
    std::size_t violations = 0;  ///< trials with rho(X) > surrogate + tol
    double max_violation = 0.0;  ///< max over trials of rho(X) - surrogate
    bool kind_ok = true;         ///< every sample satisfied its kind constraints
    double worst_kind_breach = 0.0;
};

/**
 * @brief Randomized probe of rho(X) <= liminf_n rho(X_n) along a family.
 *
 * A finite horizon cannot realize a true liminf, so the surrogate is the
 * minimum of rho(X_n) over the tail half n > horizon/2, which is
 * conservative for violation detection.  Each sample is first checked
 * against its kind's constraints; breaches are reported, not thrown, so a
 * probe run always completes.
 */
inline ProbeReport probe(const RiskMeasure& rho, const SequenceFamily& fam,
                         std::size_t trials, std::size_t horizon = 200,
                         double tol = 1e-5) {
    if (trials == 0) throw std::invalid_argument("probe: trials must be >= 1");
    ProbeReport rep;
    rep.trials = trials;
    rep.horizon = horizon;
    rep.tol = tol;
    rep.max_violation = -std::numeric_limits<double>::infinity();
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const SequenceSample s = fam.sample(trial, horizon);
        const KindCheck kc = verify_kind(fam, s);
        if (!kc.ok) {
            rep.kind_ok = false;
            rep.worst_kind_breach = std::max(rep.worst_kind_breach, kc.breach);
        }
        double surrogate = std::numeric_limits<double>::infinity();
        for (std::size_t n = horizon / 2; n < horizon; ++n)
            surrogate = std::min(surrogate, rho(s.terms[n]));
        const double v = rho(s.limit) - surrogate;
        rep.max_violation = std::max(rep.max_violation, v);
        if (v > tol) ++rep.violations;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// gallery: constant-norm spikes against the mean
// ---------------------------------------------------------------------------

struct Bigexamp2Report {
    std::size_t atoms = 0;
    std::size_t n_max = 0;
    bool representable = false;    ///< every mass 1/n exact on the space
    std::vector<double> means;     ///< E[X_n], index n-1
    std::vector<double> l1_norms;  ///< ||X_n||_1, all 1 when representable
    double liminf_surrogate = 0.0; ///< min of E[X_n] over the tail half
    double gap = 0.0;              ///< E[0] - surrogate, the lsc failure size
};

/**
 * @brief The classical spike sequence against the expectation functional.
 *
 * X_n = -n on a nested set A_n of mass 1/n and 0 elsewhere: every term has
 * L1 norm one and mean -1, yet the moving mass vanishes, so the a.s. limit
 * is 0 with mean 0 and the lower-semicontinuity gap equals 1.  The space is
 * uniform with lcm(1..n_max) atoms so each 1/n is exact; when that lcm
 * exceeds `atom_cap` a 1024-atom dyadic space approximates the masses by
 * floor(1024/n) atoms and the report carries the achieved values.  All
 * means are computed in rational arithmetic, so the representable case
 * reports -1 exactly.
 */
inline Bigexamp2Report gallery_bigexamp2(std::size_t n_max, std::size_t atom_cap = 100000) {
    if (n_max == 0) throw std::invalid_argument("gallery_bigexamp2: n_max must be >= 1");
    std::vector<std::size_t> sizes(n_max);
    for (std::size_t n = 1; n <= n_max; ++n) sizes[n - 1] = n;
    const unsigned long long lcm = capped_lcm(sizes, atom_cap);
    const std::size_t atoms = lcm != 0 ? static_cast<std::size_t>(lcm) : 1024;

    Bigexamp2Report rep;
    rep.atoms = atoms;
    rep.n_max = n_max;
    rep.representable = true;
    for (std::size_t n = 1; n <= n_max; ++n)
        rep.representable = rep.representable && atoms % n == 0;

    const auto space = uniform_space<Rational>(atoms);
    for (std::size_t n = 1; n <= n_max; ++n) {
        const std::size_t k = std::max<std::size_t>(1, atoms / n);
        std::vector<Rational> vals(atoms, Rational(0));
        for (std::size_t j = 0; j < k; ++j) vals[j] = -Rational(static_cast<long>(n));
        const RandomVariable<Rational> xn(space, std::move(vals));
        rep.means.push_back(to_double(expectation(xn)));
        rep.l1_norms.push_back(to_double(expectation(xn.map(
            [](const Rational& v) { return Rational(scalar_traits<Rational>::abs(v)); }))));
    }

    const std::size_t tail_start = n_max / 2 + 1;
    double surrogate = rep.means[tail_start - 1];
    for (std::size_t n = tail_start; n <= n_max; ++n)
        surrogate = std::min(surrogate, rep.means[n - 1]);
    rep.liminf_surrogate = surrogate;
    rep.gap = 0.0 - surrogate;
    return rep;
}

// ---------------------------------------------------------------------------
// gallery: L2 pairing along a refinement ladder
// ---------------------------------------------------------------------------

struct Bigexamp1Report {
    std::vector<std::size_t> ladder;   ///< space sizes 2^k
    std::vector<double> z_l2_raw;      ///< pre-normalization L2 of the profile
    std::vector<double> z_sup;         ///< sup norm of the normalized Z_k
    std::vector<double> pairing_head;  ///< per rung: max |E[X_n Z_k]|, n <= horizon/4
    std::vector<double> pairing_tail;  ///< per rung: max |E[X_n Z_k]|, n > horizon/2
    bool bound_holds = true;           ///< |E[X_n Z]| <= (1/n)||Z||_2 + M||Z 1_{A_n}||_2
    bool pairings_vanish = true;       ///< tail max below the bound at the tail start
};

/**
 * @brief Pairing X_n -> E[X_n Z_k] against truncations of an L2-only profile.
 *
 * Z_k discretizes z(u) = u^{-1/4} on a uniform 2^k space and is normalized
 * to ||Z_k||_2 = 1, so its sup norm grows like 2^{k/4}: the family is L2
 * bounded with no uniform L-infinity bound.  The probe sequences are
 * unit-L2 spikes on the first (largest-Z) atoms of mass about 1/n plus
 * off-support noise below 1/n, the hardest placement for the pairing.  The
 * Cauchy-Schwarz split gives |E[X_n Z]| <= (1/n)||Z||_2 + M ||Z 1_{A_n}||_2
 * with M = sup ||X_n||_2; both sides are reported and the bound is checked
 * at every (n, k).  Each fixed rung has a 1/2^k resolution floor; the decay
 * to zero is carried by the ladder, not claimed at a single scale.
 */
inline Bigexamp1Report gallery_bigexamp1(const std::vector<std::size_t>& exponents = {6, 8,
                                                                                      10,
                                                                                      12},
                                         std::size_t horizon = 64, std::uint64_t seed = 1) {
    if (exponents.empty() || horizon < 8)
        throw std::invalid_argument("gallery_bigexamp1: need a ladder and horizon >= 8");
    Bigexamp1Report rep;
    const RiNorm l2 = RiNorm::lp(2.0);
    Rng rng(seed);

    for (std::size_t k : exponents) {
        if (k > 20) throw std::invalid_argument("gallery_bigexamp1: rung too fine");
        const std::size_t m = std::size_t{1} << k;
        const auto space = uniform_space<double>(m);

        std::vector<double> z(m);
        for (std::size_t j = 0; j < m; ++j)
            z[j] = std::pow(static_cast<double>(j + 1) / static_cast<double>(m), -0.25);
        RandomVariable<double> zraw(space, z);
        const double raw_l2 = l2(zraw);
        const RandomVariable<double> Z = zraw.map([raw_l2](double v) { return v / raw_l2; });

        rep.ladder.push_back(m);
        rep.z_l2_raw.push_back(raw_l2);
        rep.z_sup.push_back(max_abs(Z));

        double head_max = 0.0, tail_max = 0.0, m_bound = 0.0;
        std::vector<double> pairings(horizon), tail_bounds(horizon);
        for (std::size_t n = 1; n <= horizon; ++n) {
            const std::size_t kn = std::max<std::size_t>(1, m / n);
            const double mass = static_cast<double>(kn) / static_cast<double>(m);
            const double u = rng.uniform(0.4, 0.9);
            const double v = rng.uniform(0.0, 1.0);
            std::vector<double> vals(m, 0.0);
            const double height = u / std::sqrt(mass);
            for (std::size_t j = 0; j < kn; ++j) vals[j] = height;
            for (std::size_t j = kn; j < m; ++j)
                vals[j] = (v / static_cast<double>(n)) * rng.uniform(-1.0, 1.0);
            RandomVariable<double> xn(space, std::move(vals));
            m_bound = std::max(m_bound, l2(xn));

            double pairing = 0.0;
            for (std::size_t j = 0; j < m; ++j)
                pairing += xn[j] * Z[j] / static_cast<double>(m);
            pairings[n - 1] = std::abs(pairing);

            std::vector<double> masked(m, 0.0);
            for (std::size_t j = 0; j < kn; ++j) masked[j] = Z[j];
            tail_bounds[n - 1] = l2(RandomVariable<double>(space, std::move(masked)));
        }
        for (std::size_t n = 1; n <= horizon; ++n) {
            const double bound = (1.0 / static_cast<double>(n)) * 1.0 +
                                 m_bound * tail_bounds[n - 1];
            if (pairings[n - 1] > bound + 1e-12) rep.bound_holds = false;
            if (n <= horizon / 4) head_max = std::max(head_max, pairings[n - 1]);
            if (n > horizon / 2) tail_max = std::max(tail_max, pairings[n - 1]);
        }
        rep.pairing_head.push_back(head_max);
        rep.pairing_tail.push_back(tail_max);
        const std::size_t ts = horizon / 2 + 1;
        const double bound_at_tail = 1.0 / static_cast<double>(ts) +
                                     m_bound * tail_bounds[ts - 1];
        if (tail_max > bound_at_tail + 1e-12) rep.pairings_vanish = false;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// consequence of the vanishing associate fundamental function
// ---------------------------------------------------------------------------

struct PstarConsequenceReport {
    bool property_star_holds = false;
    double star_slope = 0.0;   ///< fitted log-log decay of ||1_A||_*
    std::size_t trials = 0;
    double max_tail_mean = 0.0; ///< max |E[X_n]| over the tail half, holds branch
    bool consequence_ok = false;
    std::optional<Bigexamp2Report> counterexample; ///< fails branch only
    double counterexample_gap = 0.0;
};

/**
 * @brief Checks that vanishing small-set associate norms force E[X_n] -> 0
 * along norm-bounded a.s.-null sequences.
 *
 * The sequences are unit-norm spikes on sets of mass 2^-j (represented by
 * their two-point laws; on the underlying interval these are nested
 * shrinking blocks, so the convergence is genuinely a.s.): the spike height
 * is 1/||1_A||, hence |E[X_j]| = P(A)/||1_A||, which is exactly the
 * associate fundamental value the star probe measures.  When the star probe
 * reports "holds" the tail means must vanish; when it reports "fails" (L1,
 * where the spike mean is constant 1) the constant-norm spike gallery is
 * attached as the counterexample.
 */
inline PstarConsequenceReport pstar_consequence_probe(const RiNorm& norm, std::size_t trials,
                                                      std::size_t horizon = 200,
                                                      std::uint64_t seed = 1) {
    if (trials == 0)
        throw std::invalid_argument("pstar_consequence_probe: trials must be >= 1");
    PstarConsequenceReport rep;
    rep.trials = trials;

    const PropertyStarReport star =
        property_star_probe(norm, {0.5, 1.0 / 8, 1.0 / 64, 1.0 / 512, 1.0 / 4096});
    rep.property_star_holds = star.holds;
    rep.star_slope = star.loglog_slope;

    if (!star.holds) {
        rep.counterexample = gallery_bigexamp2(8);
        rep.counterexample_gap = rep.counterexample->gap;
        rep.consequence_ok = rep.counterexample_gap >= 1.0 - 1e-9;
        return rep;
    }

    Rng rng(seed);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const double u = rng.uniform(0.25, 1.0);
        const std::size_t phase = rng.index(8);
        for (std::size_t j = horizon / 2 + 1; j <= horizon; ++j) {
            const int e = static_cast<int>(std::min<std::size_t>(j + phase, 500));
            const double mass = std::ldexp(1.0, -e);
            const double mean = u * mass / indicator_norm(norm, mass);
            rep.max_tail_mean = std::max(rep.max_tail_mean, mean);
        }
    }
    rep.consequence_ok = rep.max_tail_mean < 1e-3;
    return rep;
}

} // namespace riskconv
