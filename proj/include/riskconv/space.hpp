#pragma once

#include "riskconv/rational.hpp"

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace riskconv {

/**
 * @brief Finite probability space: atoms 0..n-1 with strictly positive
 * weights summing to one.
 *
 * Zero-probability atoms are rejected rather than tolerated so that
 * conditional expectations and quantile partitions never divide by zero and
 * every event written as a set of atom indices has positive probability.
 */
template <class S> class FiniteSpace {
  public:
    explicit FiniteSpace(std::vector<S> probs) : probs_(std::move(probs)) {
        if (probs_.empty()) throw std::invalid_argument("FiniteSpace: no atoms");
        S total(0);
        for (const S& p : probs_) {
            if (!(p > S(0))) throw std::invalid_argument("FiniteSpace: weights must be > 0");
            total += p;
        }
        if constexpr (scalar_traits<S>::exact) {
            if (total != S(1))
                throw std::invalid_argument("FiniteSpace: weights must sum to 1 exactly");
        } else {
            if (scalar_traits<S>::abs(total - S(1)) > 1e-12)
                throw std::invalid_argument("FiniteSpace: weights must sum to 1 within 1e-12");
        }
    }

    std::size_t size() const { return probs_.size(); }
    const S& prob(std::size_t i) const { return probs_[i]; }

    bool uniform() const {
        for (const S& p : probs_)
            if (p != probs_.front()) return false;
        return true;
    }
    const std::vector<S>& probs() const { return probs_; }

  private:
    std::vector<S> probs_;
};

template <class S> using SpacePtr = std::shared_ptr<const FiniteSpace<S>>;

/// n equally likely atoms; weights are exactly 1/n in rational mode.
template <class S> SpacePtr<S> uniform_space(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_space: n must be >= 1");
    std::vector<S> probs(n, scalar_traits<S>::ratio(1, static_cast<long>(n)));
    return std::make_shared<FiniteSpace<S>>(std::move(probs));
}

template <class S> SpacePtr<S> make_space(std::vector<S> probs) {
    return std::make_shared<FiniteSpace<S>>(std::move(probs));
}

/// Two spaces agree when they are the same object or carry identical weights.
template <class S>
bool same_space(const SpacePtr<S>& a, const SpacePtr<S>& b) {
    if (a == b) return true;
    if (!a || !b || a->size() != b->size()) return false;
    return a->probs() == b->probs();
}

/**
 * @brief Random variable on a finite space: one value per atom.
 *
 * The space is held by shared pointer; variables are immutable values and
 * all operations return fresh objects, which is what makes parallel trial
 * sweeps safe without locks.
 */
template <class S> class RandomVariable {
  public:
    RandomVariable(SpacePtr<S> space, std::vector<S> values)
        : space_(std::move(space)), values_(std::move(values)) {
        if (!space_) throw std::invalid_argument("RandomVariable: null space");
        if (values_.size() != space_->size())
            throw std::invalid_argument("RandomVariable: one value per atom required");
    }

    static RandomVariable constant(SpacePtr<S> space, const S& v) {
        std::vector<S> values(space->size(), v);
        return RandomVariable(std::move(space), std::move(values));
    }

    const SpacePtr<S>& space() const { return space_; }
    std::size_t size() const { return values_.size(); }
    const S& operator[](std::size_t i) const { return values_[i]; }
    const std::vector<S>& values() const { return values_; }

    template <class F> RandomVariable map(F&& f) const {
        std::vector<S> out(values_.size());
        for (std::size_t i = 0; i < values_.size(); ++i) out[i] = f(values_[i]);
        return RandomVariable(space_, std::move(out));
    }

  private:
    SpacePtr<S> space_;
    std::vector<S> values_;
};

template <class S>
void require_same_space(const RandomVariable<S>& a, const RandomVariable<S>& b) {
    if (!same_space(a.space(), b.space()))
        throw std::invalid_argument("random variables live on different spaces");
}

template <class S>
RandomVariable<S> zip(const RandomVariable<S>& a, const RandomVariable<S>& b,
                      S (*op)(const S&, const S&)) {
    require_same_space(a, b);
    std::vector<S> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i]);
    return RandomVariable<S>(a.space(), std::move(out));
}

template <class S>
RandomVariable<S> operator+(const RandomVariable<S>& a, const RandomVariable<S>& b) {
    return zip<S>(a, b, +[](const S& x, const S& y) { return S(x + y); });
}

template <class S>
RandomVariable<S> operator-(const RandomVariable<S>& a, const RandomVariable<S>& b) {
    return zip<S>(a, b, +[](const S& x, const S& y) { return S(x - y); });
}

template <class S>
RandomVariable<S> operator*(const RandomVariable<S>& a, const RandomVariable<S>& b) {
    return zip<S>(a, b, +[](const S& x, const S& y) { return S(x * y); });
}

template <class S> RandomVariable<S> operator-(const RandomVariable<S>& a) {
    return a.map([](const S& v) { return S(-v); });
}

template <class S> RandomVariable<S> operator+(const RandomVariable<S>& a, const S& m) {
    return a.map([&](const S& v) { return S(v + m); });
}

template <class S> RandomVariable<S> operator-(const RandomVariable<S>& a, const S& m) {
    return a.map([&](const S& v) { return S(v - m); });
}

template <class S> RandomVariable<S> operator*(const S& m, const RandomVariable<S>& a) {
    return a.map([&](const S& v) { return S(m * v); });
}

template <class S> S expectation(const RandomVariable<S>& x) {
    S acc(0);
    for (std::size_t i = 0; i < x.size(); ++i) acc += x.space()->prob(i) * x[i];
    return acc;
}

/// X^+ = max(X, 0)
template <class S> RandomVariable<S> pos_part(const RandomVariable<S>& x) {
    return x.map([](const S& v) { return v > S(0) ? v : S(0); });
}

/// X^- = max(-X, 0), so X = pos_part(X) - neg_part(X) with both parts >= 0.
template <class S> RandomVariable<S> neg_part(const RandomVariable<S>& x) {
    return x.map([](const S& v) { return v < S(0) ? S(-v) : S(0); });
}

template <class S> S max_abs(const RandomVariable<S>& x) {
    S best(0);
    for (std::size_t i = 0; i < x.size(); ++i)
        best = std::max(best, scalar_traits<S>::abs(x[i]));
    return best;
}

/**
 * @brief Law of a random variable: distinct values in increasing order with
 * their aggregated probabilities.
 */
template <class S> struct Distribution {
    std::vector<S> values; // strictly increasing
    std::vector<S> probs;  // positive, same length, sums to 1
};

template <class S> Distribution<S> distribution(const RandomVariable<S>& x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    Distribution<S> d;
    for (std::size_t k : order) {
        if (!d.values.empty() && d.values.back() == x[k]) {
            d.probs.back() += x.space()->prob(k);
        } else {
            d.values.push_back(x[k]);
            d.probs.push_back(x.space()->prob(k));
        }
    }
    return d;
}

/**
 * Equality in law.  The spaces of the two variables may differ.  Values and
 * probabilities are compared exactly in rational mode and within 1e-12
 * otherwise; merging of equal values inside each law is always exact.
 */
template <class S>
bool same_distribution(const RandomVariable<S>& x, const RandomVariable<S>& y) {
    const Distribution<S> a = distribution(x), b = distribution(y);
    if (a.values.size() != b.values.size()) return false;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if constexpr (scalar_traits<S>::exact) {
            if (a.values[i] != b.values[i] || a.probs[i] != b.probs[i]) return false;
        } else {
            if (scalar_traits<S>::abs(a.values[i] - b.values[i]) > 1e-12) return false;
            if (scalar_traits<S>::abs(a.probs[i] - b.probs[i]) > 1e-12) return false;
        }
    }
    return true;
}

/**
 * @brief Left-continuous quantile, sup{ t : P(X < t) <= u } for u in (0,1).
 *
 * On a discrete law with increasing values v_1 < ... < v_m and cumulative
 * masses F_j = P(X <= v_j), this is v_{j+1} for the largest j with F_j <= u
 * (F_0 = 0).  The sup form is chosen so that -quantile(X, alpha) coincides
 * with the inf-form value-at-risk inf{ m : P(X + m < 0) <= alpha } without
 * any tie adjustment.
 */
template <class S> S quantile(const RandomVariable<S>& x, const S& u) {
    if (!(u > S(0)) || !(u < S(1)))
        throw std::invalid_argument("quantile: u must lie in (0,1)");
    const Distribution<S> d = distribution(x);
    S cum(0);
    for (std::size_t j = 0; j < d.values.size(); ++j) {
        cum += d.probs[j];
        if (u < cum) return d.values[j];
    }
    return d.values.back(); // unreachable for u < 1; kept for float round-off
}

/**
 * @brief Partition of the atoms into disjoint covering blocks, each of
 * positive probability.  Blocks are sorted index lists.
 */
class Partition {
  public:
    Partition(std::size_t atom_count, std::vector<std::vector<std::size_t>> blocks)
        : atoms_(atom_count), blocks_(std::move(blocks)) {
        std::vector<bool> seen(atom_count, false);
        std::size_t covered = 0;
        for (auto& block : blocks_) {
            if (block.empty()) throw std::invalid_argument("Partition: empty block");
            std::sort(block.begin(), block.end());
            for (std::size_t i : block) {
                if (i >= atom_count || seen[i])
                    throw std::invalid_argument("Partition: blocks must be disjoint atom sets");
                seen[i] = true;
                ++covered;
            }
        }
        if (covered != atom_count)
            throw std::invalid_argument("Partition: blocks must cover all atoms");
    }

    static Partition trivial(std::size_t atom_count) {
        std::vector<std::size_t> all(atom_count);
        std::iota(all.begin(), all.end(), 0);
        return Partition(atom_count, {all});
    }

    static Partition singletons(std::size_t atom_count) {
        std::vector<std::vector<std::size_t>> blocks(atom_count);
        for (std::size_t i = 0; i < atom_count; ++i) blocks[i] = {i};
        return Partition(atom_count, blocks);
    }

    std::size_t atom_count() const { return atoms_; }
    std::size_t block_count() const { return blocks_.size(); }
    const std::vector<std::vector<std::size_t>>& blocks() const { return blocks_; }

  private:
    std::size_t atoms_;
    std::vector<std::vector<std::size_t>> blocks_;
};

/**
 * E[X | pi]: on each block the value is the probability-weighted block mean.
 * Exact in rational mode.  Tower property E[E[X|pi]] = E[X] and the crossed
 * version over refinements hold exactly by construction.
 */
template <class S>
RandomVariable<S> cond_expect(const RandomVariable<S>& x, const Partition& pi) {
    if (pi.atom_count() != x.size())
        throw std::invalid_argument("cond_expect: partition does not match the space");
    std::vector<S> out(x.size(), S(0));
    for (const auto& block : pi.blocks()) {
        // constant blocks short-circuit so level sets reproduce X verbatim
        bool constant = true;
        for (std::size_t i : block) constant = constant && x[i] == x[block.front()];
        if (constant) {
            for (std::size_t i : block) out[i] = x[i];
            continue;
        }
        S mass(0), acc(0);
        for (std::size_t i : block) {
            mass += x.space()->prob(i);
            acc += x.space()->prob(i) * x[i];
        }
        const S mean = acc / mass;
        for (std::size_t i : block) out[i] = mean;
    }
    return RandomVariable<S>(x.space(), std::move(out));
}

/**
 * @brief Partition adapted to X with at most k blocks.
 *
 * When X has at most k distinct values the blocks are exactly the level
 * sets, so cond_expect(X, pi) recovers X.  Otherwise the value range
 * [min X, max X] is sliced into k equal-width cells and each block is the
 * union of the level sets falling in one cell; every value lands in exactly
 * one cell, so blocks are sigma(X)-measurable, and the oscillation of X on
 * each block is at most (max X - min X)/k.
 */
template <class S>
Partition quantile_partition(const RandomVariable<S>& x, std::size_t k) {
    if (k == 0) throw std::invalid_argument("quantile_partition: k must be >= 1");
    const Distribution<S> d = distribution(x);
    const std::size_t m = d.values.size();

    // cell index per distinct value
    std::vector<std::size_t> cell(m, 0);
    if (m <= k) {
        std::iota(cell.begin(), cell.end(), 0);
    } else {
        const S lo = d.values.front();
        const S width = (d.values.back() - lo) / S(static_cast<long>(k));
        for (std::size_t j = 0; j < m; ++j) {
            std::size_t c = k - 1;
            if constexpr (scalar_traits<S>::exact) {
                const Rational q = (d.values[j] - lo) / width;
                const BigInt f = boost::multiprecision::numerator(q) /
                                 boost::multiprecision::denominator(q);
                c = std::min<std::size_t>(f.template convert_to<std::size_t>(), k - 1);
            } else {
                const double q = to_double(S(d.values[j] - lo)) / to_double(width);
                c = std::min<std::size_t>(static_cast<std::size_t>(std::max(0.0, q)), k - 1);
            }
            cell[j] = c;
        }
    }

    std::vector<std::vector<std::size_t>> by_cell(m <= k ? m : k);
    std::vector<std::size_t> value_index(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto it = std::lower_bound(d.values.begin(), d.values.end(), x[i]);
        value_index[i] = static_cast<std::size_t>(it - d.values.begin());
    }
    for (std::size_t i = 0; i < x.size(); ++i)
        by_cell[cell[value_index[i]]].push_back(i);
    by_cell.erase(std::remove_if(by_cell.begin(), by_cell.end(),
                                 [](const auto& b) { return b.empty(); }),
                  by_cell.end());
    return Partition(x.size(), std::move(by_cell));
}

/// Blocks of pi as level sets of a labeling variable, for measurability checks.
template <class S>
bool blocks_respect_levels(const RandomVariable<S>& x, const Partition& pi) {
    for (const auto& block : pi.blocks()) {
        for (std::size_t i : block)
            for (std::size_t j = 0; j < x.size(); ++j)
                if (x[j] == x[i]) {
                    // the whole level set of x[i] must sit in this block
                    if (std::find(block.begin(), block.end(), j) == block.end())
                        return false;
                }
    }
    return true;
}

} // namespace riskconv
