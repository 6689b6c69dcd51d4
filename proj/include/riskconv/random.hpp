#pragma once

#include "riskconv/space.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace riskconv {

/**
 * @brief Seeded generator with portable derived draws.
 *
 * mt19937_64 output is fixed by the standard and the uniform draws below are
 * plain arithmetic on the raw words, so a seed reproduces the same trial
 * sequence on every platform, which keeps JSON reports byte-identical.
 */
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t raw() { return eng_(); }

    /// uniform on [0,1) with 53 random bits
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    /// uniform index in [0, n)
    std::size_t index(std::size_t n) {
        const std::size_t i = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    bool coin() { return (eng_() & 1u) != 0; }

  private:
    std::mt19937_64 eng_;
};

/// Random space with n atoms; weights are either uniform or normalized
/// positive draws.
inline SpacePtr<double> random_space(Rng& rng, std::size_t n, bool uniform_weights) {
    if (uniform_weights) return uniform_space<double>(n);
    std::vector<double> w(n);
    double total = 0.0;
    for (double& v : w) {
        v = 0.05 + rng.uniform01();
        total += v;
    }
    for (double& v : w) v /= total;
    // renormalize the largest entry so the sum is exact enough for validation
    double sum = 0.0;
    for (double v : w) sum += v;
    w.back() += 1.0 - sum;
    return make_space<double>(std::move(w));
}

inline RandomVariable<double> random_variable(Rng& rng, const SpacePtr<double>& sp,
                                              double lo = -5.0, double hi = 5.0) {
    std::vector<double> values(sp->size());
    for (double& v : values) v = rng.uniform(lo, hi);
    return RandomVariable<double>(sp, std::move(values));
}

/// Random partition: atoms are shuffled and cut into 1..max_blocks runs.
inline Partition random_partition(Rng& rng, std::size_t atom_count, std::size_t max_blocks) {
    std::vector<std::size_t> order(atom_count);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = atom_count; i > 1; --i)
        std::swap(order[i - 1], order[rng.index(i)]);
    const std::size_t blocks = 1 + rng.index(std::min(max_blocks, atom_count));
    std::vector<std::vector<std::size_t>> out(blocks);
    for (std::size_t i = 0; i < atom_count; ++i)
        out[i % blocks].push_back(order[i]);
    out.erase(std::remove_if(out.begin(), out.end(), [](const auto& b) { return b.empty(); }),
              out.end());
    return Partition(atom_count, std::move(out));
}

/// Random permutation image of X on its own (uniform) space.
inline RandomVariable<double> random_rearrangement(Rng& rng, const RandomVariable<double>& x) {
    std::vector<double> values(x.values());
    for (std::size_t i = values.size(); i > 1; --i)
        std::swap(values[i - 1], values[rng.index(i)]);
    return RandomVariable<double>(x.space(), std::move(values));
}

} // namespace riskconv
