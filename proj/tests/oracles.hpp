#pragma once

// Reference computations used to freeze expected values for the test suite.
// Everything here is written directly from the defining formulas, with no
// include of the library under test, so that a test comparing the library
// against these routines exercises two independent code paths.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace oracle {

// P(X < t) by direct enumeration.
inline double prob_below(const std::vector<double>& values,
                         const std::vector<double>& probs, double t) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] < t) s += probs[i];
    return s;
}

// sup{ t : P(X < t) <= u }.  The supremum is attained at one of the atom
// values, so scan the distinct values from above.
inline double quantile(const std::vector<double>& values,
                       const std::vector<double>& probs, double u) {
    std::vector<double> distinct(values);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (auto it = distinct.rbegin(); it != distinct.rend(); ++it)
        if (prob_below(values, probs, *it) <= u) return *it;
    return distinct.front();
}

inline double var_alpha(const std::vector<double>& values,
                        const std::vector<double>& probs, double alpha) {
    return -quantile(values, probs, alpha);
}

// (1/alpha) * integral_0^alpha var_beta dbeta by midpoint Riemann sum.  The
// integrand is a step function, so the midpoint rule converges like 1/n; at
// n = 4e6 the result carries ~1e-7 absolute error on unit-scale inputs,
// enough to confirm exact piecewise values.
inline double es_riemann(const std::vector<double>& values,
                         const std::vector<double>& probs, double alpha,
                         std::size_t n = 4000000) {
    double acc = 0.0;
    const double h = alpha / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        acc += var_alpha(values, probs, (static_cast<double>(i) + 0.5) * h);
    return acc * h / alpha;
}

// Same integral evaluated exactly from the sorted distribution.  Kept as a
// second closed-form route; es_riemann and es_exact must agree.
inline double es_exact(const std::vector<double>& values,
                       const std::vector<double>& probs, double alpha) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    double cum = 0.0, integral = 0.0;
    for (std::size_t k : idx) {
        const double lo = cum, hi = cum + probs[k];
        const double take = std::max(0.0, std::min(alpha, hi) - lo);
        integral += values[k] * take;
        cum = hi;
        if (cum >= alpha) break;
    }
    return -integral / alpha;
}

inline double mean(const std::vector<double>& values,
                   const std::vector<double>& probs) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * probs[i];
    return s;
}

inline double entropic(const std::vector<double>& values,
                       const std::vector<double>& probs, double gamma) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        s += probs[i] * std::exp(-values[i] / gamma);
    return gamma * std::log(s);
}

// E[w * (X + m*S)^-]
inline double budget_charge(const std::vector<double>& x,
                            const std::vector<double>& probs,
                            const std::vector<double>& w,
                            const std::vector<double>& s, double m) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        acc += probs[i] * w[i] * std::max(0.0, -(x[i] + m * s[i]));
    return acc;
}

// inf{ m : E[w*(X+mS)^-] <= c } by coarse grid scan plus bisection on the
// monotone acceptance predicate.
inline double acceptance_threshold_grid(const std::vector<double>& x,
                                        const std::vector<double>& probs,
                                        const std::vector<double>& w,
                                        const std::vector<double>& s, double c,
                                        double m_lo = -64.0, double m_hi = 64.0,
                                        int grid = 4097, int bisect = 200) {
    auto accepted = [&](double m) { return budget_charge(x, probs, w, s, m) <= c; };
    if (!accepted(m_hi)) throw std::runtime_error("oracle: top of grid not accepted");
    double lo = m_lo, hi = m_hi;
    if (accepted(lo)) return -std::numeric_limits<double>::infinity();
    const double h = (m_hi - m_lo) / (grid - 1);
    for (int i = 1; i < grid; ++i) {
        const double m = m_lo + i * h;
        if (accepted(m)) { hi = m; lo = m - h; break; }
    }
    for (int i = 0; i < bisect; ++i) {
        const double mid = 0.5 * (lo + hi);
        (accepted(mid) ? hi : lo) = mid;
    }
    return hi;
}

// min over per-atom grids of rho1(Y) + rho2(X-Y); used only on tiny fixtures.
using Measure = std::function<double(const std::vector<double>&,
                                     const std::vector<double>&)>;

inline double infconv_grid(const Measure& rho1, const Measure& rho2,
                           const std::vector<double>& x,
                           const std::vector<double>& probs, int points) {
    const double xmin = *std::min_element(x.begin(), x.end());
    const double xmax = *std::max_element(x.begin(), x.end());
    const double range = std::max(1e-12, xmax - xmin);
    const double lo = xmin - range, hi = xmax + range;
    const double step = (hi - lo) / (points - 1);
    const std::size_t n = x.size();
    std::vector<int> ix(n, 0);
    std::vector<double> y(n), z(n);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = lo + ix[i] * step;
            z[i] = x[i] - y[i];
        }
        best = std::min(best, rho1(y, probs) + rho2(z, probs));
        std::size_t k = 0;
        while (k < n && ++ix[k] == points) ix[k++] = 0;
        if (k == n) break;
    }
    return best;
}

} // namespace oracle
