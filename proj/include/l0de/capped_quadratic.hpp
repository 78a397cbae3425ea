#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "error.hpp"

/**
 * @file capped_quadratic.hpp
 *
 * @brief Exact global minimization of a sum of truncated quadratics on the real line.
 *
 * Each term is min(curvature * (t - center)^2 + base, cap). The sum is
 * continuous and piecewise quadratic with breakpoints where a term reaches its
 * cap, so its global minimum is found by sweeping the sorted breakpoints and
 * minimizing the active quadratic on every interval.
 */

namespace l0de {

struct CappedQuadratic {
    double curvature = 1;
    double center = 0;
    double base = 0;
    /// May be +infinity, in which case the term is never capped.
    double cap = std::numeric_limits<double>::infinity();

    double operator()(double t) const {
        const double u = t - center;
        return std::min(curvature * u * u + base, cap);
    }

    /// Half-width of the region where the term is below its cap (0 if never, +inf if always).
    double radius() const {
        if (!(base < cap)) return 0;
        if (std::isinf(cap)) return std::numeric_limits<double>::infinity();
        return std::sqrt((cap - base) / curvature);
    }
};

inline double evaluate_capped_sum(std::span<const CappedQuadratic> terms, double t) {
    double total = 0;
    for (const auto& q : terms) {
        total += q(t);
    }
    return total;
}

struct LineMinimum {
    double t = 0;
    double value = 0;
};

/**
 * Global minimizer of sum_k terms[k](t). Among (numerically) tied minima the
 * smallest t is returned.
 */
inline LineMinimum minimize_capped_sum(std::span<const CappedQuadratic> terms) {
    constexpr double inf = std::numeric_limits<double>::infinity();

    struct Event {
        double at;
        bool enter;
        std::size_t term;
    };
    std::vector<Event> events;
    events.reserve(2 * terms.size());
    std::vector<double> radius(terms.size());

    double A = 0, B = 0, C = 0; // active part: A t^2 - 2 B t + C
    double K = 0;               // capped constants
    double magnitude = 1;
    for (std::size_t k = 0; k < terms.size(); ++k) {
        const auto& q = terms[k];
        if (!(q.curvature > 0) || !std::isfinite(q.curvature) || !std::isfinite(q.center) || !std::isfinite(q.base)) {
            throw Error("minimize_capped_sum: terms need finite centre and base and positive curvature");
        }
        radius[k] = q.radius();
        if (radius[k] == 0) {
            K += q.cap;
            magnitude += std::fabs(q.cap);
        } else if (std::isinf(radius[k])) {
            A += q.curvature;
            B += q.curvature * q.center;
            C += q.curvature * q.center * q.center + q.base;
            magnitude += q.curvature * q.center * q.center + q.base;
        } else {
            K += q.cap;
            magnitude += std::fabs(q.cap) + q.curvature * q.center * q.center;
            events.push_back({q.center - radius[k], true, k});
            events.push_back({q.center + radius[k], false, k});
        }
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.at < b.at; });

    struct Candidate {
        double lo, hi, t, approx;
    };
    std::vector<Candidate> candidates;
    candidates.reserve(events.size() + 1);

    auto pick = [&](double lo, double hi, double a, double b) {
        if (a > 0) {
            return std::clamp(b / a, lo, hi);
        }
        if (std::isfinite(lo)) return lo;
        if (std::isfinite(hi)) return hi;
        return 0.0;
    };

    double lo = -inf;
    std::size_t e = 0;
    while (true) {
        const double hi = e < events.size() ? events[e].at : inf;
        const double t = pick(lo, hi, A, B);
        candidates.push_back({lo, hi, t, A * t * t - 2 * B * t + C + K});
        if (e >= events.size()) {
            break;
        }
        while (e < events.size() && events[e].at == hi) {
            const auto& q = terms[events[e].term];
            const double sign = events[e].enter ? 1.0 : -1.0;
            A += sign * q.curvature;
            B += sign * q.curvature * q.center;
            C += sign * (q.curvature * q.center * q.center + q.base);
            K -= sign * q.cap;
            ++e;
        }
        lo = hi;
    }

    double best_approx = inf;
    for (const auto& c : candidates) {
        best_approx = std::min(best_approx, c.approx);
    }
    // The running sums drift by rounding; re-solve every near-optimal interval from scratch.
    const double slack = 1e-9 * magnitude;

    LineMinimum best{0, inf};
    for (const auto& c : candidates) {
        if (!(c.approx <= best_approx + slack)) {
            continue;
        }
        double probe;
        if (std::isfinite(c.lo) && std::isfinite(c.hi)) probe = 0.5 * (c.lo + c.hi);
        else if (std::isfinite(c.hi)) probe = c.hi - 1;
        else if (std::isfinite(c.lo)) probe = c.lo + 1;
        else probe = 0;

        double a = 0, b = 0;
        for (std::size_t k = 0; k < terms.size(); ++k) {
            if (std::fabs(probe - terms[k].center) < radius[k]) {
                a += terms[k].curvature;
                b += terms[k].curvature * terms[k].center;
            }
        }
        const double t = pick(c.lo, c.hi, a, b);
        const double value = evaluate_capped_sum(terms, t);
        const double tie = 1e-12 * (1 + std::fabs(value));
        if (value < best.value - tie || (std::fabs(value - best.value) <= tie && t < best.t)) {
            best = {t, value};
        }
    }
    return best;
}

} // namespace l0de
