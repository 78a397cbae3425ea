#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "fitter.hpp"
#include "io.hpp"
#include "matrix.hpp"
#include "random.hpp"

namespace l0de {

/// Evenly spaced points lo, ..., hi along one axis.
struct AxisGrid {
    double lo = 0;
    double hi = 0;
    std::size_t points = 0;

    double at(std::size_t k) const {
        if (points == 1) return lo;
        return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    }
};

/// Parses "lo:hi:n".
inline AxisGrid parse_axis_grid(std::string_view spec) {
    auto bad = [&] { return Error("invalid grid '" + std::string(spec) + "': expected lo:hi:n with lo < hi and n >= 2"); };
    const auto a = spec.find(':');
    if (a == std::string_view::npos) throw bad();
    const auto b = spec.find(':', a + 1);
    if (b == std::string_view::npos) throw bad();
    AxisGrid g;
    const auto lo = io_detail::parse_double(spec.substr(0, a));
    const auto hi = io_detail::parse_double(spec.substr(a + 1, b - a - 1));
    if (!lo || !hi) throw bad();
    g.lo = *lo;
    g.hi = *hi;
    const auto tail = spec.substr(b + 1);
    auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), g.points);
    if (ec != std::errc() || ptr != tail.data() + tail.size()) throw bad();
    if (!(g.lo < g.hi) || g.points < 2 || !std::isfinite(g.lo) || !std::isfinite(g.hi)) throw bad();
    return g;
}

/// Everything G depends on once the variances are fixed.
struct LandscapeProblem {
    std::string name = "custom";
    Matrix mu_prime;
    std::vector<double> sigma2;
    std::vector<double> alpha;
    std::vector<std::size_t> sizes;
};

inline LandscapeProblem landscape_problem(const ModelFit& fit) {
    return {"data", fit.mu_prime, fit.sigma2, fit.alpha, fit.groups.sizes()};
}

/**
 * Synthetic settings with mu'_si ~ N(0, 1), sigma2_i = 1 and m = 100.
 *
 * - figure1a, figure1b: two groups, lambda_i = 0.2 and 1. Group sizes 10 + 10
 *   are used to translate lambda into alpha = lambda^2 n1 n2 / (2 n).
 * - figure2a, figure2b: three groups of 10, alpha_i = 1 and 5.
 */
inline LandscapeProblem figure_problem(std::string_view name, std::uint64_t seed = 1) {
    std::size_t S;
    double alpha;
    const std::vector<std::size_t> ten{10, 10, 10};
    if (name == "figure1a" || name == "figure1b") {
        S = 2;
        const double lambda = name == "figure1a" ? 0.2 : 1.0;
        alpha = lambda * lambda * 10.0 * 10.0 / (2.0 * 20.0);
    } else if (name == "figure2a" || name == "figure2b") {
        S = 3;
        alpha = name == "figure2a" ? 1.0 : 5.0;
    } else {
        throw Error("unknown landscape figure '" + std::string(name) + "'");
    }
    const std::size_t m = 100;
    LandscapeProblem p{std::string(name), Matrix(m, S), std::vector<double>(m, 1.0), std::vector<double>(m, alpha), std::vector<std::size_t>(ten.begin(), ten.begin() + static_cast<std::ptrdiff_t>(S))};
    Rng rng(seed);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t i = 0; i < m; ++i) p.mu_prime(i, s) = rng.normal();
    }
    return p;
}

/// Replaces every alpha by +infinity, so that no gene is ever capped.
inline LandscapeProblem without_cap(LandscapeProblem p) {
    for (auto& a : p.alpha) a = std::numeric_limits<double>::infinity();
    return p;
}

/// Default axis: the range outside which every gene is capped, padded by one unit when no gene can be.
inline AxisGrid default_axis(const LandscapeProblem& p, std::size_t s, std::size_t points) {
    double dmin = std::numeric_limits<double>::infinity(), dmax = -dmin, reach = 0;
    const double n0 = static_cast<double>(p.sizes[0]), ns = static_cast<double>(p.sizes[s]);
    for (std::size_t i = 0; i < p.mu_prime.rows(); ++i) {
        const double delta = p.mu_prime(i, s) - p.mu_prime(i, 0);
        dmin = std::min(dmin, delta);
        dmax = std::max(dmax, delta);
        const double lam = std::sqrt(2 * p.sigma2[i] * p.alpha[i] * (n0 + ns) / (n0 * ns));
        if (std::isfinite(lam)) reach = std::max(reach, lam);
    }
    if (reach == 0) reach = 1;
    return {dmin - reach, dmax + reach, points};
}

struct Landscape {
    std::size_t n_groups = 2;
    /// S = 2: columns d, G, G_prime. S = 3: columns d2, d3, G.
    std::vector<std::vector<double>> rows;
    /// The exact minimizer.
    GMinimum minimum;
    /// Best grid point and its value.
    std::vector<double> grid_argmin;
    double grid_min = std::numeric_limits<double>::infinity();
};

/// Evaluates G on a grid (the same axis for d2 and d3 when S = 3) and locates its minimizer.
inline Landscape export_G_landscape(const LandscapeProblem& p, const AxisGrid& axis, Solver solver = Solver::automatic) {
    const std::size_t S = p.mu_prime.cols();
    if (S != 2 && S != 3) {
        throw Error("landscape export requires 2 or 3 groups");
    }
    if (axis.points < 1) {
        throw Error("landscape grid is empty");
    }
    Landscape out;
    out.n_groups = S;
    out.minimum = minimize_G(p.mu_prime, p.sigma2, p.alpha, p.sizes, solver);

    auto consider = [&](const std::vector<double>& d, double v) {
        if (v < out.grid_min) {
            out.grid_min = v;
            out.grid_argmin.assign(d.begin() + 1, d.end());
        }
    };
    std::vector<double> d(S, 0.0);
    if (S == 2) {
        auto lambda = lambda_from_alpha(p.alpha, p.sigma2, p.sizes[0], p.sizes[1]);
        out.rows.reserve(axis.points);
        for (std::size_t k = 0; k < axis.points; ++k) {
            d[1] = axis.at(k);
            const double G = evaluate_G(p.mu_prime, p.sigma2, p.alpha, p.sizes, d);
            out.rows.push_back({d[1], G, evaluate_G_prime(p.mu_prime, p.sigma2, lambda, d[1])});
            consider(d, G);
        }
    } else {
        out.rows.reserve(axis.points * axis.points);
        for (std::size_t a = 0; a < axis.points; ++a) {
            d[1] = axis.at(a);
            for (std::size_t b = 0; b < axis.points; ++b) {
                d[2] = axis.at(b);
                const double G = evaluate_G(p.mu_prime, p.sigma2, p.alpha, p.sizes, d);
                out.rows.push_back({d[1], d[2], G});
                consider(d, G);
            }
        }
    }
    return out;
}

/// CSV with a leading `# minimizer` comment line, then the header and one row per grid point.
inline void write_landscape_csv(std::ostream& os, const Landscape& l) {
    os << "# minimizer";
    for (std::size_t s = 1; s < l.minimum.d.size(); ++s) os << " d" << s + 1 << '=' << format_double(l.minimum.d[s]);
    os << " G=" << format_double(l.minimum.value) << '\n';
    os << (l.n_groups == 2 ? "d,G,G_prime\n" : "d2,d3,G\n");
    for (const auto& row : l.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) os << ',';
            os << format_double(row[c]);
        }
        os << '\n';
    }
}

} // namespace l0de
