#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capped_quadratic.hpp"
#include "distributions.hpp"
#include "error.hpp"
#include "groups.hpp"
#include "ingest.hpp"
#include "matrix.hpp"
#include "variance.hpp"

/**
 * @file fitter.hpp
 *
 * @brief Joint normalization and differential-expression calls under an L0-penalized
 * Gaussian likelihood.
 *
 * The model is x_sij ~ N(mu_i + gamma_si + d_sj, sigma2_i) with gamma_1i = 0 and
 * d_11 = 0, penalized by alpha_i for every gene with a nonzero gamma. With the
 * variances held fixed the problem separates:
 *
 * 1. Within-group offsets d'_sj are sigma^-2 weighted means of x_sij - x_si1.
 * 2. Group means mu'_si average the offset-corrected data.
 * 3. The group offsets d_2..d_S minimize G(d) = sum_i min(g_i(d), alpha_i), where
 *    g_i is the between-group sum of squares of gene i after normalization.
 * 4. Gene i is differentially expressed unless g_i(d) < alpha_i.
 *
 * Step 3 is the only non-convex part. For two groups it is solved exactly by a
 * breakpoint sweep; for three groups by a dense grid followed by exact
 * coordinate-wise line minimization.
 */

namespace l0de {

enum class Solver {
    /// Two-group sweep for S = 2, grid search for S = 3.
    automatic,
    /// Two-group threshold form with lambda_i; requires S = 2.
    two_group,
    /// Generic route through g_i and alpha_i for any supported S.
    general,
};

/// Options for the S = 3 grid search.
struct GridOptions {
    std::size_t points = 400;
    double tolerance = 1e-8;
    int max_sweeps = 1000;
};

/******************************************
 *** Tuning parameters                  ***
 ******************************************/

/// alpha = ((S - 1)/2) F*_{1-q}(S - 1, n - S).
inline double alpha_from_q(double q, std::size_t n_groups, std::size_t n) {
    if (!(q > 0 && q < 1)) {
        throw Error("q must lie in (0, 1)");
    }
    if (n_groups < 2) {
        throw Error("at least two groups are required");
    }
    if (n <= n_groups) {
        throw Error("no residual degrees of freedom (n <= S)");
    }
    const double df1 = static_cast<double>(n_groups - 1);
    return 0.5 * df1 * f_quantile(1.0 - q, df1, static_cast<double>(n - n_groups));
}

/// The two-group form, alpha = t*_{1-q/2}(n1 + n2 - 2)^2 / 2.
inline double alpha_from_q_t(double q, std::size_t n1, std::size_t n2) {
    if (!(q > 0 && q < 1)) {
        throw Error("q must lie in (0, 1)");
    }
    if (n1 + n2 <= 2) {
        throw Error("no residual degrees of freedom (n <= S)");
    }
    const double t = t_quantile(1.0 - 0.5 * q, static_cast<double>(n1 + n2 - 2));
    return 0.5 * t * t;
}

/// lambda_i = sqrt(2 n sigma2_i alpha_i / (n1 n2)).
inline std::vector<double> lambda_from_alpha(std::span<const double> alpha, std::span<const double> sigma2, std::size_t n1, std::size_t n2) {
    if (alpha.size() != sigma2.size()) {
        throw Error("lambda_from_alpha: alpha and sigma2 differ in length");
    }
    const double n = static_cast<double>(n1 + n2);
    const double scale = 2.0 * n / (static_cast<double>(n1) * static_cast<double>(n2));
    std::vector<double> out(alpha.size());
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        out[i] = std::sqrt(scale * sigma2[i] * alpha[i]);
    }
    return out;
}

/******************************************
 *** Closed-form pieces                 ***
 ******************************************/

namespace fitter_detail {

inline void check_inputs(const Matrix& x, const GroupLayout& groups, std::span<const double> sigma2) {
    if (x.cols() != groups.n_samples()) {
        throw Error("group layout does not match the number of samples");
    }
    if (sigma2.size() != x.rows()) {
        throw Error("one variance per gene is required");
    }
    for (double v : sigma2) {
        if (!(v > 0) || !std::isfinite(v)) {
            throw Error("variances must be positive and finite");
        }
    }
}

} // namespace fitter_detail

/**
 * Within-group offsets d'_sj = sum_i (x_sij - x_si1)/sigma2_i / sum_i 1/sigma2_i,
 * indexed by sample column. The first member of every group gets exactly 0.
 */
inline std::vector<double> compute_dprime(const Matrix& x, const GroupLayout& groups, std::span<const double> sigma2) {
    fitter_detail::check_inputs(x, groups, sigma2);
    const std::size_t m = x.rows();
    double total_weight = 0;
    for (double v : sigma2) {
        total_weight += 1.0 / v;
    }
    std::vector<double> out(x.cols(), 0.0);
    for (std::size_t s = 0; s < groups.n_groups(); ++s) {
        auto cols = groups.members(s);
        const std::size_t ref = cols[0];
        for (std::size_t k = 1; k < cols.size(); ++k) {
            const std::size_t j = cols[k];
            double sum = 0;
            for (std::size_t i = 0; i < m; ++i) {
                sum += (x(i, j) - x(i, ref)) / sigma2[i];
            }
            out[j] = sum / total_weight;
        }
    }
    return out;
}

/// Group means of the offset-corrected data, mu'_si = mean_j (x_sij - d'_sj). Genes by groups.
inline Matrix compute_muprime(const Matrix& x, const GroupLayout& groups, std::span<const double> dprime) {
    if (dprime.size() != x.cols()) {
        throw Error("compute_muprime: one offset per sample is required");
    }
    Matrix out(x.rows(), groups.n_groups());
    for (std::size_t s = 0; s < groups.n_groups(); ++s) {
        auto cols = groups.members(s);
        const double ns = static_cast<double>(cols.size());
        for (std::size_t i = 0; i < x.rows(); ++i) {
            double sum = 0;
            for (auto j : cols) {
                sum += x(i, j) - dprime[j];
            }
            out(i, s) = sum / ns;
        }
    }
    return out;
}

/**
 * g_i(d) = (1/(2 sigma2_i)) { sum_s n_s (mu'_si - d_s)^2 - (1/n) [sum_s n_s (mu'_si - d_s)]^2 },
 * the increase in gene i's negative log-likelihood from forcing all its group
 * effects to zero. `d` has one entry per group with d[0] = 0.
 */
inline double g_statistic(std::span<const double> mu_prime_row, std::span<const double> d, std::span<const std::size_t> sizes, double sigma2) {
    const std::size_t S = mu_prime_row.size();
    double n = 0, sum = 0;
    for (std::size_t s = 0; s < S; ++s) {
        const double ns = static_cast<double>(sizes[s]);
        n += ns;
        sum += ns * (mu_prime_row[s] - d[s]);
    }
    // Centred form of the same quadratic; never negative.
    const double mean = sum / n;
    double ss = 0;
    for (std::size_t s = 0; s < S; ++s) {
        const double v = mu_prime_row[s] - d[s] - mean;
        ss += static_cast<double>(sizes[s]) * v * v;
    }
    return ss / (2.0 * sigma2);
}

/// G(d) = sum_i min(g_i(d), alpha_i).
inline double evaluate_G(const Matrix& mu_prime, std::span<const double> sigma2, std::span<const double> alpha, std::span<const std::size_t> sizes, std::span<const double> d) {
    double total = 0;
    for (std::size_t i = 0; i < mu_prime.rows(); ++i) {
        total += std::min(g_statistic(mu_prime.row(i), d, sizes, sigma2[i]), alpha[i]);
    }
    return total;
}

/// G'(d) = sum_i (1/sigma2_i) min((Delta_i - d)^2, lambda_i^2), the two-group objective in lambda form.
inline double evaluate_G_prime(const Matrix& mu_prime, std::span<const double> sigma2, std::span<const double> lambda, double d) {
    double total = 0;
    for (std::size_t i = 0; i < mu_prime.rows(); ++i) {
        const double r = mu_prime(i, 1) - mu_prime(i, 0) - d;
        total += std::min(r * r, lambda[i] * lambda[i]) / sigma2[i];
    }
    return total;
}

/******************************************
 *** Minimizing G                       ***
 ******************************************/

struct GMinimum {
    /// One entry per group, d[0] = 0.
    std::vector<double> d;
    /// G at `d`.
    double value = 0;
};

namespace fitter_detail {

inline void check_G_inputs(const Matrix& mu_prime, std::span<const double> sigma2, std::span<const double> alpha, std::span<const std::size_t> sizes) {
    const std::size_t S = mu_prime.cols();
    if (S < 2) {
        throw Error("at least two groups are required");
    }
    if (S > 3) {
        throw Error("exhaustive search only supported for low-dimensional cases (S <= 3)");
    }
    if (sizes.size() != S || sigma2.size() != mu_prime.rows() || alpha.size() != mu_prime.rows()) {
        throw Error("minimize_G: inconsistent input sizes");
    }
    if (mu_prime.rows() < 1) {
        throw Error("minimize_G: no genes");
    }
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (!(alpha[i] > 0)) {
            throw Error("alpha must be positive");
        }
        if (!(sigma2[i] > 0) || !std::isfinite(sigma2[i])) {
            throw Error("variances must be positive and finite");
        }
    }
}

/**
 * Restricts every g_i to the line through `d` along coordinate k, recovering
 * each quadratic from three evaluations of g_statistic.
 */
inline std::vector<CappedQuadratic> restrict_to_axis(const Matrix& mu_prime, std::span<const double> sigma2, std::span<const double> alpha, std::span<const std::size_t> sizes, std::span<const double> d, std::size_t k) {
    std::vector<double> probe(d.begin(), d.end());
    const double t0 = d[k];
    std::vector<CappedQuadratic> terms(mu_prime.rows());
    for (std::size_t i = 0; i < mu_prime.rows(); ++i) {
        auto row = mu_prime.row(i);
        probe[k] = t0;
        const double g0 = g_statistic(row, probe, sizes, sigma2[i]);
        probe[k] = t0 + 1;
        const double gp = g_statistic(row, probe, sizes, sigma2[i]);
        probe[k] = t0 - 1;
        const double gm = g_statistic(row, probe, sizes, sigma2[i]);
        const double curvature = 0.5 * (gp + gm) - g0;
        const double slope = 0.5 * (gp - gm);
        if (!(curvature > 0)) {
            throw Error("g restricted to a coordinate axis is not strictly convex");
        }
        const double centre = t0 - slope / (2 * curvature);
        probe[k] = centre;
        const double base = std::max(0.0, g_statistic(row, probe, sizes, sigma2[i]));
        terms[i] = {curvature, centre, base, alpha[i]};
    }
    return terms;
}

inline GMinimum minimize_two_group_sweep(const Matrix& mu_prime, std::span<const double> sigma2, std::span<const double> alpha, std::span<const std::size_t> sizes) {
    auto lambda = lambda_from_alpha(alpha, sigma2, sizes[0], sizes[1]);
    std::vector<CappedQuadratic> terms(mu_prime.rows());
    for (std::size_t i = 0; i < mu_prime.rows(); ++i) {
        const double w = 1.0 / sigma2[i];
        terms[i] = {w, mu_prime(i, 1) - mu_prime(i, 0), 0.0, w * lambda[i] * lambda[i]};
    }
    auto best = minimize_capped_sum(terms);
    GMinimum out{{0.0, best.t}, 0.0};
    out.value = evaluate_G(mu_prime, sigma2, alpha, sizes, out.d);
    return out;
}

/// Solves the (S-1)-dimensional linear system in place by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_small(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t k = b.size();
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < k; ++r) {
            if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
        }
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        if (a[c][c] == 0) {
            throw Error("singular system");
        }
        for (std::size_t r = c + 1; r < k; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t cc = c; cc < k; ++cc) a[r][cc] -= f * a[c][cc];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(k);
    for (std::size_t r = k; r-- > 0;) {
        double v = b[r];
        for (std::size_t cc = r + 1; cc < k; ++cc) v -= a[r][cc] * x[cc];
        x[r] = v / a[r][r];
    }
    return x;
}

/**
 * Minimizer of sum over uncapped genes of g_i(d); g_i has the constant Hessian
 * (1/sigma2_i)(diag(n_s) - n n^T / n) in (d_2, ..., d_S).
 */
inline std::optional<std::vector<double>> active_set_minimizer(const Matrix& mu_prime, std::span<const double> sigma2, std::span<const double> alpha, std::span<const std::size_t> sizes, std::span<const double> d) {
    const std::size_t S = mu_prime.cols();
    const std::size_t k = S - 1;
    double n = 0;
    for (auto ns : sizes) n += static_cast<double>(ns);

    double weight = 0;
    std::vector<double> grad(k, 0.0);
    for (std::size_t i = 0; i < mu_prime.rows(); ++i) {
        auto row = mu_prime.row(i);
        if (!(g_statistic(row, d, sizes, sigma2[i]) < alpha[i])) {
            continue;
        }
        weight += 1.0 / sigma2[i];
        double sum = 0;
        for (std::size_t s = 0; s < S; ++s) sum += static_cast<double>(sizes[s]) * (row[s] - d[s]);
        const double mean = sum / n;
        for (std::size_t s = 1; s < S; ++s) {
            grad[s - 1] -= static_cast<double>(sizes[s]) * (row[s] - d[s] - mean) / sigma2[i];
        }
    }
    if (weight == 0) {
        return std::nullopt;
    }
    std::vector<std::vector<double>> hess(k, std::vector<double>(k));
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            const double na = static_cast<double>(sizes[a + 1]), nb = static_cast<double>(sizes[b + 1]);
            hess[a][b] = weight * ((a == b ? na : 0.0) - na * nb / n);
        }
    }
    for (auto& g : grad) g = -g;
    auto step = solve_small(hess, grad);
    std::vector<double> out(d.begin(), d.end());
    for (std::size_t a = 0; a < k; ++a) out[a + 1] += step[a];
    return out;
}

inline GMinimum coordinate_refine(const Matrix& mu_prime, std::span<const double> sigma2, std::span<const double> alpha, std::span<const std::size_t> sizes, std::vector<double> d, const GridOptions& options) {
    const std::size_t S = mu_prime.cols();
    double current = evaluate_G(mu_prime, sigma2, alpha, sizes, d);
    for (int round = 0; round < 50; ++round) {
        for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
            double max_change = 0;
            for (std::size_t k = 1; k < S; ++k) {
                auto terms = restrict_to_axis(mu_prime, sigma2, alpha, sizes, d, k);
                auto line = minimize_capped_sum(terms);
                auto trial = d;
                trial[k] = line.t;
                const double value = evaluate_G(mu_prime, sigma2, alpha, sizes, trial);
                if (value < current) {
                    max_change = std::max(max_change, std::fabs(trial[k] - d[k]));
                    d = std::move(trial);
                    current = value;
                }
            }
            if (max_change < options.tolerance) {
                break;
            }
        }

        // Coordinate moves can stall on a kink; jump to the stationary point of the current active set if that helps.
        auto polished = active_set_minimizer(mu_prime, sigma2, alpha, sizes, d);
        if (!polished) {
            break;
        }
        const double value = evaluate_G(mu_prime, sigma2, alpha, sizes, *polished);
        if (!(value < current - 1e-14 * (1 + std::fabs(current)))) {
            break;
        }
        d = std::move(*polished);
        current = value;
    }
    return {std::move(d), current};
}

inline GMinimum minimize_grid(const Matrix& mu_prime, std::span<const double> sigma2, std::span<const double> alpha, std::span<const std::size_t> sizes, const GridOptions& options) {
    const std::size_t S = mu_prime.cols();
    const std::size_t m = mu_prime.rows();
    if (options.points < 2) {
        throw Error("grid needs at least 2 points per axis");
    }

    // Beyond |d_s - Delta_si| > lambda_si gene i is capped whatever the other offsets are.
    std::vector<double> lo(S, 0.0), hi(S, 0.0);
    for (std::size_t s = 1; s < S; ++s) {
        double dmin = std::numeric_limits<double>::infinity(), dmax = -dmin, reach = 0;
        const double n0 = static_cast<double>(sizes[0]), ns = static_cast<double>(sizes[s]);
        for (std::size_t i = 0; i < m; ++i) {
            const double delta = mu_prime(i, s) - mu_prime(i, 0);
            dmin = std::min(dmin, delta);
            dmax = std::max(dmax, delta);
            const double lam = std::sqrt(2 * sigma2[i] * alpha[i] * (n0 + ns) / (n0 * ns));
            if (std::isfinite(lam)) reach = std::max(reach, lam);
        }
        if (reach == 0) {
            reach = 1 + (dmax - dmin);
        }
        lo[s] = dmin - reach;
        hi[s] = dmax + reach;
    }

    const std::size_t P = options.points;
    auto axis = [&](std::size_t s, std::size_t p) {
        return lo[s] + (hi[s] - lo[s]) * static_cast<double>(p) / static_cast<double>(P - 1);
    };

    std::vector<double> d(S, 0.0), best_d(S, 0.0);
    double best = std::numeric_limits<double>::infinity();
    if (S == 2) {
        for (std::size_t p = 0; p < P; ++p) {
            d[1] = axis(1, p);
            const double v = evaluate_G(mu_prime, sigma2, alpha, sizes, d);
            if (v < best) {
                best = v;
                best_d = d;
            }
        }
    } else {
        for (std::size_t p = 0; p < P; ++p) {
            d[1] = axis(1, p);
            for (std::size_t r = 0; r < P; ++r) {
                d[2] = axis(2, r);
                const double v = evaluate_G(mu_prime, sigma2, alpha, sizes, d);
                if (v < best) {
                    best = v;
                    best_d = d;
                }
            }
        }
    }
    return coordinate_refine(mu_prime, sigma2, alpha, sizes, best_d, options);
}

} // namespace fitter_detail

/**
 * Minimizes G(d_2, ..., d_S) = sum_i min(g_i(d), alpha_i).
 *
 * - `two_group` (S = 2): exact sweep over the breakpoints Delta_i +/- lambda_i of
 *   G'(d) = sum_i (1/sigma2_i) min((Delta_i - d)^2, lambda_i^2).
 * - `general`, S = 2: the same exact sweep, but with each g_i recovered from
 *   g_statistic and capped at alpha_i.
 * - `general`, S = 3: dense grid followed by exact coordinate-wise line minimization.
 *
 * Ties are broken towards the smallest d (lexicographically for S = 3).
 */
inline GMinimum minimize_G(const Matrix& mu_prime, std::span<const double> sigma2, std::span<const double> alpha, std::span<const std::size_t> sizes, Solver solver = Solver::automatic, const GridOptions& grid = {}) {
    fitter_detail::check_G_inputs(mu_prime, sigma2, alpha, sizes);
    const std::size_t S = mu_prime.cols();
    if (solver == Solver::two_group && S != 2) {
        throw Error("the two-group solver requires exactly two groups");
    }
    if (S == 2 && solver != Solver::general) {
        return fitter_detail::minimize_two_group_sweep(mu_prime, sigma2, alpha, sizes);
    }
    if (S == 2) {
        std::vector<double> origin{0.0, 0.0};
        auto terms = fitter_detail::restrict_to_axis(mu_prime, sigma2, alpha, sizes, origin, 1);
        auto line = minimize_capped_sum(terms);
        GMinimum out{{0.0, line.t}, 0.0};
        out.value = evaluate_G(mu_prime, sigma2, alpha, sizes, out.d);
        return out;
    }
    return fitter_detail::minimize_grid(mu_prime, sigma2, alpha, sizes, grid);
}

/******************************************
 *** Final estimates                    ***
 ******************************************/

struct Finalized {
    /// Genes by (S - 1); column s - 1 holds gamma_si for s >= 2.
    Matrix gamma;
    std::vector<double> mu;
    std::vector<int> tau;
    /// g_i at the fitted offsets.
    std::vector<double> g;
};

/**
 * Recovers gamma, mu and tau given the group offsets. Gene i is left unchanged
 * across groups only when g_i(d) < alpha_i strictly; a gene sitting exactly on
 * the boundary is called differentially expressed.
 */
inline Finalized finalize(const Matrix& mu_prime, std::span<const double> d, std::span<const double> alpha, std::span<const double> sigma2, std::span<const std::size_t> sizes) {
    const std::size_t m = mu_prime.rows(), S = mu_prime.cols();
    double n = 0;
    for (auto ns : sizes) n += static_cast<double>(ns);

    Finalized out{Matrix(m, S - 1), std::vector<double>(m), std::vector<int>(m), std::vector<double>(m)};
    for (std::size_t i = 0; i < m; ++i) {
        auto row = mu_prime.row(i);
        out.g[i] = g_statistic(row, d, sizes, sigma2[i]);
        if (out.g[i] < alpha[i]) {
            double sum = 0;
            for (std::size_t s = 0; s < S; ++s) sum += static_cast<double>(sizes[s]) * (row[s] - d[s]);
            out.mu[i] = sum / n;
            out.tau[i] = 0;
        } else {
            for (std::size_t s = 1; s < S; ++s) out.gamma(i, s - 1) = row[s] - row[0] - d[s];
            out.mu[i] = row[0];
            out.tau[i] = 1;
        }
    }
    return out;
}

/// Two-group form of `finalize`: gene i is unchanged exactly when |Delta_i - d| < lambda_i.
inline Finalized finalize_two_group(const Matrix& mu_prime, double d, std::span<const double> lambda, std::span<const double> sigma2, std::span<const std::size_t> sizes) {
    const std::size_t m = mu_prime.rows();
    const double n1 = static_cast<double>(sizes[0]), n2 = static_cast<double>(sizes[1]), n = n1 + n2;
    Finalized out{Matrix(m, 1), std::vector<double>(m), std::vector<int>(m), std::vector<double>(m)};
    for (std::size_t i = 0; i < m; ++i) {
        const double r = mu_prime(i, 1) - mu_prime(i, 0) - d;
        out.g[i] = n1 * n2 / n * r * r / (2 * sigma2[i]);
        if (std::fabs(r) < lambda[i]) {
            out.mu[i] = (n1 * mu_prime(i, 0) + n2 * (mu_prime(i, 1) - d)) / n;
            out.tau[i] = 0;
        } else {
            out.gamma(i, 0) = r;
            out.mu[i] = mu_prime(i, 0);
            out.tau[i] = 1;
        }
    }
    return out;
}

/******************************************
 *** Full fit                           ***
 ******************************************/

struct ModelFit {
    GroupLayout groups;
    /// Within-group offsets, one per sample column; zero for each group's first sample.
    std::vector<double> d_prime;
    /// Genes by groups.
    Matrix mu_prime;
    /// Group offsets d_s, with d_group[0] = 0.
    std::vector<double> d_group;
    /// d_sj = d_s + d'_sj, one per sample column.
    std::vector<double> d_full;
    /// Genes by (S - 1); log-fold effects relative to group 1.
    Matrix gamma;
    std::vector<double> mu;
    std::vector<int> tau;
    std::vector<double> g;
    /// g_i / alpha_i; at least 1 exactly for genes called differentially expressed.
    std::vector<double> score;
    std::vector<double> sigma2;
    std::vector<double> alpha;
    double G_min = 0;
    /// Penalized negative log-likelihood at the solution (constant terms dropped).
    double objective = 0;
    /// Significance level used for alpha, if alpha was derived from one.
    std::optional<double> q;
    std::optional<VarianceEstimates> variance;
    Solver solver = Solver::automatic;

    std::size_t n_de() const {
        std::size_t k = 0;
        for (int t : tau) k += t != 0;
        return k;
    }
};

/// l(mu, gamma, d) + sum_i alpha_i tau_i evaluated directly from the stored parameters.
inline double penalized_objective(const Matrix& x, const ModelFit& fit) {
    double total = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double rss = 0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const std::size_t s = fit.groups.group_of(j);
            const double effect = s == 0 ? 0.0 : fit.gamma(i, s - 1);
            const double r = x(i, j) - fit.mu[i] - effect - fit.d_full[j];
            rss += r * r;
        }
        total += rss / (2 * fit.sigma2[i]);
        if (fit.tau[i]) total += fit.alpha[i];
    }
    return total;
}

/**
 * Fits the model with known variances and penalties. The objective is
 * accumulated from the decomposition sum_i [within-group RSS_i / (2 sigma2_i) + min(g_i, alpha_i)].
 */
inline ModelFit solve(const Matrix& x, const GroupLayout& groups, std::span<const double> sigma2, std::span<const double> alpha, Solver solver = Solver::automatic, const GridOptions& grid = {}) {
    fitter_detail::check_inputs(x, groups, sigma2);
    if (alpha.size() != x.rows()) {
        throw Error("one alpha per gene is required");
    }
    const std::size_t S = groups.n_groups();
    auto sizes = groups.sizes();

    ModelFit fit;
    fit.groups = groups;
    fit.solver = solver;
    fit.sigma2.assign(sigma2.begin(), sigma2.end());
    fit.alpha.assign(alpha.begin(), alpha.end());
    fit.d_prime = compute_dprime(x, groups, sigma2);
    fit.mu_prime = compute_muprime(x, groups, fit.d_prime);

    auto minimum = minimize_G(fit.mu_prime, sigma2, alpha, sizes, solver, grid);
    fit.d_group = minimum.d;
    fit.G_min = minimum.value;

    Finalized fin;
    if (S == 2 && solver != Solver::general) {
        auto lambda = lambda_from_alpha(alpha, sigma2, sizes[0], sizes[1]);
        fin = finalize_two_group(fit.mu_prime, fit.d_group[1], lambda, sigma2, sizes);
    } else {
        fin = finalize(fit.mu_prime, fit.d_group, alpha, sigma2, sizes);
    }
    fit.gamma = std::move(fin.gamma);
    fit.mu = std::move(fin.mu);
    fit.tau = std::move(fin.tau);
    fit.g = std::move(fin.g);

    fit.d_full.resize(x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        fit.d_full[j] = fit.d_group[groups.group_of(j)] + fit.d_prime[j];
    }

    fit.score.resize(x.rows());
    double objective = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double score = fit.g[i] / alpha[i];
        if (fit.tau[i] && score < 1) score = 1;
        if (!fit.tau[i] && score >= 1) score = std::nextafter(1.0, 0.0);
        fit.score[i] = score;

        double rss = 0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const double r = x(i, j) - fit.d_prime[j] - fit.mu_prime(i, groups.group_of(j));
            rss += r * r;
        }
        objective += rss / (2 * sigma2[i]) + (fit.tau[i] ? alpha[i] : fit.g[i]);
    }
    fit.objective = objective;
    return fit;
}

struct FitOptions {
    double q = 0.01;
    Solver solver = Solver::automatic;
    IrlsOptions irls;
    GridOptions grid;
};

/// Estimates variances, derives alpha from q, and solves.
inline ModelFit fit(const Matrix& x, const GroupLayout& groups, const FitOptions& options = {}) {
    if (x.rows() < 2) {
        throw Error("at least 2 genes are required");
    }
    const std::size_t S = groups.n_groups();
    if (S < 2 || S > 3) {
        throw Error("exhaustive search only supported for low-dimensional cases (2 <= S <= 3)");
    }
    auto variance = estimate_variances(x, groups, options.irls);
    const double a = alpha_from_q(options.q, S, groups.n_samples());
    std::vector<double> alpha(x.rows(), a);
    ModelFit out = solve(x, groups, variance.sigma2_hat, alpha, options.solver, options.grid);
    out.q = options.q;
    out.variance = std::move(variance);
    return out;
}

inline ModelFit fit(const LogExpressionMatrix& x, const FitOptions& options = {}) {
    return fit(x.values, x.groups, options);
}

} // namespace l0de
