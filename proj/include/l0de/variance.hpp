#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "error.hpp"
#include "groups.hpp"
#include "matrix.hpp"

/**
 * @file variance.hpp
 *
 * @brief Per-gene variance estimation: within-group IRLS, pooling across groups
 * and empirical-Bayes shrinkage towards the mean variance.
 */

namespace l0de {

struct IrlsOptions {
    /// Stop once the largest relative change of any variance falls below this.
    double tolerance = 1e-8;
    int max_iterations = 100;
    /// Lower bound on the working variances used as weights.
    double floor = 1e-12;
    /// Record the objective after every iteration in `IrlsResult::objective_trace`.
    bool trace = false;
};

struct IrlsResult {
    /// RSS_i / (n_s - 1) at termination, not floored.
    std::vector<double> s2;
    /// Within-group means and offsets at termination, with d[0] = 0. Diagnostic only.
    std::vector<double> mu;
    std::vector<double> d;
    int iterations = 0;
    bool converged = false;
    /// Objective at the starting point followed by its value after each iteration.
    std::vector<double> objective_trace;
};

/**
 * Restricted negative log-likelihood of a single group,
 * sum_i [ (n_s - 1)/2 log(2 pi s2_i) + RSS_i / (2 s2_i) ].
 *
 * The (n_s - 1) weight on the log term makes the bias-reduced variance update
 * RSS_i / (n_s - 1) the exact minimizer in s2_i, so each IRLS sweep is a block
 * coordinate descent step on this function.
 */
inline double group_objective(const Matrix& block, std::span<const double> mu, std::span<const double> d, std::span<const double> s2) {
    const std::size_t m = block.rows(), ns = block.cols();
    double total = 0;
    for (std::size_t i = 0; i < m; ++i) {
        double rss = 0;
        for (std::size_t j = 0; j < ns; ++j) {
            double r = block(i, j) - mu[i] - d[j];
            rss += r * r;
        }
        total += 0.5 * static_cast<double>(ns - 1) * std::log(2 * std::numbers::pi * s2[i]) + rss / (2 * s2[i]);
    }
    return total;
}

/**
 * Alternates the closed-form updates for the group means mu_si, the sample
 * offsets d_sj and the variances s2_i of one group's log-expression block
 * (genes in rows, the group's samples in columns).
 *
 * Starts from d = 0, mu = row means, s2 = 1. After every sweep the offsets are
 * shifted so that d_s1 = 0 and the means absorb the shift. Variances below
 * `options.floor` are raised to it when used as weights and in the objective.
 */
inline IrlsResult irls_group(const Matrix& block, const IrlsOptions& options = {}) {
    const std::size_t m = block.rows(), ns = block.cols();
    if (ns < 2) {
        throw Error("cannot estimate within-group variance from fewer than 2 samples");
    }
    if (m < 1) {
        throw Error("cannot estimate within-group variance without genes");
    }

    IrlsResult res;
    res.mu.assign(m, 0.0);
    res.d.assign(ns, 0.0);
    res.s2.assign(m, 1.0);
    auto& mu = res.mu;
    auto& d = res.d;
    std::vector<double> s2(m, 1.0);

    for (std::size_t i = 0; i < m; ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < ns; ++j) {
            sum += block(i, j);
        }
        mu[i] = sum / static_cast<double>(ns);
    }
    if (options.trace) {
        res.objective_trace.push_back(group_objective(block, mu, d, s2));
    }

    std::vector<double> next_s2(m);
    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        for (std::size_t i = 0; i < m; ++i) {
            double sum = 0;
            for (std::size_t j = 0; j < ns; ++j) {
                sum += block(i, j) - d[j];
            }
            mu[i] = sum / static_cast<double>(ns);
        }

        double total_weight = 0;
        for (std::size_t i = 0; i < m; ++i) {
            total_weight += 1.0 / s2[i];
        }
        for (std::size_t j = 0; j < ns; ++j) {
            double sum = 0;
            for (std::size_t i = 0; i < m; ++i) {
                sum += (block(i, j) - mu[i]) / s2[i];
            }
            d[j] = sum / total_weight;
        }

        double max_change = 0;
        for (std::size_t i = 0; i < m; ++i) {
            double rss = 0;
            for (std::size_t j = 0; j < ns; ++j) {
                double r = block(i, j) - mu[i] - d[j];
                rss += r * r;
            }
            res.s2[i] = rss / static_cast<double>(ns - 1);
            next_s2[i] = std::max(res.s2[i], options.floor);
            max_change = std::max(max_change, std::fabs(next_s2[i] - s2[i]) / s2[i]);
        }
        s2.swap(next_s2);

        const double shift = d[0];
        for (auto& dj : d) {
            dj -= shift;
        }
        for (auto& mi : mu) {
            mi += shift;
        }

        res.iterations = iter;
        if (options.trace) {
            res.objective_trace.push_back(group_objective(block, mu, d, s2));
        }
        if (max_change < options.tolerance) {
            res.converged = true;
            break;
        }
    }
    return res;
}

/// Pools per-group variances, s2_i = sum_s (n_s - 1) s2_si / (n - S). `s2_group` is genes by groups.
inline std::vector<double> pool_variances(const Matrix& s2_group, std::span<const std::size_t> sizes) {
    const std::size_t S = s2_group.cols();
    if (sizes.size() != S) {
        throw Error("pool_variances: one group size per column is required");
    }
    double dof = 0;
    for (auto ns : sizes) {
        if (ns < 2) {
            throw Error("pool_variances: every group needs at least 2 samples");
        }
        dof += static_cast<double>(ns - 1);
    }
    std::vector<double> out(s2_group.rows());
    for (std::size_t i = 0; i < s2_group.rows(); ++i) {
        double sum = 0;
        for (std::size_t s = 0; s < S; ++s) {
            sum += static_cast<double>(sizes[s] - 1) * s2_group(i, s);
        }
        out[i] = sum / dof;
    }
    return out;
}

struct Shrinkage {
    std::vector<double> sigma2_hat;
    double s2_bar = 0;
    /// Weight before clipping to [0, 1].
    double w_raw = 0;
    double w = 0;
};

/**
 * Shrinks pooled variances towards their mean,
 * sigma2_i = (1 - w) s2_i + w mean(s2), with
 * w = 2(m-1)/(n-S+2) * (1/m + mean(s2)^2 / sum_i (s2_i - mean(s2))^2)
 * clipped to [0, 1]. Identical variances give w = 1.
 */
inline Shrinkage eb_shrink(std::span<const double> s2, std::size_t n, std::size_t n_groups) {
    const std::size_t m = s2.size();
    if (m < 2) {
        throw Error("eb_shrink: at least 2 genes are required");
    }
    const double denom_df = static_cast<double>(n) - static_cast<double>(n_groups) + 2.0;
    if (!(denom_df > 0)) {
        throw Error("eb_shrink: n - S + 2 must be positive");
    }

    Shrinkage out;
    double sum = 0;
    for (double v : s2) {
        sum += v;
    }
    const double mean = sum / static_cast<double>(m);
    double spread = 0;
    for (double v : s2) {
        spread += (v - mean) * (v - mean);
    }
    out.s2_bar = mean;
    if (spread == 0) {
        out.w_raw = 1;
    } else {
        out.w_raw = 2.0 * static_cast<double>(m - 1) / denom_df * (1.0 / static_cast<double>(m) + mean * mean / spread);
    }
    out.w = std::clamp(out.w_raw, 0.0, 1.0);
    out.sigma2_hat.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        out.sigma2_hat[i] = (1 - out.w) * s2[i] + out.w * mean;
    }
    return out;
}

struct VarianceEstimates {
    /// Genes by groups.
    Matrix s2_group;
    std::vector<double> s2_pooled;
    double s2_bar = 0;
    double w = 0;
    double w_raw = 0;
    std::vector<double> sigma2_hat;
    std::vector<int> iterations_used;
    std::vector<bool> converged;
};

/// Runs IRLS on every group of `x`, pools the results and shrinks them.
inline VarianceEstimates estimate_variances(const Matrix& x, const GroupLayout& groups, const IrlsOptions& options = {}) {
    const std::size_t S = groups.n_groups();
    if (x.cols() != groups.n_samples()) {
        throw Error("estimate_variances: group layout does not match the number of columns");
    }
    if (x.rows() < 2) {
        throw Error("estimate_variances: at least 2 genes are required");
    }
    for (std::size_t s = 0; s < S; ++s) {
        if (groups.size(s) < 2) {
            throw Error("cannot estimate within-group variance: group " + std::to_string(s + 1) + " has fewer than 2 samples");
        }
    }

    VarianceEstimates est;
    est.s2_group = Matrix(x.rows(), S);
    for (std::size_t s = 0; s < S; ++s) {
        auto res = irls_group(groups.block(x, s), options);
        est.s2_group.set_column(s, res.s2);
        est.iterations_used.push_back(res.iterations);
        est.converged.push_back(res.converged);
    }
    auto sizes = groups.sizes();
    est.s2_pooled = pool_variances(est.s2_group, sizes);
    auto shrunk = eb_shrink(est.s2_pooled, groups.n_samples(), S);
    est.s2_bar = shrunk.s2_bar;
    est.w = shrunk.w;
    est.w_raw = shrunk.w_raw;
    est.sigma2_hat = std::move(shrunk.sigma2_hat);
    for (auto& v : est.sigma2_hat) {
        v = std::max(v, options.floor);
    }
    return est;
}

} // namespace l0de
