#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "error.hpp"
#include "fitter.hpp"
#include "groups.hpp"
#include "ingest.hpp"
#include "io.hpp"
#include "matrix.hpp"
#include "random.hpp"
#include "simulate.hpp"

/**
 * @file evaluate.hpp
 *
 * @brief ROC/AUC scoring against simulation truth, a median-normalization
 * baseline, and replicate benchmarks.
 */

namespace l0de {

namespace eval_detail {

inline void check_labels(std::span<const double> scores, std::span<const int> labels, std::size_t& n_pos, std::size_t& n_neg) {
    if (scores.size() != labels.size()) {
        throw Error("scores and labels differ in length");
    }
    n_pos = 0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (std::isnan(scores[k])) throw Error("scores must not be NaN");
        n_pos += labels[k] != 0;
    }
    n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw Error("AUC needs at least one positive and one negative label");
    }
}

} // namespace eval_detail

/**
 * Mann-Whitney AUC, P(score_pos > score_neg) + P(tie)/2, from midrank sums.
 * Labels are nonzero for positives.
 */
inline double auc(std::span<const double> scores, std::span<const int> labels) {
    std::size_t n_pos, n_neg;
    eval_detail::check_labels(scores, labels, n_pos, n_neg);
    const std::size_t m = scores.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Twice the positive rank sum keeps midranks integral.
    std::uint64_t twice_rank_sum = 0;
    std::size_t k = 0;
    while (k < m) {
        std::size_t end = k;
        while (end < m && scores[order[end]] == scores[order[k]]) ++end;
        const std::uint64_t twice_midrank = static_cast<std::uint64_t>(k + 1 + end);
        for (std::size_t t = k; t < end; ++t) {
            if (labels[order[t]]) twice_rank_sum += twice_midrank;
        }
        k = end;
    }
    const std::uint64_t twice_u = twice_rank_sum - static_cast<std::uint64_t>(n_pos) * (n_pos + 1);
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// ROC curve (fpr, tpr) from (0, 0) to (1, 1), one point per distinct score, thresholds descending.
inline std::vector<std::pair<double, double>> roc_points(std::span<const double> scores, std::span<const int> labels) {
    std::size_t n_pos, n_neg;
    eval_detail::check_labels(scores, labels, n_pos, n_neg);
    const std::size_t m = scores.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<std::pair<double, double>> out{{0.0, 0.0}};
    std::size_t tp = 0, fp = 0, k = 0;
    while (k < m) {
        const double level = scores[order[k]];
        while (k < m && scores[order[k]] == level) {
            if (labels[order[k]]) ++tp;
            else ++fp;
            ++k;
        }
        out.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg), static_cast<double>(tp) / static_cast<double>(n_pos));
    }
    return out;
}

inline double trapezoid_area(std::span<const std::pair<double, double>> roc) {
    double area = 0;
    for (std::size_t k = 1; k < roc.size(); ++k) {
        area += (roc[k].first - roc[k - 1].first) * 0.5 * (roc[k].second + roc[k - 1].second);
    }
    return area;
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw Error("median of an empty set");
    const std::size_t h = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
    const double upper = v[h];
    if (v.size() % 2) return upper;
    return 0.5 * (upper + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h)));
}

/**
 * Median normalization plus pooled two-sample t. Every sample is shifted by
 * the median over genes of its log-ratio to the first sample; each gene is
 * then scored by |t|. A gene with zero pooled variance scores +inf if its
 * group means differ and 0 otherwise.
 */
inline std::vector<double> baseline_median_ttest(const Matrix& x, const GroupLayout& groups) {
    if (groups.n_groups() != 2) {
        throw Error("the median baseline requires exactly two groups");
    }
    if (groups.size(0) < 2 || groups.size(1) < 2) {
        throw Error("the median baseline needs at least 2 samples per group");
    }
    if (x.cols() != groups.n_samples()) {
        throw Error("group layout does not match the number of samples");
    }
    const std::size_t m = x.rows(), n = x.cols();
    std::vector<double> shift(n, 0.0), ratio(m);
    for (std::size_t j = 1; j < n; ++j) {
        for (std::size_t i = 0; i < m; ++i) ratio[i] = x(i, j) - x(i, 0);
        shift[j] = median(ratio);
    }

    const double n1 = static_cast<double>(groups.size(0)), n2 = static_cast<double>(groups.size(1));
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        double mean[2] = {0, 0}, ss[2] = {0, 0};
        for (std::size_t s = 0; s < 2; ++s) {
            for (auto j : groups.members(s)) mean[s] += x(i, j) - shift[j];
            mean[s] /= static_cast<double>(groups.size(s));
            for (auto j : groups.members(s)) {
                const double r = x(i, j) - shift[j] - mean[s];
                ss[s] += r * r;
            }
        }
        const double sp2 = (ss[0] + ss[1]) / (n1 + n2 - 2);
        const double diff = mean[1] - mean[0];
        const double se = std::sqrt(sp2 * (1 / n1 + 1 / n2));
        if (se > 0) out[i] = std::fabs(diff) / se;
        else out[i] = diff == 0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return out;
}

enum class Method { l0, median_t };

inline std::string_view to_string(Method m) {
    return m == Method::l0 ? "l0" : "median_t";
}

inline Method parse_method(std::string_view name) {
    if (name == "l0") return Method::l0;
    if (name == "median_t") return Method::median_t;
    throw Error("unknown method '" + std::string(name) + "' (expected l0 or median_t)");
}

/// Splits a comma-separated method list.
inline std::vector<Method> parse_methods(std::string_view list) {
    std::vector<Method> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto comma = list.find(',', start);
        const auto item = list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        out.push_back(parse_method(item));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

struct EvalResult {
    std::string method_label;
    /// AUC of every replicate, in replicate order.
    std::vector<double> aucs;
    /// AUC and ROC curve of the first replicate.
    double auc = 0;
    std::vector<std::pair<double, double>> roc;
    std::size_t n_replicates = 0;
    double mean_auc = 0;
    /// Sample standard deviation over replicates divided by sqrt(n_replicates).
    double se_auc = 0;
};

struct BenchmarkOptions {
    std::vector<Method> methods{Method::l0, Method::median_t};
    double pseudocount = 1.0;
    FitOptions fit;
    /// 0 reads L0DE_THREADS from the environment, falling back to 1.
    unsigned threads = 0;
};

struct Benchmark {
    SimScenario scenario;
    std::vector<EvalResult> results;
};

/// Ranking scores of one method on log-transformed counts.
inline std::vector<double> method_scores(Method method, const LogExpressionMatrix& x, const FitOptions& options) {
    if (method == Method::median_t) {
        return baseline_median_ttest(x.values, x.groups);
    }
    return fit(x, options).score;
}

inline unsigned benchmark_threads(unsigned requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("L0DE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    return 1;
}

/**
 * Replicate r simulates with seed derive_seed(scenario.seed, r), scores every
 * method on log(counts + pseudocount) and records the AUC against the DE truth.
 * Replicates may run in parallel; the result does not depend on the thread count.
 */
inline Benchmark run_benchmark(const SimScenario& scenario, std::size_t n_replicates, const BenchmarkOptions& options = {}) {
    if (n_replicates < 2) {
        throw Error("a benchmark needs at least 2 replicates");
    }
    if (options.methods.empty()) {
        throw Error("no methods to benchmark");
    }
    scenario.validate();
    const std::size_t M = options.methods.size();

    std::vector<std::vector<double>> aucs(n_replicates, std::vector<double>(M));
    std::vector<std::vector<std::pair<double, double>>> first_roc(M);
    std::vector<std::exception_ptr> errors(n_replicates);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t r = next++; r < n_replicates; r = next++) {
            try {
                SimScenario sc = scenario;
                sc.seed = derive_seed(scenario.seed, r);
                auto sim = simulate(sc);
                auto x = log_transform(sim.counts, Unit::counts, options.pseudocount);
                for (std::size_t k = 0; k < M; ++k) {
                    auto scores = method_scores(options.methods[k], x, options.fit);
                    aucs[r][k] = auc(scores, sim.truth.is_de);
                    if (r == 0) first_roc[k] = roc_points(scores, sim.truth.is_de);
                }
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    const unsigned threads = std::min<unsigned>(benchmark_threads(options.threads), static_cast<unsigned>(n_replicates));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (std::size_t r = 0; r < n_replicates; ++r) {
        if (!errors[r]) continue;
        std::string what = "unknown error";
        try {
            std::rethrow_exception(errors[r]);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        throw Error("replicate " + std::to_string(r) + " (seed " + std::to_string(derive_seed(scenario.seed, r)) + ") failed: " + what);
    }

    Benchmark out{scenario, {}};
    for (std::size_t k = 0; k < M; ++k) {
        EvalResult res;
        res.method_label = std::string(to_string(options.methods[k]));
        res.n_replicates = n_replicates;
        for (std::size_t r = 0; r < n_replicates; ++r) res.aucs.push_back(aucs[r][k]);
        res.auc = res.aucs[0];
        res.roc = std::move(first_roc[k]);
        const double nr = static_cast<double>(n_replicates);
        res.mean_auc = std::accumulate(res.aucs.begin(), res.aucs.end(), 0.0) / nr;
        double ss = 0;
        for (double a : res.aucs) ss += (a - res.mean_auc) * (a - res.mean_auc);
        res.se_auc = std::sqrt(ss / (nr - 1)) / std::sqrt(nr);
        out.results.push_back(std::move(res));
    }
    return out;
}

inline void write_benchmark_header(std::ostream& os) {
    os << "de_pct,up_pct,method,mean_auc,se_auc,n_replicates\n";
}

/// One `de_pct,up_pct,method,mean_auc,se_auc,n_replicates` row per method.
inline void write_benchmark_rows(std::ostream& os, const Benchmark& b) {
    const auto de = std::llround(100 * b.scenario.de_fraction);
    const auto up = std::llround(100 * b.scenario.up_fraction);
    for (const auto& r : b.results) {
        os << de << ',' << up << ',' << r.method_label << ',' << format_double(r.mean_auc) << ',' << format_double(r.se_auc) << ',' << r.n_replicates << '\n';
    }
}

inline void write_roc_csv(std::ostream& os, std::span<const std::pair<double, double>> roc) {
    os << "fpr,tpr\n";
    for (const auto& [f, t] : roc) os << format_double(f) << ',' << format_double(t) << '\n';
}

} // namespace l0de
