#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "fitter.hpp"
#include "ingest.hpp"
#include "oracles.hpp"
#include "random.hpp"
#include "simulate.hpp"

using namespace l0de;

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

// Mean over group 2 minus mean over group 1 of the error in the fitted offsets.
double offset_bias(const ModelFit& f, const SimOutput& sim) {
    double sum[2] = {0, 0}, cnt[2] = {0, 0};
    for (std::size_t j = 0; j < sim.log_offset.size(); ++j) {
        const auto s = static_cast<std::size_t>(sim.counts.group_of_sample[j] - 1);
        sum[s] += f.d_full[j] - (sim.log_offset[j] - sim.log_offset[0]);
        cnt[s] += 1;
    }
    return sum[1] / cnt[1] - sum[0] / cnt[0];
}

} // namespace

TEST(Multinomial, ColumnSumsAndFloor) {
    auto sc = preset("figure3a", 11);
    auto sim = simulate_multinomial(sc);
    ASSERT_EQ(sim.counts.counts.rows(), 1000u);
    ASSERT_EQ(sim.counts.counts.cols(), 8u);
    for (std::size_t j = 0; j < 8; ++j) {
        double total = 0, lowest = 1e300;
        for (std::size_t i = 0; i < 1000; ++i) {
            total += sim.counts.counts(i, j);
            lowest = std::min(lowest, sim.counts.counts(i, j));
        }
        EXPECT_GE(lowest, 1.0);
        EXPECT_EQ(std::fmod(total, 1.0), 0.0);
        EXPECT_GE(total, 3e7 + 1000);
        EXPECT_LE(total, 5e7 + 1000);
    }
}

TEST(Multinomial, DepthPlusGeneCountExactly) {
    auto sc = preset("figure3b", 5);
    sc.m = 50;
    auto sim = simulate_multinomial(sc);
    // log_offset_j = log N_j - log sum_i l_i e^{x_ij - d_j}; the depth is an integer, so
    // the column total minus m must be an integer in the depth range.
    for (std::size_t j = 0; j < sim.counts.counts.cols(); ++j) {
        double total = 0;
        for (std::size_t i = 0; i < 50; ++i) total += sim.counts.counts(i, j);
        const double depth = total - 50;
        EXPECT_EQ(depth, std::round(depth));
        EXPECT_GE(depth, sc.depth_lo);
        EXPECT_LE(depth, sc.depth_hi);
    }
}

TEST(Multinomial, TrivialTotals) {
    SimScenario sc;
    sc.m = 3;
    sc.depth_lo = 100;
    sc.depth_hi = 100.4;
    sc.seed = 3;
    auto sim = simulate_multinomial(sc);
    for (std::size_t j = 0; j < sim.counts.counts.cols(); ++j) {
        double total = 0;
        for (std::size_t i = 0; i < 3; ++i) total += sim.counts.counts(i, j);
        EXPECT_EQ(total, 100.0 + 3.0);
    }
}

TEST(Multinomial, Figure3aOffsetsRecovered) {
    auto sim = simulate_multinomial(preset("figure3a", 2024));
    auto f = fit(log_transform(sim.counts, Unit::counts));
    for (std::size_t j = 0; j < 8; ++j) {
        EXPECT_LT(std::fabs(f.d_full[j] - (sim.log_offset[j] - sim.log_offset[0])), 0.1) << "sample " << j;
    }
    EXPECT_LT(std::fabs(offset_bias(f, sim)), 0.1);
}

TEST(Multinomial, Figure3dOffsetsBiased) {
    auto sim = simulate_multinomial(preset("figure3d", 2024));
    auto f = fit(log_transform(sim.counts, Unit::counts));
    EXPECT_GE(std::fabs(offset_bias(f, sim)), 1.0);
}

TEST(Multinomial, WithinGroupDifferencesTrackOffsets) {
    auto sim = simulate_multinomial(preset("figure3a", 17));
    const auto& c = sim.counts.counts;
    for (std::size_t j = 1; j < 8; ++j) {
        const std::size_t k = j < 4 ? 0 : 4;
        if (j == k) continue;
        std::vector<double> diffs;
        for (std::size_t i = 0; i < c.rows(); ++i) diffs.push_back(std::log(c(i, j)) - std::log(c(i, k)));
        const double truth = sim.log_offset[j] - sim.log_offset[k];
        EXPECT_LT(std::fabs(median_of(diffs) - truth), 0.1) << "sample " << j;
    }
}

TEST(Multinomial, NonDifferentialGenesHaveZeroEffect) {
    auto sim = simulate_multinomial(preset("figure3c", 4));
    std::size_t de = 0;
    for (std::size_t i = 0; i < 1000; ++i) {
        de += static_cast<std::size_t>(sim.truth.is_de[i]);
        if (!sim.truth.is_de[i]) {
            EXPECT_EQ(sim.truth.gamma(i, 0), 0.0);
            EXPECT_EQ(sim.truth.mu(i, 0), sim.truth.mu(i, 1));
        }
    }
    EXPECT_EQ(de, 900u);
}

TEST(Multinomial, RoundsFractionalDeCount) {
    SimScenario sc;
    sc.m = 10;
    sc.de_fraction = 0.25;
    auto sim = simulate_multinomial(sc);
    EXPECT_EQ(sim.n_de, 3u);
    EXPECT_DOUBLE_EQ(sim.de_target, 2.5);
    EXPECT_TRUE(scenario_json(sim)["de_rounded"].get<bool>());
}

TEST(Benchmark, DeFractionExact) {
    for (const char* name : {"table1_30_50", "table1_70_90", "table2_30_70", "table2_70_50"}) {
        auto sim = simulate_benchmark(preset(name, 8));
        std::size_t de = 0;
        for (int v : sim.truth.is_de) de += static_cast<std::size_t>(v);
        EXPECT_EQ(de, static_cast<std::size_t>(std::llround(sim.scenario.de_fraction * 1000))) << name;
        for (std::size_t i = 0; i < 1000; ++i) {
            if (!sim.truth.is_de[i]) {
                EXPECT_EQ(sim.truth.gamma(i, 0), 0.0);
            }
        }
    }
}

TEST(Benchmark, FoldMagnitudesFollowTheirLaw) {
    // E|N(mu, 1)| = mu (1 - 2 Phi(-mu)) + 2 phi(mu).
    const double mu = std::log(3.0);
    const double expected_abs = mu * (1 - 2 * oracle::normal_cdf(-mu)) + 2 * std::exp(-0.5 * mu * mu) / std::sqrt(2 * M_PI);
    for (const char* name : {"table1_30_50", "table2_70_90"}) {
        auto sc = preset(name, 21);
        auto sim = simulate_benchmark(sc);
        double abs_sum = 0;
        std::size_t k = 0;
        for (std::size_t i = 0; i < 1000; ++i) {
            if (!sim.truth.is_de[i]) continue;
            abs_sum += std::fabs(sim.truth.gamma(i, 0));
            ++k;
        }
        const double bound = 3 / std::sqrt(static_cast<double>(k));
        EXPECT_NEAR(abs_sum / static_cast<double>(k), expected_abs, bound) << name;
    }
    // With every DE gene up-regulated the signed magnitudes average log 3.
    auto sc = preset("table1_30_90", 22);
    sc.up_fraction = 1.0;
    auto sim = simulate_benchmark(sc);
    double sum = 0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < 1000; ++i) {
        if (!sim.truth.is_de[i]) continue;
        sum += sim.truth.gamma(i, 0);
        ++k;
    }
    EXPECT_NEAR(sum / static_cast<double>(k), mu, 3 / std::sqrt(static_cast<double>(k)));
}

TEST(Benchmark, DirectionsFollowUpFraction) {
    auto sc = preset("table1_70_70", 23);
    sc.shift_mean = 50; // every draw positive, so the sign records the direction
    auto sim = simulate_benchmark(sc);
    std::size_t up = 0, de = 0;
    for (std::size_t i = 0; i < 1000; ++i) {
        if (!sim.truth.is_de[i]) continue;
        ++de;
        if (sim.truth.gamma(i, 0) > 0) ++up;
    }
    EXPECT_EQ(up, static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(de))));
}

TEST(Benchmark, LogNormalResidualSpread) {
    auto sim = simulate_benchmark(preset("table1_30_50", 31));
    const auto& c = sim.counts.counts;
    const auto& lengths = *sim.counts.gene_lengths;
    // Pooled within-group variance of log counts about each gene's group mean, after
    // removing the known per-sample offsets; restricted to genes whose counts are far
    // from the rounding regime.
    double ss = 0, dof = 0;
    for (std::size_t i = 0; i < c.rows(); ++i) {
        bool high = true;
        for (std::size_t s = 0; s < 2; ++s) high = high && std::exp(sim.log_offset[4 * s] + std::log(lengths[i]) + sim.truth.mu(i, s)) > 500;
        if (!high) continue;
        for (std::size_t s = 0; s < 2; ++s) {
            double v[4], mean = 0;
            for (std::size_t k = 0; k < 4; ++k) {
                v[k] = std::log(c(i, 4 * s + k)) - sim.log_offset[4 * s + k];
                mean += v[k] / 4;
            }
            for (double e : v) ss += (e - mean) * (e - mean);
            dof += 3;
        }
    }
    ASSERT_GT(dof, 300);
    EXPECT_NEAR(std::sqrt(ss / dof), 0.5, 0.05);
}

TEST(Benchmark, NegativeBinomialCountsAreIntegers) {
    auto sim = simulate_benchmark(preset("table2_30_50", 3));
    for (std::size_t i = 0; i < 1000; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
            EXPECT_GE(sim.counts.counts(i, j), 0.0);
            EXPECT_EQ(sim.counts.counts(i, j), std::round(sim.counts.counts(i, j)));
        }
}

TEST(Scenario, InvalidFractionsRejected) {
    auto sc = preset("table1_30_50");
    sc.de_fraction = 1.2;
    EXPECT_THROW(simulate(sc), Error);
    sc.de_fraction = 0.3;
    sc.up_fraction = -0.1;
    EXPECT_THROW(simulate(sc), Error);
    EXPECT_THROW(preset("table1_40_50"), Error);
    EXPECT_THROW(preset("figure3e"), Error);
    SimScenario wrong = preset("figure3a");
    EXPECT_THROW(simulate_benchmark(wrong), Error);
}

TEST(Scenario, PresetsParameterized) {
    auto a = preset("figure3a");
    EXPECT_EQ(a.m, 1000u);
    EXPECT_EQ(a.n_per_group, (std::vector<std::size_t>{4, 4}));
    EXPECT_DOUBLE_EQ(a.de_fraction, 0.3);
    EXPECT_DOUBLE_EQ(a.shift_mean, 0.0);
    EXPECT_DOUBLE_EQ(a.base_mean, -3.0);
    EXPECT_DOUBLE_EQ(a.base_var, 2.0);
    EXPECT_DOUBLE_EQ(a.offset_var, 0.5);
    EXPECT_DOUBLE_EQ(a.noise_var, 0.2);
    auto d = preset("figure3d");
    EXPECT_DOUBLE_EQ(d.de_fraction, 0.9);
    EXPECT_DOUBLE_EQ(d.shift_mean, 3.0);
    auto t = preset("table2_70_90");
    EXPECT_EQ(t.kind, ScenarioKind::negbinomial32);
    EXPECT_DOUBLE_EQ(t.de_fraction, 0.7);
    EXPECT_DOUBLE_EQ(t.up_fraction, 0.9);
    EXPECT_DOUBLE_EQ(t.shift_mean, std::log(3.0));
    EXPECT_DOUBLE_EQ(t.sigma_ln, 0.5);
}

TEST(Scenario, JsonRoundTrip) {
    auto sc = preset("table2_30_70", 77);
    sc.convention = SpreadConvention::sd;
    sc.n_per_group = {3, 5};
    nlohmann::json j = sc;
    auto back = j.get<SimScenario>();
    EXPECT_EQ(nlohmann::json(back), j);
    auto partial = nlohmann::json::parse(R"({"preset": "figure3b", "seed": 9, "m": 200})").get<SimScenario>();
    EXPECT_DOUBLE_EQ(partial.de_fraction, 0.7);
    EXPECT_EQ(partial.m, 200u);
    EXPECT_EQ(partial.seed, 9u);
}

TEST(Scenario, SameSeedSameOutput) {
    for (const char* name : {"figure3b", "table1_70_50", "table2_30_90"}) {
        auto a = simulate(preset(name, 123));
        auto b = simulate(preset(name, 123));
        auto c = simulate(preset(name, 124));
        std::ostringstream sa, sb, sc;
        write_matrix_tsv(sa, a.counts.gene_ids, a.counts.sample_ids, a.counts.counts);
        write_matrix_tsv(sb, b.counts.gene_ids, b.counts.sample_ids, b.counts.counts);
        write_matrix_tsv(sc, c.counts.gene_ids, c.counts.sample_ids, c.counts.counts);
        EXPECT_EQ(sa.str(), sb.str()) << name;
        EXPECT_NE(sa.str(), sc.str()) << name;
        std::ostringstream ta, tb;
        write_truth_tsv(ta, a);
        write_truth_tsv(tb, b);
        EXPECT_EQ(ta.str(), tb.str());
        EXPECT_EQ(a.log_offset, b.log_offset);
    }
}

TEST(RngSuite, NormalMoments) {
    Rng rng(1);
    const int N = 100000;
    double sum = 0, sq = 0;
    for (int k = 0; k < N; ++k) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    const double mean = sum / N, var = sq / N - mean * mean;
    EXPECT_NEAR(mean, 0.0, 0.02);
    EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(RngSuite, NegativeBinomialVariance) {
    Rng rng(2);
    for (auto [mu, phi] : {std::pair{10.0, 0.5}, std::pair{200.0, 0.1}, std::pair{3.0, 1.5}}) {
        const int N = 100000;
        double sum = 0, sq = 0;
        for (int k = 0; k < N; ++k) {
            const double c = static_cast<double>(rng.negative_binomial(mu, phi));
            sum += c;
            sq += c * c;
        }
        const double mean = sum / N, var = (sq - N * mean * mean) / (N - 1);
        EXPECT_NEAR(var, mu + phi * mu * mu, 0.05 * (mu + phi * mu * mu)) << "mu=" << mu << " phi=" << phi;
        EXPECT_NEAR(mean, mu, 0.02 * mu);
    }
}

TEST(RngSuite, MultinomialSums) {
    Rng rng(3);
    std::vector<double> w{0.1, 0.0, 3.0, 2.5, 1e-9, 7.0};
    for (std::uint64_t N : {0ull, 1ull, 17ull, 1000000ull, 40000000ull}) {
        auto draws = rng.multinomial(N, w);
        std::uint64_t total = 0;
        for (auto v : draws) total += v;
        EXPECT_EQ(total, N);
        EXPECT_EQ(draws[1], 0u);
    }
    std::vector<double> zero{0.0, 0.0};
    EXPECT_THROW(rng.multinomial(5, zero), Error);
}

TEST(RngSuite, InvalidParameters) {
    Rng rng(4);
    EXPECT_THROW(rng.normal(0, -1), Error);
    EXPECT_THROW(rng.uniform(1, 1), Error);
    EXPECT_THROW(rng.gamma(0, 1), Error);
    EXPECT_THROW(rng.poisson(-1), Error);
    EXPECT_THROW(rng.binomial(3, 1.5), Error);
    EXPECT_THROW(rng.negative_binomial(1, -0.1), Error);
}

TEST(RngSuite, DeterministicAndSplit) {
    Rng a(99), b(99);
    for (int k = 0; k < 100; ++k) EXPECT_EQ(a.normal(), b.normal());
    EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
    EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
    EXPECT_EQ(derive_seed(5, 3), derive_seed(5, 3));
}
