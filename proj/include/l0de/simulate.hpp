#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "error.hpp"
#include "ingest.hpp"
#include "io.hpp"
#include "matrix.hpp"
#include "random.hpp"

/**
 * @file simulate.hpp
 *
 * @brief Synthetic RNA-Seq count data with known differential expression.
 *
 * Three generators share one scenario description:
 *
 * - `multinomial31`: log expression x_sij ~ N(mu_si + d_sj, noise), gene lengths
 *   log l_i ~ U(5, 10), depths N_sj ~ U(3e7, 5e7), and counts drawn from
 *   Multinomial(N_sj, l_i e^x_sij / sum) plus one.
 * - `lognormal32`: counts exp(N(log lambda_sij, sigma_ln^2)) rounded, where
 *   lambda_sij = N_sj l_i e^mu_si / sum_k l_k e^mu_sk.
 * - `negbinomial32`: counts NB(lambda_sij, phi_i) with log phi_i normal.
 *
 * For the two benchmark generators the base expression, lengths and depths
 * reuse the multinomial priors; they are parametric stand-ins, not estimates
 * from any real dataset.
 */

namespace l0de {

enum class ScenarioKind { multinomial31, lognormal32, negbinomial32 };

/// How the second parameter of the N(a, b) priors for base expression, offsets and noise is read.
enum class SpreadConvention { variance, sd };

struct SimScenario {
    std::string name = "custom";
    ScenarioKind kind = ScenarioKind::multinomial31;
    std::size_t m = 1000;
    std::vector<std::size_t> n_per_group{4, 4};
    double de_fraction = 0.3;
    /// Share of DE genes whose effect keeps the drawn sign; the rest are negated.
    double up_fraction = 1.0;
    double shift_mean = 0.0;
    double shift_sd = 1.0;
    double base_mean = -3.0;
    double base_var = 2.0;
    double offset_var = 0.5;
    double noise_var = 0.2;
    double log_length_lo = 5.0;
    double log_length_hi = 10.0;
    double depth_lo = 3e7;
    double depth_hi = 5e7;
    double sigma_ln = 0.5;
    double dispersion_meanlog = -2.0;
    double dispersion_sdlog = 1.0;
    SpreadConvention convention = SpreadConvention::variance;
    std::uint64_t seed = 1;

    /// Standard deviation implied by a prior parameter under the configured convention.
    double spread(double value) const {
        return convention == SpreadConvention::variance ? std::sqrt(value) : value;
    }

    void validate() const {
        if (m < 2) throw Error("scenario: m must be at least 2");
        if (n_per_group.size() < 2) throw Error("scenario: at least two groups are required");
        for (auto ns : n_per_group) {
            if (ns < 1) throw Error("scenario: every group needs at least one sample");
        }
        if (!(de_fraction >= 0 && de_fraction <= 1)) throw Error("scenario: de_fraction must lie in [0, 1]");
        if (!(up_fraction >= 0 && up_fraction <= 1)) throw Error("scenario: up_fraction must lie in [0, 1]");
        if (!(shift_sd >= 0) || !(base_var >= 0) || !(offset_var >= 0) || !(noise_var >= 0)) {
            throw Error("scenario: spreads must be nonnegative");
        }
        if (!(log_length_lo < log_length_hi)) throw Error("scenario: empty log-length range");
        if (!(depth_lo > 0 && depth_lo < depth_hi)) throw Error("scenario: invalid depth range");
        if (!(sigma_ln >= 0)) throw Error("scenario: sigma_ln must be nonnegative");
        if (!(dispersion_sdlog >= 0)) throw Error("scenario: dispersion_sdlog must be nonnegative");
    }
};

inline std::string_view to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::multinomial31: return "multinomial31";
        case ScenarioKind::lognormal32: return "lognormal32";
        case ScenarioKind::negbinomial32: return "negbinomial32";
    }
    return "multinomial31";
}

inline ScenarioKind parse_scenario_kind(std::string_view name) {
    if (name == "multinomial31") return ScenarioKind::multinomial31;
    if (name == "lognormal32") return ScenarioKind::lognormal32;
    if (name == "negbinomial32") return ScenarioKind::negbinomial32;
    throw Error("unknown scenario kind '" + std::string(name) + "'");
}

/**
 * Named presets.
 *
 * - figure3a..figure3d: two-group multinomial data, 1000 genes, 4 + 4 samples;
 *   300 DE with shifts N(0, 1); 700 DE with N(1, 1); 900 DE with N(1, 1); 900 DE with N(3, 1).
 * - table1_<de>_<up>: log-normal counts, de in {30, 70}, up in {50, 70, 90} percent,
 *   log-fold magnitudes N(log 3, 1), sigma 0.5.
 * - table2_<de>_<up>: the same design with negative-binomial counts.
 */
inline std::vector<std::string> preset_names() {
    std::vector<std::string> out{"figure3a", "figure3b", "figure3c", "figure3d"};
    for (const char* table : {"table1", "table2"}) {
        for (int de : {30, 70}) {
            for (int up : {50, 70, 90}) {
                out.push_back(std::string(table) + "_" + std::to_string(de) + "_" + std::to_string(up));
            }
        }
    }
    return out;
}

inline SimScenario preset(std::string_view name, std::uint64_t seed = 1) {
    SimScenario sc;
    sc.name = std::string(name);
    sc.seed = seed;
    if (name.starts_with("figure3") && name.size() == 8) {
        sc.kind = ScenarioKind::multinomial31;
        sc.up_fraction = 1.0;
        sc.shift_sd = 1.0;
        switch (name[7]) {
            case 'a': sc.de_fraction = 0.3; sc.shift_mean = 0.0; return sc;
            case 'b': sc.de_fraction = 0.7; sc.shift_mean = 1.0; return sc;
            case 'c': sc.de_fraction = 0.9; sc.shift_mean = 1.0; return sc;
            case 'd': sc.de_fraction = 0.9; sc.shift_mean = 3.0; return sc;
            default: break;
        }
    }
    if ((name.starts_with("table1_") || name.starts_with("table2_")) && name.size() == 12 && name[9] == '_') {
        const std::string de(name.substr(7, 2)), up(name.substr(10, 2));
        if ((de == "30" || de == "70") && (up == "50" || up == "70" || up == "90")) {
            sc.kind = name[5] == '1' ? ScenarioKind::lognormal32 : ScenarioKind::negbinomial32;
            sc.de_fraction = std::stoi(de) / 100.0;
            sc.up_fraction = std::stoi(up) / 100.0;
            sc.shift_mean = std::log(3.0);
            sc.shift_sd = 1.0;
            return sc;
        }
    }
    throw Error("unknown preset '" + std::string(name) + "'");
}

inline void to_json(nlohmann::json& j, const SimScenario& sc) {
    j = nlohmann::json{
        {"name", sc.name},
        {"kind", std::string(to_string(sc.kind))},
        {"m", sc.m},
        {"n_per_group", sc.n_per_group},
        {"de_fraction", sc.de_fraction},
        {"up_fraction", sc.up_fraction},
        {"shift_mean", sc.shift_mean},
        {"shift_sd", sc.shift_sd},
        {"base_mean", sc.base_mean},
        {"base_var", sc.base_var},
        {"offset_var", sc.offset_var},
        {"noise_var", sc.noise_var},
        {"log_length_range", {sc.log_length_lo, sc.log_length_hi}},
        {"depth_range", {sc.depth_lo, sc.depth_hi}},
        {"sigma_ln", sc.sigma_ln},
        {"dispersion_dist", {{"family", "lognormal"}, {"meanlog", sc.dispersion_meanlog}, {"sdlog", sc.dispersion_sdlog}}},
        {"spread_convention", sc.convention == SpreadConvention::variance ? "variance" : "sd"},
        {"seed", sc.seed},
    };
}

/// Missing keys keep their defaults, so a scenario file may override only a few fields.
inline void from_json(const nlohmann::json& j, SimScenario& sc) {
    SimScenario def;
    if (j.contains("preset")) {
        def = preset(j.at("preset").get<std::string>());
    }
    sc = def;
    sc.name = j.value("name", def.name);
    if (j.contains("kind")) sc.kind = parse_scenario_kind(j.at("kind").get<std::string>());
    sc.m = j.value("m", def.m);
    sc.n_per_group = j.value("n_per_group", def.n_per_group);
    sc.de_fraction = j.value("de_fraction", def.de_fraction);
    sc.up_fraction = j.value("up_fraction", def.up_fraction);
    sc.shift_mean = j.value("shift_mean", def.shift_mean);
    sc.shift_sd = j.value("shift_sd", def.shift_sd);
    sc.base_mean = j.value("base_mean", def.base_mean);
    sc.base_var = j.value("base_var", def.base_var);
    sc.offset_var = j.value("offset_var", def.offset_var);
    sc.noise_var = j.value("noise_var", def.noise_var);
    if (j.contains("log_length_range")) {
        sc.log_length_lo = j.at("log_length_range").at(0).get<double>();
        sc.log_length_hi = j.at("log_length_range").at(1).get<double>();
    }
    if (j.contains("depth_range")) {
        sc.depth_lo = j.at("depth_range").at(0).get<double>();
        sc.depth_hi = j.at("depth_range").at(1).get<double>();
    }
    sc.sigma_ln = j.value("sigma_ln", def.sigma_ln);
    if (j.contains("dispersion_dist")) {
        const auto& dd = j.at("dispersion_dist");
        if (dd.value("family", std::string("lognormal")) != "lognormal") {
            throw Error("scenario: only lognormal dispersion distributions are supported");
        }
        sc.dispersion_meanlog = dd.value("meanlog", def.dispersion_meanlog);
        sc.dispersion_sdlog = dd.value("sdlog", def.dispersion_sdlog);
    }
    if (j.contains("spread_convention")) {
        auto c = j.at("spread_convention").get<std::string>();
        if (c == "variance") sc.convention = SpreadConvention::variance;
        else if (c == "sd") sc.convention = SpreadConvention::sd;
        else throw Error("scenario: spread_convention must be 'variance' or 'sd'");
    }
    sc.seed = j.value("seed", def.seed);
}

struct SimTruth {
    std::vector<int> is_de;
    /// Genes by groups: true mean log expression (log proportions for the benchmark generators).
    Matrix mu;
    /// Genes by (S - 1): mu_si - mu_1i; exactly zero for non-DE genes.
    Matrix gamma;
};

struct SimOutput {
    CountMatrix counts;
    SimTruth truth;
    /// Per-sample scaling factors as drawn (d_sj for multinomial31, log N_sj otherwise).
    std::vector<double> d_true;
    /**
     * Per-sample offset that the log counts actually carry, up to a common constant:
     * log N_sj - log sum_i l_i exp(x_sij - d_sj) for multinomial31 and
     * log N_sj - log sum_i l_i exp(mu_si) for the benchmark generators.
     */
    std::vector<double> log_offset;
    SimScenario scenario;
    std::size_t n_de = 0;
    /// de_fraction * m before rounding.
    double de_target = 0;
};

namespace sim_detail {

inline SimOutput skeleton(const SimScenario& sc) {
    SimOutput out;
    out.scenario = sc;
    const std::size_t S = sc.n_per_group.size();
    out.counts.gene_ids.reserve(sc.m);
    for (std::size_t i = 0; i < sc.m; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "gene%05zu", i + 1);
        out.counts.gene_ids.emplace_back(buf);
    }
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t j = 0; j < sc.n_per_group[s]; ++j) {
            out.counts.sample_ids.push_back("g" + std::to_string(s + 1) + "_s" + std::to_string(j + 1));
            out.counts.group_of_sample.push_back(static_cast<int>(s) + 1);
        }
    }
    out.de_target = sc.de_fraction * static_cast<double>(sc.m);
    out.n_de = static_cast<std::size_t>(std::llround(out.de_target));
    out.truth.is_de.assign(sc.m, 0);
    out.truth.mu = Matrix(sc.m, S);
    out.truth.gamma = Matrix(sc.m, S - 1);
    return out;
}

/// Fills truth.mu and truth.gamma for the DE genes listed in `de_genes`, the first `n_up` keeping their drawn sign.
inline void draw_means(Rng& rng, const SimScenario& sc, SimOutput& out, const std::vector<std::size_t>& de_genes) {
    const std::size_t S = sc.n_per_group.size();
    for (std::size_t i = 0; i < sc.m; ++i) {
        out.truth.mu(i, 0) = rng.normal(sc.base_mean, sc.spread(sc.base_var));
        for (std::size_t s = 1; s < S; ++s) out.truth.mu(i, s) = out.truth.mu(i, 0);
    }
    const auto n_up = static_cast<std::size_t>(std::llround(sc.up_fraction * static_cast<double>(de_genes.size())));
    for (std::size_t k = 0; k < de_genes.size(); ++k) {
        const std::size_t i = de_genes[k];
        out.truth.is_de[i] = 1;
        for (std::size_t s = 1; s < S; ++s) {
            double effect = rng.normal(sc.shift_mean, sc.shift_sd);
            if (k >= n_up) effect = -effect;
            out.truth.gamma(i, s - 1) = effect;
            out.truth.mu(i, s) = out.truth.mu(i, 0) + effect;
        }
    }
}

inline std::vector<double> draw_lengths(Rng& rng, const SimScenario& sc) {
    std::vector<double> lengths(sc.m);
    for (auto& l : lengths) l = std::exp(rng.uniform(sc.log_length_lo, sc.log_length_hi));
    return lengths;
}

inline double draw_depth(Rng& rng, const SimScenario& sc) {
    return std::round(rng.uniform(sc.depth_lo, sc.depth_hi));
}

} // namespace sim_detail

/// Two-group style multinomial generator; DE genes are the last round(de_fraction * m) genes.
inline SimOutput simulate_multinomial(const SimScenario& sc) {
    sc.validate();
    if (sc.kind != ScenarioKind::multinomial31) {
        throw Error("simulate_multinomial: scenario kind must be multinomial31");
    }
    Rng rng(sc.seed);
    SimOutput out = sim_detail::skeleton(sc);
    const std::size_t m = sc.m, n = out.counts.sample_ids.size();

    std::vector<std::size_t> de_genes(out.n_de);
    std::iota(de_genes.begin(), de_genes.end(), m - out.n_de);
    sim_detail::draw_means(rng, sc, out, de_genes);

    out.d_true.resize(n);
    for (auto& d : out.d_true) d = rng.normal(0.0, sc.spread(sc.offset_var));
    auto lengths = sim_detail::draw_lengths(rng, sc);

    out.counts.counts = Matrix(m, n);
    out.log_offset.resize(n);
    std::vector<double> weights(m);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t s = static_cast<std::size_t>(out.counts.group_of_sample[j] - 1);
        const double depth = sim_detail::draw_depth(rng, sc);
        double log_norm = 0, shifted_total = 0;
        double x_max = -std::numeric_limits<double>::infinity();
        std::vector<double> x(m);
        for (std::size_t i = 0; i < m; ++i) {
            x[i] = rng.normal(out.truth.mu(i, s) + out.d_true[j], sc.spread(sc.noise_var));
            x_max = std::max(x_max, x[i] + std::log(lengths[i]));
        }
        for (std::size_t i = 0; i < m; ++i) {
            weights[i] = std::exp(x[i] + std::log(lengths[i]) - x_max);
            shifted_total += weights[i];
        }
        log_norm = x_max + std::log(shifted_total);
        out.log_offset[j] = std::log(depth) - (log_norm - out.d_true[j]);
        auto draws = rng.multinomial(static_cast<std::uint64_t>(depth), weights);
        for (std::size_t i = 0; i < m; ++i) {
            out.counts.counts(i, j) = static_cast<double>(draws[i]) + 1.0;
        }
    }
    out.counts.gene_lengths = std::move(lengths);
    return out;
}

/// Log-normal or negative-binomial benchmark generator; DE genes are a random subset.
inline SimOutput simulate_benchmark(const SimScenario& sc) {
    sc.validate();
    if (sc.kind == ScenarioKind::multinomial31) {
        throw Error("simulate_benchmark: scenario kind must be lognormal32 or negbinomial32");
    }
    Rng rng(sc.seed);
    SimOutput out = sim_detail::skeleton(sc);
    const std::size_t m = sc.m, n = out.counts.sample_ids.size(), S = sc.n_per_group.size();

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    std::vector<std::size_t> de_genes(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(out.n_de));
    std::sort(de_genes.begin(), de_genes.end());
    // Directions are assigned in random order, not by gene index.
    std::shuffle(de_genes.begin(), de_genes.end(), rng.engine());
    sim_detail::draw_means(rng, sc, out, de_genes);

    auto lengths = sim_detail::draw_lengths(rng, sc);
    std::vector<double> dispersion(m, 0.0);
    if (sc.kind == ScenarioKind::negbinomial32) {
        for (auto& phi : dispersion) phi = std::exp(rng.normal(sc.dispersion_meanlog, sc.dispersion_sdlog));
    }

    // log sum_i l_i e^mu_si per group
    std::vector<double> log_norm(S);
    for (std::size_t s = 0; s < S; ++s) {
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) top = std::max(top, std::log(lengths[i]) + out.truth.mu(i, s));
        double total = 0;
        for (std::size_t i = 0; i < m; ++i) total += std::exp(std::log(lengths[i]) + out.truth.mu(i, s) - top);
        log_norm[s] = top + std::log(total);
    }

    out.counts.counts = Matrix(m, n);
    out.d_true.resize(n);
    out.log_offset.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t s = static_cast<std::size_t>(out.counts.group_of_sample[j] - 1);
        const double depth = sim_detail::draw_depth(rng, sc);
        out.d_true[j] = std::log(depth);
        out.log_offset[j] = std::log(depth) - log_norm[s];
        for (std::size_t i = 0; i < m; ++i) {
            const double log_mean = out.log_offset[j] + std::log(lengths[i]) + out.truth.mu(i, s);
            double c;
            if (sc.kind == ScenarioKind::lognormal32) {
                c = std::round(std::exp(rng.normal(log_mean, sc.sigma_ln)));
            } else {
                c = static_cast<double>(rng.negative_binomial(std::exp(log_mean), dispersion[i]));
            }
            out.counts.counts(i, j) = c;
        }
    }
    out.counts.gene_lengths = std::move(lengths);
    return out;
}

inline SimOutput simulate(const SimScenario& sc) {
    return sc.kind == ScenarioKind::multinomial31 ? simulate_multinomial(sc) : simulate_benchmark(sc);
}

/// `gene_id<TAB>is_de<TAB>gamma_true` (one gamma column per non-reference group when S > 2).
inline void write_truth_tsv(std::ostream& out, const SimOutput& sim) {
    const std::size_t S1 = sim.truth.gamma.cols();
    out << "gene_id\tis_de";
    if (S1 == 1) {
        out << "\tgamma_true";
    } else {
        for (std::size_t s = 0; s < S1; ++s) out << "\tgamma_true_" << s + 2;
    }
    out << '\n';
    for (std::size_t i = 0; i < sim.counts.gene_ids.size(); ++i) {
        out << sim.counts.gene_ids[i] << '\t' << sim.truth.is_de[i];
        for (std::size_t s = 0; s < S1; ++s) out << '\t' << format_double(sim.truth.gamma(i, s));
        out << '\n';
    }
}

/// `sample_id<TAB>d_true<TAB>log_offset`.
inline void write_offsets_tsv(std::ostream& out, const SimOutput& sim) {
    out << "sample_id\td_true\tlog_offset\n";
    for (std::size_t j = 0; j < sim.counts.sample_ids.size(); ++j) {
        out << sim.counts.sample_ids[j] << '\t' << format_double(sim.d_true[j]) << '\t' << format_double(sim.log_offset[j]) << '\n';
    }
}

inline nlohmann::json scenario_json(const SimOutput& sim) {
    nlohmann::json j = sim.scenario;
    j["n_de"] = sim.n_de;
    j["de_target"] = sim.de_target;
    j["de_rounded"] = static_cast<double>(sim.n_de) != sim.de_target;
    return j;
}

/**
 * Writes <prefix>counts.tsv, groups.tsv, lengths.tsv, truth.tsv, offsets.tsv
 * and scenario.json. Returns the paths written.
 */
inline std::vector<std::string> write_simulation(const SimOutput& sim, const std::string& prefix) {
    std::vector<std::string> paths;
    auto emit = [&](const std::string& suffix, auto&& writer) {
        std::string path = prefix + suffix;
        auto out = open_output(path);
        writer(out);
        if (!out) throw Error("failed writing '" + path + "'");
        paths.push_back(path);
    };
    emit("counts.tsv", [&](std::ostream& o) { write_matrix_tsv(o, sim.counts.gene_ids, sim.counts.sample_ids, sim.counts.counts); });
    emit("groups.tsv", [&](std::ostream& o) { write_groups_tsv(o, sim.counts.sample_ids, sim.counts.group_of_sample); });
    emit("lengths.tsv", [&](std::ostream& o) { write_lengths_tsv(o, sim.counts.gene_ids, *sim.counts.gene_lengths); });
    emit("truth.tsv", [&](std::ostream& o) { write_truth_tsv(o, sim); });
    emit("offsets.tsv", [&](std::ostream& o) { write_offsets_tsv(o, sim); });
    emit("scenario.json", [&](std::ostream& o) { o << scenario_json(sim).dump(2) << '\n'; });
    return paths;
}

} // namespace l0de
