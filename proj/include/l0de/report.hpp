#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fitter.hpp"
#include "ingest.hpp"
#include "io.hpp"

namespace l0de {

/// Where the fitted data came from.
struct Provenance {
    Unit unit = Unit::counts;
    double pseudocount = 1.0;
    std::optional<std::uint64_t> seed;
};

inline std::string_view to_string(Solver s) {
    switch (s) {
        case Solver::automatic: return "automatic";
        case Solver::two_group: return "two_group";
        case Solver::general: return "general";
    }
    return "automatic";
}

inline Solver parse_solver(std::string_view name) {
    if (name == "automatic") return Solver::automatic;
    if (name == "two_group") return Solver::two_group;
    if (name == "general") return Solver::general;
    throw Error("unknown solver '" + std::string(name) + "'");
}

/// ModelFit as JSON. `gamma` is a dense genes-by-(S-1) array of arrays.
inline nlohmann::json fit_to_json(const ModelFit& fit, const Provenance& prov, const std::vector<std::string>& gene_ids = {}, const std::vector<std::string>& sample_ids = {}) {
    nlohmann::json j;
    if (!gene_ids.empty()) j["gene_ids"] = gene_ids;
    if (!sample_ids.empty()) j["sample_ids"] = sample_ids;
    j["groups"] = fit.groups.labels();
    j["d"] = fit.d_full;
    j["d_group"] = fit.d_group;
    j["d_prime"] = fit.d_prime;
    nlohmann::json gamma = nlohmann::json::array();
    for (std::size_t i = 0; i < fit.gamma.rows(); ++i) {
        auto row = fit.gamma.row(i);
        gamma.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["gamma"] = std::move(gamma);
    j["mu"] = fit.mu;
    j["tau"] = fit.tau;
    j["score"] = fit.score;
    j["sigma2_hat"] = fit.sigma2;
    j["alpha"] = fit.alpha.empty() ? 0.0 : fit.alpha.front();
    j["q"] = fit.q ? nlohmann::json(*fit.q) : nlohmann::json(nullptr);
    j["objective"] = fit.objective;
    j["G_min"] = fit.G_min;
    j["n_de"] = fit.n_de();
    j["solver"] = std::string(to_string(fit.solver));
    if (fit.variance) {
        const auto& v = *fit.variance;
        j["variance"] = {
            {"s2_pooled", v.s2_pooled},
            {"s2_bar", v.s2_bar},
            {"w", v.w},
            {"w_raw", v.w_raw},
            {"iterations", v.iterations_used},
            {"converged", v.converged},
        };
    }
    j["provenance"] = {
        {"unit", std::string(to_string(prov.unit))},
        {"pseudocount", prov.pseudocount},
        {"seed", prov.seed ? nlohmann::json(*prov.seed) : nlohmann::json(nullptr)},
    };
    return j;
}

/// `gene_id,gamma_2[,gamma_3]`.
inline void write_gamma_csv(std::ostream& os, const ModelFit& fit, const std::vector<std::string>& gene_ids) {
    os << "gene_id";
    for (std::size_t s = 0; s < fit.gamma.cols(); ++s) os << ",gamma_" << s + 2;
    os << '\n';
    for (std::size_t i = 0; i < fit.gamma.rows(); ++i) {
        os << gene_ids[i];
        for (std::size_t s = 0; s < fit.gamma.cols(); ++s) os << ',' << format_double(fit.gamma(i, s));
        os << '\n';
    }
}

} // namespace l0de
