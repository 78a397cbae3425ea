// Command-line driver: unit conversion, fitting, simulation, benchmarking and
// objective landscapes.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "l0de.hpp"

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataOptions {
    std::string counts;
    std::string groups;
    std::string lengths;
    std::string unit = "counts";
    double pseudocount = 1.0;
};

void add_data_options(CLI::App* cmd, DataOptions& d, bool need_groups) {
    auto* c = cmd->add_option("counts,--counts", d.counts, "Count matrix TSV (gene_id, then one column per sample)");
    auto* g = cmd->add_option("--groups", d.groups, "Sample groups TSV (sample_id, group index)");
    if (need_groups) {
        c->required();
        g->required();
    }
    cmd->add_option("--lengths", d.lengths, "Gene lengths TSV (gene_id, length)");
    cmd->add_option("--unit", d.unit, "counts, cpm, rpkm or tpm")->capture_default_str();
    cmd->add_option("--pseudocount", d.pseudocount, "Added to raw counts before conversion")->capture_default_str();
}

l0de::Unit unit_arg(const std::string& name) {
    try {
        return l0de::parse_unit(name);
    } catch (const l0de::Error& e) {
        throw UsageError(e.what());
    }
}

l0de::SimScenario scenario_arg(const std::string& preset, const std::string& scenario_path, const std::optional<std::uint64_t>& seed) {
    if (preset.empty() == scenario_path.empty()) {
        throw UsageError("exactly one of --preset and --scenario is required");
    }
    l0de::SimScenario sc;
    if (!preset.empty()) {
        try {
            sc = l0de::preset(preset);
        } catch (const l0de::Error& e) {
            throw UsageError(e.what());
        }
    } else {
        auto in = l0de::open_input(scenario_path);
        try {
            sc = nlohmann::json::parse(in).get<l0de::SimScenario>();
        } catch (const nlohmann::json::exception& e) {
            throw l0de::Error(scenario_path + ": " + e.what());
        }
    }
    if (seed) sc.seed = *seed;
    sc.validate();
    return sc;
}

template <class Writer>
void write_file(const std::string& path, Writer&& writer) {
    auto out = l0de::open_output(path);
    writer(out);
    out.flush();
    if (!out) throw l0de::Error("failed writing '" + path + "'");
}

int cmd_units(const DataOptions& d, const std::string& out_path) {
    const auto unit = unit_arg(d.unit);
    auto cm = l0de::load_count_matrix(d.counts, d.groups, d.lengths);
    auto converted = l0de::convert_units(cm, unit, d.pseudocount);
    write_file(out_path, [&](std::ostream& o) { l0de::write_matrix_tsv(o, cm.gene_ids, cm.sample_ids, converted); });
    std::cout << "units: " << cm.n_genes() << " genes x " << cm.n_samples() << " samples converted to " << l0de::to_string(unit) << " -> " << out_path << '\n';
    return 0;
}

int cmd_fit(const DataOptions& d, double q, const std::string& solver, const std::optional<std::uint64_t>& seed, const std::string& out_path, const std::string& gamma_path) {
    const auto unit = unit_arg(d.unit);
    l0de::FitOptions opts;
    opts.q = q;
    try {
        opts.solver = l0de::parse_solver(solver);
    } catch (const l0de::Error& e) {
        throw UsageError(e.what());
    }
    auto cm = l0de::load_count_matrix(d.counts, d.groups, d.lengths);
    auto x = l0de::log_transform(cm, unit, d.pseudocount);
    auto result = l0de::fit(x, opts);

    l0de::Provenance prov{unit, d.pseudocount, seed};
    write_file(out_path, [&](std::ostream& o) { o << l0de::fit_to_json(result, prov, x.gene_ids, x.sample_ids).dump(2) << '\n'; });
    if (!gamma_path.empty()) {
        write_file(gamma_path, [&](std::ostream& o) { l0de::write_gamma_csv(o, result, x.gene_ids); });
    }
    std::cout << "fit: " << x.values.rows() << " genes, " << result.groups.n_groups() << " groups, " << result.n_de() << " DE at q=" << q
              << ", objective " << l0de::format_double(result.objective) << " -> " << out_path << '\n';
    return 0;
}

int cmd_simulate(const l0de::SimScenario& sc, const std::string& prefix) {
    auto sim = l0de::simulate(sc);
    auto paths = l0de::write_simulation(sim, prefix);
    std::cout << "simulate: " << sc.name << " seed " << sc.seed << ", " << sc.m << " genes, " << sim.counts.n_samples() << " samples, " << sim.n_de << " DE -> "
              << prefix << "{counts,groups,lengths,truth,offsets}.tsv, " << prefix << "scenario.json\n";
    return 0;
}

int cmd_bench(const l0de::SimScenario& sc, std::size_t replicates, const std::string& methods, unsigned threads, double q, const std::string& out_path, const std::string& roc_prefix) {
    l0de::BenchmarkOptions opts;
    try {
        opts.methods = l0de::parse_methods(methods);
    } catch (const l0de::Error& e) {
        throw UsageError(e.what());
    }
    if (replicates < 2) throw UsageError("--replicates must be at least 2");
    opts.threads = threads;
    opts.fit.q = q;
    auto bench = l0de::run_benchmark(sc, replicates, opts);
    write_file(out_path, [&](std::ostream& o) {
        l0de::write_benchmark_header(o);
        l0de::write_benchmark_rows(o, bench);
    });
    if (!roc_prefix.empty()) {
        for (const auto& r : bench.results) {
            write_file(roc_prefix + r.method_label + ".csv", [&](std::ostream& o) { l0de::write_roc_csv(o, r.roc); });
        }
    }
    std::cout << "bench: " << sc.name << ", " << replicates << " replicates:";
    for (const auto& r : bench.results) {
        std::cout << ' ' << r.method_label << '=' << l0de::format_double(r.mean_auc) << " (se " << l0de::format_double(r.se_auc) << ')';
    }
    std::cout << " -> " << out_path << '\n';
    return 0;
}

int cmd_landscape(const DataOptions& d, const std::string& figure, std::uint64_t seed, double q, const std::optional<std::string>& grid, bool lambda_inf, const std::string& out_path) {
    if (figure.empty() == d.counts.empty()) {
        throw UsageError("give either a count matrix with --groups or --figure");
    }
    std::optional<l0de::AxisGrid> axis;
    if (grid) {
        try {
            axis = l0de::parse_axis_grid(*grid);
        } catch (const l0de::Error& e) {
            throw UsageError(e.what());
        }
    }
    l0de::LandscapeProblem problem;
    if (!figure.empty()) {
        try {
            problem = l0de::figure_problem(figure, seed);
        } catch (const l0de::Error& e) {
            throw UsageError(e.what());
        }
    } else {
        if (d.groups.empty()) throw UsageError("--groups is required with a count matrix");
        const auto unit = unit_arg(d.unit);
        auto cm = l0de::load_count_matrix(d.counts, d.groups, d.lengths);
        auto x = l0de::log_transform(cm, unit, d.pseudocount);
        l0de::FitOptions opts;
        opts.q = q;
        problem = l0de::landscape_problem(l0de::fit(x, opts));
    }
    if (lambda_inf) problem = l0de::without_cap(std::move(problem));
    const std::size_t S = problem.mu_prime.cols();
    if (!axis) axis = l0de::default_axis(problem, 1, S == 2 ? 2001 : 201);

    auto land = l0de::export_G_landscape(problem, *axis);
    write_file(out_path, [&](std::ostream& o) { l0de::write_landscape_csv(o, land); });
    std::cout << "landscape: " << problem.name << ", " << land.rows.size() << " grid points, minimizer";
    for (std::size_t s = 1; s < land.minimum.d.size(); ++s) std::cout << " d" << s + 1 << '=' << l0de::format_double(land.minimum.d[s]);
    std::cout << " G=" << l0de::format_double(land.minimum.value) << " -> " << out_path << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"L0-penalized normalization and differential expression for RNA-Seq counts", "l0de"};
    app.require_subcommand(1);

    DataOptions units_data;
    std::string units_out;
    auto* units = app.add_subcommand("units", "Convert counts to cpm, rpkm or tpm");
    add_data_options(units, units_data, false);
    units->get_option("counts")->required();
    units->get_option("--pseudocount")->default_val(0.0);
    units_data.pseudocount = 0.0;
    units->add_option("-o,--out", units_out, "Output TSV")->required();

    DataOptions fit_data;
    double fit_q = 0.01;
    std::string fit_solver = "automatic", fit_out = "fit.json", fit_gamma;
    std::optional<std::uint64_t> fit_seed;
    auto* fitc = app.add_subcommand("fit", "Fit the model and call DE genes");
    add_data_options(fitc, fit_data, true);
    fitc->add_option("--q", fit_q, "Significance level used to set the penalty")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    fitc->add_option("--solver", fit_solver, "automatic, two_group or general")->capture_default_str();
    fitc->add_option("--seed", fit_seed, "Simulation seed to record with the fit");
    fitc->add_option("-o,--out", fit_out, "Output JSON")->capture_default_str();
    fitc->add_option("--gamma", fit_gamma, "Optional CSV of fitted log-fold effects");

    std::string sim_preset, sim_scenario, sim_prefix = "sim_";
    std::optional<std::uint64_t> sim_seed;
    auto* simc = app.add_subcommand("simulate", "Simulate counts with known DE genes");
    simc->add_option("--preset", sim_preset, "Named scenario (figure3a..d, table1_<de>_<up>, table2_<de>_<up>)");
    simc->add_option("--scenario", sim_scenario, "Scenario JSON file");
    simc->add_option("--seed", sim_seed, "Overrides the scenario seed");
    simc->add_option("-o,--out", sim_prefix, "Output path prefix")->capture_default_str();

    std::string bench_preset, bench_scenario, bench_methods = "l0,median_t", bench_out = "bench.csv", bench_roc;
    std::optional<std::uint64_t> bench_seed;
    std::size_t bench_reps = 10;
    unsigned bench_threads = 0;
    double bench_q = 0.01;
    auto* benchc = app.add_subcommand("bench", "Replicate benchmark of DE ranking AUC");
    benchc->add_option("--preset", bench_preset, "Named scenario");
    benchc->add_option("--scenario", bench_scenario, "Scenario JSON file");
    benchc->add_option("--seed", bench_seed, "Master seed");
    benchc->add_option("--replicates", bench_reps, "Number of replicates")->capture_default_str();
    benchc->add_option("--methods", bench_methods, "Comma-separated: l0, median_t")->capture_default_str();
    benchc->add_option("--threads", bench_threads, "Worker threads (0 reads L0DE_THREADS)")->capture_default_str();
    benchc->add_option("--q", bench_q, "Significance level for the L0 fit")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    benchc->add_option("-o,--out", bench_out, "Output CSV")->capture_default_str();
    benchc->add_option("--roc", bench_roc, "Prefix for per-method ROC CSVs of the first replicate");

    DataOptions land_data;
    std::string land_figure, land_out = "landscape.csv";
    std::optional<std::string> land_grid;
    std::uint64_t land_seed = 1;
    double land_q = 0.01;
    bool land_inf = false;
    auto* landc = app.add_subcommand("landscape", "Tabulate the offset objective on a grid");
    add_data_options(landc, land_data, false);
    landc->add_option("--figure", land_figure, "Synthetic setting: figure1a, figure1b, figure2a, figure2b");
    landc->add_option("--seed", land_seed, "Seed for --figure")->capture_default_str();
    landc->add_option("--q", land_q, "Significance level when fitting data")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    landc->add_option("--grid", land_grid, "lo:hi:n (shared by both axes for three groups)");
    landc->add_flag("--lambda-inf", land_inf, "Drop the cap so no gene is ever DE");
    landc->add_option("-o,--out", land_out, "Output CSV")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    try {
        if (units->parsed()) return cmd_units(units_data, units_out);
        if (fitc->parsed()) return cmd_fit(fit_data, fit_q, fit_solver, fit_seed, fit_out, fit_gamma);
        if (simc->parsed()) return cmd_simulate(scenario_arg(sim_preset, sim_scenario, sim_seed), sim_prefix);
        if (benchc->parsed()) return cmd_bench(scenario_arg(bench_preset, bench_scenario, bench_seed), bench_reps, bench_methods, bench_threads, bench_q, bench_out, bench_roc);
        if (landc->parsed()) return cmd_landscape(land_data, land_figure, land_seed, land_q, land_grid, land_inf, land_out);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kUsageError;
}
