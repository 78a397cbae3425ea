#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "groups.hpp"
#include "matrix.hpp"

/**
 * @file ingest.hpp
 *
 * @brief Count matrices, within-sample quantification units and the log transform.
 */

namespace l0de {

enum class Unit { counts, cpm, rpkm, tpm };

inline std::string_view to_string(Unit unit) {
    switch (unit) {
        case Unit::counts: return "counts";
        case Unit::cpm: return "cpm";
        case Unit::rpkm: return "rpkm";
        case Unit::tpm: return "tpm";
    }
    return "counts";
}

inline Unit parse_unit(std::string_view name) {
    if (name == "counts") return Unit::counts;
    if (name == "cpm") return Unit::cpm;
    if (name == "rpkm") return Unit::rpkm;
    if (name == "tpm") return Unit::tpm;
    throw Error("unknown unit '" + std::string(name) + "' (expected counts, cpm, rpkm or tpm)");
}

inline bool needs_lengths(Unit unit) {
    return unit == Unit::rpkm || unit == Unit::tpm;
}

/**
 * Raw gene-by-sample read counts.
 *
 * Counts are stored as doubles because estimated (non-integer) counts from
 * upstream quantifiers are accepted.
 */
struct CountMatrix {
    std::vector<std::string> gene_ids;
    std::vector<std::string> sample_ids;
    Matrix counts;
    std::vector<int> group_of_sample;
    std::optional<std::vector<double>> gene_lengths;

    std::size_t n_genes() const { return counts.rows(); }
    std::size_t n_samples() const { return counts.cols(); }

    /// Checks every invariant and returns the group layout.
    GroupLayout validate() const {
        validate_values();
        if (group_of_sample.size() != counts.cols()) {
            throw Error("group assignment length does not match the number of samples");
        }
        return GroupLayout(group_of_sample);
    }

    /// Checks everything except the group assignment.
    void validate_values() const {
        if (counts.rows() < 1 || counts.cols() < 1) {
            throw Error("count matrix must have at least one gene and one sample");
        }
        if (gene_ids.size() != counts.rows()) {
            throw Error("gene_ids length does not match the number of rows");
        }
        if (sample_ids.size() != counts.cols()) {
            throw Error("sample_ids length does not match the number of columns");
        }
        for (std::size_t i = 0; i < counts.rows(); ++i) {
            for (std::size_t j = 0; j < counts.cols(); ++j) {
                double c = counts(i, j);
                if (!std::isfinite(c) || c < 0) {
                    throw Error("negative or non-finite count for gene '" + gene_ids[i] + "' in sample '" + sample_ids[j] + "'");
                }
            }
        }
        if (gene_lengths) {
            if (gene_lengths->size() != counts.rows()) {
                throw Error("gene_lengths length does not match the number of genes");
            }
            for (std::size_t i = 0; i < gene_lengths->size(); ++i) {
                double l = (*gene_lengths)[i];
                if (!(l > 0) || !std::isfinite(l)) {
                    throw Error("nonpositive length for gene '" + gene_ids[i] + "'");
                }
            }
        }
    }
};

/// Natural-log expression values x_sij that the model consumes.
struct LogExpressionMatrix {
    std::vector<std::string> gene_ids;
    std::vector<std::string> sample_ids;
    Matrix values;
    Unit unit = Unit::counts;
    double pseudocount = 1.0;
    GroupLayout groups;
};

namespace detail {

inline double checked_sum(std::span<const double> column, const char* what) {
    double total = 0;
    for (double v : column) {
        if (!std::isfinite(v) || v < 0) {
            throw Error(std::string(what) + ": negative or non-finite entry");
        }
        total += v;
    }
    if (!(total > 0)) {
        throw Error(std::string(what) + ": empty library (column sums to zero)");
    }
    return total;
}

} // namespace detail

/// Counts per million: 1e6 * c_i / sum(c).
inline std::vector<double> to_cpm(std::span<const double> counts) {
    double total = detail::checked_sum(counts, "to_cpm");
    std::vector<double> out(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        out[i] = 1e6 * (counts[i] / total);
    }
    return out;
}

/**
 * Reads per kilobase per million: 1e3 * cpm_i / l_i.
 * `gene_ids`, when given, is used to name the offending gene in errors.
 */
inline std::vector<double> to_rpkm(std::span<const double> cpm, std::span<const double> lengths, std::span<const std::string> gene_ids = {}) {
    if (cpm.size() != lengths.size()) {
        throw Error("to_rpkm: cpm and lengths differ in size");
    }
    std::vector<double> out(cpm.size());
    for (std::size_t i = 0; i < cpm.size(); ++i) {
        if (!(lengths[i] > 0)) {
            std::string name = i < gene_ids.size() ? gene_ids[i] : "#" + std::to_string(i + 1);
            throw Error("to_rpkm: nonpositive length for gene '" + name + "'");
        }
        out[i] = 1e3 * cpm[i] / lengths[i];
    }
    return out;
}

/// Transcripts per million: 1e6 * rpkm_i / sum(rpkm).
inline std::vector<double> to_tpm(std::span<const double> rpkm) {
    double total = detail::checked_sum(rpkm, "to_tpm");
    std::vector<double> out(rpkm.size());
    for (std::size_t i = 0; i < rpkm.size(); ++i) {
        out[i] = 1e6 * (rpkm[i] / total);
    }
    return out;
}

/**
 * Converts raw counts to `unit` and takes the natural log.
 *
 * The pseudocount is added to the raw counts before unit conversion, so that
 * every unit differs from log(counts + pseudocount) only by per-sample and
 * per-gene constants.
 */
inline LogExpressionMatrix log_transform(const CountMatrix& cm, Unit unit, double pseudocount = 1.0) {
    GroupLayout layout = cm.validate();
    if (!(pseudocount >= 0) || !std::isfinite(pseudocount)) {
        throw Error("pseudocount must be a finite nonnegative number");
    }
    if (needs_lengths(unit) && !cm.gene_lengths) {
        throw Error(std::string("unit ") + std::string(to_string(unit)) + " requires gene lengths");
    }

    const std::size_t m = cm.n_genes(), n = cm.n_samples();
    LogExpressionMatrix out;
    out.gene_ids = cm.gene_ids;
    out.sample_ids = cm.sample_ids;
    out.values = Matrix(m, n);
    out.unit = unit;
    out.pseudocount = pseudocount;
    out.groups = std::move(layout);

    std::vector<double> column(m);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < m; ++i) {
            column[i] = cm.counts(i, j) + pseudocount;
        }
        std::vector<double> converted;
        switch (unit) {
            case Unit::counts: converted = column; break;
            case Unit::cpm: converted = to_cpm(column); break;
            case Unit::rpkm: converted = to_rpkm(to_cpm(column), *cm.gene_lengths, cm.gene_ids); break;
            case Unit::tpm: converted = to_tpm(to_rpkm(to_cpm(column), *cm.gene_lengths, cm.gene_ids)); break;
        }
        for (std::size_t i = 0; i < m; ++i) {
            if (!(converted[i] > 0)) {
                throw Error("nonpositive value under log for gene '" + cm.gene_ids[i] + "' in sample '" + cm.sample_ids[j] + "'");
            }
            out.values(i, j) = std::log(converted[i]);
        }
    }
    return out;
}

/// Unit-converted (not logged) matrix of counts + pseudocount, for the `units` command.
inline Matrix convert_units(const CountMatrix& cm, Unit unit, double pseudocount = 0.0) {
    cm.validate_values();
    if (!(pseudocount >= 0) || !std::isfinite(pseudocount)) {
        throw Error("pseudocount must be a finite nonnegative number");
    }
    if (needs_lengths(unit) && !cm.gene_lengths) {
        throw Error(std::string("unit ") + std::string(to_string(unit)) + " requires gene lengths");
    }
    Matrix out(cm.n_genes(), cm.n_samples());
    for (std::size_t j = 0; j < cm.n_samples(); ++j) {
        auto column = cm.counts.column(j);
        for (auto& c : column) {
            c += pseudocount;
        }
        switch (unit) {
            case Unit::counts: break;
            case Unit::cpm: column = to_cpm(column); break;
            case Unit::rpkm: column = to_rpkm(to_cpm(column), *cm.gene_lengths, cm.gene_ids); break;
            case Unit::tpm: column = to_tpm(to_rpkm(to_cpm(column), *cm.gene_lengths, cm.gene_ids)); break;
        }
        out.set_column(j, column);
    }
    return out;
}

} // namespace l0de
