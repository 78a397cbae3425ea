#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "error.hpp"
#include "ingest.hpp"
#include "matrix.hpp"

/**
 * @file io.hpp
 *
 * @brief Tab-separated readers and writers for count matrices, gene lengths and group files.
 *
 * All readers accept LF or CRLF line endings and skip blank lines.
 * Errors name the source and the 1-based line number.
 */

namespace l0de {

namespace io_detail {

inline std::string_view strip_eol(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
        line.remove_suffix(1);
    }
    return line;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::optional<double> parse_double(std::string_view field) {
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        return std::nullopt;
    }
    return value;
}

inline std::string where(const std::string& source, std::size_t line_no) {
    return source + ": line " + std::to_string(line_no) + ": ";
}

} // namespace io_detail

/// Shortest decimal representation that reads back to the same double.
inline std::string format_double(double value) {
    char buffer[64];
    auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, ptr);
}

/**
 * Reads `gene_id<TAB>sample1<TAB>...` with one gene per row.
 * The returned matrix has no group assignment or lengths attached.
 */
inline CountMatrix read_counts_tsv(std::istream& in, const std::string& source = "counts") {
    using namespace io_detail;
    CountMatrix cm;
    std::string raw;
    std::size_t line_no = 0;
    bool have_header = false;
    std::vector<double> values;
    std::unordered_set<std::string> seen_genes;

    while (std::getline(in, raw)) {
        ++line_no;
        auto line = strip_eol(raw);
        if (line.empty()) {
            continue;
        }
        auto fields = split_tabs(line);
        if (!have_header) {
            if (fields.size() < 2) {
                throw Error(where(source, line_no) + "header needs a gene id column and at least one sample");
            }
            for (std::size_t k = 1; k < fields.size(); ++k) {
                cm.sample_ids.emplace_back(fields[k]);
            }
            have_header = true;
            continue;
        }
        if (fields.size() != cm.sample_ids.size() + 1) {
            throw Error(where(source, line_no) + "expected " + std::to_string(cm.sample_ids.size() + 1) + " fields, got " + std::to_string(fields.size()));
        }
        std::string gene(fields[0]);
        if (gene.empty()) {
            throw Error(where(source, line_no) + "empty gene id");
        }
        if (!seen_genes.insert(gene).second) {
            throw Error(where(source, line_no) + "duplicate gene id '" + gene + "'");
        }
        for (std::size_t k = 1; k < fields.size(); ++k) {
            auto v = parse_double(fields[k]);
            if (!v || !std::isfinite(*v)) {
                throw Error(where(source, line_no) + "field " + std::to_string(k + 1) + " is not a number: '" + std::string(fields[k]) + "'");
            }
            if (*v < 0) {
                throw Error(where(source, line_no) + "negative count for gene '" + gene + "'");
            }
            values.push_back(*v);
        }
        cm.gene_ids.push_back(std::move(gene));
    }
    if (!have_header) {
        throw Error(source + ": empty input");
    }
    if (cm.gene_ids.empty()) {
        throw Error(source + ": no gene rows");
    }
    cm.counts = Matrix(cm.gene_ids.size(), cm.sample_ids.size());
    std::copy(values.begin(), values.end(), cm.counts.data().begin());
    return cm;
}

namespace io_detail {

/// Two-column `key<TAB>number` file; a first line whose value is not numeric is taken as a header.
inline std::vector<std::pair<std::string, double>> read_keyed_numbers(std::istream& in, const std::string& source) {
    std::vector<std::pair<std::string, double>> out;
    std::unordered_set<std::string> seen;
    std::string raw;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, raw)) {
        ++line_no;
        auto line = strip_eol(raw);
        if (line.empty()) {
            continue;
        }
        auto fields = split_tabs(line);
        if (fields.size() != 2) {
            throw Error(where(source, line_no) + "expected 2 fields, got " + std::to_string(fields.size()));
        }
        auto v = parse_double(fields[1]);
        if (!v) {
            if (first) {
                first = false;
                continue;
            }
            throw Error(where(source, line_no) + "value is not a number: '" + std::string(fields[1]) + "'");
        }
        first = false;
        std::string key(fields[0]);
        if (!seen.insert(key).second) {
            throw Error(where(source, line_no) + "duplicate id '" + key + "'");
        }
        out.emplace_back(std::move(key), *v);
    }
    return out;
}

} // namespace io_detail

/// Reads `gene_id<TAB>length` and attaches lengths to `cm` in its gene order.
inline void attach_lengths(CountMatrix& cm, std::istream& in, const std::string& source = "lengths") {
    auto rows = io_detail::read_keyed_numbers(in, source);
    std::unordered_map<std::string, double> lookup(rows.begin(), rows.end());
    std::vector<double> lengths;
    lengths.reserve(cm.gene_ids.size());
    for (const auto& g : cm.gene_ids) {
        auto it = lookup.find(g);
        if (it == lookup.end()) {
            throw Error(source + ": no length for gene '" + g + "'");
        }
        if (!(it->second > 0)) {
            throw Error(source + ": nonpositive length for gene '" + g + "'");
        }
        lengths.push_back(it->second);
    }
    cm.gene_lengths = std::move(lengths);
}

/// Reads `sample_id<TAB>group_index` and attaches 1-based labels to `cm` in its sample order.
inline void attach_groups(CountMatrix& cm, std::istream& in, const std::string& source = "groups") {
    auto rows = io_detail::read_keyed_numbers(in, source);
    std::unordered_map<std::string, double> lookup(rows.begin(), rows.end());
    std::vector<int> labels;
    labels.reserve(cm.sample_ids.size());
    for (const auto& s : cm.sample_ids) {
        auto it = lookup.find(s);
        if (it == lookup.end()) {
            throw Error(source + ": no group for sample '" + s + "'");
        }
        double g = it->second;
        if (g != std::floor(g) || g < 1) {
            throw Error(source + ": group index for sample '" + s + "' must be a positive integer");
        }
        labels.push_back(static_cast<int>(g));
    }
    cm.group_of_sample = std::move(labels);
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open '" + path + "' for reading");
    }
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open '" + path + "' for writing");
    }
    return out;
}

/// Loads a count matrix with optional group and length sidecar files.
inline CountMatrix load_count_matrix(const std::string& counts_path, const std::string& groups_path = {}, const std::string& lengths_path = {}) {
    auto in = open_input(counts_path);
    CountMatrix cm = read_counts_tsv(in, counts_path);
    if (!groups_path.empty()) {
        auto g = open_input(groups_path);
        attach_groups(cm, g, groups_path);
    }
    if (!lengths_path.empty()) {
        auto l = open_input(lengths_path);
        attach_lengths(cm, l, lengths_path);
    }
    return cm;
}

/// Writes a matrix in the counts TSV layout.
inline void write_matrix_tsv(std::ostream& out, const std::vector<std::string>& gene_ids, const std::vector<std::string>& sample_ids, const Matrix& values) {
    out << "gene_id";
    for (const auto& s : sample_ids) {
        out << '\t' << s;
    }
    out << '\n';
    for (std::size_t i = 0; i < values.rows(); ++i) {
        out << gene_ids[i];
        for (std::size_t j = 0; j < values.cols(); ++j) {
            out << '\t' << format_double(values(i, j));
        }
        out << '\n';
    }
}

inline void write_groups_tsv(std::ostream& out, const std::vector<std::string>& sample_ids, const std::vector<int>& labels) {
    out << "sample_id\tgroup\n";
    for (std::size_t j = 0; j < sample_ids.size(); ++j) {
        out << sample_ids[j] << '\t' << labels[j] << '\n';
    }
}

inline void write_lengths_tsv(std::ostream& out, const std::vector<std::string>& gene_ids, const std::vector<double>& lengths) {
    out << "gene_id\tlength\n";
    for (std::size_t i = 0; i < gene_ids.size(); ++i) {
        out << gene_ids[i] << '\t' << format_double(lengths[i]) << '\n';
    }
}

} // namespace l0de
