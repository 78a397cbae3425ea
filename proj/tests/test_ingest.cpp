#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ingest.hpp"
#include "io.hpp"

using namespace l0de;

namespace {

double sum(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0);
}

std::vector<double> random_counts(std::size_t m, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<int> dist(0, 5000);
    std::vector<double> out(m);
    for (auto& c : out) c = dist(gen);
    return out;
}

CountMatrix small_matrix() {
    CountMatrix cm;
    cm.gene_ids = {"a", "b", "c", "d", "e"};
    cm.sample_ids = {"s1", "s2", "s3"};
    cm.counts = Matrix(5, 3);
    const double raw[5][3] = {{0, 3, 10}, {7, 1, 0}, {120, 80, 95}, {4, 4, 4}, {1000, 2500, 30}};
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 3; ++j) cm.counts(i, j) = raw[i][j];
    cm.group_of_sample = {1, 1, 2};
    cm.gene_lengths = std::vector<double>{500, 1200, 2000, 800, 3000};
    return cm;
}

} // namespace

TEST(Cpm, DirectValues) {
    std::vector<double> c{1, 1, 2};
    auto out = to_cpm(c);
    EXPECT_DOUBLE_EQ(out[0], 250000);
    EXPECT_DOUBLE_EQ(out[1], 250000);
    EXPECT_DOUBLE_EQ(out[2], 500000);
}

TEST(Cpm, EqualCountsSpreadEvenly) {
    std::vector<double> c(7, 13.0);
    for (double v : to_cpm(c)) EXPECT_NEAR(v, 1e6 / 7, 1e-12 * 1e6);
}

TEST(Cpm, MatchesScalarLoopAndSumsToMillion) {
    auto c = random_counts(1000, 3);
    auto out = to_cpm(c);
    double total = 0;
    for (double v : c) total += v;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double expected = c[i] * 1e6 / total;
        EXPECT_NEAR(out[i], expected, 1e-12 * std::max(1.0, expected));
    }
    EXPECT_NEAR(sum(out), 1e6, 1e-12 * 1e6);
}

TEST(Cpm, EmptyLibraryIsAnError) {
    std::vector<double> zeros(4, 0.0);
    try {
        to_cpm(zeros);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("empty library"), std::string::npos);
    }
}

TEST(Rpkm, DirectValues) {
    std::vector<double> cpm{500, 123.5}, lengths{2000, 1000};
    auto out = to_rpkm(cpm, lengths);
    EXPECT_DOUBLE_EQ(out[0], 250);
    EXPECT_DOUBLE_EQ(out[1], 123.5);
}

TEST(Rpkm, MatchesRecomputation) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(1, 1e4);
    std::vector<double> cpm(300), len(300);
    for (std::size_t i = 0; i < 300; ++i) {
        cpm[i] = u(gen);
        len[i] = u(gen);
    }
    auto out = to_rpkm(cpm, len);
    for (std::size_t i = 0; i < 300; ++i) {
        const double expected = cpm[i] / (len[i] / 1000.0);
        EXPECT_NEAR(out[i], expected, 1e-12 * expected);
    }
}

TEST(Rpkm, NonpositiveLengthNamesGene) {
    std::vector<double> cpm{1, 2}, lengths{100, 0};
    std::vector<std::string> ids{"alpha", "beta"};
    try {
        to_rpkm(cpm, lengths, ids);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("beta"), std::string::npos);
    }
}

TEST(Tpm, DirectValues) {
    std::vector<double> r{1, 3};
    auto out = to_tpm(r);
    EXPECT_DOUBLE_EQ(out[0], 250000);
    EXPECT_DOUBLE_EQ(out[1], 750000);
    std::vector<double> equal(4, 2.5);
    for (double v : to_tpm(equal)) EXPECT_DOUBLE_EQ(v, 250000);
    EXPECT_THROW(to_tpm(std::vector<double>{0, 0}), Error);
}

TEST(Tpm, PipelineSumsToMillion) {
    auto c = random_counts(500, 5);
    std::vector<double> len(500);
    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> u(100, 20000);
    for (auto& l : len) l = u(gen);
    auto tpm = to_tpm(to_rpkm(to_cpm(c), len));
    EXPECT_NEAR(sum(tpm), 1e6, 1e-12 * 1e6);
}

TEST(LogTransform, ZeroCountWithUnitPseudocountIsZero) {
    auto cm = small_matrix();
    auto x = log_transform(cm, Unit::counts, 1.0);
    EXPECT_EQ(x.values(0, 0), 0.0);
    EXPECT_EQ(x.unit, Unit::counts);
    EXPECT_EQ(x.pseudocount, 1.0);
}

TEST(LogTransform, ZeroCountWithoutPseudocountFails) {
    auto cm = small_matrix();
    try {
        log_transform(cm, Unit::counts, 0.0);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("nonpositive value under log"), std::string::npos);
    }
}

TEST(LogTransform, LengthUnitsNeedLengths) {
    auto cm = small_matrix();
    cm.gene_lengths.reset();
    EXPECT_THROW(log_transform(cm, Unit::rpkm), Error);
    EXPECT_THROW(log_transform(cm, Unit::tpm), Error);
    EXPECT_NO_THROW(log_transform(cm, Unit::cpm));
}

TEST(LogTransform, MatchesHandComputedValues) {
    auto cm = small_matrix();
    const double pc = 0.5;
    for (Unit unit : {Unit::counts, Unit::cpm, Unit::rpkm, Unit::tpm}) {
        auto x = log_transform(cm, unit, pc);
        for (std::size_t j = 0; j < 3; ++j) {
            double lib = 0, rpk_total = 0;
            for (std::size_t i = 0; i < 5; ++i) {
                lib += cm.counts(i, j) + pc;
                rpk_total += (cm.counts(i, j) + pc) / (*cm.gene_lengths)[i];
            }
            for (std::size_t i = 0; i < 5; ++i) {
                const double c = cm.counts(i, j) + pc, l = (*cm.gene_lengths)[i];
                double v = 0;
                switch (unit) {
                    case Unit::counts: v = c; break;
                    case Unit::cpm: v = c / lib * 1e6; break;
                    case Unit::rpkm: v = c / lib * 1e9 / l; break;
                    case Unit::tpm: v = (c / l) / rpk_total * 1e6; break;
                }
                EXPECT_NEAR(x.values(i, j), std::log(v), 1e-12) << to_string(unit) << " gene " << i << " sample " << j;
            }
        }
    }
}

TEST(LogTransform, UnitsDifferByRowAndColumnConstants) {
    CountMatrix cm;
    const std::size_t m = 40, n = 6;
    std::mt19937_64 gen(21);
    std::uniform_int_distribution<int> cnt(0, 900);
    std::uniform_real_distribution<double> len(200, 9000);
    cm.counts = Matrix(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        cm.gene_ids.push_back("g" + std::to_string(i));
        for (std::size_t j = 0; j < n; ++j) cm.counts(i, j) = cnt(gen);
    }
    for (std::size_t j = 0; j < n; ++j) {
        cm.sample_ids.push_back("s" + std::to_string(j));
        cm.group_of_sample.push_back(j < 3 ? 1 : 2);
    }
    std::vector<double> lengths(m);
    for (auto& l : lengths) l = len(gen);
    cm.gene_lengths = lengths;

    auto raw = log_transform(cm, Unit::counts).values;
    auto cpm = log_transform(cm, Unit::cpm).values;
    auto rpkm = log_transform(cm, Unit::rpkm).values;
    auto tpm = log_transform(cm, Unit::tpm).values;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 1; i < m; ++i) {
            EXPECT_NEAR(cpm(i, j) - raw(i, j), cpm(0, j) - raw(0, j), 1e-10);
            EXPECT_NEAR(tpm(i, j) - rpkm(i, j), tpm(0, j) - rpkm(0, j), 1e-10);
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 1; j < n; ++j) {
            EXPECT_NEAR(rpkm(i, j) - cpm(i, j), rpkm(i, 0) - cpm(i, 0), 1e-10);
        }
    }
}

TEST(LogTransform, MonotoneInEachCount) {
    auto cm = small_matrix();
    auto base = log_transform(cm, Unit::counts).values;
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            auto bumped = cm;
            bumped.counts(i, j) += 1;
            EXPECT_GT(log_transform(bumped, Unit::counts).values(i, j), base(i, j));
        }
    }
}

TEST(CountMatrix, Invariants) {
    auto cm = small_matrix();
    EXPECT_NO_THROW(cm.validate());
    auto neg = cm;
    neg.counts(1, 1) = -1;
    EXPECT_THROW(neg.validate(), Error);
    auto gap = cm;
    gap.group_of_sample = {1, 1, 3};
    EXPECT_THROW(gap.validate(), Error);
    auto zero_label = cm;
    zero_label.group_of_sample = {0, 1, 2};
    EXPECT_THROW(zero_label.validate(), Error);
    auto bad_len = cm;
    (*bad_len.gene_lengths)[2] = -5;
    EXPECT_THROW(bad_len.validate(), Error);
}

TEST(ConvertUnits, NonIntegerCountsAccepted) {
    auto cm = small_matrix();
    cm.counts(2, 1) = 80.25;
    auto out = convert_units(cm, Unit::tpm);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(sum(out.column(j)), 1e6, 1e-6);
}

TEST(ReadCounts, ParsesCrlfAndSkipsBlankLines) {
    std::istringstream in("gene_id\tA\tB\r\ng1\t1\t2.5\r\n\r\ng2\t0\t7\r\n");
    auto cm = read_counts_tsv(in);
    ASSERT_EQ(cm.n_genes(), 2u);
    ASSERT_EQ(cm.n_samples(), 2u);
    EXPECT_EQ(cm.sample_ids[1], "B");
    EXPECT_EQ(cm.gene_ids[1], "g2");
    EXPECT_DOUBLE_EQ(cm.counts(0, 1), 2.5);
    EXPECT_DOUBLE_EQ(cm.counts(1, 1), 7);
}

TEST(ReadCounts, MalformedRowNamesLine) {
    std::istringstream in("gene_id\tA\tB\ng1\t1\t2\ng2\t3\n");
    try {
        read_counts_tsv(in, "x.tsv");
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(ReadCounts, RejectsBadValues) {
    std::istringstream text("gene_id\tA\ng1\tabc\n");
    EXPECT_THROW(read_counts_tsv(text), Error);
    std::istringstream negative("gene_id\tA\ng1\t-2\n");
    EXPECT_THROW(read_counts_tsv(negative), Error);
    std::istringstream dup("gene_id\tA\ng1\t2\ng1\t3\n");
    EXPECT_THROW(read_counts_tsv(dup), Error);
    std::istringstream empty("");
    EXPECT_THROW(read_counts_tsv(empty), Error);
}

TEST(Sidecars, GroupsAndLengthsAttachByName) {
    std::istringstream counts("gene_id\tA\tB\tC\ng1\t1\t2\t3\ng2\t4\t5\t6\n");
    auto cm = read_counts_tsv(counts);
    std::istringstream groups("sample_id\tgroup\nC\t2\nA\t1\nB\t1\n");
    attach_groups(cm, groups);
    EXPECT_EQ(cm.group_of_sample, (std::vector<int>{1, 1, 2}));
    std::istringstream lengths("g2\t1500\ng1\t900\n");
    attach_lengths(cm, lengths);
    EXPECT_EQ(*cm.gene_lengths, (std::vector<double>{900, 1500}));

    std::istringstream missing("A\t1\nB\t2\n");
    EXPECT_THROW(attach_groups(cm, missing), Error);
    std::istringstream fractional("A\t1\nB\t1.5\nC\t2\n");
    EXPECT_THROW(attach_groups(cm, fractional), Error);
}

TEST(WriteMatrix, RoundTripsExactly) {
    auto cm = small_matrix();
    cm.counts(1, 2) = 0.1 + 0.2;
    std::ostringstream out;
    write_matrix_tsv(out, cm.gene_ids, cm.sample_ids, cm.counts);
    std::istringstream in(out.str());
    auto back = read_counts_tsv(in);
    EXPECT_EQ(back.counts, cm.counts);
    EXPECT_EQ(back.gene_ids, cm.gene_ids);
}
