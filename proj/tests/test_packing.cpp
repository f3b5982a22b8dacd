#include <doctest.h>

#include <cmath>

#include "shapeagg/packing.hpp"

using namespace shapeagg;

TEST_CASE("vg packing invariants") {
    const BinaryPacking p8 = vg_packing(8, 3);
    CHECK_FALSE(p8.degenerate);
    CHECK(p8.codewords.size() >= 4);
    CHECK(p8.min_pairwise_distance >= 2);
    CHECK(std::log(static_cast<double>(p8.codewords.size()) - 1.0) >= 1.0);
    for (std::uint64_t limb : p8.codewords[0]) CHECK(limb == 0);

    const BinaryPacking p16 = vg_packing(16, 3);
    CHECK(p16.codewords.size() >= 9);
    CHECK(p16.min_pairwise_distance >= 3);

    // determinism
    const BinaryPacking again = vg_packing(16, 3);
    REQUIRE(again.codewords.size() == p16.codewords.size());
    for (std::size_t i = 0; i < again.codewords.size(); ++i)
        CHECK(again.codewords[i] == p16.codewords[i]);

    // small k still meets the invariants for k >= 2
    const BinaryPacking p4 = vg_packing(4, 1);
    CHECK_FALSE(p4.degenerate);
    CHECK(std::log(static_cast<double>(p4.codewords.size()) - 1.0) >= 0.5);
    CHECK(p4.min_pairwise_distance >= 1);

    const BinaryPacking p1 = vg_packing(1, 1);
    CHECK(p1.degenerate);
    CHECK(p1.codewords.size() == 2);
}

TEST_CASE("monotone hypotheses") {
    const std::size_t n = 64;
    const int k = 4;
    const PackingReport report = monotone_hypotheses(n, k, 1.0, 1.0, 5);
    CHECK(report.gamma == doctest::Approx(1.0 / 32.0).epsilon(1e-15));
    CHECK(report.membership_ok);
    CHECK(report.pieces_within_budget);
    CHECK(report.separation_ok);
    CHECK(report.kl_ok);
    CHECK(report.budget_ok);
    CHECK(report.min_sq_separation >= 4.0 / (512.0 * 64.0));

    for (const Sequence& u : report.hypotheses) {
        CHECK(is_member(u, ShapeClass::monotone()));
        CHECK(count_pieces(u) <= k);
        CHECK(total_variation(u) <= 1.0 + 1e-12);
    }

    // separation identity (gamma^2/k) d_H when k divides n
    const double g2k = report.gamma * report.gamma / static_cast<double>(k);
    for (std::size_t i = 0; i < report.hypotheses.size(); ++i) {
        for (std::size_t j = i + 1; j < report.hypotheses.size(); ++j) {
            const int dh = hamming_distance(report.packing.codewords[i],
                                            report.packing.codewords[j]);
            double sep = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                const double d = report.hypotheses[i][t] - report.hypotheses[j][t];
                sep += d * d;
            }
            sep /= static_cast<double>(n);
            CHECK(sep == doctest::Approx(g2k * dh).epsilon(1e-12));
        }
    }

    // growth condition enforced
    CHECK_THROWS_AS(monotone_hypotheses(64, 32, 0.1, 1.0), std::invalid_argument);
}

TEST_CASE("convex hypotheses") {
    const std::size_t n = 8;
    const int q = 2;
    const PackingReport report = convex_hypotheses(n, q, 1.0, 5);
    CHECK(report.gamma == doctest::Approx(1.0 / 16.0).epsilon(1e-15));
    CHECK(report.membership_ok);
    CHECK(report.separation_ok);
    CHECK(report.kl_ok);

    for (const Sequence& u : report.hypotheses) {
        CHECK(is_member(u, ShapeClass::convex()));
        // one kink per junction, plus a second one wherever the codeword is
        // flat across it, so the count lands in [q-1+1, 2q-1]
        CHECK(count_knots(u) >= q - 1);
        CHECK(count_knots(u) <= 2 * q - 1);
    }

    // the zero word always kinks both junction endpoints, so the advertised
    // q-piece budget cannot hold
    CHECK(count_knots(report.hypotheses[0]) == 2 * q - 1);
    CHECK_FALSE(report.pieces_within_budget);
    CHECK_FALSE(report.budget_ok);

    // separation identity (gamma^2/q) d_H when q divides n
    const double g2q = report.gamma * report.gamma / static_cast<double>(q);
    for (std::size_t i = 0; i < report.hypotheses.size(); ++i) {
        for (std::size_t j = i + 1; j < report.hypotheses.size(); ++j) {
            const int dh = hamming_distance(report.packing.codewords[i],
                                            report.packing.codewords[j]);
            double sep = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                const double d = report.hypotheses[i][t] - report.hypotheses[j][t];
                sep += d * d;
            }
            sep /= static_cast<double>(n);
            CHECK(sep == doctest::Approx(g2q * dh).epsilon(1e-12));
        }
    }

    // slope recursion: alpha_1 = 2 gamma = 1/8; slopes non-decreasing
    const Sequence& u0 = report.hypotheses[0];
    CHECK(u0[5] - u0[4] == doctest::Approx(0.125).epsilon(1e-12));
    for (std::size_t t = 2; t < n; ++t)
        CHECK(u0[t] - u0[t - 1] >= u0[t - 1] - u0[t - 2] - 1e-15);

    CHECK_THROWS_AS(convex_hypotheses(8, 1, 1.0), std::invalid_argument);
}

TEST_CASE("KL to the null stays within the testing budget") {
    for (const auto& [n, k] : std::vector<std::pair<std::size_t, int>>{{64, 4}, {64, 8}, {128, 8}}) {
        const PackingReport r = monotone_hypotheses(n, k, 1.0, 1.0, 2);
        CHECK(r.max_kl_to_null <= r.kl_budget + 1e-12);
    }
    for (const auto& [n, q] : std::vector<std::pair<std::size_t, int>>{{64, 4}, {128, 8}}) {
        const PackingReport r = convex_hypotheses(n, q, 1.0, 2);
        CHECK(r.max_kl_to_null <= r.kl_budget + 1e-12);
    }
}

TEST_CASE("packing k choice") {
    const KChoice c = packing_k_choice(1.0, 1.0, 64);
    CHECK(c.k == 10);
    CHECK_FALSE(c.variance_dominant);

    const KChoice tiny = packing_k_choice(0.1, 10.0, 8);
    CHECK(tiny.k == 1);
    CHECK(tiny.variance_dominant);

    for (double v : {0.3, 1.0, 2.5}) {
        for (std::size_t n : {8u, 64u, 333u}) {
            const KChoice pick = packing_k_choice(v, 1.0, n);
            if (!pick.variance_dominant) {
                const double x = 16.0 * static_cast<double>(n) * v * v;
                CHECK(static_cast<double>(pick.k) * pick.k * pick.k <= x + 1e-9);
                CHECK(static_cast<double>(pick.k + 1) * (pick.k + 1) * (pick.k + 1) > x);
            }
        }
    }
}

TEST_CASE("general n: balanced blocks keep the certified quantities") {
    // n not a multiple of k; identities are replaced by recomputed checks
    const PackingReport r = monotone_hypotheses(100, 8, 1.5, 1.0, 4);
    CHECK(r.membership_ok);
    CHECK(r.pieces_within_budget);
    CHECK(r.kl_ok);
    const PackingReport c = convex_hypotheses(100, 3, 1.0, 4);
    CHECK(c.membership_ok);
    CHECK(c.kl_ok);
}
