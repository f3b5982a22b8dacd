#include <doctest.h>

#include <cmath>

#include "brute_force.hpp"
#include "shapeagg/projections.hpp"
#include "shapeagg/qagg.hpp"
#include "shapeagg/rng.hpp"

using namespace shapeagg;

TEST_CASE("block projection examples") {
    const Sequence y({1, 3, 5, 7});
    CHECK(project_piecewise_constant(y, Pattern::jumps({2}, 4)).values() ==
          std::vector<double>{2, 2, 6, 6});
    CHECK(project_piecewise_constant(y, Pattern::jumps({}, 4)).values() ==
          std::vector<double>{4, 4, 4, 4});
    CHECK(project_piecewise_constant(y, Pattern::jumps({1, 2, 3}, 4)).values() == y.values());
    CHECK_THROWS_AS(project_piecewise_constant(y, Pattern::knots({2}, 4)),
                    std::invalid_argument);
}

TEST_CASE("piecewise linear projection examples") {
    const Sequence affine({0, 1, 2, 3});
    const Sequence p1 = project_piecewise_linear(affine, Pattern::knots({}, 4));
    for (std::size_t i = 0; i < 4; ++i) CHECK(p1[i] == doctest::Approx(affine[i]));

    // best affine fit of [1,0,0,1] has slope 0, intercept 0.5
    const Sequence p2 = project_piecewise_linear(Sequence({1, 0, 0, 1}), Pattern::knots({}, 4));
    for (std::size_t i = 0; i < 4; ++i) CHECK(p2[i] == doctest::Approx(0.5));

    const Sequence y({1, 0, 0, 1});
    const Sequence p3 = project_piecewise_linear(y, Pattern::knots({2, 3}, 4));
    for (std::size_t i = 0; i < 4; ++i) CHECK(p3[i] == doctest::Approx(y[i]));
}

TEST_CASE("projections agree with normal-equation references") {
    CounterRng rng(21, 0);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t n = 3 + rng.next_below(6);
        const std::vector<double> y = bf::random_vector(rng, n, 2.0);
        std::vector<int> jumps, knots;
        for (int j = 1; j < static_cast<int>(n); ++j)
            if (rng.next_below(2)) jumps.push_back(j);
        for (int t = 2; t < static_cast<int>(n); ++t)
            if (rng.next_below(2)) knots.push_back(t);
        const Sequence ys(y);
        CHECK(bf::max_abs_diff(project_piecewise_constant(ys, Pattern::jumps(jumps, n)).values(),
                               bf::project_blocks(y, jumps)) < 1e-9);
        CHECK(bf::max_abs_diff(project_piecewise_linear(ys, Pattern::knots(knots, n)).values(),
                               bf::project_hinges(y, knots)) < 1e-8);
    }
}

TEST_CASE("projector properties: idempotence, self-adjointness, optimality, nesting") {
    CounterRng rng(22, 0);
    for (int rep = 0; rep < 25; ++rep) {
        const std::size_t n = 4 + rng.next_below(5);
        const std::vector<double> a = bf::random_vector(rng, n, 1.5);
        const std::vector<double> b = bf::random_vector(rng, n, 1.5);
        std::vector<int> jumps, knots;
        for (int j = 1; j < static_cast<int>(n); ++j)
            if (rng.next_below(2)) jumps.push_back(j);
        for (int t = 2; t < static_cast<int>(n); ++t)
            if (rng.next_below(3) == 0) knots.push_back(t);
        const Pattern jp = Pattern::jumps(jumps, n);
        const Pattern kp = Pattern::knots(knots, n);
        const Sequence as(a), bs(b);

        const Sequence pa = project_piecewise_constant(as, jp);
        CHECK(bf::max_abs_diff(project_piecewise_constant(pa, jp).values(), pa.values()) <
              1e-10);
        const Sequence qa = project_piecewise_linear(as, kp);
        CHECK(bf::max_abs_diff(project_piecewise_linear(qa, kp).values(), qa.values()) < 1e-10);

        // <P a, b> = <a, P b>
        const Sequence pb = project_piecewise_constant(bs, jp);
        CHECK(scaled_inner(pa, bs) == doctest::Approx(scaled_inner(as, pb)).epsilon(1e-10));
        const Sequence qb = project_piecewise_linear(bs, kp);
        CHECK(scaled_inner(qa, bs) == doctest::Approx(scaled_inner(as, qb)).epsilon(1e-10));

        // optimality against random subspace members
        std::vector<double> diff(n);
        for (std::size_t i = 0; i < n; ++i) diff[i] = pa[i] - a[i];
        const double best = detail::scaled_norm_sq(diff);
        for (int probe = 0; probe < 40; ++probe) {
            std::vector<double> v = bf::random_vector(rng, n, 2.0);
            const Sequence member = project_piecewise_constant(Sequence(v), jp);
            for (std::size_t i = 0; i < n; ++i) diff[i] = member[i] - a[i];
            CHECK(best <= detail::scaled_norm_sq(diff) + 1e-12);
        }

        // nesting: finer pattern gives no larger residual
        std::vector<int> finer = jumps;
        for (int j = 1; j < static_cast<int>(n); ++j) {
            if (std::find(finer.begin(), finer.end(), j) == finer.end()) {
                finer.insert(std::lower_bound(finer.begin(), finer.end(), j), j);
                break;
            }
        }
        const Sequence pf = project_piecewise_constant(as, Pattern::jumps(finer, n));
        double res_coarse = 0.0, res_fine = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            res_coarse += (pa[i] - a[i]) * (pa[i] - a[i]);
            res_fine += (pf[i] - a[i]) * (pf[i] - a[i]);
        }
        CHECK(res_fine <= res_coarse + 1e-12);
    }
}

TEST_CASE("prior weights: closed-form values and normalization") {
    CHECK(prior_weight_monotone(Pattern::jumps({}, 2), 2) ==
          doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
    CHECK(prior_weight_monotone(Pattern::jumps({1}, 2), 2) ==
          doctest::Approx(std::exp(-1.0) / (1.0 + std::exp(-1.0))).epsilon(1e-12));
    CHECK(prior_weight_convex(Pattern::knots({}, 3), 3) ==
          doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
    CHECK(prior_weight_convex(Pattern::knots({2}, 3), 3) ==
          doctest::Approx(std::exp(-1.0) / (1.0 + std::exp(-1.0))).epsilon(1e-12));

    // sum over all subsets equals 1: weight depends only on |J|
    for (std::size_t n = 2; n <= 12; ++n) {
        double total = 0.0;
        for (int j = 0; j <= static_cast<int>(n) - 1; ++j)
            total += std::exp(log_prior_monotone(j, n) + log_choose(static_cast<int>(n) - 1, j));
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (std::size_t n = 3; n <= 12; ++n) {
        double total = 0.0;
        for (int j = 0; j <= static_cast<int>(n) - 2; ++j)
            total += std::exp(log_prior_convex(j, n) + log_choose(static_cast<int>(n) - 2, j));
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("prior weights sum to one over explicitly enumerated subsets") {
    // 2^8 = 256 jump sets at n = 9, and 256 knot sets at n = 10
    const Dictionary mono =
        Dictionary::build(PatternFamily::Monotone, 9, DictionaryMode::exhaustive());
    REQUIRE(mono.size() == 256);
    double total = 0.0;
    for (std::size_t i = 0; i < mono.size(); ++i)
        total += prior_weight_monotone(mono.pattern(i), 9);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    const Dictionary cvx =
        Dictionary::build(PatternFamily::Convex, 10, DictionaryMode::exhaustive());
    REQUIRE(cvx.size() == 256);
    total = 0.0;
    for (std::size_t i = 0; i < cvx.size(); ++i)
        total += prior_weight_convex(cvx.pattern(i), 10);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("prior log bound holds exhaustively for n <= 12") {
    for (std::size_t n = 2; n <= 12; ++n) {
        for (int j = 0; j <= static_cast<int>(n) - 1; ++j) {
            std::vector<int> idx;
            for (int t = 1; t <= j; ++t) idx.push_back(t);
            CHECK(log_prior_bound_check(Pattern::jumps(idx, n), n));
        }
    }
}
