#include <doctest.h>

#include <cmath>
#include <map>

#include "brute_force.hpp"
#include "shapeagg/projections.hpp"
#include "shapeagg/qagg.hpp"
#include "shapeagg/rng.hpp"

using namespace shapeagg;

TEST_CASE("dictionary enumeration") {
    const Dictionary d3 =
        Dictionary::build(PatternFamily::Monotone, 3, DictionaryMode::exhaustive());
    REQUIRE(d3.size() == 4);
    CHECK(d3.pattern_indices(0).empty());
    CHECK(d3.pattern_indices(1) == std::vector<int>{1});
    CHECK(d3.pattern_indices(2) == std::vector<int>{2});
    CHECK(d3.pattern_indices(3) == std::vector<int>{1, 2});

    const Dictionary c5 =
        Dictionary::build(PatternFamily::Convex, 5, DictionaryMode::exhaustive());
    CHECK(c5.size() == 8);

    const Dictionary m100 =
        Dictionary::build(PatternFamily::Monotone, 100, DictionaryMode::max_cardinality(2));
    REQUIRE(m100.enumerated());
    CHECK(m100.size() == 1 + 99 + 99 * 98 / 2);

    CHECK_THROWS_AS(Dictionary::build(PatternFamily::Monotone, 22, DictionaryMode::exhaustive()),
                    CapacityError);

    // too large to enumerate: monotone goes implicit, convex refuses
    const Dictionary big =
        Dictionary::build(PatternFamily::Monotone, 256, DictionaryMode::max_cardinality(8));
    CHECK_FALSE(big.enumerated());
    CHECK(big.conceptual_size() > 1e14);
    CHECK_THROWS_AS(Dictionary::build(PatternFamily::Convex, 256, DictionaryMode::max_cardinality(8)),
                    CapacityError);
}

TEST_CASE("dictionary canonical index lookup") {
    const Dictionary d = Dictionary::build(PatternFamily::Monotone, 8, DictionaryMode::exhaustive());
    CounterRng rng(50, 0);
    for (std::size_t i = 0; i < d.size(); i += 7)
        CHECK(d.index_of(d.pattern_indices(i)) == i);
    CHECK_FALSE(d.index_of({9}).has_value());
}

TEST_CASE("sampled dictionaries are deterministic and anchored at the empty set") {
    const Dictionary a =
        Dictionary::build(PatternFamily::Monotone, 40, DictionaryMode::sampled(200, 9));
    const Dictionary b =
        Dictionary::build(PatternFamily::Monotone, 40, DictionaryMode::sampled(200, 9));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a.pattern_indices(i) == b.pattern_indices(i));
    CHECK(a.pattern_indices(0).empty());
    const Dictionary c =
        Dictionary::build(PatternFamily::Monotone, 40, DictionaryMode::sampled(200, 10));
    bool same = a.size() == c.size();
    if (same) {
        same = false;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a.pattern_indices(i) != c.pattern_indices(i)) { same = false; break; }
    }
    CHECK_FALSE(same);
}

TEST_CASE("objective at a vertex and by hand") {
    // theta = e_{empty set} at n=2, y=(0,2), sigma=1
    const Sequence y({0, 2});
    const Dictionary dict =
        Dictionary::build(PatternFamily::Monotone, 2, DictionaryMode::exhaustive());
    SimplexWeights theta;
    theta.entries = {{0, 1.0}};
    const double expect = 1.0 + 23.0 * std::log(1.0 + std::exp(-1.0));
    CHECK(qagg_objective(theta, y, 1.0, dict) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(qagg_vertex_objective(0, y, 1.0, dict) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(qagg_objective(theta, y, 1.0, dict) == doctest::Approx(8.205).epsilon(1e-3));
}

TEST_CASE("objective is convex along random mixtures") {
    CounterRng rng(51, 0);
    const std::size_t n = 6;
    const Dictionary dict =
        Dictionary::build(PatternFamily::Monotone, n, DictionaryMode::exhaustive());
    for (int rep = 0; rep < 20; ++rep) {
        const Sequence y(bf::random_vector(rng, n, 1.5));
        SimplexWeights t1, t2;
        const std::size_t i1 = rng.next_below(dict.size());
        const std::size_t i2 = rng.next_below(dict.size());
        const std::size_t i3 = rng.next_below(dict.size());
        t1.entries = {{std::min(i1, i2), 0.5}, {std::max(i1, i2), 0.5}};
        if (i1 == i2) t1.entries = {{i1, 1.0}};
        t2.entries = {{i3, 1.0}};
        SimplexWeights mid;
        std::map<std::size_t, double> acc;
        for (auto& [i, w] : t1.entries) acc[i] += 0.5 * w;
        for (auto& [i, w] : t2.entries) acc[i] += 0.5 * w;
        for (auto& [i, w] : acc) mid.entries.emplace_back(i, w);
        const double lhs = qagg_objective(mid, y, 1.0, dict);
        const double rhs = 0.5 * qagg_objective(t1, y, 1.0, dict) +
                           0.5 * qagg_objective(t2, y, 1.0, dict);
        CHECK(lhs <= rhs + 1e-10);
    }
}

TEST_CASE("solver: high signal-to-noise recovers the exact pattern") {
    const Sequence y({0, 0, 1e6, 1e6});
    const Dictionary dict =
        Dictionary::build(PatternFamily::Monotone, 4, DictionaryMode::exhaustive());
    QAggConfig cfg;
    cfg.tol = 1e-10;
    const QAggSolution sol = solve_qagg(y, 1.0, dict, cfg);
    const Sequence target = project_piecewise_constant(y, Pattern::jumps({2}, 4));
    CHECK(bf::max_abs_diff(sol.estimate.values(), target.values()) < 1e-3);
}

TEST_CASE("solver: huge noise collapses to the grand mean") {
    const Sequence y({0.3, -1.2, 2.5, 0.7});
    const Dictionary dict =
        Dictionary::build(PatternFamily::Monotone, 4, DictionaryMode::exhaustive());
    QAggConfig cfg;
    cfg.tol = 1.0;  // absolute gap tolerance at sigma^2 scale
    const QAggSolution sol = solve_qagg(y, 1e6, dict, cfg);
    const double mean = (0.3 - 1.2 + 2.5 + 0.7) / 4.0;
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(sol.estimate[i] == doctest::Approx(mean).epsilon(1e-3));
}

TEST_CASE("solver certificates on random instances") {
    CounterRng rng(52, 0);
    const std::size_t n = 8;
    const Dictionary dict =
        Dictionary::build(PatternFamily::Monotone, n, DictionaryMode::exhaustive());
    for (int rep = 0; rep < 20; ++rep) {
        const Sequence y(bf::random_vector(rng, n, 2.0));
        const double sigma = 0.5 + rng.next_uniform();
        QAggConfig cfg;
        cfg.tol = 1e-8;
        long traced = 0;
        double last_obj = std::numeric_limits<double>::infinity();
        bool monotone_decrease = true;
        cfg.trace = [&](long, double obj, double) {
            if (obj > last_obj + 1e-9) monotone_decrease = false;
            last_obj = obj;
            ++traced;
        };
        const QAggSolution sol = solve_qagg(y, sigma, dict, cfg);
        CHECK(monotone_decrease);
        CHECK(traced == sol.iterations + 1);
        CHECK(sol.dual_gap <= 1e-8);

        double wsum = 0.0;
        for (double w : sol.weights) {
            CHECK(w >= 0.0);
            wsum += w;
        }
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-10));

        // reconstruction: estimate equals the weighted mix of projections
        std::vector<double> mix(n, 0.0);
        for (std::size_t a = 0; a < sol.patterns.size(); ++a) {
            const Sequence g = project_piecewise_constant(y, sol.patterns[a]);
            for (std::size_t i = 0; i < n; ++i) mix[i] += sol.weights[a] * g[i];
        }
        double err = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            err += (mix[i] - sol.estimate[i]) * (mix[i] - sol.estimate[i]);
            scale += y[i] * y[i];
        }
        CHECK(std::sqrt(err) <= 1e-9 * std::sqrt(scale) + 1e-12);

        // vertex domination over the whole dictionary
        const double obj = qagg_objective(sol.simplex_weights(), y, sigma, dict);
        CHECK(obj == doctest::Approx(sol.objective_value).epsilon(1e-9));
        for (std::size_t i = 0; i < dict.size(); ++i)
            CHECK(obj <= qagg_vertex_objective(i, y, sigma, dict) + 1e-8);
    }
}

TEST_CASE("segment LMO agrees with the explicit scan") {
    CounterRng rng(53, 0);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 5 + rng.next_below(6);
        const Sequence y(bf::random_vector(rng, n, 1.5));
        const Dictionary dict =
            Dictionary::build(PatternFamily::Monotone, n, DictionaryMode::exhaustive());
        std::vector<double> cost(static_cast<std::size_t>(dict.max_pattern_cardinality()) + 1);
        for (int j = 0; j <= dict.max_pattern_cardinality(); ++j)
            cost[static_cast<std::size_t>(j)] =
                0.03 * j - 0.5 * dict.log_prior_for_cardinality(j);
        const std::vector<double> mu = bf::random_vector(rng, n, 1.0);

        const auto scan = detail::scan_dictionary_serial(dict, y.values(), mu.data(), -1.5,
                                                         1.0, cost);
        const auto scan_par = detail::scan_dictionary_parallel(dict, y.values(), mu.data(),
                                                               -1.5, 1.0, cost);
        CHECK(scan.value == scan_par.value);
        CHECK(scan.index == scan_par.index);

        const auto seg = detail::segment_lmo(y.values(), mu.data(), -1.5, 1.0,
                                             dict.max_pattern_cardinality(), cost);
        CHECK(seg.value == doctest::Approx(scan.value).epsilon(1e-12));
        CHECK(seg.jumps == dict.pattern_indices(scan.index));
    }
}

TEST_CASE("solver via segment LMO matches solver via explicit scan") {
    CounterRng rng(54, 0);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t n = 8;
        const Sequence y(bf::random_vector(rng, n, 2.0));
        const Dictionary dict =
            Dictionary::build(PatternFamily::Monotone, n, DictionaryMode::exhaustive());
        QAggConfig a, b;
        a.tol = b.tol = 1e-9;
        b.force_scan_lmo = true;
        const QAggSolution s1 = solve_qagg(y, 1.0, dict, a);
        const QAggSolution s2 = solve_qagg(y, 1.0, dict, b);
        CHECK(bf::max_abs_diff(s1.estimate.values(), s2.estimate.values()) < 1e-7);
    }
}

TEST_CASE("translation equivariance") {
    CounterRng rng(55, 0);
    const std::size_t n = 7;
    const Dictionary dict =
        Dictionary::build(PatternFamily::Monotone, n, DictionaryMode::exhaustive());
    for (int rep = 0; rep < 5; ++rep) {
        const std::vector<double> y = bf::random_vector(rng, n, 1.0);
        std::vector<double> shifted(y);
        for (double& v : shifted) v += 4.5;
        QAggConfig cfg;
        cfg.tol = 1e-10;
        const QAggSolution a = solve_qagg(Sequence(y), 1.0, dict, cfg);
        const QAggSolution b = solve_qagg(Sequence(shifted), 1.0, dict, cfg);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(b.estimate[i] - a.estimate[i] == doctest::Approx(4.5).epsilon(1e-8));
    }
}

TEST_CASE("convex aggregation smoke tests") {
    // constant signal at n=2 is out of convex range; use affine at n=5
    CounterRng rng(56, 0);
    const Sequence affine({0, 0.5, 1.0, 1.5, 2.0});
    const QAggSolution sol = qagg_estimate_convex(affine, 0.01, 1e-9);
    CHECK(bf::max_abs_diff(sol.estimate.values(), affine.values()) < 1e-3);

    // certificates on random convex instances
    const std::size_t n = 7;
    const Dictionary dict =
        Dictionary::build(PatternFamily::Convex, n, DictionaryMode::exhaustive());
    for (int rep = 0; rep < 10; ++rep) {
        const Sequence y(bf::random_vector(rng, n, 1.0));
        QAggConfig cfg;
        cfg.tol = 1e-8;
        const QAggSolution sol2 = solve_qagg(y, 0.8, dict, cfg);
        CHECK(sol2.dual_gap <= 1e-8);
        const double obj = qagg_objective(sol2.simplex_weights(), y, 0.8, dict);
        for (std::size_t i = 0; i < dict.size(); ++i)
            CHECK(obj <= qagg_vertex_objective(i, y, 0.8, dict) + 1e-8);
    }
}

TEST_CASE("small penalty constants force genuine mixing") {
    // With the default constant the optimum often sits at a single vertex; a
    // small constant makes the fit terms compete and exercises away steps.
    CounterRng rng(57, 0);
    const std::size_t n = 8;
    const Dictionary dict =
        Dictionary::build(PatternFamily::Monotone, n, DictionaryMode::exhaustive());
    long hardest = 0;
    std::size_t widest = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const Sequence y(bf::random_vector(rng, n, 2.0));
        QAggConfig cfg;
        cfg.tol = 1e-10;
        cfg.q_constant = 0.05;
        double last = std::numeric_limits<double>::infinity();
        bool decreasing = true;
        cfg.trace = [&](long, double obj, double) {
            if (obj > last + 1e-10) decreasing = false;
            last = obj;
        };
        const QAggSolution sol = solve_qagg(y, 0.7, dict, cfg);
        CHECK(decreasing);
        CHECK(sol.dual_gap <= 1e-10);
        const double obj = qagg_objective(sol.simplex_weights(), y, 0.7, dict, 0.05);
        for (std::size_t i = 0; i < dict.size(); ++i)
            CHECK(obj <= qagg_vertex_objective(i, y, 0.7, dict, 0.05) + 1e-9);
        hardest = std::max(hardest, sol.iterations);
        widest = std::max(widest, sol.patterns.size());
    }
    CHECK(hardest > 10);  // the instances above genuinely iterate
    CHECK(widest >= 2);   // and mix several patterns
}

TEST_CASE("convex scans agree with and without the eager basis cache") {
    CounterRng rng(58, 0);
    const std::size_t n = 9;
    Dictionary cached = Dictionary::build(PatternFamily::Convex, n, DictionaryMode::exhaustive());
    Dictionary lazy = Dictionary::build(PatternFamily::Convex, n, DictionaryMode::exhaustive());
    lazy.drop_bases();
    REQUIRE(cached.bases_cached());
    REQUIRE_FALSE(lazy.bases_cached());

    std::vector<double> cost(static_cast<std::size_t>(cached.max_pattern_cardinality()) + 1);
    for (int j = 0; j <= cached.max_pattern_cardinality(); ++j)
        cost[static_cast<std::size_t>(j)] = 0.2 * j;

    for (int rep = 0; rep < 10; ++rep) {
        const std::vector<double> y = bf::random_vector(rng, n, 1.5);
        const std::vector<double> mu = bf::random_vector(rng, n, 1.0);
        const auto a = detail::scan_dictionary_serial(cached, y, mu.data(), -1.5, 1.0, cost);
        const auto b = detail::scan_dictionary_serial(lazy, y, mu.data(), -1.5, 1.0, cost);
        CHECK(a.index == b.index);
        CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));

        QAggConfig cfg;
        cfg.tol = 1e-9;
        const QAggSolution sa = solve_qagg(Sequence(y), 0.6, cached, cfg);
        const QAggSolution sb = solve_qagg(Sequence(y), 0.6, lazy, cfg);
        CHECK(bf::max_abs_diff(sa.estimate.values(), sb.estimate.values()) < 1e-9);
    }
}

TEST_CASE("implicit cardinality-capped dictionaries solve with certificates") {
    const std::size_t n = 40;
    const Dictionary dict =
        Dictionary::build(PatternFamily::Monotone, n, DictionaryMode::max_cardinality(8));
    REQUIRE_FALSE(dict.enumerated());
    CHECK_THROWS_AS(dict.size(), std::logic_error);

    CounterRng rng(59, 0);
    std::vector<double> mu(n), y(n);
    for (std::size_t i = 0; i < n; ++i) mu[i] = i < n / 2 ? 0.0 : 3.0;
    for (std::size_t i = 0; i < n; ++i) y[i] = mu[i] + 0.3 * rng.next_normal();
    QAggConfig cfg;
    cfg.tol = 1e-8;
    const QAggSolution sol = solve_qagg(Sequence(y), 0.3, dict, cfg);
    CHECK(sol.dual_gap <= 1e-8);
    double sum = 0.0;
    for (double w : sol.weights) sum += w;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
    for (const Pattern& p : sol.patterns) CHECK(p.size() <= 8);
    for (std::ptrdiff_t pos : sol.dict_positions) CHECK(pos == -1);
    CHECK_THROWS_AS(sol.simplex_weights(), std::logic_error);
    // high signal-to-noise: the fit should sit near the true step
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) err += (sol.estimate[i] - mu[i]) * (sol.estimate[i] - mu[i]);
    CHECK(err / static_cast<double>(n) < 0.1);
}

TEST_CASE("monotone aggregation fixed point on constants") {
    const QAggSolution sol = qagg_estimate_monotone(Sequence({3.25, 3.25}), 1.0, 1e-10);
    CHECK(sol.estimate[0] == doctest::Approx(3.25).epsilon(1e-12));
    CHECK(sol.estimate[1] == doctest::Approx(3.25).epsilon(1e-12));
}
