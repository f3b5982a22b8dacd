#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>

#include "shapeagg/estimators.hpp"
#include "shapeagg/harness.hpp"
#include "shapeagg/io.hpp"
#include "shapeagg/oracles.hpp"
#include "shapeagg/packing.hpp"
#include "shapeagg/projections.hpp"
#include "shapeagg/qagg.hpp"
#include "shapeagg/rng.hpp"

using namespace shapeagg;

namespace {

void write_fit(const std::string& path, const Sequence& fit) {
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
        write_sequence_json(path, fit);
    else
        write_sequence_csv(path, fit);
}

nlohmann::ordered_json solution_diagnostics(const QAggSolution& sol) {
    nlohmann::ordered_json diag;
    diag["objective"] = sol.objective_value;
    diag["dual_gap"] = sol.dual_gap;
    diag["iterations"] = sol.iterations;
    diag["active_patterns"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < sol.patterns.size(); ++i) {
        if (sol.weights[i] <= 1e-6) continue;
        diag["active_patterns"].push_back(
            {{"indices", sol.patterns[i].indices}, {"weight", sol.weights[i]}});
    }
    return diag;
}

int run_estimate(const std::string& input, const std::string& output,
                 const std::string& method, double sigma, double delta, double lambda,
                 const std::string& lambda_rule, double v_bound, const std::string& dict,
                 double tol, long max_iter, double q_constant,
                 const std::string& diagnostics, bool estimate_sigma) {
    const Sequence y = read_sequence(input);
    if (estimate_sigma) {
        sigma = estimate_sigma_diff(y).sigma;
        std::cerr << "sigma estimated from first differences: " << sigma << "\n";
    }
    if (method == "pava") {
        write_fit(output, isotonic_ls(y));
    } else if (method == "convexls") {
        write_fit(output, convex_ls(y, tol > 0 ? tol : 1e-9));
    } else if (method == "tv") {
        TVTuning tuning;
        if (lambda > 0)
            tuning = TVTuning::explicit_lambda(lambda);
        else if (lambda_rule == "universal")
            tuning = TVTuning::universal(sigma, delta);
        else if (lambda_rule == "kstar")
            tuning = TVTuning::adaptive_kstar(v_bound, sigma, delta);
        else
            throw CLI::ValidationError("tv needs --lambda or --lambda-rule {kstar|universal}");
        write_fit(output, tv_estimator(y, tuning));
    } else if (method == "qagg" || method == "qagg-convex") {
        const PatternFamily family =
            method == "qagg" ? PatternFamily::Monotone : PatternFamily::Convex;
        const Dictionary dictionary =
            Dictionary::build(family, y.size(), parse_dictionary_mode(dict));
        QAggConfig cfg;
        if (tol > 0) cfg.tol = tol;
        if (max_iter > 0) cfg.max_iter = max_iter;
        cfg.q_constant = q_constant;
        const QAggSolution sol = solve_qagg(y, sigma, dictionary, cfg);
        write_fit(output, sol.estimate);
        const nlohmann::ordered_json diag = solution_diagnostics(sol);
        if (diagnostics.empty()) {
            std::cout << diag.dump(2) << "\n";
        } else {
            std::ofstream out(diagnostics);
            out << diag.dump(2) << "\n";
        }
    } else {
        throw CLI::ValidationError("unknown --method '" + method + "'");
    }
    return 0;
}

int run_oracle(const std::string& input, const std::string& family, double sigma,
               const std::string& spec_text, int k_max, const std::string& search,
               bool restrict_monotone, const std::string& output) {
    const Sequence mu = read_sequence(input);
    const auto parts = [&] {
        std::vector<double> vals;
        std::string cur;
        for (char c : spec_text + ":") {
            if (c == ':') {
                vals.push_back(std::stod(cur));
                cur.clear();
            } else
                cur += c;
        }
        return vals;
    }();
    if (parts.size() != 3) throw CLI::ValidationError("--spec expects leading:penalty:exponent");

    OracleCurve curve;
    if (family == "monotone") {
        curve = oracle_curve_monotone(mu, sigma,
                                      BoundSpec::monotone(parts[0], parts[1], parts[2]),
                                      restrict_monotone, k_max);
    } else if (family == "convex") {
        curve = oracle_curve_convex(mu, sigma, BoundSpec::convex(parts[0], parts[1], parts[2]),
                                    search == "greedy" ? ConvexOracleSearch::Greedy
                                                       : ConvexOracleSearch::Exhaustive,
                                    k_max > 0 ? k_max - 1 : 0);
    } else {
        throw CLI::ValidationError("--family must be monotone or convex");
    }

    nlohmann::ordered_json j;
    j["family"] = family;
    j["sigma"] = sigma;
    j["spec"] = {{"leading", parts[0]}, {"penalty", parts[1]}, {"exponent", parts[2]}};
    j["restricted_to_class"] = restrict_monotone;
    j["values"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < curve.value_at.size(); ++i)
        j["values"].push_back({{"pieces", i + 1}, {"value", curve.value_at[i]}});
    j["argmin_pieces"] = curve.argmin;
    j["min_value"] = curve.min_value;
    std::ofstream out(output);
    if (!out) throw std::runtime_error("cannot open " + output);
    out << j.dump(2) << "\n";
    return 0;
}

int run_packing(const std::string& family, std::size_t n, int k, double v, double sigma,
                std::uint64_t seed, const std::string& output) {
    PackingReport report;
    if (family == "monotone")
        report = monotone_hypotheses(n, k, v, sigma, seed);
    else if (family == "convex")
        report = convex_hypotheses(n, k, sigma, seed);
    else
        throw CLI::ValidationError("--family must be monotone or convex");

    nlohmann::ordered_json j;
    j["family"] = family;
    j["n"] = n;
    j[family == "monotone" ? "k" : "q"] = report.k_or_q;
    j["sigma"] = sigma;
    if (family == "monotone") j["V"] = v;
    j["gamma"] = report.gamma;
    j["codewords"] = report.packing.codewords.size();
    j["degenerate_packing"] = report.packing.degenerate;
    j["min_pairwise_hamming"] = report.packing.min_pairwise_distance;
    j["min_sq_separation"] = report.min_sq_separation;
    j["separation_floor"] = sigma * sigma * report.k_or_q / (512.0 * static_cast<double>(n));
    j["max_kl_to_null"] = report.max_kl_to_null;
    j["kl_budget"] = report.kl_budget;
    j["checks"] = {{"membership", report.membership_ok},
                   {"pieces_within_budget", report.pieces_within_budget},
                   {"separation", report.separation_ok},
                   {"kl", report.kl_ok},
                   {"all", report.budget_ok}};
    j["hypotheses"] = nlohmann::ordered_json::array();
    for (const Sequence& u : report.hypotheses) j["hypotheses"].push_back(u.values());
    std::ofstream out(output);
    if (!out) throw std::runtime_error("cannot open " + output);
    out << j.dump(2) << "\n";
    return report.budget_ok ? 0 : 3;
}

int run_selftest() {
    int failures = 0;
    const auto check = [&](const char* name, bool ok) {
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
        if (!ok) ++failures;
    };

    {
        CounterRng rng(1, 0);
        bool ok = true;
        for (int rep = 0; rep < 50 && ok; ++rep) {
            std::vector<double> y(6);
            for (double& x : y) x = rng.next_normal();
            const Sequence fit = isotonic_ls(Sequence(y));
            for (std::size_t i = 0; i + 1 < y.size(); ++i)
                if (fit[i] > fit[i + 1] + 1e-12) ok = false;
        }
        check("isotonic regression produces monotone output", ok);
    }
    {
        CounterRng rng(2, 0);
        bool ok = true;
        for (int rep = 0; rep < 20 && ok; ++rep) {
            std::vector<double> y(32);
            for (double& x : y) x = rng.next_normal();
            const Sequence fit = tv_estimator(Sequence(y), 0.05);
            const double lam = 0.05 * 32.0;
            double run = 0.0;
            for (std::size_t i = 0; i < 31; ++i) {
                run += fit[i] - y[i];
                if (std::abs(run) > lam + 1e-8) ok = false;
            }
        }
        check("tv estimator satisfies its dual constraints", ok);
    }
    {
        double total = 0.0;
        for (int j = 0; j <= 8; ++j)
            total += std::exp(log_prior_monotone(j, 9) + log_choose(8, j));
        check("prior weights sum to one (n=9)", std::abs(total - 1.0) < 1e-12);
    }
    {
        const Sequence y({1.0, 3.0, 5.0, 7.0});
        const Sequence p = project_piecewise_constant(y, Pattern::jumps({2}, 4));
        const Sequence pp = project_piecewise_constant(p, Pattern::jumps({2}, 4));
        check("block projector is idempotent",
              p.values() == std::vector<double>{2, 2, 6, 6} && pp.values() == p.values());
    }
    {
        const BinaryPacking p = vg_packing(8, 1);
        check("vg packing meets its invariants",
              p.codewords.size() >= 4 && p.min_pairwise_distance >= 2);
    }
    {
        const Estimator pava = [](const Sequence& y) { return isotonic_ls(y); };
        const Sequence mu = generate_signal(SignalSpec::parse("staircase(k=2,V=1)"), 16);
        const MonteCarloResult a = monte_carlo_risk(pava, mu, 1.0, 100, 7);
        const MonteCarloResult b = monte_carlo_risk_serial(pava, mu, 1.0, 100, 7);
        check("parallel and serial Monte Carlo agree bit for bit",
              a.losses == b.losses && a.mean_risk == b.mean_risk);
    }
    {
        CounterRng rng(3, 0);
        std::vector<double> u(10);
        for (double& x : u) x = std::round(4.0 * rng.next_normal());
        const Sequence s(u);
        check("increment round trip is exact",
              from_increments(to_increments(s)).values() == u);
    }
    {
        const Sequence y({0.4, -0.2, 1.3, 0.9, 2.2, 1.7, 2.5, 3.0});
        const Dictionary dict =
            Dictionary::build(PatternFamily::Monotone, 8, DictionaryMode::exhaustive());
        QAggConfig scan_cfg;
        scan_cfg.force_scan_lmo = true;
        const QAggSolution via_dp = solve_qagg(y, 1.0, dict, {});
        const QAggSolution via_scan = solve_qagg(y, 1.0, dict, scan_cfg);
        double diff = 0.0;
        for (std::size_t i = 0; i < 8; ++i)
            diff = std::max(diff, std::abs(via_dp.estimate[i] - via_scan.estimate[i]));
        check("segmentation oracle matches the explicit dictionary scan", diff < 1e-7);
    }
    std::cout << (failures == 0 ? "selftest: all checks passed\n"
                                : "selftest: FAILURES PRESENT\n");
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shape-constrained sequence estimation by sparsity-pattern aggregation"};
    app.require_subcommand(1);

    // estimate
    auto* est = app.add_subcommand("estimate", "Run an estimator on a sequence file");
    std::string input, output, method, lambda_rule, dict = "exhaustive", diagnostics;
    double sigma = 1.0, delta = 0.1, lambda = 0.0, v_bound = 0.0, tol = 0.0;
    double q_constant = 46.0;
    long max_iter = 0;
    est->add_option("--input", input, "Input sequence (.csv or .json)")->required();
    est->add_option("--output", output, "Output fit path")->required();
    est->add_option("--method", method, "pava|convexls|tv|qagg|qagg-convex")->required();
    est->add_option("--sigma", sigma, "Noise standard deviation");
    est->add_option("--delta", delta, "Confidence parameter for tuning rules");
    est->add_option("--lambda", lambda, "Explicit TV penalty");
    est->add_option("--lambda-rule", lambda_rule, "kstar|universal");
    est->add_option("--V", v_bound, "Variation bound for the kstar rule");
    est->add_option("--dict", dict, "exhaustive|maxcard:M|sampled:COUNT:SEED");
    est->add_option("--tol", tol, "Solver tolerance");
    est->add_option("--max-iter", max_iter, "Solver iteration cap");
    est->add_option("--qagg-constant", q_constant, "Aggregation penalty constant");
    est->add_option("--diagnostics", diagnostics, "Write aggregation diagnostics JSON here");
    bool estimate_sigma = false;
    est->add_flag("--estimate-sigma", estimate_sigma,
                  "Plug in the first-difference noise estimate instead of --sigma");

    // oracle
    auto* orc = app.add_subcommand("oracle", "Evaluate an oracle right-hand side");
    std::string o_input, o_family = "monotone", o_spec = "1:1:1", o_search = "exhaustive",
                o_output;
    double o_sigma = 1.0;
    int o_kmax = 0;
    bool o_restrict = false;
    orc->add_option("--input", o_input, "Signal file")->required();
    orc->add_option("--family", o_family, "monotone|convex");
    orc->add_option("--sigma", o_sigma, "Noise standard deviation");
    orc->add_option("--spec", o_spec, "leading:penalty:exponent");
    orc->add_option("--k-max", o_kmax, "Largest piece count to evaluate");
    orc->add_option("--search", o_search, "exhaustive|greedy (convex family)");
    orc->add_flag("--restrict-monotone", o_restrict,
                  "Restrict candidates to monotone sequences");
    orc->add_option("--output", o_output, "Output JSON path")->required();

    // packing
    auto* pack = app.add_subcommand("packing", "Materialize a lower-bound hypothesis family");
    std::string p_family = "monotone", p_output;
    std::size_t p_n = 64;
    int p_k = 8;
    double p_v = 1.0, p_sigma = 1.0;
    std::uint64_t p_seed = 1;
    pack->add_option("--family", p_family, "monotone|convex");
    pack->add_option("--n", p_n, "Sequence length")->required();
    pack->add_option("--k", p_k, "Pieces (k for monotone, q for convex)")->required();
    pack->add_option("--V", p_v, "Variation bound (monotone family)");
    pack->add_option("--sigma", p_sigma, "Noise standard deviation");
    pack->add_option("--seed", p_seed, "Packing search seed");
    pack->add_option("--output", p_output, "Output JSON path")->required();

    // experiment
    auto* exp = app.add_subcommand("experiment", "Run a Monte Carlo experiment grid");
    std::string config_path, x_signal, x_ngrid, x_regret, x_ospec, x_ofamily, x_outdir;
    std::vector<std::string> x_est;
    double x_sigma = -1.0, x_delta = -1.0;
    int x_reps = -1, x_threads = -1;
    long long x_seed = -1;
    bool x_plot = false, x_timings = false, x_adversarial = false;
    exp->add_option("--config", config_path, "Experiment config file (key = value sections)");
    exp->add_option("--signal", x_signal, "Signal spec, e.g. staircase(k=2,V=1)");
    exp->add_option("--n-grid", x_ngrid, "Comma-separated lengths");
    exp->add_option("--sigma", x_sigma, "Noise standard deviation");
    exp->add_option("--replicates", x_reps, "Monte Carlo replicates");
    exp->add_option("--seed", x_seed, "Master seed");
    exp->add_option("--est", x_est, "Estimator spec (repeatable)");
    exp->add_option("--regret-class", x_regret, "Reference class for regrets");
    exp->add_option("--oracle-spec", x_ospec, "Oracle RHS constants leading:penalty:exponent");
    exp->add_option("--oracle-family", x_ofamily, "monotone|convex");
    exp->add_option("--output-dir", x_outdir, "Report directory");
    exp->add_option("--threads", x_threads, "Worker threads (0 = runtime default)");
    exp->add_option("--delta", x_delta, "Confidence parameter");
    exp->add_flag("--plot", x_plot, "Write a log-log SVG plot");
    exp->add_flag("--timings", x_timings, "Record wall-clock timings (non-deterministic)");
    exp->add_flag("--adversarial", x_adversarial, "Evaluate over the adversarial signal grid");

    auto* self = app.add_subcommand("selftest", "Run quick invariant checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (est->parsed())
            return run_estimate(input, output, method, sigma, delta, lambda, lambda_rule,
                                v_bound, dict, tol, max_iter, q_constant, diagnostics,
                                estimate_sigma);
        if (orc->parsed())
            return run_oracle(o_input, o_family, o_sigma, o_spec, o_kmax, o_search, o_restrict,
                              o_output);
        if (pack->parsed())
            return run_packing(p_family, p_n, p_k, p_v, p_sigma, p_seed, p_output);
        if (exp->parsed()) {
            ExperimentConfig cfg;
            if (!config_path.empty()) {
                cfg = ExperimentConfig::from_file(config_path);
            } else {
                cfg.signal = SignalSpec::parse("constant(c=0)");
            }
            if (!x_signal.empty()) cfg.signal = SignalSpec::parse(x_signal);
            if (!x_ngrid.empty()) {
                cfg.n_grid.clear();
                std::string cur;
                for (char c : x_ngrid + ",") {
                    if (c == ',') {
                        if (!cur.empty()) cfg.n_grid.push_back(std::stoull(cur));
                        cur.clear();
                    } else
                        cur += c;
                }
            }
            if (x_sigma >= 0) cfg.sigma = x_sigma;
            if (x_reps >= 0) cfg.replicates = x_reps;
            if (x_seed >= 0) cfg.master_seed = static_cast<std::uint64_t>(x_seed);
            if (!x_est.empty()) cfg.estimators = x_est;
            if (!x_regret.empty()) cfg.regret_class = x_regret;
            if (!x_ospec.empty()) cfg.oracle_spec = x_ospec;
            if (!x_ofamily.empty()) cfg.oracle_family = x_ofamily;
            if (!x_outdir.empty()) cfg.output_dir = x_outdir;
            if (x_threads >= 0) cfg.threads = x_threads;
            if (x_delta >= 0) cfg.delta = x_delta;
            if (x_plot) cfg.plot = true;
            if (x_timings) cfg.timings = true;
            if (x_adversarial) cfg.adversarial = true;
            if (cfg.n_grid.empty() || cfg.estimators.empty())
                throw CLI::ValidationError(
                    "experiment needs --config or both --n-grid and --est");
            const RiskReport report = run_experiment(cfg);
            std::cout << "wrote " << report.rows.size() << " rows to " << cfg.output_dir
                      << "\n";
            std::size_t failed = 0;
            for (const RiskRow& row : report.rows) failed += row.failures;
            if (failed > 0) {
                std::cerr << "warning: " << failed
                          << " replicate(s) failed and were excluded\n";
                return 4;
            }
            return 0;
        }
        if (self->parsed()) return run_selftest();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
