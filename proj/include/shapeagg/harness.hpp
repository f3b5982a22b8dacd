#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shapeagg/oracles.hpp"
#include "shapeagg/qagg.hpp"
#include "shapeagg/sequence.hpp"

namespace shapeagg {

/// Named signal family with parameters, e.g. staircase(k=2,V=1).
/// Families: constant(c), staircase(k,V), linear(V), sqrt_ramp(V),
/// convex_kinks(q,V), custom_csv(path).
struct SignalSpec {
    std::string name;
    std::map<std::string, std::string> params;

    static SignalSpec parse(const std::string& text);
    std::string canonical() const;
    double num(const std::string& key, double fallback) const;
};

/// Deterministic signal of length n; never consumes random state.
Sequence generate_signal(const SignalSpec& spec, std::size_t n);

using Estimator = std::function<Sequence(const Sequence&)>;

/// Estimator spec strings: identity, mean, pava, convexls, tv(lambda=..) or
/// tv(rule=universal|kstar,...), qagg(dict=exhaustive|maxcard:M|sampled:C:S,
/// tol=..,maxiter=..,constant=..), qagg-convex(...), proj(jumps=a;b;c) or
/// proj(knots=a;b;c).
struct EstimatorSpec {
    std::string name;
    std::map<std::string, std::string> params;
    std::string raw;

    static EstimatorSpec parse(const std::string& text);
};

/// Builds a pure, reusable estimator closure. sigma and delta are the
/// experiment-level defaults; spec params override them.
Estimator make_estimator(const EstimatorSpec& spec, double sigma, double delta);

/// Dictionary mode strings: exhaustive, maxcard=M (or maxcard:M),
/// sampled=COUNT:SEED (or sampled:COUNT:SEED).
DictionaryMode parse_dictionary_mode(const std::string& text);

struct MonteCarloResult {
    double mean_risk = 0.0;    // mean of scaled squared losses
    double stderr_risk = 0.0;  // standard error of that mean
    double mean_root_loss = 0.0;
    std::vector<double> losses;  // per replicate, excluded failures are NaN
    std::size_t failures = 0;
};

/// Monte Carlo risk of an estimator at signal mu. Replicate r draws its noise
/// from an independent stream keyed by (master_seed, r), so results are
/// bit-identical for any worker count. Replicate failures are excluded when
/// below 1%, otherwise the run fails.
MonteCarloResult monte_carlo_risk(const Estimator& estimator, const Sequence& mu, double sigma,
                                  int replicates, std::uint64_t master_seed);
/// Serial reference implementation; bit-identical to the parallel kernel.
MonteCarloResult monte_carlo_risk_serial(const Estimator& estimator, const Sequence& mu,
                                         double sigma, int replicates,
                                         std::uint64_t master_seed);

struct ClassApprox {
    Sequence best;
    double dist_sq = 0.0;
    bool exact = true;  // false when the value is only an upper bound
};

/// Best approximation of mu from a shape class. Exact for the monotone and
/// convex cones (and whenever mu is a member); piece-constrained and
/// bounded-variation classes may return a certified upper bound instead.
ClassApprox best_class_approx(const Sequence& mu, const ShapeClass& cls);

ShapeClass parse_shape_class(const std::string& text);

struct RegretResult {
    double r1 = 0.0;
    double r2 = 0.0;
    double approx_dist_sq = 0.0;
    bool approx_exact = true;
};

RegretResult empirical_regret(const Estimator& estimator, const Sequence& mu,
                              const ShapeClass& cls, double sigma, int replicates,
                              std::uint64_t seed);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares on (log n, log risk).
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);

struct ExperimentConfig {
    SignalSpec signal;
    std::vector<std::size_t> n_grid;
    double sigma = 1.0;
    int replicates = 200;
    std::uint64_t master_seed = 1;
    std::vector<std::string> estimators;
    std::optional<std::string> regret_class;
    std::optional<std::string> oracle_spec;  // "leading:penalty:exponent"
    std::string oracle_family = "monotone";
    bool adversarial = false;
    std::string output_dir = ".";
    int threads = 0;  // 0 keeps the runtime default
    bool plot = false;
    bool timings = false;
    double delta = 0.1;

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_text(const std::string& text);
};

struct RiskRow {
    std::string estimator;
    std::string signal_label;
    std::size_t n = 0;
    double sigma = 0.0;
    int replicates = 0;
    double mean_risk = 0.0;
    double stderr_risk = 0.0;
    std::optional<double> regret_r1, regret_r2, oracle_rhs;
    std::optional<double> runtime_ms;  // only populated when timings are on
    std::uint64_t seed = 0;
    std::size_t failures = 0;
};

struct RiskReport {
    int schema_version = 1;
    ExperimentConfig config;
    std::vector<RiskRow> rows;
    std::vector<std::pair<std::string, RateFit>> rate_fits;
};

/// Runs the full grid and writes report.csv, report.json and optionally
/// plot.svg under config.output_dir. Report files are byte-identical across
/// runs and worker counts for a fixed master seed; wall-clock timings go to
/// the separate timings.csv, opt-in, because they cannot be deterministic.
RiskReport run_experiment(const ExperimentConfig& config);

void write_report_csv(const RiskReport& report, const std::string& path);
void write_report_json(const RiskReport& report, const std::string& path);
void write_report_svg(const RiskReport& report, const std::string& path);

}  // namespace shapeagg
