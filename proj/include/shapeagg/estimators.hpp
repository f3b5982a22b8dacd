#pragma once

#include <optional>

#include "shapeagg/sequence.hpp"

namespace shapeagg {

/// Euclidean projection onto the cone of non-decreasing sequences
/// (pool-adjacent-violators). Exact up to floating point.
Sequence isotonic_ls(const Sequence& y);

/// Euclidean projection onto the cone of convex sequences, computed by a dual
/// active-set method on the second-difference constraints. The result r is
/// convex, <y - r, r> ~ 0, and the dual certificate bounds the KKT residual
/// by tol (relative to max(1, |y|_inf)).
Sequence convex_ls(const Sequence& y, double tol = 1e-9, long max_iter = 100000);

/// Exact minimizer of
///   (1/2) (1/n) |u - y|^2 + lambda * sum_i |u_{i+1} - u_i| .
/// The solver works on the unscaled least-squares form, so the internal
/// penalty is lambda * n.
Sequence tv_estimator(const Sequence& y, double lambda);

/// Tuning rules for the total-variation estimator. The adaptive rule needs
/// the variation V of the monotone projection of the truth, which callers
/// must supply.
struct TVTuning {
    enum class Rule { Explicit, AdaptiveKStar, Universal };
    Rule rule = Rule::Explicit;
    double lambda = 0.0;
    double v = 0.0;
    double sigma = 0.0;
    double delta = 0.1;

    static TVTuning explicit_lambda(double lambda);
    static TVTuning adaptive_kstar(double v, double sigma, double delta);
    static TVTuning universal(double sigma, double delta);

    double resolve(std::size_t n) const;
};

Sequence tv_estimator(const Sequence& y, const TVTuning& tuning);

/// lambda = sigma sqrt(log(n/delta) / (kstar n)) with real-valued
/// kstar = (V^2 n log(n/delta) / sigma^2)^{1/3}.
double lambda_adaptive_kstar(double v, double sigma, std::size_t n, double delta);

/// lambda = 2 sigma sqrt((2/n) log(n/delta)).
double lambda_universal(double sigma, std::size_t n, double delta);

/// Minimum distance between two jumps; empty when u has fewer than two jumps.
std::optional<int> min_jump_spacing(const Sequence& u);

struct NoiseLevel {
    enum class Source { Known, EstimatedDiff };
    double sigma = 0.0;
    Source source = Source::Known;
};

/// First-difference variance estimator:
///   sigma^2_hat = (1/(2(n-1))) sum (y_{i+1} - y_i)^2.
/// Biased upward by |D mu|^2 / (2(n-1)) when the signal is not constant.
NoiseLevel estimate_sigma_diff(const Sequence& y);

}  // namespace shapeagg
