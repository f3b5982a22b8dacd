#include "shapeagg/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shapeagg/estimators.hpp"
#include "shapeagg/projections.hpp"

namespace shapeagg {

SegmentationTable::SegmentationTable(const Sequence& mu, int max_k)
    : n_(mu.size()), max_k_(max_k) {
    if (max_k < 1 || max_k > static_cast<int>(n_))
        throw std::invalid_argument("SegmentationTable: k out of range");
    prefix_.assign(n_ + 1, 0.0);
    prefix_sq_.assign(n_ + 1, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        prefix_[i + 1] = prefix_[i] + mu[i];
        prefix_sq_[i + 1] = prefix_sq_[i] + mu[i] * mu[i];
    }
    cost_.assign(static_cast<std::size_t>(max_k) * n_, 0.0);
    back_.assign(static_cast<std::size_t>(max_k) * n_, 0);
    for (std::size_t i = 0; i < n_; ++i) cost_[i] = segment_sse(0, i);
    for (int k = 1; k < max_k; ++k) {
        double* row = &cost_[static_cast<std::size_t>(k) * n_];
        const double* prev = &cost_[static_cast<std::size_t>(k - 1) * n_];
        int* bp = &back_[static_cast<std::size_t>(k) * n_];
        for (std::size_t i = 0; i < n_; ++i) {
            // Split the prefix [0..i] as [0..t] + [t+1..i]; need t >= k-1 so
            // the left part can hold k segments.
            double best = std::numeric_limits<double>::infinity();
            int arg = static_cast<int>(i);
            for (std::size_t t = static_cast<std::size_t>(k) - 1; t < i; ++t) {
                const double c = prev[t] + segment_sse(t + 1, i);
                if (c < best) {
                    best = c;
                    arg = static_cast<int>(t);
                }
            }
            if (i < static_cast<std::size_t>(k)) {  // more segments than points
                best = 0.0;
                arg = static_cast<int>(i) - 1;
            }
            row[i] = best;
            bp[i] = arg;
        }
    }
}

double SegmentationTable::segment_sse(std::size_t a, std::size_t b) const {
    const double len = static_cast<double>(b - a + 1);
    const double s = prefix_[b + 1] - prefix_[a];
    const double sq = prefix_sq_[b + 1] - prefix_sq_[a];
    return std::max(0.0, sq - s * s / len);
}

double SegmentationTable::best_sse(int k) const {
    if (k < 1 || k > max_k_) throw std::invalid_argument("best_sse: k out of range");
    return cost_[static_cast<std::size_t>(k - 1) * n_ + (n_ - 1)];
}

std::vector<double> SegmentationTable::minimizer(int k) const {
    if (k < 1 || k > max_k_) throw std::invalid_argument("minimizer: k out of range");
    std::vector<double> out(n_);
    int end = static_cast<int>(n_) - 1;
    for (int seg = k - 1; seg >= 0; --seg) {
        int start;
        if (seg == 0) {
            start = 0;
        } else {
            start = back_[static_cast<std::size_t>(seg) * n_ + end] + 1;
        }
        if (start > end) { end = start - 1; continue; }  // unused segment (k > pieces needed)
        const double mean =
            (prefix_[end + 1] - prefix_[start]) / static_cast<double>(end - start + 1);
        for (int i = start; i <= end; ++i) out[static_cast<std::size_t>(i)] = mean;
        end = start - 1;
    }
    return out;
}

std::pair<Sequence, double> best_segmentation(const Sequence& mu, int k) {
    SegmentationTable table(mu, k);
    const double value = table.best_sse(k) / static_cast<double>(mu.size());
    return {Sequence(table.minimizer(k)), value};
}

namespace {

double penalty_term(const BoundSpec& spec, double sigma, std::size_t n, int pieces) {
    const double en = std::exp(1.0) * static_cast<double>(n);
    const double lg = std::log(en / static_cast<double>(pieces));
    return spec.penalty_constant * sigma * sigma * static_cast<double>(pieces) /
           static_cast<double>(n) * std::pow(lg, spec.penalty_exponent);
}

}  // namespace

OracleCurve oracle_curve_monotone(const Sequence& mu, double sigma, const BoundSpec& spec,
                                  bool restrict_monotone, int k_max) {
    if (spec.family != BoundSpec::Family::Monotone)
        throw std::invalid_argument("oracle_curve_monotone: spec family must be Monotone");
    const std::size_t n = mu.size();
    if (k_max <= 0) k_max = static_cast<int>(n);
    k_max = std::min(k_max, static_cast<int>(n));

    OracleCurve curve;
    curve.value_at.resize(static_cast<std::size_t>(k_max));
    curve.min_value = std::numeric_limits<double>::infinity();

    if (!restrict_monotone) {
        SegmentationTable table(mu, k_max);
        for (int k = 1; k <= k_max; ++k) {
            const double approx = table.best_sse(k) / static_cast<double>(n);
            const double v = spec.leading_constant * approx + penalty_term(spec, sigma, n, k);
            curve.value_at[static_cast<std::size_t>(k - 1)] = v;
            if (v < curve.min_value) {
                curve.min_value = v;
                curve.argmin = k;
            }
        }
        return curve;
    }

    // Candidates are block means of the isotonic regression of mu, which are
    // monotone by construction; error is measured to mu itself. Exact when mu
    // is monotone, an upper bound otherwise.
    const Sequence iso = isotonic_ls(mu);
    SegmentationTable table(iso, k_max);
    for (int k = 1; k <= k_max; ++k) {
        const std::vector<double> cand = table.minimizer(k);
        double approx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = cand[i] - mu[i];
            approx += d * d;
        }
        approx /= static_cast<double>(n);
        const double v = spec.leading_constant * approx + penalty_term(spec, sigma, n, k);
        curve.value_at[static_cast<std::size_t>(k - 1)] = v;
        if (v < curve.min_value) {
            curve.min_value = v;
            curve.argmin = k;
        }
    }
    return curve;
}

double oracle_rhs_monotone(const Sequence& mu, double sigma, const BoundSpec& spec,
                           bool restrict_monotone) {
    return oracle_curve_monotone(mu, sigma, spec, restrict_monotone).min_value;
}

namespace {

double hinge_projection_error(const Sequence& mu, const std::vector<int>& knots) {
    // One-shot basis: bypass the shared cache, enumeration would flood it.
    const HingeBasis basis(mu.size(), knots);
    const std::vector<double> proj = basis.project(mu.values());
    double err = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double d = proj[i] - mu[i];
        err += d * d;
    }
    return err / static_cast<double>(mu.size());
}

}  // namespace

OracleCurve oracle_curve_convex(const Sequence& mu, double sigma, const BoundSpec& spec,
                                ConvexOracleSearch search, int max_knots) {
    if (spec.family != BoundSpec::Family::Convex)
        throw std::invalid_argument("oracle_curve_convex: spec family must be Convex");
    const std::size_t n = mu.size();
    if (n < 3) throw std::invalid_argument("oracle_curve_convex: requires n >= 3");
    const int interior = static_cast<int>(n) - 2;
    if (max_knots <= 0 || max_knots > interior) max_knots = interior;

    std::vector<double> best_err(static_cast<std::size_t>(max_knots) + 1,
                                 std::numeric_limits<double>::infinity());

    if (search == ConvexOracleSearch::Exhaustive) {
        if (n > 18)
            throw CapacityError("oracle_curve_convex: exhaustive search limited to n <= 18; "
                                "use Greedy");
        const std::uint64_t total = std::uint64_t{1} << interior;
        std::vector<int> knots;
        for (std::uint64_t mask = 0; mask < total; ++mask) {
            knots.clear();
            for (int b = 0; b < interior; ++b)
                if (mask & (std::uint64_t{1} << b)) knots.push_back(b + 2);
            if (static_cast<int>(knots.size()) > max_knots) continue;
            const double err = hinge_projection_error(mu, knots);
            double& slot = best_err[knots.size()];
            slot = std::min(slot, err);
        }
    } else {
        std::vector<int> knots;
        best_err[0] = hinge_projection_error(mu, knots);
        for (int step = 1; step <= max_knots; ++step) {
            double best = std::numeric_limits<double>::infinity();
            int pick = -1;
            for (int t = 2; t <= static_cast<int>(n) - 1; ++t) {
                if (std::find(knots.begin(), knots.end(), t) != knots.end()) continue;
                std::vector<int> trial = knots;
                trial.insert(std::lower_bound(trial.begin(), trial.end(), t), t);
                const double err = hinge_projection_error(mu, trial);
                if (err < best) {
                    best = err;
                    pick = t;
                }
            }
            if (pick < 0) break;
            knots.insert(std::lower_bound(knots.begin(), knots.end(), pick), pick);
            best_err[static_cast<std::size_t>(step)] = best;
        }
    }

    OracleCurve curve;
    curve.value_at.resize(static_cast<std::size_t>(max_knots) + 1);
    curve.min_value = std::numeric_limits<double>::infinity();
    for (int j = 0; j <= max_knots; ++j) {
        const int q = j + 1;
        const double v =
            spec.leading_constant * best_err[static_cast<std::size_t>(j)] +
            penalty_term(spec, sigma, n, q);
        curve.value_at[static_cast<std::size_t>(j)] = v;
        if (v < curve.min_value) {
            curve.min_value = v;
            curve.argmin = q;
        }
    }
    return curve;
}

double oracle_rhs_convex(const Sequence& mu, double sigma, const BoundSpec& spec,
                         ConvexOracleSearch search, int max_knots) {
    return oracle_curve_convex(mu, sigma, spec, search, max_knots).min_value;
}

Sequence staircase_approx(const Sequence& mu, int k) {
    const std::size_t n = mu.size();
    if (!detail::is_monotone(mu.values()))
        throw std::invalid_argument("staircase_approx: mu must be monotone");
    if (k < 1 || k > static_cast<int>(n))
        throw std::invalid_argument("staircase_approx: k out of range");
    const double v = total_variation(mu);
    if (v == 0.0) return mu;
    const double step = v / static_cast<double>(k);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Level j in 1..k holding values in [mu_1 + (j-1)V/k, mu_1 + jV/k).
        int j = static_cast<int>(std::floor((mu[i] - mu[0]) / step)) + 1;
        j = std::clamp(j, 1, k);
        out[i] = mu[0] + (static_cast<double>(j) - 0.5) * step;
    }
    return Sequence(std::move(out));
}

int k_star(double v, double sigma, std::size_t n) {
    if (!(sigma > 0.0) || n < 1 || v < 0.0)
        throw std::invalid_argument("k_star: invalid arguments");
    const double x =
        v * v * static_cast<double>(n) / (sigma * sigma * std::log(std::exp(1.0) * n));
    int m = std::max(1, static_cast<int>(std::ceil(std::cbrt(x))));
    while (m > 1 && static_cast<double>(m - 1) * (m - 1) * (m - 1) >= x) --m;
    while (static_cast<double>(m) * m * m < x) ++m;
    return m;
}

std::pair<double, double> lemma_bound_eval(double v, double sigma, std::size_t n) {
    if (!(sigma > 0.0) || n < 1 || v < 0.0)
        throw std::invalid_argument("lemma_bound_eval: invalid arguments");
    const double logen = std::log(std::exp(1.0) * static_cast<double>(n));
    const double variance_branch = sigma * sigma * logen / static_cast<double>(n);
    const double bias_branch =
        std::pow(sigma * sigma * v * logen / static_cast<double>(n), 2.0 / 3.0);
    const double m = std::max(bias_branch, variance_branch);
    return {0.25 * m, 2.0 * m};
}

double tv_bound_rhs(const Sequence& u, double sigma, double delta) {
    const std::size_t n = u.size();
    if (!(sigma > 0.0) || !(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("tv_bound_rhs: invalid arguments");
    const int k = count_pieces(u);
    const auto spacing = min_jump_spacing(u);
    const double gap = spacing ? static_cast<double>(*spacing) : static_cast<double>(n);
    const double rn =
        3.0 + 256.0 * (std::log(static_cast<double>(n)) + static_cast<double>(n) / gap);
    return 4.0 * sigma * sigma * static_cast<double>(k) *
           std::log(static_cast<double>(n) / delta) / static_cast<double>(n) * rn;
}

}  // namespace shapeagg
