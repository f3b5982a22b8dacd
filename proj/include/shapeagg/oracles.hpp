#pragma once

#include <utility>
#include <vector>

#include "shapeagg/pattern.hpp"
#include "shapeagg/sequence.hpp"

namespace shapeagg {

/// Dynamic program for optimal piecewise-constant approximation: cost[k][i]
/// is the best sum of squared errors over the prefix of length i+1 using k+1
/// segments, with backpointers for recovering the minimizer. O(n^2 max_k).
class SegmentationTable {
  public:
    SegmentationTable(const Sequence& mu, int max_k);

    std::size_t n() const { return n_; }
    int max_k() const { return max_k_; }

    /// Unscaled optimal SSE for the whole sequence with at most k pieces.
    double best_sse(int k) const;
    /// The minimizing piecewise-constant sequence with at most k pieces.
    std::vector<double> minimizer(int k) const;

  private:
    double segment_sse(std::size_t a, std::size_t b) const;  // [a, b] inclusive

    std::size_t n_;
    int max_k_;
    std::vector<double> prefix_, prefix_sq_;
    std::vector<double> cost_;  // (max_k) x n
    std::vector<int> back_;
};

/// Global minimizer of scaled_norm_sq(mu - u) over sequences with at most k
/// constant pieces, and its value.
std::pair<Sequence, double> best_segmentation(const Sequence& mu, int k);

/// Constants of an oracle-inequality right-hand side
///   min_u [ leading * approx_err(u) + penalty * sigma^2 k(u)/n * log(en/k(u))^exponent ].
struct BoundSpec {
    double leading_constant = 1.0;
    double penalty_constant = 1.0;
    double penalty_exponent = 1.0;
    enum class Family { Monotone, Convex } family = Family::Monotone;

    static BoundSpec monotone(double leading, double penalty, double exponent = 1.0) {
        return {leading, penalty, exponent, Family::Monotone};
    }
    static BoundSpec convex(double leading, double penalty, double exponent = 1.0) {
        return {leading, penalty, exponent, Family::Convex};
    }
};

/// Per-complexity values of an oracle RHS and its minimum.
struct OracleCurve {
    std::vector<double> value_at;  // value_at[k-1] for k = 1..k_max
    int argmin = 1;
    double min_value = 0.0;
};

/// RHS over piecewise-constant approximants. With restrict_monotone the
/// candidate sequences are block means of the isotonic regression of mu
/// (exact for monotone mu); approximation error is always measured to mu.
OracleCurve oracle_curve_monotone(const Sequence& mu, double sigma, const BoundSpec& spec,
                                  bool restrict_monotone = false, int k_max = 0);
double oracle_rhs_monotone(const Sequence& mu, double sigma, const BoundSpec& spec,
                           bool restrict_monotone = false);

enum class ConvexOracleSearch { Exhaustive, Greedy };

/// RHS over piecewise-linear approximants, indexed by q = |J|+1. Exhaustive
/// enumerates all knot sets (n <= 18); Greedy adds knots by largest error
/// reduction and upper-bounds the true oracle.
OracleCurve oracle_curve_convex(const Sequence& mu, double sigma, const BoundSpec& spec,
                                ConvexOracleSearch search, int max_knots = 0);
double oracle_rhs_convex(const Sequence& mu, double sigma, const BoundSpec& spec,
                         ConvexOracleSearch search, int max_knots = 0);

/// The quantized staircase approximation of a monotone sequence: at most k
/// levels spaced V/k apart; sup error <= V/(2k).
Sequence staircase_approx(const Sequence& mu, int k);

/// Smallest integer m with m^3 >= V^2 n / (sigma^2 log(en)), at least 1.
int k_star(double v, double sigma, std::size_t n);

/// The two envelopes
///   ( (1/4) max((sigma^2 V log(en)/n)^{2/3}, sigma^2 log(en)/n),
///     2     max( same arguments ) ).
std::pair<double, double> lemma_bound_eval(double v, double sigma, std::size_t n);

/// Penalty part of the universal-lambda TV bound:
///   4 sigma^2 k(u) log(n/delta)/n * r_n(u),
///   r_n(u) = 3 + 256 (log n + n/Delta(u)),
/// with Delta(u) := n when u has fewer than two jumps.
double tv_bound_rhs(const Sequence& u, double sigma, double delta);

}  // namespace shapeagg
