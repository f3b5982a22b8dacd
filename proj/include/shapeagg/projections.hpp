#pragma once

#include <memory>
#include <vector>

#include "shapeagg/pattern.hpp"
#include "shapeagg/sequence.hpp"

namespace shapeagg {

/// Orthogonal projection onto the subspace of sequences that are constant
/// between consecutive jump indices: within each block the result equals the
/// block mean. O(n), no matrix is formed.
Sequence project_piecewise_constant(const Sequence& y, const Pattern& jumps);

/// Orthonormal basis of the subspace of piecewise-linear sequences with slope
/// changes allowed only at the given knots. Columns span {1, ramp, hinges};
/// built once per pattern and reused across projections.
class HingeBasis {
  public:
    HingeBasis(std::size_t n, const std::vector<int>& knots);

    std::size_t n() const { return n_; }
    std::size_t dim() const { return d_; }

    /// coefs[k] = <q_k, y> (euclidean).
    void coefficients(const double* y, double* coefs) const;
    /// out = sum_k coefs[k] q_k.
    void reconstruct(const double* coefs, double* out) const;
    /// Projection of y onto the subspace.
    std::vector<double> project(const std::vector<double>& y) const;

  private:
    std::size_t n_, d_;
    std::vector<double> q_;  // column-major n x d, orthonormal
};

/// Process-wide cache of hinge bases keyed by (n, knots). Safe for concurrent
/// lookup; inserts are serialized.
std::shared_ptr<const HingeBasis> hinge_basis_cached(std::size_t n,
                                                     const std::vector<int>& knots);

/// Least-squares projection onto the piecewise-linear subspace with the given
/// knot set.
Sequence project_piecewise_linear(const Sequence& y, const Pattern& knots);

/// log C(n, k) via lgamma; exact enough for n in the thousands.
double log_choose(int n, int k);

/// Log prior weight over jump sets of {1,...,n-1}:
///   log pi_J = -|J| - log H - log C(n-1, |J|),  H = sum_{i<n} e^{-i}.
/// Depends on the pattern only through its cardinality.
double log_prior_monotone(int pattern_size, std::size_t n);
double prior_weight_monotone(const Pattern& jumps, std::size_t n);

/// Same weights over knot sets of {2,...,n-1} with normalizer over n-2 slots.
double log_prior_convex(int pattern_size, std::size_t n);
double prior_weight_convex(const Pattern& knots, std::size_t n);

/// Sanity bound on the monotone prior:
///   log(1/pi_J) <= 2(|J|+1) log(en/(|J|+1)) + 1/2.
bool log_prior_bound_check(const Pattern& jumps, std::size_t n);

}  // namespace shapeagg
