#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "shapeagg/pattern.hpp"
#include "shapeagg/projections.hpp"
#include "shapeagg/sequence.hpp"

namespace shapeagg {

enum class PatternFamily { Monotone, Convex };

struct DictionaryMode {
    enum class Kind { Exhaustive, MaxCardinality, Sampled };
    Kind kind = Kind::Exhaustive;
    int max_card = 0;
    std::size_t sample_count = 0;
    std::uint64_t seed = 0;

    static DictionaryMode exhaustive() { return {}; }
    static DictionaryMode max_cardinality(int m);
    static DictionaryMode sampled(std::size_t count, std::uint64_t seed);
};

/// A family of sparsity patterns with closed-form prior weights. Patterns are
/// stored in canonical order (by cardinality, then lexicographic). Priors are
/// never renormalized in restricted modes: log(1/pi_J) is the penalty the
/// aggregation program uses, and renormalizing over a subfamily would change
/// the constants silently.
///
/// Monotone MaxCardinality families too large to enumerate are kept implicit;
/// the solver reaches them through an exact segmentation oracle instead of a
/// stored list.
class Dictionary {
  public:
    static Dictionary build(PatternFamily family, std::size_t n, DictionaryMode mode);

    PatternFamily family() const { return family_; }
    std::size_t n() const { return n_; }
    const DictionaryMode& mode() const { return mode_; }

    bool enumerated() const { return enumerated_; }
    /// Number of stored patterns; requires enumerated().
    std::size_t size() const;
    /// Number of patterns in the (possibly implicit) family, as a double.
    double conceptual_size() const { return conceptual_size_; }
    /// Largest |J| present in the family.
    int max_pattern_cardinality() const { return max_card_; }

    std::vector<int> pattern_indices(std::size_t i) const;
    Pattern pattern(std::size_t i) const;
    int pattern_cardinality(std::size_t i) const;
    double log_prior(std::size_t i) const;
    double log_prior_for_cardinality(int j) const;
    std::optional<std::size_t> index_of(const std::vector<int>& indices) const;

    /// Orthonormal hinge bases for convex patterns, flattened; present when
    /// the eager-cache budget allows.
    bool bases_cached() const { return !bases_flat_.empty(); }
    const double* basis_data(std::size_t i) const { return &bases_flat_[basis_offsets_[i]]; }
    /// Releases the eager basis cache; projections then rebuild bases on the
    /// fly. Exposed for memory control and to exercise that path in tests.
    void drop_bases() {
        bases_flat_.clear();
        bases_flat_.shrink_to_fit();
        basis_offsets_.clear();
    }

    int domain_lo() const { return family_ == PatternFamily::Monotone ? 1 : 2; }
    int domain_size() const {
        return static_cast<int>(n_) - (family_ == PatternFamily::Monotone ? 1 : 2);
    }

    /// Raw CSR storage for scan kernels.
    const std::uint64_t* offsets_data() const { return offsets_.data(); }
    const std::int32_t* flat_data() const { return flat_.data(); }

  private:
    Dictionary() = default;
    void enumerate_patterns();
    void sample_patterns();
    void build_bases();

    PatternFamily family_ = PatternFamily::Monotone;
    std::size_t n_ = 0;
    DictionaryMode mode_;
    bool enumerated_ = true;
    double conceptual_size_ = 0.0;
    int max_card_ = 0;

    std::vector<std::uint64_t> offsets_;  // CSR offsets into flat_
    std::vector<std::int32_t> flat_;      // concatenated 1-based indices
    std::vector<double> log_prior_by_card_;

    std::vector<double> bases_flat_;
    std::vector<std::uint64_t> basis_offsets_;
};

/// Sparse nonnegative weights over a dictionary's patterns, summing to 1.
struct SimplexWeights {
    std::vector<std::pair<std::size_t, double>> entries;  // (dict index, weight)

    double sum() const {
        double s = 0.0;
        for (const auto& e : entries) s += e.second;
        return s;
    }
};

struct QAggConfig {
    double tol = 1e-8;
    long max_iter = 100000;
    double q_constant = 46.0;  // penalty multiplier of the aggregation program
    bool force_scan_lmo = false;  // test hook: bypass the segmentation oracle
    std::function<void(long iter, double objective, double gap)> trace;  // per-iteration hook
};

struct QAggSolution {
    std::vector<Pattern> patterns;              // active patterns, weight > 0
    std::vector<double> weights;                // aligned with patterns; sums to 1
    std::vector<std::ptrdiff_t> dict_positions; // aligned; -1 when not enumerated
    Sequence estimate;
    double objective_value = 0.0;
    double dual_gap = 0.0;
    long iterations = 0;

    /// Weights keyed by dictionary index; requires all positions known.
    SimplexWeights simplex_weights() const;
};

struct QAggConvergenceError : ConvergenceError {
    QAggConvergenceError(const std::string& what, QAggSolution best, double gap, long iters)
        : ConvergenceError(what, gap, iters), partial(std::move(best)) {}
    QAggSolution partial;
};

/// Value of the aggregation objective at the given simplex weights:
///   |mu_theta - y|^2 + sum_J theta_J ( 2 sigma^2 |J|/n
///       + (1/2)|mu_theta - g_J|^2 + (qc sigma^2/n) log(1/pi_J) ),
/// all norms scaled by 1/n.
double qagg_objective(const SimplexWeights& theta, const Sequence& y, double sigma,
                      const Dictionary& dict, double q_constant = 46.0);

/// Objective at the vertex e_J for dictionary entry i.
double qagg_vertex_objective(std::size_t i, const Sequence& y, double sigma,
                             const Dictionary& dict, double q_constant = 46.0);

/// Minimize the aggregation objective over the simplex by away-step
/// Frank-Wolfe with exact line search, starting from the best vertex. The
/// returned weights satisfy the reported duality gap <= cfg.tol.
QAggSolution solve_qagg(const Sequence& y, double sigma, const Dictionary& dict,
                        const QAggConfig& cfg = {});

/// Convenience wrappers over the exhaustive dictionaries.
QAggSolution qagg_estimate_monotone(const Sequence& y, double sigma, double tol = 1e-8);
QAggSolution qagg_estimate_convex(const Sequence& y, double sigma, double tol = 1e-8);

namespace detail {

/// Linear-minimization pass over an enumerated dictionary: finds the pattern
/// minimizing
///   [ beta <g_J, mu> + alpha <g_J, g_J> ] (scaled) + c(|J|).
/// mu may be null when beta is 0. Serial reference and OpenMP versions keep
/// bit-identical results: per-pattern scores are computed independently and
/// merged by (value, index) with the smaller index winning ties.
struct ScanResult {
    double value;
    std::size_t index;
};
ScanResult scan_dictionary_serial(const Dictionary& dict, const std::vector<double>& y,
                                  const double* mu, double alpha, double beta,
                                  const std::vector<double>& cost_by_card);
ScanResult scan_dictionary_parallel(const Dictionary& dict, const std::vector<double>& y,
                                    const double* mu, double alpha, double beta,
                                    const std::vector<double>& cost_by_card);

/// Exact minimizer of the same score over all jump patterns with |J| <= m,
/// via dynamic programming on segment boundaries. O(n^2 m).
struct SegmentLmoResult {
    double value;
    std::vector<int> jumps;  // 1-based
};
SegmentLmoResult segment_lmo(const std::vector<double>& y, const double* mu, double alpha,
                             double beta, int max_cardinality,
                             const std::vector<double>& cost_by_card);

}  // namespace detail

}  // namespace shapeagg
