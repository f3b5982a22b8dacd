#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace shapeagg {

/// Thrown when an iterative solver exhausts its budget before reaching the
/// requested tolerance. Carries the best residual seen.
struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& what, double residual_, long iterations_)
        : std::runtime_error(what), residual(residual_), iterations(iterations_) {}
    double residual;
    long iterations;
};

/// Thrown when an exhaustive enumeration would exceed the desk-scale budget.
struct CapacityError : std::runtime_error {
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

/// A fixed-length vector of finite signal values. Immutable after
/// construction so downstream code can rely on length and finiteness.
class Sequence {
  public:
    explicit Sequence(std::vector<double> values);

    static Sequence zeros(std::size_t n) { return Sequence(std::vector<double>(n, 0.0)); }
    static Sequence constant(std::size_t n, double c) { return Sequence(std::vector<double>(n, c)); }

    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    const std::vector<double>& values() const { return values_; }
    const double* data() const { return values_.data(); }

    bool operator==(const Sequence& other) const { return values_ == other.values_; }

  private:
    std::vector<double> values_;
};

/// Shape classes of sequences: monotone non-decreasing, monotone with bounded
/// total variation, monotone with at most k constant pieces, convex, and
/// convex with at most q linear pieces.
struct ShapeClass {
    enum class Kind { Monotone, MonotoneBoundedV, MonotoneKPieces, Convex, ConvexQPieces };
    Kind kind = Kind::Monotone;
    double v_bound = 0.0;
    int max_pieces = 0;

    static ShapeClass monotone() { return {Kind::Monotone, 0.0, 0}; }
    static ShapeClass monotone_bounded(double v);
    static ShapeClass monotone_k_pieces(int k);
    static ShapeClass convex() { return {Kind::Convex, 0.0, 0}; }
    static ShapeClass convex_q_pieces(int q);

    std::string describe() const;
};

/// (1/n) sum of squares.
double scaled_norm_sq(const Sequence& u);
/// (1/n) inner product; lengths must agree.
double scaled_inner(const Sequence& a, const Sequence& b);

/// Number of constant pieces: 1 + #{i : u_i != u_{i+1}}, exact comparison.
int count_pieces(const Sequence& u);
/// Tolerance-based variant for analyzing solver output, which is never
/// exactly piecewise constant.
int count_pieces_tol(const Sequence& u, double tol);

/// Number of linear pieces: 1 + #{interior i : 2 u_i != u_{i-1} + u_{i+1}},
/// exact comparison. Requires n >= 3.
int count_knots(const Sequence& u);
int count_knots_tol(const Sequence& u, double tol);

/// u_n - u_1. Defined for any sequence; equals the total variation when u is
/// monotone. Callers gate on is_member when monotonicity matters.
double total_variation(const Sequence& u);

bool is_member(const Sequence& u, const ShapeClass& c);

/// First-difference reparameterization: b_1 = u_1, b_i = u_i - u_{i-1}.
Sequence to_increments(const Sequence& u);
/// Cumulative sum; inverse of to_increments.
Sequence from_increments(const Sequence& b);

namespace detail {

// Raw-vector versions for hot paths that assemble results before wrapping.
double scaled_norm_sq(const std::vector<double>& u);
double scaled_inner(const std::vector<double>& a, const std::vector<double>& b);
bool is_monotone(const std::vector<double>& u);
bool is_convex(const std::vector<double>& u);

}  // namespace detail

}  // namespace shapeagg
