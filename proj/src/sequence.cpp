#include "shapeagg/sequence.hpp"

#include <algorithm>

namespace shapeagg {

Sequence::Sequence(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty())
        throw std::invalid_argument("Sequence: length must be >= 1");
    for (double v : values_)
        if (!std::isfinite(v))
            throw std::invalid_argument("Sequence: all entries must be finite");
}

ShapeClass ShapeClass::monotone_bounded(double v) {
    if (!(v > 0.0))
        throw std::invalid_argument("ShapeClass: V must be positive");
    return {Kind::MonotoneBoundedV, v, 0};
}

ShapeClass ShapeClass::monotone_k_pieces(int k) {
    if (k < 1)
        throw std::invalid_argument("ShapeClass: k must be positive");
    return {Kind::MonotoneKPieces, 0.0, k};
}

ShapeClass ShapeClass::convex_q_pieces(int q) {
    if (q < 1)
        throw std::invalid_argument("ShapeClass: q must be positive");
    return {Kind::ConvexQPieces, 0.0, q};
}

std::string ShapeClass::describe() const {
    switch (kind) {
        case Kind::Monotone: return "monotone";
        case Kind::MonotoneBoundedV: return "monotone_V(" + std::to_string(v_bound) + ")";
        case Kind::MonotoneKPieces: return "monotone_k(" + std::to_string(max_pieces) + ")";
        case Kind::Convex: return "convex";
        case Kind::ConvexQPieces: return "convex_q(" + std::to_string(max_pieces) + ")";
    }
    return "?";
}

namespace detail {

double scaled_norm_sq(const std::vector<double>& u) {
    double s = 0.0;
    for (double v : u) s += v * v;
    return s / static_cast<double>(u.size());
}

double scaled_inner(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s / static_cast<double>(a.size());
}

bool is_monotone(const std::vector<double>& u) {
    for (std::size_t i = 0; i + 1 < u.size(); ++i)
        if (u[i] > u[i + 1]) return false;
    return true;
}

bool is_convex(const std::vector<double>& u) {
    for (std::size_t i = 1; i + 1 < u.size(); ++i)
        if (2.0 * u[i] > u[i - 1] + u[i + 1]) return false;
    return true;
}

}  // namespace detail

double scaled_norm_sq(const Sequence& u) { return detail::scaled_norm_sq(u.values()); }

double scaled_inner(const Sequence& a, const Sequence& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("scaled_inner: length mismatch");
    return detail::scaled_inner(a.values(), b.values());
}

int count_pieces(const Sequence& u) {
    int jumps = 0;
    for (std::size_t i = 0; i + 1 < u.size(); ++i)
        if (u[i] != u[i + 1]) ++jumps;
    return 1 + jumps;
}

int count_pieces_tol(const Sequence& u, double tol) {
    int jumps = 0;
    for (std::size_t i = 0; i + 1 < u.size(); ++i)
        if (std::abs(u[i] - u[i + 1]) > tol) ++jumps;
    return 1 + jumps;
}

int count_knots(const Sequence& u) {
    if (u.size() < 3)
        throw std::invalid_argument("count_knots: requires length >= 3");
    int knots = 0;
    for (std::size_t i = 1; i + 1 < u.size(); ++i)
        if (2.0 * u[i] != u[i - 1] + u[i + 1]) ++knots;
    return 1 + knots;
}

int count_knots_tol(const Sequence& u, double tol) {
    if (u.size() < 3)
        throw std::invalid_argument("count_knots_tol: requires length >= 3");
    int knots = 0;
    for (std::size_t i = 1; i + 1 < u.size(); ++i)
        if (std::abs(2.0 * u[i] - u[i - 1] - u[i + 1]) > tol) ++knots;
    return 1 + knots;
}

double total_variation(const Sequence& u) { return u[u.size() - 1] - u[0]; }

bool is_member(const Sequence& u, const ShapeClass& c) {
    using Kind = ShapeClass::Kind;
    switch (c.kind) {
        case Kind::Monotone:
            return detail::is_monotone(u.values());
        case Kind::MonotoneBoundedV:
            return detail::is_monotone(u.values()) && total_variation(u) <= c.v_bound;
        case Kind::MonotoneKPieces:
            if (c.max_pieces > static_cast<int>(u.size()))
                throw std::invalid_argument("is_member: k exceeds sequence length");
            return detail::is_monotone(u.values()) && count_pieces(u) <= c.max_pieces;
        case Kind::Convex:
            return detail::is_convex(u.values());
        case Kind::ConvexQPieces:
            if (c.max_pieces > static_cast<int>(u.size()))
                throw std::invalid_argument("is_member: q exceeds sequence length");
            return detail::is_convex(u.values()) &&
                   (u.size() < 3 || count_knots(u) <= c.max_pieces);
    }
    return false;
}

Sequence to_increments(const Sequence& u) {
    std::vector<double> b(u.size());
    b[0] = u[0];
    for (std::size_t i = 1; i < u.size(); ++i) b[i] = u[i] - u[i - 1];
    return Sequence(std::move(b));
}

Sequence from_increments(const Sequence& b) {
    std::vector<double> u(b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        acc += b[i];
        u[i] = acc;
    }
    return Sequence(std::move(u));
}

}  // namespace shapeagg
