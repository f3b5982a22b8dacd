#pragma once

#include <cstddef>
#include <vector>

#include "shapeagg/sequence.hpp"

namespace shapeagg {

/// A sorted set of 1-based interior indices. Jump sets for piecewise-constant
/// subspaces live on {1,...,n-1} (index i marks a jump between positions i
/// and i+1); knot sets for piecewise-linear subspaces live on {2,...,n-1}.
struct Pattern {
    std::vector<int> indices;  // strictly increasing, 1-based
    int domain_lo = 1;
    int domain_hi = 0;

    Pattern(std::vector<int> idx, int lo, int hi);

    static Pattern jumps(std::vector<int> idx, std::size_t n);
    static Pattern knots(std::vector<int> idx, std::size_t n);
    static Pattern empty_jumps(std::size_t n) { return jumps({}, n); }
    static Pattern empty_knots(std::size_t n) { return knots({}, n); }

    int size() const { return static_cast<int>(indices.size()); }

    bool operator==(const Pattern& other) const {
        return indices == other.indices && domain_lo == other.domain_lo &&
               domain_hi == other.domain_hi;
    }
};

}  // namespace shapeagg
