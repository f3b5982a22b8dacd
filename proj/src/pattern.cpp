#include "shapeagg/pattern.hpp"

namespace shapeagg {

Pattern::Pattern(std::vector<int> idx, int lo, int hi)
    : indices(std::move(idx)), domain_lo(lo), domain_hi(hi) {
    int prev = lo - 1;
    for (int i : indices) {
        if (i < domain_lo || i > domain_hi)
            throw std::invalid_argument("Pattern: index outside domain");
        if (i <= prev)
            throw std::invalid_argument("Pattern: indices must be strictly increasing");
        prev = i;
    }
}

Pattern Pattern::jumps(std::vector<int> idx, std::size_t n) {
    if (n < 1) throw std::invalid_argument("Pattern::jumps: n must be >= 1");
    return Pattern(std::move(idx), 1, static_cast<int>(n) - 1);
}

Pattern Pattern::knots(std::vector<int> idx, std::size_t n) {
    if (n < 3) throw std::invalid_argument("Pattern::knots: n must be >= 3");
    return Pattern(std::move(idx), 2, static_cast<int>(n) - 1);
}

}  // namespace shapeagg
